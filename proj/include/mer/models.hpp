#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mer/annotations.hpp"
#include "mer/circumplex.hpp"
#include "mer/matrix.hpp"
#include "mer/nn.hpp"
#include "mer/rng.hpp"

namespace mer {

enum class Task { Emotion, NextPoint };

std::string to_string(Task task);

struct TrainConfig {
    Task task = Task::Emotion;
    double learning_rate = 5e-5;
    std::size_t feature_size = 128;
    std::size_t hidden_size = 20;
    std::size_t n_modules = 2;
    std::size_t layers_per_module = 2;
    double dropout_p = 0.1;
    std::size_t max_epochs = 200;
    std::size_t batch_size = 0;  // 0 = one batch per song
    std::size_t early_stop_patience = 10;
    double early_stop_min_delta = 1e-5;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;  // feature augmentation, Emotion task only
    bool clip_gradients = false;
    double clip_threshold = 5.0;

    void validate() const;
};

struct EpochLoss {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainReport {
    std::vector<EpochLoss> curve;
    std::size_t stopped_epoch = 0;  // epochs actually run
    std::size_t best_epoch = 0;     // epoch whose parameters were kept
    double final_train_mse = 0.0;
    double final_val_mse = 0.0;
    double final_train_rmse = 0.0;
    double final_val_rmse = 0.0;
    double wall_seconds = 0.0;
};

/// Ten consecutive trajectory points and the point that follows them.
struct Window {
    Matrix inputs;  // 2 x 10: row 0 valence, row 1 arousal
    EmotionPoint target;
};

struct SongWindows {
    std::string song_id;
    std::vector<Window> windows;
};

/// Table 1 configuration: clip features to emotion.
void build_task1_default(LstmStack& stack, DenseHead& head, TrainConfig& config);

/// Table 2 configuration: ten-point trajectory to the next point.
void build_task2_default(LstmStack& stack, DenseHead& head, TrainConfig& config);

/// Stack and head sized from a config; parameters zero until init_network.
void build_network(const TrainConfig& config, LstmStack& stack, DenseHead& head);

/// Stride-1 sliding windows: points [i, i+length) predict point i+length.
/// Tracks shorter than length+1 yield an empty list.
std::vector<Window> make_windows(const AnnotationTrack& track, std::size_t length = 10);

std::vector<SongWindows> make_song_windows(const std::vector<AnnotationTrack>& tracks,
                                           std::size_t length = 10);

/// One batch per song: sorted train ids in seeded-shuffled order.
std::vector<std::string> make_task1_batches(const SongDataset& data, Rng& rng);

/// Seeded shuffle of [0, n) chopped into batches of batch_size; the last
/// batch may be short. Every index appears exactly once.
std::vector<std::vector<std::size_t>> make_task2_batches(std::size_t n_windows,
                                                         std::size_t batch_size, Rng& rng);

/// Task 1 training loop. Per-song batches, fresh feature noise each epoch,
/// early stop on validation MSE, best-epoch parameters restored on return.
/// Throws Diverged when a loss turns non-finite.
TrainReport train_emotion(LstmStack& stack, DenseHead& head, const SongDataset& data,
                          const TrainConfig& config);

/// Task 2 training loop over precomputed windows; shuffled fixed-size
/// batches, otherwise as train_emotion.
TrainReport train_next(LstmStack& stack, DenseHead& head,
                       const std::vector<Window>& train_windows,
                       const std::vector<Window>& val_windows, const TrainConfig& config);

struct SongScore {
    std::string song_id;
    std::size_t n_items = 0;
    double mse = 0.0;
    double rmse = 0.0;
};

struct EvalReport {
    std::size_t n_items = 0;
    double mse = 0.0;
    double rmse = 0.0;
    std::vector<SongScore> per_song;
};

/// Eval-mode forward over the given song ids (no noise, no dropout).
EvalReport evaluate_emotion(const LstmStack& stack, const DenseHead& head,
                            const SongDataset& data, const std::vector<std::string>& ids);

EvalReport evaluate_windows(const LstmStack& stack, const DenseHead& head,
                            const std::vector<SongWindows>& songs);

/// Head output for one clip's features, clamped to the circumplex square.
EmotionPoint predict_emotion(const LstmStack& stack, const DenseHead& head, const Matrix& mel);

/// Head output for a 2 x 10 trajectory window, clamped.
EmotionPoint predict_next(const LstmStack& stack, const DenseHead& head, const Matrix& window);

/// Loss curve as `epoch,train_mse,val_mse` with full-precision reals.
void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& curve);
std::vector<EpochLoss> read_loss_csv(const std::string& path);

/// Metrics table `song_id,n_items,mse,rmse` (4 decimals) with a final ALL row.
std::string format_eval_csv(const EvalReport& report);
std::string format_eval_summary(const EvalReport& report);

}  // namespace mer
