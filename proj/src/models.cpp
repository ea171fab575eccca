#include "mer/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mer/csv.hpp"
#include "mer/dsp.hpp"
#include "mer/error.hpp"

namespace mer {

namespace {

struct BestTracker {
    std::size_t patience;
    double min_delta;
    double best_val = 0.0;
    std::size_t best_epoch = 0;
    std::size_t bad_epochs = 0;

    // true when this epoch becomes the new best (caller snapshots parameters)
    bool observe(std::size_t epoch, double val) {
        if (best_epoch == 0 || best_val - val >= min_delta) {
            best_val = val;
            best_epoch = epoch;
            bad_epochs = 0;
            return true;
        }
        bad_epochs += 1;
        return false;
    }

    bool exhausted() const { return bad_epochs >= patience; }
};

struct Snapshot {
    std::vector<LstmLayerParams> layers;
    DenseHead head;

    void capture(const LstmStack& stack, const DenseHead& h) {
        layers = stack.layers;
        head = h;
    }
    void restore(LstmStack& stack, DenseHead& h) const {
        stack.layers = layers;
        h = head;
    }
};

[[noreturn]] void throw_diverged(std::size_t epoch) {
    throw Diverged(static_cast<int>(epoch),
                   "loss became non-finite at epoch " + std::to_string(epoch));
}

void maybe_clip(NetworkGrads& grads, const TrainConfig& config) {
    if (!config.clip_gradients) return;
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > config.clip_threshold) grads.scale(config.clip_threshold / norm);
}

double item_mse(const LstmStack& stack, const DenseHead& head, const Matrix& input,
                const EmotionPoint& target, Rng& rng) {
    const auto pred = stack_forward(input, stack, head, RunMode::Eval, rng);
    const double t[2] = {target.valence, target.arousal};
    return mse(pred, std::span<const double>(t, 2));
}

double windows_mse(const LstmStack& stack, const DenseHead& head,
                   const std::vector<Window>& windows) {
    Rng rng(0);  // eval mode draws nothing
    double acc = 0.0;
    for (const auto& w : windows) acc += item_mse(stack, head, w.inputs, w.target, rng);
    return acc / static_cast<double>(windows.size());
}

void finalize_report(TrainReport& report, const BestTracker& tracker) {
    report.stopped_epoch = report.curve.size();
    report.best_epoch = tracker.best_epoch;
    const EpochLoss& best = report.curve[tracker.best_epoch - 1];
    report.final_train_mse = best.train_mse;
    report.final_val_mse = best.val_mse;
    report.final_train_rmse = std::sqrt(best.train_mse);
    report.final_val_rmse = std::sqrt(best.val_mse);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string to_string(Task task) {
    return task == Task::Emotion ? "emotion" : "next";
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw UsageError("learning_rate must be positive");
    }
    if (feature_size < 1 || hidden_size < 1 || n_modules < 1 || layers_per_module < 1) {
        throw UsageError("network sizes must be >= 1");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw UsageError("dropout_p must be in [0, 1)");
    }
    if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
    if (early_stop_patience < 1) throw UsageError("early_stop_patience must be >= 1");
    if (early_stop_min_delta < 0.0 || !std::isfinite(early_stop_min_delta)) {
        throw UsageError("early_stop_min_delta must be >= 0");
    }
    if (noise_sigma < 0.0 || !std::isfinite(noise_sigma)) {
        throw UsageError("noise_sigma must be >= 0");
    }
    if (clip_gradients && !(clip_threshold > 0.0)) {
        throw UsageError("clip_threshold must be positive when clipping is on");
    }
}

void build_task1_default(LstmStack& stack, DenseHead& head, TrainConfig& config) {
    config = TrainConfig{};
    config.task = Task::Emotion;
    config.learning_rate = 5e-5;
    config.feature_size = 128;
    config.hidden_size = 20;
    config.n_modules = 2;
    config.layers_per_module = 2;
    config.dropout_p = 0.1;
    config.max_epochs = 200;
    config.batch_size = 0;  // per-song
    build_network(config, stack, head);
}

void build_task2_default(LstmStack& stack, DenseHead& head, TrainConfig& config) {
    config = TrainConfig{};
    config.task = Task::NextPoint;
    config.learning_rate = 1e-4;
    config.feature_size = 2;
    config.hidden_size = 32;
    config.n_modules = 1;
    config.layers_per_module = 2;
    config.dropout_p = 0.0;
    config.max_epochs = 10;
    config.batch_size = 64;
    build_network(config, stack, head);
}

void build_network(const TrainConfig& config, LstmStack& stack, DenseHead& head) {
    config.validate();
    stack = make_stack(config.feature_size, config.hidden_size, config.n_modules,
                       config.layers_per_module, config.dropout_p);
    head = DenseHead::zeros(config.hidden_size);
}

std::vector<Window> make_windows(const AnnotationTrack& track, std::size_t length) {
    if (length < 1) throw UsageError("window length must be >= 1");
    std::vector<Window> windows;
    if (track.points.size() < length + 1) return windows;
    const std::size_t count = track.points.size() - length;
    windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Window w;
        w.inputs = Matrix(2, length);
        for (std::size_t j = 0; j < length; ++j) {
            w.inputs(0, j) = track.points[i + j].valence;
            w.inputs(1, j) = track.points[i + j].arousal;
        }
        w.target = track.points[i + length];
        windows.push_back(std::move(w));
    }
    return windows;
}

std::vector<SongWindows> make_song_windows(const std::vector<AnnotationTrack>& tracks,
                                           std::size_t length) {
    std::vector<SongWindows> out;
    out.reserve(tracks.size());
    for (const auto& track : tracks) {
        out.push_back({track.song_id, make_windows(track, length)});
    }
    return out;
}

std::vector<std::string> make_task1_batches(const SongDataset& data, Rng& rng) {
    std::vector<std::string> ids;
    for (const auto& id : data.train_ids) {
        auto it = data.songs.find(id);
        if (it == data.songs.end()) {
            throw UsageError("train id not in dataset: " + id);
        }
        if (!it->second.empty()) ids.push_back(id);
    }
    rng.shuffle(ids);
    return ids;
}

std::vector<std::vector<std::size_t>> make_task2_batches(std::size_t n_windows,
                                                         std::size_t batch_size, Rng& rng) {
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    std::vector<std::size_t> order(n_windows);
    for (std::size_t i = 0; i < n_windows; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n_windows; start += batch_size) {
        const std::size_t end = std::min(start + batch_size, n_windows);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

TrainReport train_emotion(LstmStack& stack, DenseHead& head, const SongDataset& data,
                          const TrainConfig& config) {
    config.validate();
    if (data.train_ids.empty()) throw UsageError("empty training split");
    if (data.validation_ids.empty()) throw UsageError("empty validation split");

    const auto start = std::chrono::steady_clock::now();
    Rng rng(config.seed);
    AdamState adam = AdamState::init(param_count(stack, head), config.learning_rate);
    BestTracker tracker{config.early_stop_patience, config.early_stop_min_delta};
    Snapshot best;
    best.capture(stack, head);
    const std::vector<std::string> val_ids(data.validation_ids.begin(),
                                           data.validation_ids.end());

    TrainReport report;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto batch_ids = make_task1_batches(data, rng);
        if (batch_ids.empty()) throw UsageError("training set has no clips");

        double loss_sum = 0.0;
        std::size_t n_items = 0;
        for (const auto& song_id : batch_ids) {
            const auto& clips = data.songs.at(song_id);
            NetworkGrads grads = NetworkGrads::zeros_like(stack, head);
            double batch_loss = 0.0;
            for (const auto& clip : clips) {
                MelSpectrogram input = clip.features;
                if (config.noise_sigma > 0.0) {
                    input = add_gaussian_noise(clip.features, config.noise_sigma, rng);
                }
                ForwardCache cache;
                const auto pred =
                    stack_forward(input.values, stack, head, RunMode::Train, rng, &cache);
                const double target[2] = {clip.target.valence, clip.target.arousal};
                const double loss = mse(pred, std::span<const double>(target, 2));
                if (!std::isfinite(loss)) throw_diverged(epoch);
                batch_loss += loss;
                grads.accumulate(backward(stack, head, cache, std::span<const double>(target, 2)));
            }
            grads.scale(1.0 / static_cast<double>(clips.size()));
            maybe_clip(grads, config);
            adam_step(param_views(stack, head), grad_views(grads), adam);
            loss_sum += batch_loss;
            n_items += clips.size();
        }

        const double train_mse = loss_sum / static_cast<double>(n_items);
        const double val_mse = evaluate_emotion(stack, head, data, val_ids).mse;
        if (!std::isfinite(val_mse)) throw_diverged(epoch);
        report.curve.push_back({epoch, train_mse, val_mse});

        if (tracker.observe(epoch, val_mse)) best.capture(stack, head);
        if (tracker.exhausted()) break;
    }

    best.restore(stack, head);
    finalize_report(report, tracker);
    report.wall_seconds = seconds_since(start);
    return report;
}

TrainReport train_next(LstmStack& stack, DenseHead& head,
                       const std::vector<Window>& train_windows,
                       const std::vector<Window>& val_windows, const TrainConfig& config) {
    config.validate();
    if (config.batch_size < 1) throw UsageError("batch_size must be >= 1 for window training");
    if (train_windows.empty()) throw UsageError("empty training split");
    if (val_windows.empty()) throw UsageError("empty validation split");

    const auto start = std::chrono::steady_clock::now();
    Rng rng(config.seed);
    AdamState adam = AdamState::init(param_count(stack, head), config.learning_rate);
    BestTracker tracker{config.early_stop_patience, config.early_stop_min_delta};
    Snapshot best;
    best.capture(stack, head);

    TrainReport report;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto batches = make_task2_batches(train_windows.size(), config.batch_size, rng);

        double loss_sum = 0.0;
        for (const auto& batch : batches) {
            NetworkGrads grads = NetworkGrads::zeros_like(stack, head);
            double batch_loss = 0.0;
            for (const std::size_t idx : batch) {
                const Window& w = train_windows[idx];
                ForwardCache cache;
                const auto pred =
                    stack_forward(w.inputs, stack, head, RunMode::Train, rng, &cache);
                const double target[2] = {w.target.valence, w.target.arousal};
                const double loss = mse(pred, std::span<const double>(target, 2));
                if (!std::isfinite(loss)) throw_diverged(epoch);
                batch_loss += loss;
                grads.accumulate(backward(stack, head, cache, std::span<const double>(target, 2)));
            }
            grads.scale(1.0 / static_cast<double>(batch.size()));
            maybe_clip(grads, config);
            adam_step(param_views(stack, head), grad_views(grads), adam);
            loss_sum += batch_loss;
        }

        const double train_mse = loss_sum / static_cast<double>(train_windows.size());
        const double val_mse = windows_mse(stack, head, val_windows);
        if (!std::isfinite(val_mse)) throw_diverged(epoch);
        report.curve.push_back({epoch, train_mse, val_mse});

        if (tracker.observe(epoch, val_mse)) best.capture(stack, head);
        if (tracker.exhausted()) break;
    }

    best.restore(stack, head);
    finalize_report(report, tracker);
    report.wall_seconds = seconds_since(start);
    return report;
}

EvalReport evaluate_emotion(const LstmStack& stack, const DenseHead& head,
                            const SongDataset& data, const std::vector<std::string>& ids) {
    EvalReport report;
    Rng rng(0);
    double total = 0.0;
    for (const auto& id : ids) {
        auto it = data.songs.find(id);
        if (it == data.songs.end()) throw UsageError("song id not in dataset: " + id);
        if (it->second.empty()) continue;
        double song_total = 0.0;
        for (const auto& clip : it->second) {
            song_total += item_mse(stack, head, clip.features.values, clip.target, rng);
        }
        const double song_mse = song_total / static_cast<double>(it->second.size());
        report.per_song.push_back({id, it->second.size(), song_mse, std::sqrt(song_mse)});
        total += song_total;
        report.n_items += it->second.size();
    }
    if (report.n_items == 0) throw UsageError("nothing to evaluate");
    report.mse = total / static_cast<double>(report.n_items);
    report.rmse = std::sqrt(report.mse);
    return report;
}

EvalReport evaluate_windows(const LstmStack& stack, const DenseHead& head,
                            const std::vector<SongWindows>& songs) {
    EvalReport report;
    Rng rng(0);
    double total = 0.0;
    for (const auto& song : songs) {
        if (song.windows.empty()) continue;
        double song_total = 0.0;
        for (const auto& w : song.windows) {
            song_total += item_mse(stack, head, w.inputs, w.target, rng);
        }
        const double song_mse = song_total / static_cast<double>(song.windows.size());
        report.per_song.push_back(
            {song.song_id, song.windows.size(), song_mse, std::sqrt(song_mse)});
        total += song_total;
        report.n_items += song.windows.size();
    }
    if (report.n_items == 0) throw UsageError("nothing to evaluate");
    report.mse = total / static_cast<double>(report.n_items);
    report.rmse = std::sqrt(report.mse);
    return report;
}

EmotionPoint predict_emotion(const LstmStack& stack, const DenseHead& head, const Matrix& mel) {
    Rng rng(0);
    const auto pred = stack_forward(mel, stack, head, RunMode::Eval, rng);
    return clamp(pred[0], pred[1]);
}

EmotionPoint predict_next(const LstmStack& stack, const DenseHead& head, const Matrix& window) {
    Rng rng(0);
    const auto pred = stack_forward(window, stack, head, RunMode::Eval, rng);
    return clamp(pred[0], pred[1]);
}

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& curve) {
    std::string text = "epoch,train_mse,val_mse\n";
    for (const auto& row : curve) {
        text += std::to_string(row.epoch);
        text += ',';
        text += format_exact(row.train_mse);
        text += ',';
        text += format_exact(row.val_mse);
        text += '\n';
    }
    write_text_file(path, text);
}

std::vector<EpochLoss> read_loss_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"epoch", "train_mse", "val_mse"}) {
        throw IoError("unexpected loss CSV header: " + path);
    }
    std::vector<EpochLoss> curve;
    curve.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        EpochLoss e;
        e.epoch = static_cast<std::size_t>(parse_cell(row[0], path));
        e.train_mse = parse_cell(row[1], path);
        e.val_mse = parse_cell(row[2], path);
        curve.push_back(e);
    }
    return curve;
}

namespace {

std::string format4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string format_eval_csv(const EvalReport& report) {
    std::string text = "song_id,n_items,mse,rmse\n";
    for (const auto& s : report.per_song) {
        text += s.song_id + ',' + std::to_string(s.n_items) + ',' + format4(s.mse) + ',' +
                format4(s.rmse) + '\n';
    }
    text += "ALL," + std::to_string(report.n_items) + ',' + format4(report.mse) + ',' +
            format4(report.rmse) + '\n';
    return text;
}

std::string format_eval_summary(const EvalReport& report) {
    std::ostringstream out;
    out << "MSE " << format4(report.mse) << "  RMSE " << format4(report.rmse) << "  ("
        << report.n_items << " items, " << report.per_song.size() << " songs)\n";
    return out.str();
}

}  // namespace mer
