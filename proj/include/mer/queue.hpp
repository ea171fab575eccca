#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mer/annotations.hpp"
#include "mer/circumplex.hpp"
#include "mer/models.hpp"

namespace mer {

/// A clip the queue may play next, summarized by its opening emotion.
struct Candidate {
    std::string clip_id;
    EmotionPoint opening;
};

struct QueuePolicy {
    double tolerance = 0.1;            // circumplex distance units
    std::size_t opening_window_k = 4;  // points averaged into the opening
    std::uint64_t seed = 0;
};

/// Coordinate-wise mean of the track's first k points, clamped.
EmotionPoint opening_emotion(const AnnotationTrack& track, std::size_t k);

/// Opening from model predictions on the clip's first k feature matrices,
/// for libraries without annotations.
Candidate candidate_from_features(const std::string& clip_id,
                                  const std::vector<MelSpectrogram>& clips,
                                  const LstmStack& stack, const DenseHead& head, std::size_t k);

struct Selection {
    std::string clip_id;
    EmotionPoint predicted;
    double distance = 0.0;
};

/// Predict the trajectory's next point, then choose among the candidates
/// whose opening lies within tolerance of the closest one. Tolerance 0 is
/// a deterministic argmin with ties broken by lowest clip_id; otherwise the
/// pick is uniform over the pool using rng.
Selection select_next(const Matrix& history, const LstmStack& stack, const DenseHead& head,
                      const std::vector<Candidate>& candidates, const QueuePolicy& policy,
                      Rng& rng);

/// Convenience overload seeding a fresh generator from policy.seed.
Selection select_next(const Matrix& history, const LstmStack& stack, const DenseHead& head,
                      const std::vector<Candidate>& candidates, const QueuePolicy& policy);

/// Candidate manifest `clip_id,valence,arousal`.
std::vector<Candidate> load_candidates_csv(const std::string& path);

}  // namespace mer
