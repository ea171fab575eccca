#include "mer/queue.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mer/csv.hpp"
#include "mer/error.hpp"

namespace mer {

EmotionPoint opening_emotion(const AnnotationTrack& track, std::size_t k) {
    if (k < 1) throw UsageError("opening_emotion: k must be >= 1");
    if (track.points.size() < k) {
        throw UsageError("opening_emotion: track " + track.song_id + " has " +
                         std::to_string(track.points.size()) + " points, need " +
                         std::to_string(k));
    }
    double v = 0.0, a = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        v += track.points[i].valence;
        a += track.points[i].arousal;
    }
    const double n = static_cast<double>(k);
    return clamp(v / n, a / n);
}

Candidate candidate_from_features(const std::string& clip_id,
                                  const std::vector<MelSpectrogram>& clips,
                                  const LstmStack& stack, const DenseHead& head, std::size_t k) {
    if (k < 1) throw UsageError("candidate_from_features: k must be >= 1");
    if (clips.size() < k) {
        throw UsageError("candidate_from_features: " + clip_id + " has " +
                         std::to_string(clips.size()) + " clips, need " + std::to_string(k));
    }
    double v = 0.0, a = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const EmotionPoint p = predict_emotion(stack, head, clips[i].values);
        v += p.valence;
        a += p.arousal;
    }
    const double n = static_cast<double>(k);
    return {clip_id, clamp(v / n, a / n)};
}

Selection select_next(const Matrix& history, const LstmStack& stack, const DenseHead& head,
                      const std::vector<Candidate>& candidates, const QueuePolicy& policy,
                      Rng& rng) {
    if (candidates.empty()) throw UsageError("select_next: no candidates");
    if (!(policy.tolerance >= 0.0)) throw UsageError("select_next: tolerance must be >= 0");

    const EmotionPoint predicted = predict_next(stack, head, history);

    std::vector<double> dist(candidates.size());
    double d_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        dist[i] = distance(candidates[i].opening, predicted);
        d_min = std::min(d_min, dist[i]);
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (dist[i] <= d_min + policy.tolerance) pool.push_back(i);
    }

    std::size_t chosen;
    if (policy.tolerance == 0.0) {
        chosen = pool[0];
        for (const std::size_t i : pool) {
            if (candidates[i].clip_id < candidates[chosen].clip_id) chosen = i;
        }
    } else {
        chosen = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
    }
    return {candidates[chosen].clip_id, predicted, dist[chosen]};
}

Selection select_next(const Matrix& history, const LstmStack& stack, const DenseHead& head,
                      const std::vector<Candidate>& candidates, const QueuePolicy& policy) {
    Rng rng(policy.seed);
    return select_next(history, stack, head, candidates, policy, rng);
}

std::vector<Candidate> load_candidates_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"clip_id", "valence", "arousal"}) {
        throw IoError("candidate manifest needs header clip_id,valence,arousal: " + path);
    }
    std::vector<Candidate> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        out.push_back({row[0], clamp(parse_cell(row[1], path), parse_cell(row[2], path))});
    }
    return out;
}

}  // namespace mer
