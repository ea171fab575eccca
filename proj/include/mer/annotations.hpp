#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mer/circumplex.hpp"
#include "mer/dsp.hpp"

namespace mer {

/// Per-song valence/arousal time series at 2 Hz. Point i sits at
/// start_time + i/rate seconds. stds, when present, carries the
/// crowd-annotation standard deviations (valence, arousal) per point.
struct AnnotationTrack {
    std::string song_id;
    double start_time = 15.0;
    double rate = 2.0;
    std::vector<EmotionPoint> points;
    std::optional<std::vector<std::pair<double, double>>> stds;

    double time_of(std::size_t i) const { return start_time + static_cast<double>(i) / rate; }
};

struct LabeledClip {
    std::string song_id;
    std::size_t index = 0;
    MelSpectrogram features;
    EmotionPoint target;
};

struct SongDataset {
    std::map<std::string, std::vector<LabeledClip>> songs;
    std::set<std::string> train_ids;
    std::set<std::string> validation_ids;
};

struct EmomusicOptions {
    bool strict = true;          // out-of-range values raise ScaleViolation
    double lenient_scale = 1.0;  // lenient mode: divide every value, then clamp
};

/// Import the wide EmoMusic CSV pair (first column song_id, one column per
/// 2 Hz timestep starting at 15 s). Song ids present in only one file are
/// dropped with a warning; per-song column-count mismatch between the two
/// files is an error.
std::vector<AnnotationTrack> load_emomusic(const std::string& arousal_csv,
                                           const std::string& valence_csv,
                                           const EmomusicOptions& options = {},
                                           std::vector<std::string>* warnings = nullptr);

/// Canonical long-format interchange CSV:
/// song_id,time_s,valence,arousal[,valence_std,arousal_std], six decimals.
void save_tracks_csv(const std::string& path, const std::vector<AnnotationTrack>& tracks);
std::vector<AnnotationTrack> load_tracks_csv(const std::string& path);

/// Pair clip i with annotation point i. Length is min(#clips, #points);
/// a warning is emitted when the counts differ.
std::vector<LabeledClip> join_clips(const std::vector<MelSpectrogram>& clips,
                                    const AnnotationTrack& track,
                                    std::vector<std::string>* warnings = nullptr);

/// Seeded song-level split: ceil(fraction * n) songs go to validation.
SongDataset split_by_song(SongDataset dataset, double validation_fraction, std::uint64_t seed);

enum class SynthKind { Constant, Linear, Sine, Piecewise };

SynthKind synth_kind_from_string(const std::string& name);

/// Deterministic synthetic trajectories for desk-scale testing: constant,
/// linear drift, sinusoid, or piecewise-constant segments, plus optional
/// Gaussian noise, clamped to [-1, 1].
std::vector<AnnotationTrack> synth_tracks(std::size_t n_songs, std::size_t length,
                                          SynthKind kind, double noise_sigma,
                                          std::uint64_t seed);

}  // namespace mer
