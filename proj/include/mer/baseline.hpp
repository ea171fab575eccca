#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mer/annotations.hpp"
#include "mer/models.hpp"

namespace mer {

/// Ordinary least squares line for one emotion channel against time.
/// Time is measured in seconds from the track's first point.
struct LinearFit {
    std::string song_id;
    std::string channel;  // "valence" or "arousal"
    double slope = 0.0;
    double intercept = 0.0;
    double residual_mse = 0.0;
};

/// Closed-form OLS through (times[i], values[i]) pairs. Requires at least
/// two distinct times; a constant time axis is an error.
LinearFit fit_line(std::span<const double> times, std::span<const double> values);

/// Per-channel OLS over a whole track: (valence fit, arousal fit).
std::pair<LinearFit, LinearFit> fit_linear(const AnnotationTrack& track);

/// slope * t + intercept, clamped to [-1, 1].
double predict_linear(const LinearFit& fit, double t);

struct BaselineRow {
    std::string song_id;
    std::string channel;
    std::string predictor;  // linear, linear_song, constant_hold, lstm
    double mse = 0.0;
};

/// Next-point MSE per song, channel, and predictor over stride-1 windows.
/// `linear` refits on each window's points; `linear_song` fits the whole
/// track once; `constant_hold` repeats the window's last point. LSTM rows
/// appear only when a model is supplied.
std::vector<BaselineRow> compare_baseline(const std::vector<AnnotationTrack>& tracks,
                                          const LstmStack* stack, const DenseHead* head,
                                          std::size_t window_length = 10);

/// `song_id,channel,predictor,mse` with full-precision reals.
std::string format_baseline_csv(const std::vector<BaselineRow>& rows);

}  // namespace mer
