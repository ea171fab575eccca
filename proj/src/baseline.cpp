#include "mer/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "mer/csv.hpp"
#include "mer/error.hpp"

namespace mer {

LinearFit fit_line(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) throw UsageError("fit_line: length mismatch");
    const std::size_t n = times.size();
    if (n < 2) throw UsageError("fit_line: need at least two points");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
            throw InvalidValue("fit_line: non-finite input");
        }
    }

    double t_mean = 0.0, y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t_mean += times[i];
        y_mean += values[i];
    }
    t_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);

    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = times[i] - t_mean;
        stt += dt * dt;
        sty += dt * (values[i] - y_mean);
    }
    if (stt == 0.0) throw InvalidValue("fit_line: constant time axis");

    LinearFit fit;
    fit.slope = sty / stt;
    fit.intercept = y_mean - fit.slope * t_mean;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = values[i] - (fit.slope * times[i] + fit.intercept);
        rss += r * r;
    }
    fit.residual_mse = rss / static_cast<double>(n);
    return fit;
}

std::pair<LinearFit, LinearFit> fit_linear(const AnnotationTrack& track) {
    const std::size_t n = track.points.size();
    std::vector<double> t(n), v(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<double>(i) / track.rate;
        v[i] = track.points[i].valence;
        a[i] = track.points[i].arousal;
    }
    LinearFit fv = fit_line(t, v);
    LinearFit fa = fit_line(t, a);
    fv.song_id = track.song_id;
    fv.channel = "valence";
    fa.song_id = track.song_id;
    fa.channel = "arousal";
    return {fv, fa};
}

double predict_linear(const LinearFit& fit, double t) {
    if (!std::isfinite(t)) throw InvalidValue("predict_linear: non-finite time");
    return std::clamp(fit.slope * t + fit.intercept, -1.0, 1.0);
}

std::vector<BaselineRow> compare_baseline(const std::vector<AnnotationTrack>& tracks,
                                          const LstmStack* stack, const DenseHead* head,
                                          std::size_t window_length) {
    if ((stack == nullptr) != (head == nullptr)) {
        throw UsageError("compare_baseline: stack and head must be supplied together");
    }
    std::vector<BaselineRow> rows;
    for (const auto& track : tracks) {
        if (track.points.size() < window_length + 1) {
            throw UsageError("compare_baseline: track " + track.song_id + " has fewer than " +
                             std::to_string(window_length + 1) + " points");
        }
        const auto [song_v, song_a] = fit_linear(track);
        const auto windows = make_windows(track, window_length);
        const std::size_t n = windows.size();

        // per-channel sums of squared next-point errors
        double lin[2] = {0.0, 0.0};
        double lin_song[2] = {0.0, 0.0};
        double hold[2] = {0.0, 0.0};
        double lstm[2] = {0.0, 0.0};

        std::vector<double> wt(window_length), wy(window_length);
        for (std::size_t i = 0; i < n; ++i) {
            const double target_t = static_cast<double>(i + window_length) / track.rate;
            const double target[2] = {windows[i].target.valence, windows[i].target.arousal};
            for (std::size_t ch = 0; ch < 2; ++ch) {
                for (std::size_t j = 0; j < window_length; ++j) {
                    wt[j] = static_cast<double>(i + j) / track.rate;
                    wy[j] = windows[i].inputs(ch, j);
                }
                const LinearFit local = fit_line(wt, wy);
                double e = predict_linear(local, target_t) - target[ch];
                lin[ch] += e * e;

                const LinearFit& whole = ch == 0 ? song_v : song_a;
                e = predict_linear(whole, target_t) - target[ch];
                lin_song[ch] += e * e;

                e = windows[i].inputs(ch, window_length - 1) - target[ch];
                hold[ch] += e * e;
            }
            if (stack) {
                const EmotionPoint p = predict_next(*stack, *head, windows[i].inputs);
                const double ev = p.valence - target[0];
                const double ea = p.arousal - target[1];
                lstm[0] += ev * ev;
                lstm[1] += ea * ea;
            }
        }

        const char* channels[2] = {"valence", "arousal"};
        for (std::size_t ch = 0; ch < 2; ++ch) {
            const double denom = static_cast<double>(n);
            rows.push_back({track.song_id, channels[ch], "linear", lin[ch] / denom});
            rows.push_back({track.song_id, channels[ch], "linear_song", lin_song[ch] / denom});
            rows.push_back({track.song_id, channels[ch], "constant_hold", hold[ch] / denom});
            if (stack) {
                rows.push_back({track.song_id, channels[ch], "lstm", lstm[ch] / denom});
            }
        }
    }
    return rows;
}

std::string format_baseline_csv(const std::vector<BaselineRow>& rows) {
    std::string text = "song_id,channel,predictor,mse\n";
    for (const auto& row : rows) {
        text += row.song_id + ',' + row.channel + ',' + row.predictor + ',' +
                format_exact(row.mse) + '\n';
    }
    return text;
}

}  // namespace mer
