#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mer/baseline.hpp"
#include "mer/error.hpp"
#include "mer/nn.hpp"
#include "mer/rng.hpp"

using namespace mer;

namespace {

// textbook normal equations via Cramer's rule, no centering
struct PlainFit {
    double slope;
    double intercept;
};

PlainFit oracle_fit(const std::vector<double>& t, const std::vector<double>& y) {
    const double n = static_cast<double>(t.size());
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    const double det = n * stt - st * st;
    return {(n * sty - st * sy) / det, (sy * stt - st * sty) / det};
}

AnnotationTrack line_track(const std::string& id, std::size_t n, double v_slope,
                           double v_icept, double a_slope, double a_icept) {
    AnnotationTrack track;
    track.song_id = id;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / track.rate;
        track.points.push_back({v_slope * t + v_icept, a_slope * t + a_icept});
    }
    return track;
}

AnnotationTrack flat_track(const std::string& id, std::size_t n, double v, double a) {
    AnnotationTrack track;
    track.song_id = id;
    for (std::size_t i = 0; i < n; ++i) track.points.push_back({v, a});
    return track;
}

}  // namespace

TEST_CASE("fit_line matches the normal-equations oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(40);
        std::vector<double> t(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<double>(i) * 0.5 + rng.uniform(-0.1, 0.1);
            y[i] = rng.uniform(-1.0, 1.0);
        }
        const auto fit = fit_line(t, y);
        const auto oracle = oracle_fit(t, y);
        CHECK(std::abs(fit.slope - oracle.slope) < 1e-9);
        CHECK(std::abs(fit.intercept - oracle.intercept) < 1e-9);
    }
}

TEST_CASE("fit_line recovers an exact line") {
    std::vector<double> t, y;
    for (std::size_t i = 0; i < 30; ++i) {
        t.push_back(static_cast<double>(i) / 2.0);
        y.push_back(0.02 * t.back() - 0.5);
    }
    const auto fit = fit_line(t, y);
    CHECK(fit.slope == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.residual_mse < 1e-12);
}

TEST_CASE("fit_line on constant values is a flat line") {
    std::vector<double> t = {0.0, 1.0, 2.0, 3.0};
    std::vector<double> y = {0.37, 0.37, 0.37, 0.37};
    const auto fit = fit_line(t, y);
    CHECK(fit.slope == 0.0);
    CHECK(fit.intercept == doctest::Approx(0.37).epsilon(1e-15));
    CHECK(fit.residual_mse < 1e-30);
}

TEST_CASE("fit_line residuals are orthogonal to 1 and t") {
    Rng rng(77);
    std::vector<double> t(25), y(25);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<double>(i) * 0.5;
        y[i] = 0.1 * t[i] - 0.2 + rng.normal(0.0, 0.3);
    }
    const auto fit = fit_line(t, y);
    double sum_r = 0.0, sum_rt = 0.0, rss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - (fit.slope * t[i] + fit.intercept);
        sum_r += r;
        sum_rt += r * t[i];
        rss += r * r;
    }
    CHECK(std::abs(sum_r) < 1e-9);
    CHECK(std::abs(sum_rt) < 1e-9);
    CHECK(fit.residual_mse == doctest::Approx(rss / 25.0).epsilon(1e-12));
}

TEST_CASE("fit_line slope does not depend on sampling density") {
    auto sample = [](std::size_t n) {
        std::vector<double> t(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = 10.0 * static_cast<double>(i) / static_cast<double>(n - 1);
            y[i] = -0.03 * t[i] + 0.6;
        }
        return fit_line(t, y);
    };
    const auto coarse = sample(20);
    const auto fine = sample(2000);
    CHECK(coarse.slope == doctest::Approx(fine.slope).epsilon(1e-9));
    CHECK(coarse.intercept == doctest::Approx(fine.intercept).epsilon(1e-9));
}

TEST_CASE("fit_line domain checks") {
    std::vector<double> t2 = {1.0, 1.0, 1.0};
    std::vector<double> y3 = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(fit_line(t2, y3), InvalidValue);  // constant time axis

    std::vector<double> one_t = {1.0};
    std::vector<double> one_y = {0.1};
    CHECK_THROWS_AS(fit_line(one_t, one_y), UsageError);

    std::vector<double> t3 = {0.0, 1.0};
    CHECK_THROWS_AS(fit_line(t3, y3), UsageError);  // length mismatch

    std::vector<double> bad_t = {0.0, std::numeric_limits<double>::infinity()};
    std::vector<double> y2 = {0.1, 0.2};
    CHECK_THROWS_AS(fit_line(bad_t, y2), InvalidValue);
    std::vector<double> good_t = {0.0, 1.0};
    std::vector<double> bad_y = {0.1, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(fit_line(good_t, bad_y), InvalidValue);
}

TEST_CASE("fit_linear fits both channels against seconds from start") {
    const auto track = line_track("tr", 40, 0.02, -0.5, -0.01, 0.3);
    const auto [fv, fa] = fit_linear(track);
    CHECK(fv.song_id == "tr");
    CHECK(fv.channel == "valence");
    CHECK(fv.slope == doctest::Approx(0.02).epsilon(1e-10));
    CHECK(fv.intercept == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(fa.channel == "arousal");
    CHECK(fa.slope == doctest::Approx(-0.01).epsilon(1e-10));
    CHECK(fa.intercept == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("predict_linear clamps and rejects non-finite time") {
    LinearFit fit;
    fit.slope = 0.1;
    fit.intercept = 0.0;
    CHECK(predict_linear(fit, 5.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(predict_linear(fit, 50.0) == 1.0);
    CHECK(predict_linear(fit, -50.0) == -1.0);
    CHECK_THROWS_AS(predict_linear(fit, std::numeric_limits<double>::quiet_NaN()), InvalidValue);
    CHECK_THROWS_AS(predict_linear(fit, std::numeric_limits<double>::infinity()), InvalidValue);
}

TEST_CASE("compare_baseline emits one row per song, channel, predictor") {
    std::vector<AnnotationTrack> tracks = {flat_track("a", 15, 0.2, -0.3),
                                           line_track("b", 20, 0.01, 0.0, 0.02, -0.1)};

    const auto rows = compare_baseline(tracks, nullptr, nullptr);
    CHECK(rows.size() == 2 * 2 * 3);
    std::size_t linear = 0, linear_song = 0, hold = 0;
    for (const auto& row : rows) {
        if (row.predictor == "linear") ++linear;
        if (row.predictor == "linear_song") ++linear_song;
        if (row.predictor == "constant_hold") ++hold;
        CHECK(row.mse >= 0.0);
    }
    CHECK(linear == 4);
    CHECK(linear_song == 4);
    CHECK(hold == 4);

    LstmStack stack = make_stack(2, 4, 1, 1, 0.0);
    DenseHead head = DenseHead::zeros(4);
    const auto with_model = compare_baseline(tracks, &stack, &head);
    CHECK(with_model.size() == 2 * 2 * 4);
    std::size_t lstm = 0;
    for (const auto& row : with_model) {
        if (row.predictor == "lstm") ++lstm;
    }
    CHECK(lstm == 4);
}

TEST_CASE("every predictor nails a constant track") {
    const auto rows = compare_baseline({flat_track("c", 18, 0.25, -0.4)}, nullptr, nullptr);
    for (const auto& row : rows) CHECK(row.mse < 1e-24);
}

TEST_CASE("linear predictors nail an exact line, hold lags by one step") {
    // one 2 Hz step behind a 0.02/s ramp leaves a 0.01 gap
    const auto rows =
        compare_baseline({line_track("d", 30, 0.02, -0.3, 0.02, 0.1)}, nullptr, nullptr);
    for (const auto& row : rows) {
        if (row.predictor == "constant_hold") {
            CHECK(row.mse == doctest::Approx(1e-4).epsilon(1e-9));
        } else {
            CHECK(row.mse < 1e-12);
        }
    }
}

TEST_CASE("a zero model predicts the origin") {
    LstmStack stack = make_stack(2, 4, 1, 1, 0.0);
    DenseHead head = DenseHead::zeros(4);
    const auto rows = compare_baseline({flat_track("e", 16, 0.3, -0.5)}, &stack, &head);
    for (const auto& row : rows) {
        if (row.predictor != "lstm") continue;
        const double c = row.channel == "valence" ? 0.3 : -0.5;
        CHECK(row.mse == doctest::Approx(c * c).epsilon(1e-12));
    }
}

TEST_CASE("compare_baseline domain checks") {
    const auto short_track = flat_track("s", 10, 0.0, 0.0);
    CHECK_THROWS_AS(compare_baseline({short_track}, nullptr, nullptr), UsageError);

    const auto ok = flat_track("ok", 12, 0.0, 0.0);
    LstmStack stack = make_stack(2, 4, 1, 1, 0.0);
    DenseHead head = DenseHead::zeros(4);
    CHECK_THROWS_AS(compare_baseline({ok}, &stack, nullptr), UsageError);
    CHECK_THROWS_AS(compare_baseline({ok}, nullptr, &head), UsageError);

    // shorter windows make an 8-point track viable
    const auto rows = compare_baseline({flat_track("w", 8, 0.1, 0.1)}, nullptr, nullptr, 4);
    CHECK(rows.size() == 6);
}

TEST_CASE("format_baseline_csv shape") {
    const auto rows = compare_baseline({flat_track("f", 14, 0.1, 0.2)}, nullptr, nullptr);
    const std::string csv = format_baseline_csv(rows);
    CHECK(csv.rfind("song_id,channel,predictor,mse\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.find("f,valence,linear,") != std::string::npos);
    CHECK(csv.find("f,arousal,constant_hold,") != std::string::npos);
}
