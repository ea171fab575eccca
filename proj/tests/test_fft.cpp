#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "mer/error.hpp"
#include "mer/fft.hpp"
#include "mer/rng.hpp"

using namespace mer;

namespace {

// Brute-force DFT oracle: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N). Twiddles are
// looked up at exact angles via (k*n) mod N so the oracle's own rounding
// stays near machine precision.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> table(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double angle = -2.0 * M_PI * static_cast<double>(m) / static_cast<double>(n);
        table[m] = {std::cos(angle), std::sin(angle)};
    }
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += x[i] * table[(k * i) % n];
        }
        out[k] = acc;
    }
    return out;
}

double max_abs_diff(const std::vector<std::complex<double>>& a,
                    const std::vector<std::complex<double>>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("is_power_of_two") {
    CHECK(is_power_of_two(1));
    CHECK(is_power_of_two(2));
    CHECK(is_power_of_two(2048));
    CHECK(!is_power_of_two(0));
    CHECK(!is_power_of_two(3));
    CHECK(!is_power_of_two(2047));
}

TEST_CASE("fft matches the naive DFT oracle on random signals") {
    Rng rng(101);
    for (const std::size_t n : {2ul, 8ul, 64ul, 256ul}) {
        for (int trial = 0; trial < 4; ++trial) {
            std::vector<std::complex<double>> x(n);
            for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            auto got = x;
            fft_inplace(got);
            const auto want = naive_dft(x);
            CHECK(max_abs_diff(got, want) < 1e-9);
        }
    }
}

TEST_CASE("fft of a unit impulse is flat") {
    std::vector<std::complex<double>> x(16, 0.0);
    x[0] = 1.0;
    fft_inplace(x);
    for (const auto& v : x) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(v.imag()) < 1e-12);
    }
}

TEST_CASE("fft of a pure tone concentrates on its bin") {
    const std::size_t n = 64, k0 = 5;
    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::cos(2.0 * M_PI * static_cast<double>(k0 * i) / static_cast<double>(n));
    }
    fft_inplace(x);
    for (std::size_t k = 0; k < n; ++k) {
        const double expected = (k == k0 || k == n - k0) ? n / 2.0 : 0.0;
        CHECK(std::abs(x[k] - std::complex<double>(expected, 0.0)) < 1e-9);
    }
}

TEST_CASE("fft is linear") {
    Rng rng(7);
    const std::size_t n = 128;
    std::vector<std::complex<double>> a(n), b(n), sum(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        b[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        sum[i] = 2.0 * a[i] + 3.0 * b[i];
    }
    fft_inplace(a);
    fft_inplace(b);
    fft_inplace(sum);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(sum[i] - (2.0 * a[i] + 3.0 * b[i])) < 1e-9);
    }
}

TEST_CASE("parseval's identity holds") {
    Rng rng(23);
    const std::size_t n = 512;
    std::vector<std::complex<double>> x(n);
    double time_energy = 0.0;
    for (auto& v : x) {
        v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        time_energy += std::norm(v);
    }
    fft_inplace(x);
    double freq_energy = 0.0;
    for (const auto& v : x) freq_energy += std::norm(v);
    CHECK(freq_energy / static_cast<double>(n) == doctest::Approx(time_energy).epsilon(1e-12));
}

TEST_CASE("real_transform equals the full transform's low half") {
    Rng rng(31);
    const std::size_t n = 256;
    std::vector<double> frame(n);
    std::vector<std::complex<double>> full(n);
    for (std::size_t i = 0; i < n; ++i) {
        frame[i] = rng.uniform(-1.0, 1.0);
        full[i] = frame[i];
    }
    const Fft fft(n);
    const auto one_sided = fft.real_transform(frame);
    fft_inplace(full);
    REQUIRE(one_sided.size() == n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        CHECK(std::abs(one_sided[k] - full[k]) < 1e-9);
    }
}

TEST_CASE("hermitian symmetry for real input") {
    Rng rng(37);
    const std::size_t n = 128;
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    fft_inplace(x);
    for (std::size_t k = 1; k < n / 2; ++k) {
        CHECK(std::abs(x[k] - std::conj(x[n - k])) < 1e-9);
    }
}

TEST_CASE("non-power-of-two lengths are rejected") {
    CHECK_THROWS_AS(Fft(12), InvalidValue);
    CHECK_THROWS_AS(Fft(0), InvalidValue);
    std::vector<std::complex<double>> x(12, 0.0);
    CHECK_THROWS_AS(fft_inplace(x), InvalidValue);
}
