#include "mer/fft.hpp"

#include <cmath>

#include "mer/error.hpp"

namespace mer {

bool is_power_of_two(std::size_t n) {
    return n != 0 && (n & (n - 1)) == 0;
}

Fft::Fft(std::size_t n) : n_(n) {
    if (!is_power_of_two(n)) throw InvalidValue("fft: length must be a power of two");
    roots_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        roots_[k] = {std::cos(ang), std::sin(ang)};
    }
}

void Fft::transform(std::vector<std::complex<double>>& a) const {
    if (a.size() != n_) throw InvalidValue("fft: input length does not match plan");
    const std::size_t n = n_;
    if (n == 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = roots_[k * stride];
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

std::vector<std::complex<double>> Fft::real_transform(const std::vector<double>& frame) const {
    std::vector<std::complex<double>> buf(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = {frame[i], 0.0};
    transform(buf);
    buf.resize(n_ / 2 + 1);
    return buf;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
    if (a.empty()) throw InvalidValue("fft: empty input");
    Fft(a.size()).transform(a);
}

std::vector<std::complex<double>> rfft(const std::vector<double>& signal) {
    if (signal.empty()) throw InvalidValue("fft: empty input");
    return Fft(signal.size()).real_transform(signal);
}

}  // namespace mer
