#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace mer {

bool is_power_of_two(std::size_t n);

/// Radix-2 Cooley-Tukey FFT for a fixed power-of-two length.
/// Holds the twiddle table so repeated transforms (one per STFT frame)
/// pay the trig cost once.
class Fft {
public:
    explicit Fft(std::size_t n);

    std::size_t size() const noexcept { return n_; }

    void transform(std::vector<std::complex<double>>& a) const;

    /// One-sided spectrum (bins 0..n/2) of a real frame of length n.
    std::vector<std::complex<double>> real_transform(const std::vector<double>& frame) const;

private:
    std::size_t n_;
    std::vector<std::complex<double>> roots_;  // exp(-2*pi*i*k/n), k = 0..n/2-1
};

/// Convenience one-shot in-place FFT; length must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

/// One-sided spectrum of a real signal of power-of-two length.
std::vector<std::complex<double>> rfft(const std::vector<double>& signal);

}  // namespace mer
