#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "mer/matrix.hpp"
#include "mer/rng.hpp"
#include "mer/wav.hpp"

namespace mer {

/// Settings for the log-mel pipeline. The defaults produce a 128 x 44
/// spectrogram for one half-second clip at 44100 Hz.
struct DspConfig {
    int sample_rate = 44100;
    double clip_seconds = 0.5;
    std::size_t n_mels = 128;
    std::size_t fft_size = 2048;
    std::size_t hop_length = 512;
    double f_min = 0.0;
    double f_max = 22050.0;  // sample_rate / 2
    double log_floor = 1e-10;

    std::size_t clip_samples() const {
        return static_cast<std::size_t>(std::lround(clip_seconds * sample_rate));
    }
    std::size_t spectrum_bins() const { return fft_size / 2 + 1; }

    /// Throws on an inconsistent configuration.
    void validate() const;
};

struct MelSpectrogram {
    Matrix values;  // n_mels rows x n_frames columns

    std::size_t n_mels() const { return values.rows(); }
    std::size_t n_frames() const { return values.cols(); }
};

/// Consecutive non-overlapping clips of round(clip_seconds * rate) samples;
/// a trailing remainder shorter than one clip is discarded.
std::vector<AudioClip> slice_clips(const AudioClip& audio, double clip_seconds);

/// Short-time Fourier transform: reflection-centered framing, periodic Hann
/// window, one-sided spectrum. Output is (fft_size/2 + 1) x n_frames with
/// n_frames = 1 + floor(len / hop).
std::vector<std::vector<std::complex<double>>> stft(const AudioClip& clip,
                                                    const DspConfig& config);

/// Elementwise squared magnitude, bins x frames.
Matrix power_spectrogram(const std::vector<std::vector<std::complex<double>>>& spectrum);

/// Triangular mel filterbank (slaney mel scale, per-filter area
/// normalization), n_mels x (fft_size/2 + 1). Throws DegenerateFilter when
/// any filter covers no FFT bin.
Matrix mel_filterbank(const DspConfig& config);

/// Full pipeline for one clip: 10*log10(max(filterbank * power, log_floor)).
/// The clip must be exactly clip_seconds long.
MelSpectrogram log_mel(const AudioClip& clip, const DspConfig& config);

/// Each entry perturbed by an independent N(0, sigma^2) draw.
MelSpectrogram add_gaussian_noise(const MelSpectrogram& mel, double sigma, Rng& rng);

/// Feature-file serialization: header {magic "MELF", version, n_clips,
/// n_mels, n_frames} then 32-bit little-endian floats, clip-major,
/// bin-row-major. All clips must share one shape.
void write_melf(const std::string& path, const std::vector<MelSpectrogram>& clips);
std::vector<MelSpectrogram> read_melf(const std::string& path);

}  // namespace mer
