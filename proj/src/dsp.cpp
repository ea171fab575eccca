#include "mer/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mer/error.hpp"
#include "mer/fft.hpp"

namespace mer {

namespace {

// slaney mel scale: linear below 1000 Hz, logarithmic above
constexpr double kLinearHzPerMel = 200.0 / 3.0;
constexpr double kLogCrossoverHz = 1000.0;
constexpr double kLogCrossoverMel = kLogCrossoverHz / kLinearHzPerMel;  // 15

double hz_to_mel(double hz) {
    if (hz < kLogCrossoverHz) return hz / kLinearHzPerMel;
    return kLogCrossoverMel + std::log(hz / kLogCrossoverHz) / (std::log(6.4) / 27.0);
}

double mel_to_hz(double mel) {
    if (mel < kLogCrossoverMel) return mel * kLinearHzPerMel;
    return kLogCrossoverHz * std::exp((mel - kLogCrossoverMel) * (std::log(6.4) / 27.0));
}

// np.pad 'reflect' index: mirror without repeating the edge sample.
std::size_t reflect_index(long long p, std::size_t n) {
    if (n == 1) return 0;
    const long long m = 2 * static_cast<long long>(n) - 2;
    long long q = p % m;
    if (q < 0) q += m;
    return static_cast<std::size_t>(q < static_cast<long long>(n) ? q : m - q);
}

}  // namespace

void DspConfig::validate() const {
    if (sample_rate <= 0) throw UsageError("dsp config: sample_rate must be positive");
    if (clip_seconds <= 0.0) throw UsageError("dsp config: clip_seconds must be positive");
    if (!is_power_of_two(fft_size)) throw UsageError("dsp config: fft_size must be a power of two");
    if (hop_length < 1) throw UsageError("dsp config: hop_length must be >= 1");
    if (n_mels < 1) throw UsageError("dsp config: n_mels must be >= 1");
    if (!(f_min < f_max) || f_max > sample_rate / 2.0 + 1e-9) {
        throw UsageError("dsp config: need f_min < f_max <= sample_rate/2");
    }
    if (log_floor <= 0.0) throw UsageError("dsp config: log_floor must be positive");
}

std::vector<AudioClip> slice_clips(const AudioClip& audio, double clip_seconds) {
    if (clip_seconds <= 0.0) throw UsageError("slice_clips: clip_seconds must be positive");
    std::vector<AudioClip> clips;
    if (audio.samples.empty()) return clips;
    const auto clip_len =
        static_cast<std::size_t>(std::lround(clip_seconds * audio.sample_rate));
    if (clip_len == 0) throw UsageError("slice_clips: clip shorter than one sample");
    const std::size_t n = audio.samples.size() / clip_len;
    clips.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        AudioClip c;
        c.sample_rate = audio.sample_rate;
        c.samples.assign(audio.samples.begin() + static_cast<long>(i * clip_len),
                         audio.samples.begin() + static_cast<long>((i + 1) * clip_len));
        clips.push_back(std::move(c));
    }
    return clips;
}

std::vector<std::vector<std::complex<double>>> stft(const AudioClip& clip,
                                                    const DspConfig& config) {
    config.validate();
    const std::size_t len = clip.samples.size();
    if (len < 1) throw InvalidValue("stft: clip must contain at least one sample");

    const std::size_t n = config.fft_size;
    const std::size_t pad = n / 2;
    const std::size_t n_frames = 1 + len / config.hop_length;

    // periodic Hann window
    std::vector<double> window(n);
    for (std::size_t i = 0; i < n; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                         static_cast<double>(n));
    }

    const Fft plan(n);
    std::vector<std::vector<std::complex<double>>> out(config.spectrum_bins());
    for (auto& row : out) row.resize(n_frames);

    std::vector<double> frame(n);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const long long start =
            static_cast<long long>(t * config.hop_length) - static_cast<long long>(pad);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = clip.samples[reflect_index(start + static_cast<long long>(i), len)];
            frame[i] = s * window[i];
        }
        auto spectrum = plan.real_transform(frame);
        for (std::size_t k = 0; k < spectrum.size(); ++k) out[k][t] = spectrum[k];
    }
    return out;
}

Matrix power_spectrogram(const std::vector<std::vector<std::complex<double>>>& spectrum) {
    if (spectrum.empty()) return {};
    Matrix p(spectrum.size(), spectrum[0].size());
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        for (std::size_t t = 0; t < spectrum[k].size(); ++t) {
            p(k, t) = std::norm(spectrum[k][t]);
        }
    }
    return p;
}

Matrix mel_filterbank(const DspConfig& config) {
    config.validate();
    const std::size_t bins = config.spectrum_bins();
    const std::size_t m = config.n_mels;

    // n_mels + 2 breakpoints uniformly spaced in mel
    std::vector<double> hz(m + 2);
    const double mel_lo = hz_to_mel(config.f_min);
    const double mel_hi = hz_to_mel(config.f_max);
    for (std::size_t i = 0; i < m + 2; ++i) {
        hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                       static_cast<double>(m + 1));
    }

    Matrix fb(m, bins);
    const double bin_hz = static_cast<double>(config.sample_rate) /
                          static_cast<double>(config.fft_size);
    for (std::size_t f = 0; f < m; ++f) {
        const double lo = hz[f], center = hz[f + 1], hi = hz[f + 2];
        double total = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            const double freq = bin_hz * static_cast<double>(k);
            const double up = (freq - lo) / (center - lo);
            const double down = (hi - freq) / (hi - center);
            const double w = std::max(0.0, std::min(up, down));
            fb(f, k) = w * 2.0 / (hi - lo);  // slaney area normalization
            total += fb(f, k);
        }
        if (total <= 0.0) {
            throw DegenerateFilter("mel filter " + std::to_string(f) +
                                   " covers no FFT bin; reduce n_mels or raise fft_size");
        }
    }
    return fb;
}

MelSpectrogram log_mel(const AudioClip& clip, const DspConfig& config) {
    config.validate();
    if (clip.sample_rate != config.sample_rate) {
        throw RateMismatch("log_mel: clip rate " + std::to_string(clip.sample_rate) +
                           " Hz does not match config " + std::to_string(config.sample_rate));
    }
    if (clip.samples.size() != config.clip_samples()) {
        throw InvalidValue("log_mel: clip has " + std::to_string(clip.samples.size()) +
                           " samples, expected " + std::to_string(config.clip_samples()));
    }

    const Matrix power = power_spectrogram(stft(clip, config));
    const Matrix fb = mel_filterbank(config);

    MelSpectrogram mel;
    mel.values = Matrix(config.n_mels, power.cols());
    for (std::size_t f = 0; f < config.n_mels; ++f) {
        for (std::size_t t = 0; t < power.cols(); ++t) {
            double acc = 0.0;
            for (std::size_t k = 0; k < power.rows(); ++k) {
                acc += fb(f, k) * power(k, t);
            }
            mel.values(f, t) = 10.0 * std::log10(std::max(acc, config.log_floor));
        }
    }
    return mel;
}

MelSpectrogram add_gaussian_noise(const MelSpectrogram& mel, double sigma, Rng& rng) {
    if (sigma < 0.0 || !std::isfinite(sigma)) {
        throw InvalidValue("add_gaussian_noise: sigma must be finite and >= 0");
    }
    MelSpectrogram out = mel;
    if (sigma == 0.0) return out;
    for (double& v : out.values.storage()) v += rng.normal(0.0, sigma);
    return out;
}

namespace {

constexpr char kMelfMagic[4] = {'M', 'E', 'L', 'F'};
constexpr std::uint32_t kMelfVersion = 1;

void write_u32le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated MELF file: " + path);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void write_melf(const std::string& path, const std::vector<MelSpectrogram>& clips) {
    if (clips.empty()) throw UsageError("write_melf: no clips");
    const std::size_t rows = clips[0].n_mels();
    const std::size_t cols = clips[0].n_frames();
    for (const auto& c : clips) {
        if (c.n_mels() != rows || c.n_frames() != cols) {
            throw UsageError("write_melf: clips must share one shape");
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write feature file: " + path);
    out.write(kMelfMagic, 4);
    write_u32le(out, kMelfVersion);
    write_u32le(out, static_cast<std::uint32_t>(clips.size()));
    write_u32le(out, static_cast<std::uint32_t>(rows));
    write_u32le(out, static_cast<std::uint32_t>(cols));
    for (const auto& c : clips) {
        for (double v : c.values.storage()) {
            const float f = static_cast<float>(v);
            std::uint32_t raw;
            std::memcpy(&raw, &f, 4);
            write_u32le(out, raw);
        }
    }
    if (!out) throw IoError("short write to feature file: " + path);
}

std::vector<MelSpectrogram> read_melf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMelfMagic, 4) != 0) {
        throw IoError("not a MELF file: " + path);
    }
    const std::uint32_t version = read_u32le(in, path);
    if (version != kMelfVersion) {
        throw IoError("unsupported MELF version " + std::to_string(version) + ": " + path);
    }
    const std::uint32_t n_clips = read_u32le(in, path);
    const std::uint32_t rows = read_u32le(in, path);
    const std::uint32_t cols = read_u32le(in, path);
    if (rows == 0 || cols == 0) throw IoError("empty MELF shape: " + path);

    std::vector<MelSpectrogram> clips(n_clips);
    for (auto& c : clips) {
        c.values = Matrix(rows, cols);
        for (double& v : c.values.storage()) {
            const std::uint32_t raw = read_u32le(in, path);
            float f;
            std::memcpy(&f, &raw, 4);
            v = static_cast<double>(f);
        }
    }
    return clips;
}

}  // namespace mer
