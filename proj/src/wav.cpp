#include "mer/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mer/error.hpp"

namespace mer {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ofstream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

AudioClip load_wav(const std::string& path, int required_rate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);

    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw IoError("not a RIFF/WAVE file: " + path);
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t data_off = 0, data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        std::uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
        std::size_t body = pos + 8;
        if (body + chunk_len > bytes.size()) {
            throw IoError("truncated WAV chunk in " + path);
        }
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw IoError("malformed fmt chunk in " + path);
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == kFormatExtensible && chunk_len >= 40) {
                // sub-format GUID starts with the base format code
                format = read_u16(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }

    if (!have_fmt || data_off == 0) throw IoError("missing fmt/data chunk in " + path);
    if (channels < 1 || channels > 2) {
        throw IoError("unsupported channel count " + std::to_string(channels) + " in " + path);
    }
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool pcm32 = format == kFormatPcm && bits == 32;
    const bool f32 = format == kFormatIeeeFloat && bits == 32;
    if (!pcm16 && !pcm32 && !f32) {
        throw IoError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + "-bit) in " + path);
    }
    if (required_rate > 0 && static_cast<int>(rate) != required_rate) {
        throw RateMismatch("sample rate " + std::to_string(rate) + " Hz, expected " +
                           std::to_string(required_rate) + " Hz: " + path);
    }

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_size = bytes_per_sample * channels;
    const std::size_t n_frames = data_len / frame_size;

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(n_frames);

    const unsigned char* d = bytes.data() + data_off;
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t ch = 0; ch < channels; ++ch) {
            const unsigned char* s = d + i * frame_size + ch * bytes_per_sample;
            double v;
            if (pcm16) {
                std::int16_t raw = static_cast<std::int16_t>(s[0] | s[1] << 8);
                v = static_cast<double>(raw) / 32768.0;
            } else if (pcm32) {
                std::int32_t raw = static_cast<std::int32_t>(read_u32(s));
                v = static_cast<double>(raw) / 2147483648.0;
            } else {
                std::uint32_t raw = read_u32(s);
                float f;
                std::memcpy(&f, &raw, 4);
                v = std::clamp(static_cast<double>(f), -1.0, 1.0);
            }
            acc += v;
        }
        clip.samples[i] = acc / channels;
    }
    return clip;
}

void save_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                    int sample_rate, int channels) {
    if (channels < 1 || channels > 2) throw UsageError("save_wav: channels must be 1 or 2");
    if (samples.size() % channels != 0) throw UsageError("save_wav: ragged interleaved data");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write WAV file: " + path);

    const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
    out.write("RIFF", 4);
    write_u32(out, 36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, kFormatPcm);
    write_u16(out, static_cast<std::uint16_t>(channels));
    write_u32(out, static_cast<std::uint32_t>(sample_rate));
    write_u32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
    write_u16(out, static_cast<std::uint16_t>(channels * 2));
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_len);
    for (double x : samples) {
        // scale symmetric with the reader's /32768 so a round trip stays
        // within half a quantization step
        long raw = std::lrint(std::clamp(x, -1.0, 1.0) * 32768.0);
        raw = std::clamp(raw, -32768L, 32767L);
        write_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(raw)));
    }
    if (!out) throw IoError("short write to " + path);
}

}  // namespace mer
