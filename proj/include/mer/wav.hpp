#pragma once

#include <string>
#include <vector>

namespace mer {

struct AudioClip {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    int sample_rate = 0;          // Hz

    double seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

/// Read a RIFF/WAVE file: PCM 16- or 32-bit integer, or 32-bit IEEE float,
/// mono or stereo (stereo is downmixed by channel mean). Samples are scaled
/// to [-1, 1]. Files not at `required_rate` raise RateMismatch; pass 0 to
/// accept any rate.
AudioClip load_wav(const std::string& path, int required_rate = 44100);

/// Write mono or interleaved-stereo 16-bit PCM. Used for fixtures and demos.
void save_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                    int sample_rate, int channels = 1);

}  // namespace mer
