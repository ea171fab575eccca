#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "mer/error.hpp"
#include "mer/rng.hpp"
#include "mer/wav.hpp"
#include "util.hpp"

using namespace mer;
using mer::testutil::TempDir;

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
}
void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v));
    s.push_back(static_cast<char>(v >> 8));
}

// Hand-rolled float32 WAV so the loader's float path is tested against an
// independent writer.
std::string make_float_wav(const std::vector<float>& samples, std::uint32_t rate) {
    std::string data;
    for (const float f : samples) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(data, bits);
    }
    std::string body;
    body += "WAVE";
    body += "fmt ";
    put_u32(body, 16);
    put_u16(body, 3);  // IEEE float
    put_u16(body, 1);
    put_u32(body, rate);
    put_u32(body, rate * 4);
    put_u16(body, 4);
    put_u16(body, 32);
    body += "data";
    put_u32(body, static_cast<std::uint32_t>(data.size()));
    body += data;
    std::string file = "RIFF";
    put_u32(file, static_cast<std::uint32_t>(body.size()));
    file += body;
    return file;
}

void write_binary(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("pcm16 round trip within quantization error") {
    TempDir tmp;
    Rng rng(3);
    std::vector<double> samples(2000);
    for (auto& s : samples) s = rng.uniform(-0.99, 0.99);
    save_wav_pcm16(tmp.file("t.wav"), samples, 44100);
    const AudioClip clip = load_wav(tmp.file("t.wav"));
    CHECK(clip.sample_rate == 44100);
    REQUIRE(clip.samples.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(std::abs(clip.samples[i] - samples[i]) <= 1.0 / 32768.0);
    }
}

TEST_CASE("stereo downmix averages the channels") {
    TempDir tmp;
    // interleaved L,R: L = 0.5, R = -0.5 -> mean 0
    std::vector<double> interleaved;
    for (int i = 0; i < 100; ++i) {
        interleaved.push_back(0.5);
        interleaved.push_back(-0.5);
    }
    save_wav_pcm16(tmp.file("st.wav"), interleaved, 44100, 2);
    const AudioClip clip = load_wav(tmp.file("st.wav"));
    REQUIRE(clip.samples.size() == 100);
    for (const double s : clip.samples) CHECK(std::abs(s) <= 1.0 / 32768.0);
}

TEST_CASE("float32 files load exactly") {
    TempDir tmp;
    const std::vector<float> samples = {0.0f, 0.25f, -0.5f, 1.0f, -1.0f, 0.125f};
    write_binary(tmp.file("f.wav"), make_float_wav(samples, 44100));
    const AudioClip clip = load_wav(tmp.file("f.wav"));
    REQUIRE(clip.samples.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(clip.samples[i] == static_cast<double>(samples[i]));
    }
}

TEST_CASE("sample-rate mismatch is an error unless rate 0 is passed") {
    TempDir tmp;
    save_wav_pcm16(tmp.file("r.wav"), std::vector<double>(10, 0.0), 22050);
    CHECK_THROWS_AS((void)load_wav(tmp.file("r.wav")), RateMismatch);
    CHECK_THROWS_AS((void)load_wav(tmp.file("r.wav"), 44100), RateMismatch);
    const AudioClip clip = load_wav(tmp.file("r.wav"), 0);
    CHECK(clip.sample_rate == 22050);
    CHECK(clip.seconds() == doctest::Approx(10.0 / 22050.0));
}

TEST_CASE("junk and truncated files are IoErrors") {
    TempDir tmp;
    write_binary(tmp.file("junk.wav"), "not a riff file at all");
    CHECK_THROWS_AS((void)load_wav(tmp.file("junk.wav"), 0), IoError);

    const std::string good = make_float_wav({0.1f, 0.2f, 0.3f}, 44100);
    write_binary(tmp.file("trunc.wav"), good.substr(0, good.size() - 7));
    CHECK_THROWS_AS((void)load_wav(tmp.file("trunc.wav"), 0), IoError);

    CHECK_THROWS_AS((void)load_wav(tmp.file("absent.wav"), 0), IoError);
}

TEST_CASE("pcm16 clipping saturates instead of wrapping") {
    TempDir tmp;
    save_wav_pcm16(tmp.file("c.wav"), {1.5, -1.5, 1.0, -1.0}, 44100);
    const AudioClip clip = load_wav(tmp.file("c.wav"));
    CHECK(clip.samples[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(clip.samples[1] == doctest::Approx(-1.0).epsilon(1e-3));
}
