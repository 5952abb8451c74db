#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "speakstream/vocoder.hpp"

using namespace speakstream;
using namespace speakstream::vocoder;

namespace {

dmel::MelConfig small_mel() {
    dmel::MelConfig cfg;
    cfg.sample_rate = 8000;
    cfg.hop = 0.010;
    cfg.window = 0.040;
    cfg.num_channels = 16;
    cfg.fmax = 4000.0;
    return cfg;
}

VocoderConfig small_voc(VocoderConfig::Mode mode) {
    VocoderConfig cfg;
    cfg.mode = mode;
    cfg.buffer_frames = 10;
    cfg.upsample_factor = 4;
    cfg.channel_expand = 24;
    return cfg;
}

std::vector<std::vector<double>> random_frames(int n, int channels, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-8.0, 1.0);
    std::vector<std::vector<double>> frames(n, std::vector<double>(channels));
    for (auto& f : frames)
        for (auto& v : f) v = dist(rng);
    return frames;
}

}  // namespace

TEST_CASE("upsampler shape and constant fixed point") {
    StreamVocoder voc(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    const std::vector<double> constant(16, -2.0);
    const auto out = voc.upsample(constant);
    REQUIRE(out.size() == 4);
    for (const auto& f : out) {
        REQUIRE(f.size() == 24);
        for (double v : f) CHECK(v == doctest::Approx(-2.0));
    }
    CHECK_THROWS_AS(voc.upsample(std::vector<double>(5, 0.0)), Error);
    CHECK_THROWS_AS(voc.upsample(std::vector<double>(16, NAN)), Error);
}

TEST_CASE("upsampler is causal: past outputs never depend on later frames") {
    const auto frames = random_frames(6, 16, 1);
    StreamVocoder a(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    StreamVocoder b(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    std::vector<std::vector<double>> outs_a, outs_b;
    for (int i = 0; i < 3; ++i)
        for (auto& f : a.upsample(frames[i])) outs_a.push_back(f);
    // Same prefix, then different future frames in b.
    for (int i = 0; i < 3; ++i)
        for (auto& f : b.upsample(frames[i])) outs_b.push_back(f);
    b.upsample(std::vector<double>(16, 5.0));
    CHECK(outs_a == outs_b);
}

TEST_CASE("streaming mode emits one chunk per frame, buffered lags k-1") {
    const auto frames = random_frames(15, 16, 2);
    SUBCASE("streaming") {
        StreamVocoder voc(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
        for (int i = 0; i < 15; ++i) {
            const auto chunk = voc.push_frame(frames[i]);
            CHECK(chunk.size() == static_cast<size_t>(voc.chunk_samples()));
            CHECK(voc.chunks_emitted() == i + 1);
        }
        CHECK(voc.finalize().empty());
    }
    SUBCASE("buffered k=10") {
        StreamVocoder voc(small_mel(), small_voc(VocoderConfig::Mode::Buffered));
        for (int i = 0; i < 15; ++i) {
            const auto chunk = voc.push_frame(frames[i]);
            if (i < 9) CHECK(chunk.empty());
            else CHECK(chunk.size() == static_cast<size_t>(voc.chunk_samples()));
            CHECK(voc.chunks_emitted() == std::max(0, i + 1 - 10 + 1));
        }
        // 15 received, 6 emitted: finalize drains the remaining 9.
        const auto tail = voc.finalize();
        CHECK(tail.size() == 9 * static_cast<size_t>(voc.chunk_samples()));
    }
    SUBCASE("buffered fewer than k frames") {
        StreamVocoder voc(small_mel(), small_voc(VocoderConfig::Mode::Buffered));
        for (int i = 0; i < 4; ++i) CHECK(voc.push_frame(frames[i]).empty());
        CHECK(voc.finalize().size() == 4 * static_cast<size_t>(voc.chunk_samples()));
    }
}

TEST_CASE("buffered equals streaming output with a k-1 frame lag") {
    const auto frames = random_frames(14, 16, 3);
    StreamVocoder stream(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    StreamVocoder buffered(small_mel(), small_voc(VocoderConfig::Mode::Buffered));
    std::vector<float> a, b;
    for (const auto& f : frames) {
        const auto ca = stream.push_frame(f);
        a.insert(a.end(), ca.begin(), ca.end());
        const auto cb = buffered.push_frame(f);
        b.insert(b.end(), cb.begin(), cb.end());
    }
    const auto tail = buffered.finalize();
    b.insert(b.end(), tail.begin(), tail.end());
    CHECK(a == b);
}

TEST_CASE("stream/offline sample-exact equivalence") {
    dmel::MelFrameMatrix m;
    m.config = small_mel();
    m.frames = random_frames(12, 16, 4);
    const auto cfg = small_voc(VocoderConfig::Mode::Streaming);
    StreamVocoder voc(m.config, cfg);
    std::vector<float> streamed;
    for (const auto& f : m.frames) {
        const auto chunk = voc.push_frame(f);
        streamed.insert(streamed.end(), chunk.begin(), chunk.end());
    }
    CHECK(streamed == StreamVocoder::synthesize_all(m.config, cfg, m));
}

TEST_CASE("streaming causality: chunk j identical with or without later pushes") {
    const auto frames = random_frames(8, 16, 5);
    StreamVocoder full(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    StreamVocoder cut(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    std::vector<std::vector<float>> chunks_full;
    for (const auto& f : frames) chunks_full.push_back(full.push_frame(f));
    for (int i = 0; i < 4; ++i) {
        auto altered = frames[i];
        CHECK(cut.push_frame(altered) == chunks_full[static_cast<size_t>(i)]);
    }
}

TEST_CASE("phase continuity: constant input has no chunk-boundary clicks") {
    StreamVocoder voc(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    const std::vector<double> frame(16, -1.0);
    std::vector<float> wav;
    for (int i = 0; i < 8; ++i) {
        const auto chunk = voc.push_frame(frame);
        wav.insert(wav.end(), chunk.begin(), chunk.end());
    }
    // With carried phase the signal is one continuous oscillator sum, so the
    // first difference at chunk boundaries cannot exceed the interior slope.
    const size_t cs = static_cast<size_t>(voc.chunk_samples());
    double max_interior = 0.0;
    for (size_t i = 1; i < wav.size(); ++i) {
        if (i % cs == 0) continue;
        max_interior =
            std::max(max_interior, std::abs(static_cast<double>(wav[i]) - wav[i - 1]));
    }
    for (size_t b = cs; b < wav.size(); b += cs) {
        const double boundary = std::abs(static_cast<double>(wav[b]) - wav[b - 1]);
        CHECK(boundary <= max_interior + 1e-6);
    }
}

TEST_CASE("silence frames synthesize below -60 dBFS") {
    StreamVocoder voc(small_mel(), small_voc(VocoderConfig::Mode::Streaming));
    const std::vector<double> silence(16, std::log(1e-10));
    double peak = 0.0;
    for (int i = 0; i < 5; ++i)
        for (float s : voc.push_frame(silence)) peak = std::max(peak, std::abs(static_cast<double>(s)));
    CHECK(peak < std::pow(10.0, -60.0 / 20.0));
}

TEST_CASE("wav file header and sample payload") {
    const std::string path = "/tmp/speakstream_test.wav";
    write_wav(path, {0.0f, 0.5f, -0.5f, 1.0f, -1.0f, 2.0f}, 8000);
    std::ifstream is(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), {});
    REQUIRE(bytes.size() == 44 + 12);
    CHECK(std::string(bytes.data(), 4) == "RIFF");
    CHECK(std::string(bytes.data() + 8, 4) == "WAVE");
    auto u16_at = [&](size_t off) {
        return static_cast<uint16_t>(static_cast<uint8_t>(bytes[off]) |
                                     (static_cast<uint8_t>(bytes[off + 1]) << 8));
    };
    auto i16_at = [&](size_t off) { return static_cast<int16_t>(u16_at(off)); };
    CHECK(u16_at(22) == 1);           // mono
    CHECK(u16_at(34) == 16);          // bits per sample
    CHECK(i16_at(44) == 0);
    CHECK(i16_at(46) == 16384);       // 0.5 * 32767 rounded
    CHECK(i16_at(50) == 32767);
    CHECK(i16_at(52) == -32767);
    CHECK(i16_at(54) == 32767);       // clamped
    std::remove(path.c_str());
}

TEST_CASE("vocoder config validation") {
    VocoderConfig cfg = small_voc(VocoderConfig::Mode::Buffered);
    cfg.buffer_frames = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = small_voc(VocoderConfig::Mode::Streaming);
    cfg.upsample_factor = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
