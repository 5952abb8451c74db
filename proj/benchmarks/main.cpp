#include <benchmark/benchmark.h>

#include <random>

#include "speakstream/corpus.hpp"
#include "speakstream/engine.hpp"
#include "speakstream/interleave.hpp"
#include "speakstream/model.hpp"
#include "speakstream/vocoder.hpp"

using namespace speakstream;

namespace {

dmel::MelConfig bench_mel() {
    dmel::MelConfig cfg;
    cfg.sample_rate = 22050;
    cfg.hop = 0.025;
    cfg.window = 0.05;
    cfg.num_channels = 64;
    cfg.fmax = 11025.0;
    return cfg;
}

std::vector<std::vector<double>> random_logmel(int n, int channels, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-8.0, 0.0);
    std::vector<std::vector<double>> frames(static_cast<size_t>(n),
                                            std::vector<double>(static_cast<size_t>(channels)));
    for (auto& f : frames)
        for (auto& v : f) v = dist(rng);
    return frames;
}

nn::ModelConfig bench_model() {
    nn::ModelConfig cfg;
    cfg.num_layers = 3;
    cfg.model_dim = 64;
    cfg.num_heads = 4;
    cfg.ffn_dim = 192;
    cfg.max_positions = 512;
    cfg.alphabet = "abcdefgh";
    cfg.num_channels = 64;
    cfg.num_bins = 16;
    return cfg;
}

void BM_vocoder_push_frame_streaming(benchmark::State& state) {
    const auto mel = bench_mel();
    vocoder::VocoderConfig vcfg;
    const auto frames = random_logmel(64, mel.num_channels, 1);
    vocoder::StreamVocoder voc(mel, vcfg);
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(voc.push_frame(frames[i++ % frames.size()]));
    }
}
BENCHMARK(BM_vocoder_push_frame_streaming);

void BM_vocoder_push_frame_buffered(benchmark::State& state) {
    const auto mel = bench_mel();
    vocoder::VocoderConfig vcfg;
    vcfg.mode = vocoder::VocoderConfig::Mode::Buffered;
    vcfg.buffer_frames = 10;
    const auto frames = random_logmel(64, mel.num_channels, 2);
    vocoder::StreamVocoder voc(mel, vcfg);
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(voc.push_frame(frames[i++ % frames.size()]));
    }
}
BENCHMARK(BM_vocoder_push_frame_buffered);

void BM_incremental_decode_step(benchmark::State& state) {
    const auto cfg = bench_model();
    const auto params = nn::init_params<float>(cfg, 3);
    interleave::Token frame_tok{interleave::TokenKind::SpeechFrame};
    frame_tok.frame.bins.assign(static_cast<size_t>(cfg.num_channels), 3);
    interleave::Token bos{interleave::TokenKind::SpeechBos};

    nn::KvCache<float> cache(cfg.num_layers);
    nn::forward_incremental(cfg, params, {bos}, cache);
    for (auto _ : state) {
        if (cache.length >= cfg.max_positions - 1) {
            state.PauseTiming();
            cache = nn::KvCache<float>(cfg.num_layers);
            nn::forward_incremental(cfg, params, {bos}, cache);
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(nn::generate_step(cfg, params, cache, frame_tok));
    }
}
BENCHMARK(BM_incremental_decode_step);

void BM_interleave_build(benchmark::State& state) {
    corpus::CorpusSpec spec;
    spec.num_utterances = 1;
    spec.words_min = spec.words_max = 6;
    spec.chars_min = spec.chars_max = 3;
    const auto utts = corpus::generate_corpus(spec);
    for (auto _ : state) {
        benchmark::DoNotOptimize(interleave::build(utts[0], {interleave::Scheme::S1, 3, 1}));
    }
}
BENCHMARK(BM_interleave_build);

}  // namespace

BENCHMARK_MAIN();
