// End-to-end acceptance checks. Each numbered criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "scripted_decoder.hpp"
#include "speakstream/corpus.hpp"
#include "speakstream/dmel.hpp"
#include "speakstream/engine.hpp"
#include "speakstream/interleave.hpp"
#include "speakstream/model.hpp"
#include "speakstream/pipeline.hpp"
#include "speakstream/trainer.hpp"
#include "speakstream/vocoder.hpp"

using namespace speakstream;
using interleave::Scheme;
using interleave::Token;
using interleave::TokenKind;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& label, const std::string& detail = "") {
    std::printf("%s  %2d  %s%s%s\n", ok ? "PASS" : "FAIL", criterion, label.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

// ---------------------------------------------------------------- fixtures

struct WordFixture {
    std::vector<std::string> words;
    std::vector<dmel::DmelFrame> frames;
    corpus::Alignment alignment;
};

WordFixture one_frame_words(int t) {
    WordFixture fx;
    for (int i = 0; i < t; ++i) {
        fx.words.push_back(std::string(1, static_cast<char>('a' + i)));
        dmel::DmelFrame f;
        f.bins = {static_cast<uint8_t>(i)};
        fx.frames.push_back(f);
        fx.alignment.spans.emplace_back(i, i + 1);
    }
    return fx;
}

std::string signature(const interleave::TokenSequence& seq) {
    std::string s;
    for (const auto& tok : seq.tokens) {
        switch (tok.kind) {
            case TokenKind::TextChar: s += tok.ch; break;
            case TokenKind::WordSep: s += '.'; break;
            case TokenKind::TextBos: s += '<'; break;
            case TokenKind::TextEos: s += '>'; break;
            case TokenKind::SpeechBos: s += '['; break;
            case TokenKind::SpeechEos: s += ']'; break;
            case TokenKind::SpeechFrame: s += static_cast<char>('0' + tok.frame.bins[0]); break;
        }
    }
    return s;
}

// Tiny two-letter setup shared by criteria 6 and the engine oracles.
corpus::CorpusSpec tiny_corpus_spec() {
    corpus::CorpusSpec spec;
    spec.alphabet = "ab";
    spec.num_channels = 4;
    spec.num_bins = 4;
    spec.frames_per_char_base = 2;
    spec.words_min = 1;
    spec.words_max = 3;
    spec.chars_min = 1;
    spec.chars_max = 2;
    spec.num_utterances = 60;
    spec.seed = 11;
    return spec;
}

nn::ModelConfig model_for(const corpus::CorpusSpec& cs, int layers, int dim, int heads, int ffn) {
    nn::ModelConfig cfg;
    cfg.num_layers = layers;
    cfg.model_dim = dim;
    cfg.num_heads = heads;
    cfg.ffn_dim = ffn;
    cfg.max_positions = 512;
    cfg.alphabet = cs.alphabet;
    cfg.num_channels = cs.num_channels;
    cfg.num_bins = cs.num_bins;
    return cfg;
}

// -------------------------------------------------------------- criterion 1

void criterion1() {
    const auto fx = one_frame_words(8);
    const bool ok1 = signature(interleave::build_scheme1(fx.words, fx.frames, fx.alignment, 3, 2)) ==
                     "a.b.c[01]c.d.e[23]e.f.g[45]g.h[67]";
    const bool ok2 = signature(interleave::build_scheme2(fx.words, fx.frames, fx.alignment, 3, 2)) ==
                     "a.b.c[01]d.e[23]f.g[45]h[67]";
    report(1, ok1 && ok2, "interleave golden examples (m=3, n=2, t=8), both schemes");
}

// -------------------------------------------------------------- criterion 2

struct Slices {
    std::vector<std::pair<int, int>> text, speech;
};

Slices brute_force(Scheme scheme, int m, int n, int t) {
    Slices out;
    for (int i = 1;; ++i) {
        const int s0 = n * (i - 1), s1 = std::min(t, n * i);
        if (s0 >= s1) break;
        out.speech.emplace_back(s0, s1);
    }
    if (scheme == Scheme::S1) {
        for (int i = 1;; ++i) {
            const int w0 = n * (i - 1), w1 = std::min(t, w0 + m);
            if (w0 >= w1) break;
            out.text.emplace_back(w0, w1);
        }
    } else {
        out.text.emplace_back(0, std::min(t, m));
        for (int i = 2;; ++i) {
            const int w0 = n * (i - 2) + m, w1 = std::min(t, n * (i - 1) + m);
            if (w0 >= w1) break;
            out.text.emplace_back(w0, w1);
        }
    }
    return out;
}

void criterion2() {
    bool ok = true;
    for (int m = 1; m <= 6 && ok; ++m)
        for (int n = 1; n <= m && ok; ++n)
            for (int t = 1; t <= 40 && ok; ++t)
                for (Scheme scheme : {Scheme::S1, Scheme::S2}) {
                    const auto bf = brute_force(scheme, m, n, t);
                    const auto counts = interleave::segment_counts(scheme, m, n, t);
                    if (counts.text_segments != static_cast<int>(bf.text.size()) ||
                        counts.speech_segments != static_cast<int>(bf.speech.size())) {
                        ok = false;
                        break;
                    }
                    for (int i = 1; i <= counts.text_segments && ok; ++i)
                        ok = interleave::text_window(scheme, m, n, i, t) == bf.text[i - 1];
                    for (int i = 1; i <= counts.speech_segments && ok; ++i)
                        ok = interleave::speech_window(n, i, t) == bf.speech[i - 1];
                }
    report(2, ok, "segment counts match brute-force enumerator (m,n<=6, t<=40)");
}

// -------------------------------------------------------------- criterion 3

void criterion3() {
    corpus::CorpusSpec spec = tiny_corpus_spec();
    spec.num_utterances = 500;
    spec.words_max = 8;
    spec.rate_jitter = 1;
    spec.frames_per_char_base = 3;
    const auto utts = corpus::generate_corpus(spec);
    std::mt19937_64 rng(17);
    bool ok = true;
    for (const auto& utt : utts) {
        const int m = 1 + static_cast<int>(rng() % 6);
        const int n = 1 + static_cast<int>(rng() % m);
        const auto s1 = interleave::build_scheme1(utt.words, utt.frames, utt.alignment, m, n);
        const auto s2 = interleave::build_scheme2(utt.words, utt.frames, utt.alignment, m, n);
        if (interleave::strip_speech(s1) != utt.frames ||
            interleave::strip_speech(s2) != utt.frames) {
            ok = false;
            break;
        }
    }
    report(3, ok, "frame-conservation roundtrip on 500 utterances x random configs");
}

// -------------------------------------------------------------- criterion 4

void criterion4() {
    dmel::BinSpec spec{16, -23.025850929940457, 4.0};
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> inside(spec.lo, spec.hi);
    const double half_bin = (spec.hi - spec.lo) / (2.0 * spec.num_bins);
    bool ok = true;
    for (int b = 0; b < spec.num_bins && ok; ++b)
        ok = dmel::discretize_value(dmel::dequantize_bin(b, spec), spec) == b;
    double prev_v = spec.lo;
    int prev_b = 0;
    for (int i = 0; i < 100000 && ok; ++i) {
        const double v = inside(rng);
        const int b = dmel::discretize_value(v, spec);
        ok = b >= 0 && b < spec.num_bins &&
             std::abs(dmel::dequantize_bin(b, spec) - v) <= half_bin + 1e-12 &&
             (v >= prev_v ? b >= prev_b : b <= prev_b);
        prev_v = v;
        prev_b = b;
    }
    report(4, ok, "codec fixed point, half-bin bound, monotonicity over 1e5 values");
}

// -------------------------------------------------------------- criterion 5

template <typename T>
nn::Params<T> cast_params(const nn::ModelConfig& cfg, nn::Params<float>& src) {
    nn::Params<T> out = nn::zeros_like<T>(cfg);
    std::vector<nn::Tensor<T>*> dst;
    out.for_each_tensor([&](const std::string&, nn::Tensor<T>& t) { dst.push_back(&t); });
    size_t i = 0;
    src.for_each_tensor([&](const std::string&, nn::Tensor<float>& t) {
        for (size_t j = 0; j < t.data.size(); ++j) dst[i]->data[j] = static_cast<T>(t.data[j]);
        ++i;
    });
    return out;
}

std::vector<interleave::TokenSequence> gradcheck_batch(const corpus::CorpusSpec& cs) {
    corpus::CorpusSpec spec = cs;
    spec.num_utterances = 2;
    spec.seed = 29;
    const auto utts = corpus::generate_corpus(spec);
    std::vector<interleave::TokenSequence> batch;
    for (const auto& u : utts) batch.push_back(interleave::build(u, {Scheme::S1, 2, 1}));
    return batch;
}

template <typename T>
double batch_loss(const nn::ModelConfig& cfg, nn::Params<T>& params,
                  const std::vector<interleave::TokenSequence>& batch) {
    double total = 0.0;
    for (const auto& seq : batch) total += static_cast<double>(nn::loss_value(cfg, params, seq));
    return total / static_cast<double>(batch.size());
}

template <typename T>
nn::Params<T> batch_grads(const nn::ModelConfig& cfg, nn::Params<T>& params,
                          const std::vector<interleave::TokenSequence>& batch) {
    auto grads = nn::zeros_like<T>(cfg);
    for (const auto& seq : batch) {
        nn::Tape<T> tape;
        auto loss = nn::build_loss(tape, cfg, params, &grads, seq);
        tape.backward(loss);
    }
    grads.for_each_tensor([&](const std::string&, nn::Tensor<T>& t) {
        for (auto& v : t.data) v /= static_cast<T>(batch.size());
    });
    return grads;
}

// Max relative error vs central finite differences over a spread sample of
// parameters; the floor plays the role of an absolute tolerance for
// near-zero gradients (error <= rel_threshold * (|fd| + floor)).
template <typename T>
double gradcheck_max_rel(const nn::ModelConfig& cfg, nn::Params<T>& params,
                         const std::vector<interleave::TokenSequence>& batch, double h,
                         double floor, nn::Params<double>& fd_params) {
    auto grads = batch_grads(cfg, params, batch);
    std::vector<nn::Tensor<T>*> gt;
    grads.for_each_tensor([&](const std::string&, nn::Tensor<T>& t) { gt.push_back(&t); });
    std::vector<nn::Tensor<double>*> pt;
    fd_params.for_each_tensor([&](const std::string&, nn::Tensor<double>& t) { pt.push_back(&t); });

    std::mt19937_64 rng(31);
    double max_rel = 0.0;
    for (size_t ti = 0; ti < pt.size(); ++ti) {
        for (int rep = 0; rep < 5; ++rep) {
            const size_t j = rng() % pt[ti]->data.size();
            const double orig = pt[ti]->data[j];
            pt[ti]->data[j] = orig + h;
            const double up = batch_loss<double>(cfg, fd_params, batch);
            pt[ti]->data[j] = orig - h;
            const double down = batch_loss<double>(cfg, fd_params, batch);
            pt[ti]->data[j] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double a = static_cast<double>(gt[ti]->data[j]);
            max_rel = std::max(max_rel, std::abs(a - fd) / (std::abs(fd) + floor));
        }
    }
    return max_rel;
}

void criterion5() {
    const auto cs = tiny_corpus_spec();
    const auto cfg = model_for(cs, 2, 16, 2, 32);
    auto params32 = nn::init_params<float>(cfg, 41);
    auto params64 = cast_params<double>(cfg, params32);
    const auto batch = gradcheck_batch(cs);

    // The finite-difference oracle always runs in 64-bit.
    const double rel64 = gradcheck_max_rel<double>(cfg, params64, batch, 1e-5, 1e-4, params64);
    auto fd64 = cast_params<double>(cfg, params32);
    const double rel32 = gradcheck_max_rel<float>(cfg, params32, batch, 1e-4, 1e-2, fd64);

    std::ostringstream detail;
    detail << "max rel err 32-bit=" << rel32 << " (<1e-3), 64-bit=" << rel64 << " (<1e-6)";
    report(5, rel32 < 1e-3 && rel64 < 1e-6, "gradient check vs central finite differences",
           detail.str());
}

// -------------------------------------------------------------- criterion 6

std::vector<Token> random_tokens(const nn::ModelConfig& cfg, int len, std::mt19937_64& rng) {
    std::vector<Token> toks;
    for (int i = 0; i < len; ++i) {
        if (rng() % 2) {
            Token t{TokenKind::TextChar};
            t.ch = cfg.alphabet[rng() % cfg.alphabet.size()];
            toks.push_back(t);
        } else {
            Token t{TokenKind::SpeechFrame};
            t.frame.bins.resize(static_cast<size_t>(cfg.num_channels));
            for (auto& b : t.frame.bins) b = static_cast<uint8_t>(rng() % cfg.num_bins);
            toks.push_back(t);
        }
    }
    return toks;
}

void criterion6(const nn::ModelConfig& tiny_cfg, const nn::Params<float>& tiny_params,
                const std::vector<corpus::Utterance>& dev, const corpus::CorpusSpec& cs) {
    // (a) incremental forward equals full recomputation within 1e-5.
    const auto cfg = model_for(tiny_corpus_spec(), 2, 16, 2, 32);
    auto params = nn::init_params<float>(cfg, 53);
    std::mt19937_64 rng(59);
    bool equiv = true;
    double worst = 0.0;
    for (int iter = 0; iter < 100 && equiv; ++iter) {
        const int len = 4 + static_cast<int>(rng() % 16);
        const auto toks = random_tokens(cfg, len, rng);
        const auto full = nn::forward_full(cfg, params, toks);
        const int split = 1 + static_cast<int>(rng() % (len - 1));
        nn::KvCache<float> cache(cfg.num_layers);
        const auto a = nn::forward_incremental(
            cfg, params, {toks.begin(), toks.begin() + split}, cache);
        const auto b = nn::forward_incremental(
            cfg, params, {toks.begin() + split, toks.end()}, cache);
        auto cmp = [&](const nn::Tensor<float>& inc, long row_off, const nn::Tensor<float>& ref) {
            for (long p = 0; p < inc.rows; ++p)
                for (long j = 0; j < inc.cols; ++j) {
                    const double d = std::abs(static_cast<double>(inc.at(p, j)) -
                                              ref.at(p + row_off, j));
                    worst = std::max(worst, d);
                    if (d > 1e-5) equiv = false;
                }
        };
        cmp(a.chan_logits, 0, full.chan_logits);
        cmp(a.stop_logits, 0, full.stop_logits);
        cmp(b.chan_logits, split, full.chan_logits);
        cmp(b.stop_logits, split, full.stop_logits);
    }

    // (b) streaming greedy output identical to the offline-driven path on 50
    // toy utterances, using a briefly trained model so segments terminate.
    const corpus::TemplateTable templates(cs);
    bool stream_ok = true;
    int compared = 0;
    for (size_t u = 0; u < 50 && u < dev.size() && stream_ok; ++u) {
        engine::EngineConfig ecfg;
        ecfg.scheme = Scheme::S1;
        ecfg.m = 2;
        ecfg.n = 1;
        ecfg.silence_prompt_frames = 4;
        ecfg.silence_frame = templates.silence();
        ecfg.max_frames_per_segment = 256;
        try {
            engine::ModelDecoder d1(tiny_cfg, tiny_params);
            std::vector<engine::TimedWord> words;
            for (const auto& w : dev[u].words) words.push_back({w, 0.0});
            const auto streamed = engine::run_stream(d1, ecfg, words);
            engine::ModelDecoder d2(tiny_cfg, tiny_params);
            const auto offline = engine::offline_drive(d2, ecfg, dev[u].words);
            if (streamed.frames != offline) stream_ok = false;
            ++compared;
        } catch (const Error&) {
            stream_ok = false;
        }
    }
    std::ostringstream detail;
    detail << "max logit gap=" << worst << ", stream/offline exact on " << compared
           << " utterances";
    report(6, equiv && stream_ok && compared == 50,
           "kv-cache equivalence and stream/offline greedy identity", detail.str());
}

// -------------------------------------------------------------- criterion 7

struct ToyRun {
    nn::ModelConfig cfg;
    nn::Params<float> params;
};

corpus::CorpusSpec toy_corpus_spec() {
    corpus::CorpusSpec spec;
    spec.alphabet = "abcdefgh";
    spec.num_channels = 64;
    spec.num_bins = 16;
    spec.frames_per_char_base = 2;
    spec.rate_jitter = 1;
    spec.context_depth = 1;
    spec.num_utterances = 10000;
    spec.words_min = 4;
    spec.words_max = 4;
    spec.chars_min = 2;
    spec.chars_max = 3;
    spec.seed = 7;
    return spec;
}

ToyRun train_toy(const std::vector<corpus::Utterance>& utts, const corpus::CorpusSpec& cs,
                 Scheme scheme, int m, int n, long steps) {
    ToyRun run;
    run.cfg = model_for(cs, 3, 96, 4, 288);
    train::TrainConfig tc;
    tc.steps = steps;
    tc.warmup_steps = steps / 20;
    tc.batch = 8;
    tc.peak_lr = 3e-3;
    tc.seed = 71;
    tc.interleave = {scheme, m, n};
    run.params = train::train(utts, run.cfg, tc).params;
    return run;
}

double toy_cer(const ToyRun& run, const std::vector<corpus::Utterance>& dev,
               const corpus::CorpusSpec& cs, Scheme scheme, int m, int n) {
    const auto rows =
        train::evaluate(run.cfg, run.params, dev, cs, {{scheme, m, n}}, /*silence prompt*/ 0);
    return rows[0].cer;
}

void criterion7(ToyRun& s1_m3n1_out, std::vector<corpus::Utterance>& dev_out,
                corpus::CorpusSpec& cs_out) {
    const auto t0 = std::chrono::steady_clock::now();
    auto cs = toy_corpus_spec();
    const auto utts = corpus::generate_corpus(cs);
    auto dev_spec = cs;
    dev_spec.seed = 8;
    dev_spec.num_utterances = 50;
    const auto dev = corpus::generate_corpus(dev_spec);

    const long steps = 16000;
    auto m3n1 = train_toy(utts, cs, Scheme::S1, 3, 1, steps);
    const double cer_m3n1 = toy_cer(m3n1, dev, cs, Scheme::S1, 3, 1);
    auto m1n1 = train_toy(utts, cs, Scheme::S1, 1, 1, steps);
    const double cer_m1n1 = toy_cer(m1n1, dev, cs, Scheme::S1, 1, 1);
    auto s1_m3n2 = train_toy(utts, cs, Scheme::S1, 3, 2, steps);
    const double cer_s1_m3n2 = toy_cer(s1_m3n2, dev, cs, Scheme::S1, 3, 2);
    auto s2_m3n2 = train_toy(utts, cs, Scheme::S2, 3, 2, steps);
    const double cer_s2_m3n2 = toy_cer(s2_m3n2, dev, cs, Scheme::S2, 3, 2);

    const double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    std::ostringstream detail;
    detail.precision(4);
    detail << "CER(S1,3,1)=" << cer_m3n1 << " (<0.05), CER(S1,1,1)=" << cer_m1n1
           << " (>= +0.02), CER(S1,3,2)=" << cer_s1_m3n2 << " <= CER(S2,3,2)=" << cer_s2_m3n2
           << ", " << minutes << " min";
    const bool ok = cer_m3n1 < 0.05 && cer_m1n1 >= cer_m3n1 + 0.02 && cer_s1_m3n2 <= cer_s2_m3n2;
    report(7, ok, "end-to-end toy accuracy trends (lookahead helps; S1 <= S2)", detail.str());

    s1_m3n1_out = std::move(m3n1);
    dev_out = dev;
    cs_out = cs;
}

// -------------------------------------------------------------- criterion 8

void criterion8() {
    bool ok = true;
    for (int m = 1; m <= 6 && ok; ++m)
        for (int n = 1; n <= m && ok; ++n)
            for (int t = 1; t <= 10 && ok; ++t) {
                speakstream::testing::ScriptedDecoder decoder(4, 2);
                engine::EngineConfig cfg;
                cfg.scheme = Scheme::S1;
                cfg.m = m;
                cfg.n = n;
                cfg.silence_prompt_frames = 0;
                cfg.max_frames_per_segment = 64;
                engine::StreamingEngine eng(decoder, cfg);
                long first_frame_word = -1;
                long segments_done = 0;
                for (int w = 1; w <= t && ok; ++w) {
                    const auto events = eng.push_word("x");
                    for (const auto& ev : events) {
                        if (ev.kind == engine::EventKind::FirstFrameOut && first_frame_word < 0)
                            first_frame_word = w;
                        if (ev.kind == engine::EventKind::SegmentEos) ++segments_done;
                    }
                    // Segment i requires word n(i-1)+m: completed count law.
                    const long expect = w >= m ? (w - m) / n + 1 : 0;
                    if (segments_done != expect) ok = false;
                }
                eng.end_of_text();
                if (t >= m && first_frame_word != m) ok = false;
                if (t < m && first_frame_word != -1) ok = false;
            }

    // Rigged never-EOS model trips SegmentOverrun.
    bool overrun = false;
    try {
        speakstream::testing::ScriptedDecoder decoder(4, -1);
        engine::EngineConfig cfg;
        cfg.scheme = Scheme::S1;
        cfg.m = 1;
        cfg.n = 1;
        cfg.silence_prompt_frames = 0;
        cfg.max_frames_per_segment = 8;
        engine::StreamingEngine eng(decoder, cfg);
        eng.push_word("x");
    } catch (const Error& e) {
        overrun = e.code() == ErrorCode::SegmentOverrun;
    }
    report(8, ok && overrun, "streaming protocol laws and SegmentOverrun cap");
}

// -------------------------------------------------------------- criterion 9

void criterion9() {
    dmel::MelConfig mel;
    mel.sample_rate = 8000;
    mel.hop = 0.010;
    mel.window = 0.040;
    mel.num_channels = 16;
    mel.fmax = 4000.0;
    vocoder::VocoderConfig stream_cfg;
    stream_cfg.channel_expand = 24;
    vocoder::VocoderConfig buf_cfg = stream_cfg;
    buf_cfg.mode = vocoder::VocoderConfig::Mode::Buffered;
    buf_cfg.buffer_frames = 10;

    std::mt19937_64 rng(83);
    std::uniform_real_distribution<double> dist(-8.0, 1.0);
    std::vector<std::vector<double>> frames(15, std::vector<double>(16));
    for (auto& f : frames)
        for (auto& v : f) v = dist(rng);

    bool ok = true;
    {
        vocoder::StreamVocoder voc(mel, stream_cfg);
        ok = ok && !voc.push_frame(frames[0]).empty();  // first chunk after 1 frame
    }
    {
        vocoder::StreamVocoder voc(mel, buf_cfg);
        for (int i = 0; i < 9; ++i) ok = ok && voc.push_frame(frames[i]).empty();
        ok = ok && !voc.push_frame(frames[9]).empty();  // first chunk after exactly 10
    }
    {
        // Stream/offline sample-exact equality.
        dmel::MelFrameMatrix m;
        m.config = mel;
        m.frames = frames;
        vocoder::StreamVocoder voc(mel, stream_cfg);
        std::vector<float> streamed;
        for (const auto& f : frames) {
            const auto c = voc.push_frame(f);
            streamed.insert(streamed.end(), c.begin(), c.end());
        }
        ok = ok && streamed == vocoder::StreamVocoder::synthesize_all(mel, stream_cfg, m);
    }
    {
        // Causality: chunks already emitted are bit-identical regardless of
        // whether future frames get pushed (and regardless of their content).
        vocoder::StreamVocoder full(mel, stream_cfg);
        vocoder::StreamVocoder cut(mel, stream_cfg);
        for (int i = 0; i < 5; ++i) {
            const auto a = full.push_frame(frames[i]);
            const auto b = cut.push_frame(frames[i]);
            ok = ok && a == b;
        }
        full.push_frame(std::vector<double>(16, 3.0));  // divergent future
    }
    report(9, ok, "vocoder contract: 1-frame vs 10-frame first chunk, stream/offline, causality");
}

// ------------------------------------------------------------- criterion 10

void criterion10(const ToyRun& model, const std::vector<corpus::Utterance>& dev,
                 const corpus::CorpusSpec& cs) {
    const corpus::TemplateTable templates(cs);
    dmel::MelConfig mel;
    mel.sample_rate = 22050;
    mel.hop = 0.025;
    mel.window = 0.05;
    mel.num_channels = cs.num_channels;
    mel.fmax = 11025.0;
    dmel::BinSpec bins{cs.num_bins, std::log(1e-10), 0.0};

    engine::EngineConfig ecfg;
    ecfg.scheme = Scheme::S1;
    ecfg.m = 3;
    ecfg.n = 1;
    ecfg.silence_prompt_frames = 12;
    ecfg.silence_frame = templates.silence();
    ecfg.max_frames_per_segment = 512;

    std::vector<std::vector<std::string>> sentences;
    for (size_t i = 0; i < 10 && i < dev.size(); ++i) sentences.push_back(dev[i].words);

    vocoder::VocoderConfig stream_cfg;
    vocoder::VocoderConfig buf_cfg;
    buf_cfg.mode = vocoder::VocoderConfig::Mode::Buffered;
    buf_cfg.buffer_frames = 10;

    // Words arrive on a 50 ms cadence so the buffered vocoder actually has
    // to wait for frames spanning later words; with instantaneous arrival
    // every frame is queued before the vocoder runs and both modes collapse
    // to one synthesis call of wall-clock noise apart.
    const double word_delay_s = 0.05;
    const auto streaming = pipeline::bench_latency(model.cfg, model.params, ecfg, mel,
                                                   stream_cfg, bins, sentences, 1, word_delay_s);
    const auto buffered = pipeline::bench_latency(model.cfg, model.params, ecfg, mel,
                                                  buf_cfg, bins, sentences, 1, word_delay_s);

    bool ok = streaming.failures == 0 && buffered.failures == 0;
    // Ordering only: streaming first-chunk latency beats buffered.
    ok = ok && streaming.vocoder().mean < buffered.vocoder().mean;
    ok = ok && streaming.vocoder_frame_latency == 1 && buffered.vocoder_frame_latency == 10;
    // Report arithmetic: total decomposes into the measured stages.
    for (const auto& s : streaming.samples)
        ok = ok && std::abs(s.total - (s.tts + s.handoff + s.vocoder)) < 1e-6 &&
             s.total >= std::max(s.tts, s.vocoder);
    for (const auto& s : streaming.samples) ok = ok && s.words_waited == 3;

    // Silence-prompted synthesis starts speaking at frame 0 for >= 90%.
    int zero_first = 0, scored = 0;
    for (const auto& sentence : sentences) {
        try {
            engine::ModelDecoder decoder(model.cfg, model.params);
            std::vector<engine::TimedWord> words;
            for (const auto& w : sentence) words.push_back({w, 0.0});
            const auto run = engine::run_stream(decoder, ecfg, words);
            ++scored;
            if (pipeline::first_phoneme_check(run.frames, templates.silence()) == 0) ++zero_first;
        } catch (const Error&) {
        }
    }
    std::ostringstream detail;
    detail << "stream voc lat=" << streaming.vocoder().mean * 1e3
           << "ms < buffered=" << buffered.vocoder().mean * 1e3 << "ms, first-phoneme zero on "
           << zero_first << "/" << scored;
    ok = ok && scored > 0 && zero_first * 10 >= scored * 9;
    report(10, ok, "latency harness ordering, report arithmetic, first-phoneme check",
           detail.str());
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();

    // Train the tiny two-letter model once for the stream/offline oracle.
    const auto tiny_cs = tiny_corpus_spec();
    const auto tiny_utts = corpus::generate_corpus(tiny_cs);
    const auto tiny_cfg = model_for(tiny_cs, 2, 32, 2, 64);
    train::TrainConfig tiny_tc;
    tiny_tc.steps = 300;
    tiny_tc.warmup_steps = 30;
    tiny_tc.batch = 4;
    tiny_tc.seed = 61;
    tiny_tc.interleave = {Scheme::S1, 2, 1};
    const auto tiny_trained = train::train(tiny_utts, tiny_cfg, tiny_tc);
    auto dev_spec = tiny_cs;
    dev_spec.seed = 12;
    dev_spec.num_utterances = 50;
    const auto tiny_dev = corpus::generate_corpus(dev_spec);
    criterion6(tiny_cfg, tiny_trained.params, tiny_dev, tiny_cs);

    ToyRun toy;
    std::vector<corpus::Utterance> toy_dev;
    corpus::CorpusSpec toy_cs;
    criterion7(toy, toy_dev, toy_cs);
    criterion8();
    criterion9();
    criterion10(toy, toy_dev, toy_cs);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 10 criteria passed\n");
    return 0;
}
