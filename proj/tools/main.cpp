// Command-line entry point: corpus generation, bin fitting, interleave dumps,
// training, evaluation, streaming synthesis, gradient checks, and the latency
// benchmark. Driven by a JSON config file plus per-command flags; failures
// exit nonzero with a machine-readable error record on stderr.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "speakstream/corpus.hpp"
#include "speakstream/dmel.hpp"
#include "speakstream/engine.hpp"
#include "speakstream/interleave.hpp"
#include "speakstream/model.hpp"
#include "speakstream/pipeline.hpp"
#include "speakstream/trainer.hpp"
#include "speakstream/vocoder.hpp"

using json = nlohmann::json;
using namespace speakstream;
namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = ".";
    int64_t seed = -1;  // -1: keep config/default seeds
    json config = json::object();
};

json section(const json& cfg, const std::string& name) {
    return cfg.contains(name) ? cfg.at(name) : json::object();
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

interleave::Scheme parse_scheme(const std::string& s) {
    if (s == "S1") return interleave::Scheme::S1;
    if (s == "S2") return interleave::Scheme::S2;
    if (s == "NS") return interleave::Scheme::NonStreaming;
    throw Error(ErrorCode::InvalidConfig, "unknown scheme '" + s + "' (expected S1, S2, or NS)");
}

const char* scheme_name(interleave::Scheme s) {
    switch (s) {
        case interleave::Scheme::S1: return "S1";
        case interleave::Scheme::S2: return "S2";
        default: return "NS";
    }
}

corpus::CorpusSpec corpus_from(const GlobalArgs& g) {
    const json j = section(g.config, "corpus");
    corpus::CorpusSpec spec;
    spec.alphabet = get_or<std::string>(j, "alphabet", spec.alphabet);
    spec.frames_per_char_base = get_or(j, "frames_per_char_base", spec.frames_per_char_base);
    spec.rate_jitter = get_or(j, "rate_jitter", spec.rate_jitter);
    spec.context_depth = get_or(j, "context_depth", spec.context_depth);
    spec.num_utterances = get_or(j, "num_utterances", spec.num_utterances);
    spec.words_min = get_or(j, "words_min", spec.words_min);
    spec.words_max = get_or(j, "words_max", spec.words_max);
    spec.chars_min = get_or(j, "chars_min", spec.chars_min);
    spec.chars_max = get_or(j, "chars_max", spec.chars_max);
    spec.num_channels = get_or(j, "num_channels", spec.num_channels);
    spec.num_bins = get_or(j, "num_bins", spec.num_bins);
    spec.seed = get_or<uint64_t>(j, "seed", spec.seed);
    if (g.seed >= 0) spec.seed = static_cast<uint64_t>(g.seed);
    return spec;
}

nn::ModelConfig model_from(const GlobalArgs& g) {
    const json j = section(g.config, "model");
    nn::ModelConfig cfg;
    cfg.num_layers = get_or(j, "num_layers", cfg.num_layers);
    cfg.model_dim = get_or(j, "model_dim", cfg.model_dim);
    cfg.num_heads = get_or(j, "num_heads", cfg.num_heads);
    cfg.ffn_dim = get_or(j, "ffn_dim", cfg.ffn_dim);
    cfg.max_positions = get_or(j, "max_positions", cfg.max_positions);
    cfg.alphabet = get_or<std::string>(j, "alphabet", cfg.alphabet);
    cfg.num_channels = get_or(j, "num_channels", cfg.num_channels);
    cfg.num_bins = get_or(j, "num_bins", cfg.num_bins);
    return cfg;
}

train::TrainConfig train_from(const GlobalArgs& g) {
    const json j = section(g.config, "train");
    train::TrainConfig cfg;
    cfg.steps = get_or<long>(j, "steps", cfg.steps);
    cfg.warmup_steps = get_or<long>(j, "warmup_steps", cfg.warmup_steps);
    cfg.batch = get_or(j, "batch", cfg.batch);
    cfg.peak_lr = get_or(j, "peak_lr", cfg.peak_lr);
    cfg.grad_clip = get_or(j, "grad_clip", cfg.grad_clip);
    cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed);
    cfg.eval_every = get_or<long>(j, "eval_every", cfg.eval_every);
    const json il = section(g.config, "interleave");
    cfg.interleave.scheme = parse_scheme(get_or<std::string>(il, "scheme", "S1"));
    cfg.interleave.m = get_or(il, "m", cfg.interleave.m);
    cfg.interleave.n = get_or(il, "n", cfg.interleave.n);
    if (g.seed >= 0) cfg.seed = static_cast<uint64_t>(g.seed);
    return cfg;
}

dmel::MelConfig mel_from(const GlobalArgs& g) {
    const json j = section(g.config, "mel");
    dmel::MelConfig cfg;
    cfg.sample_rate = get_or(j, "sample_rate", cfg.sample_rate);
    cfg.hop = get_or(j, "hop", cfg.hop);
    cfg.window = get_or(j, "window", cfg.window);
    cfg.num_channels = get_or(j, "num_channels", cfg.num_channels);
    cfg.fmin = get_or(j, "fmin", cfg.fmin);
    cfg.fmax = get_or(j, "fmax", cfg.fmax);
    return cfg;
}

vocoder::VocoderConfig vocoder_from(const GlobalArgs& g) {
    const json j = section(g.config, "vocoder");
    vocoder::VocoderConfig cfg;
    const std::string mode = get_or<std::string>(j, "mode", "streaming");
    if (mode == "streaming") cfg.mode = vocoder::VocoderConfig::Mode::Streaming;
    else if (mode == "buffered") cfg.mode = vocoder::VocoderConfig::Mode::Buffered;
    else throw Error(ErrorCode::InvalidConfig, "vocoder mode must be streaming or buffered");
    cfg.buffer_frames = get_or(j, "buffer_frames", cfg.buffer_frames);
    cfg.upsample_factor = get_or(j, "upsample_factor", cfg.upsample_factor);
    cfg.channel_expand = get_or(j, "channel_expand", cfg.channel_expand);
    return cfg;
}

engine::EngineConfig engine_from(const GlobalArgs& g, const nn::ModelConfig& model) {
    const json j = section(g.config, "engine");
    const json il = section(g.config, "interleave");
    engine::EngineConfig cfg;
    cfg.scheme = parse_scheme(get_or<std::string>(il, "scheme", "S1"));
    cfg.m = get_or(il, "m", cfg.m);
    cfg.n = get_or(il, "n", cfg.n);
    cfg.max_frames_per_segment = get_or<long>(j, "max_frames_per_segment",
                                              cfg.max_frames_per_segment);
    cfg.silence_prompt_frames = get_or(j, "silence_prompt_frames", cfg.silence_prompt_frames);
    cfg.decode.temperature = get_or(j, "temperature", cfg.decode.temperature);
    cfg.decode.seed = get_or<uint64_t>(j, "decode_seed", cfg.decode.seed);
    if (g.seed >= 0) cfg.decode.seed = static_cast<uint64_t>(g.seed);
    if (cfg.silence_prompt_frames > 0) {
        // The silence template is the all-zero-bin frame shared with the
        // synthetic corpus generator.
        cfg.silence_frame.bins.assign(static_cast<size_t>(model.num_channels), 0);
    }
    return cfg;
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> words;
    for (std::string w; is >> w;) words.push_back(w);
    return words;
}

// Minimal PCM16 mono RIFF reader for fit-bins input.
std::pair<std::vector<double>, int> read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), {});
    if (bytes.size() < 44 || std::string(bytes.data(), 4) != "RIFF" ||
        std::string(bytes.data() + 8, 4) != "WAVE")
        throw Error(ErrorCode::IoError, path + " is not a RIFF/WAVE file");
    auto u16 = [&](size_t o) {
        return static_cast<uint16_t>(static_cast<uint8_t>(bytes[o]) |
                                     (static_cast<uint8_t>(bytes[o + 1]) << 8));
    };
    auto u32 = [&](size_t o) {
        uint32_t v = 0;
        for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<uint8_t>(bytes[o + static_cast<size_t>(k)]);
        return v;
    };
    int sample_rate = 0;
    std::vector<double> samples;
    size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const std::string id(bytes.data() + off, 4);
        const uint32_t len = u32(off + 4);
        if (id == "fmt ") {
            if (u16(off + 8) != 1 || u16(off + 10) != 1 || u16(off + 22) != 16)
                throw Error(ErrorCode::InvalidInput, path + ": only PCM16 mono is supported");
            sample_rate = static_cast<int>(u32(off + 12));
        } else if (id == "data") {
            for (size_t i = 0; i + 1 < len && off + 8 + i + 1 < bytes.size(); i += 2)
                samples.push_back(static_cast<int16_t>(u16(off + 8 + i)) / 32768.0);
        }
        off += 8 + len + (len & 1);
    }
    if (sample_rate == 0 || samples.empty())
        throw Error(ErrorCode::InvalidInput, path + ": missing fmt or data chunk");
    return {samples, sample_rate};
}

// ------------------------------------------------------------- subcommands

int cmd_gen_corpus(const GlobalArgs& g) {
    const auto spec = corpus_from(g);
    const auto utts = corpus::generate_corpus(spec);
    const std::string dir = (fs::path(g.out_dir) / "corpus").string();
    corpus::save_corpus(dir, utts, spec);
    long frames = 0;
    for (const auto& u : utts) frames += static_cast<long>(u.frames.size());
    std::printf("wrote %zu utterances (%ld frames) to %s\n", utts.size(), frames, dir.c_str());
    return 0;
}

int cmd_fit_bins(const GlobalArgs& g, const std::vector<std::string>& wav_paths, int num_bins) {
    const auto mel = mel_from(g);
    std::vector<dmel::MelFrameMatrix> matrices;
    for (const auto& path : wav_paths) {
        const auto [samples, rate] = read_wav(path);
        matrices.push_back(dmel::mel_spectrogram(samples, rate, mel));
    }
    const auto spec = dmel::fit_bin_spec(matrices, num_bins);
    const std::string out = (fs::path(g.out_dir) / "bins.json").string();
    dmel::save_bin_spec(out, spec);
    std::printf("fit %d bins over [%.6f, %.6f] from %zu file(s) -> %s\n", spec.num_bins, spec.lo,
                spec.hi, wav_paths.size(), out.c_str());
    return 0;
}

int cmd_interleave(const GlobalArgs& g, const std::string& corpus_dir, long index) {
    corpus::CorpusSpec spec;
    const auto utts = corpus::load_corpus(corpus_dir, &spec);
    const json il = section(g.config, "interleave");
    interleave::InterleaveConfig icfg;
    icfg.scheme = parse_scheme(get_or<std::string>(il, "scheme", "S1"));
    icfg.m = get_or(il, "m", icfg.m);
    icfg.n = get_or(il, "n", icfg.n);
    const long lo = index >= 0 ? index : 0;
    const long hi = index >= 0 ? index + 1 : static_cast<long>(utts.size());
    if (lo >= static_cast<long>(utts.size()))
        throw Error(ErrorCode::InvalidInput, "utterance index out of range");
    for (long i = lo; i < hi; ++i) {
        const auto seq = interleave::build(utts[static_cast<size_t>(i)], icfg);
        std::printf("# utterance %ld scheme %s m %d n %d\n", i, scheme_name(icfg.scheme), icfg.m,
                    icfg.n);
        std::fputs(interleave::dump(seq).c_str(), stdout);
    }
    return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& corpus_dir) {
    corpus::CorpusSpec spec;
    const auto utts = corpus::load_corpus(corpus_dir, &spec);
    auto model = model_from(g);
    if (!g.config.contains("model")) {
        model.alphabet = spec.alphabet;
        model.num_channels = spec.num_channels;
        model.num_bins = spec.num_bins;
    }
    const auto tc = train_from(g);
    std::printf("training %d layers x %d dim on %zu utterances for %ld steps (%s m=%d n=%d)\n",
                model.num_layers, model.model_dim, utts.size(), tc.steps,
                scheme_name(tc.interleave.scheme), tc.interleave.m, tc.interleave.n);
    const auto result = train::train(utts, model, tc);
    fs::create_directories(g.out_dir);
    const std::string ckpt = (fs::path(g.out_dir) / "model.ckpt").string();
    json meta = {{"steps", tc.steps},
                 {"scheme", scheme_name(tc.interleave.scheme)},
                 {"m", tc.interleave.m},
                 {"n", tc.interleave.n},
                 {"seed", tc.seed},
                 {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()}};
    auto params = result.params;
    nn::save_checkpoint(ckpt, model, params, meta.dump());
    const std::string trace = (fs::path(g.out_dir) / "loss_trace.csv").string();
    train::save_loss_trace(trace, result.loss_trace);
    std::printf("final loss %.6f; checkpoint %s; trace %s\n",
                result.loss_trace.empty() ? 0.0 : result.loss_trace.back(), ckpt.c_str(),
                trace.c_str());
    return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& checkpoint, const std::string& corpus_dir) {
    nn::ModelConfig model;
    const auto params = nn::load_checkpoint(checkpoint, model);
    corpus::CorpusSpec spec;
    const auto dev = corpus::load_corpus(corpus_dir, &spec);
    std::vector<train::EvalConfig> configs;
    if (g.config.contains("eval")) {
        for (const auto& e : g.config.at("eval"))
            configs.push_back({parse_scheme(e.at("scheme").get<std::string>()),
                               e.at("m").get<int>(), e.at("n").get<int>()});
    } else {
        const json il = section(g.config, "interleave");
        configs.push_back({parse_scheme(get_or<std::string>(il, "scheme", "S1")),
                           get_or(il, "m", 3), get_or(il, "n", 1)});
    }
    const json ej = section(g.config, "engine");
    const int silence = get_or(ej, "silence_prompt_frames", 0);
    nn::DecodeOptions dopts;
    dopts.temperature = get_or(ej, "temperature", dopts.temperature);
    dopts.seed = get_or<uint64_t>(ej, "decode_seed", dopts.seed);
    const auto rows = train::evaluate(model, params, dev, spec, configs, silence, dopts);
    fs::create_directories(g.out_dir);
    const std::string table = (fs::path(g.out_dir) / "cer_table.csv").string();
    train::save_eval_table(table, rows);
    for (const auto& row : rows)
        std::printf("%s m=%d n=%d  CER %.4f  failures %d\n", scheme_name(row.scheme), row.m,
                    row.n, row.cer, row.failures);
    std::printf("table written to %s\n", table.c_str());
    return 0;
}

int cmd_synth(const GlobalArgs& g, const std::string& checkpoint, const std::string& text_file,
              double word_delay, bool offline, bool wav) {
    nn::ModelConfig model;
    const auto params = nn::load_checkpoint(checkpoint, model);
    std::string text;
    if (text_file.empty()) {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        text = buf.str();
    } else {
        std::ifstream is(text_file);
        if (!is) throw Error(ErrorCode::IoError, "cannot open " + text_file);
        std::ostringstream buf;
        buf << is.rdbuf();
        text = buf.str();
    }
    const auto words = split_words(text);
    if (words.empty()) throw Error(ErrorCode::EmptyInput, "no input words");
    const auto ecfg = engine_from(g, model);

    fs::create_directories(g.out_dir);
    std::vector<dmel::DmelFrame> frames;
    const auto mel = mel_from(g);
    if (offline) {
        engine::ModelDecoder decoder(model, params, ecfg.decode);
        frames = engine::offline_drive(decoder, ecfg, words);
        std::printf("offline synthesis: %zu words -> %zu frames\n", words.size(), frames.size());
    } else {
        engine::ModelDecoder decoder(model, params, ecfg.decode);
        std::vector<engine::TimedWord> timed;
        for (const auto& w : words) timed.push_back({w, word_delay});
        const auto run = engine::run_stream(decoder, ecfg, timed);
        frames = run.frames;
        json report = {{"tts_latency_s", run.report.tts_latency},
                       {"words_waited", run.report.words_waited},
                       {"frames_emitted", run.report.frames_emitted},
                       {"segment_times_s", run.report.segment_times}};
        const std::string report_path = (fs::path(g.out_dir) / "synth_report.json").string();
        std::ofstream(report_path) << report.dump(2) << "\n";
        std::printf("streamed %zu words -> %zu frames; first-frame latency %.1f ms; report %s\n",
                    words.size(), frames.size(), run.report.tts_latency * 1e3,
                    report_path.c_str());
    }
    const std::string dump = (fs::path(g.out_dir) / "synth.dmel").string();
    dmel::save_frames(dump, frames, model.num_channels, model.num_bins, mel.hop);
    std::printf("frame dump %s\n", dump.c_str());

    if (wav) {
        dmel::BinSpec bins{model.num_bins, std::log(1e-10), 0.0};
        const json bj = section(g.config, "bins");
        bins.lo = get_or(bj, "lo", bins.lo);
        bins.hi = get_or(bj, "hi", bins.hi);
        auto mel_cfg = mel;
        mel_cfg.num_channels = model.num_channels;
        const auto matrix = dmel::dequantize(frames, bins, mel_cfg);
        const auto samples =
            vocoder::StreamVocoder::synthesize_all(mel_cfg, vocoder_from(g), matrix);
        const std::string wav_path = (fs::path(g.out_dir) / "synth.wav").string();
        vocoder::write_wav(wav_path, samples, mel_cfg.sample_rate);
        std::printf("waveform %s (%zu samples)\n", wav_path.c_str(), samples.size());
    }
    return 0;
}

int cmd_grad_check(const GlobalArgs& g) {
    // Small-model analytic-vs-finite-difference check; defaults sized to run
    // in seconds, overridable through the config file.
    nn::ModelConfig model = model_from(g);
    if (!g.config.contains("model")) {
        model.num_layers = 2;
        model.model_dim = 16;
        model.num_heads = 2;
        model.ffn_dim = 32;
        model.alphabet = "ab";
        model.num_channels = 4;
        model.num_bins = 4;
        model.max_positions = 256;
    }
    corpus::CorpusSpec cs = corpus_from(g);
    if (!g.config.contains("corpus")) {
        cs.alphabet = model.alphabet;
        cs.num_channels = model.num_channels;
        cs.num_bins = model.num_bins;
        cs.frames_per_char_base = 2;
        cs.words_min = 1;
        cs.words_max = 2;
        cs.chars_min = 1;
        cs.chars_max = 2;
    }
    cs.num_utterances = 2;
    const auto utts = corpus::generate_corpus(cs);
    std::vector<interleave::TokenSequence> batch;
    for (const auto& u : utts) batch.push_back(interleave::build(u, {}));

    auto p32 = nn::init_params<float>(model, g.seed >= 0 ? static_cast<uint64_t>(g.seed) : 41);
    auto p64 = nn::zeros_like<double>(model);
    {
        std::vector<nn::Tensor<double>*> dst;
        p64.for_each_tensor([&](const std::string&, nn::Tensor<double>& t) { dst.push_back(&t); });
        size_t i = 0;
        p32.for_each_tensor([&](const std::string&, nn::Tensor<float>& t) {
            for (size_t j = 0; j < t.data.size(); ++j) dst[i]->data[j] = t.data[j];
            ++i;
        });
    }
    auto batch_loss64 = [&]() {
        double total = 0.0;
        for (const auto& seq : batch) total += nn::loss_value(model, p64, seq);
        return total / static_cast<double>(batch.size());
    };
    auto check = [&]<typename T>(nn::Params<T>& params, double floor) {
        auto grads = nn::zeros_like<T>(model);
        for (const auto& seq : batch) {
            nn::Tape<T> tape;
            tape.backward(nn::build_loss(tape, model, params, &grads, seq));
        }
        grads.for_each_tensor([&](const std::string&, nn::Tensor<T>& t) {
            for (auto& v : t.data) v /= static_cast<T>(batch.size());
        });
        std::vector<nn::Tensor<T>*> gt;
        grads.for_each_tensor([&](const std::string&, nn::Tensor<T>& t) { gt.push_back(&t); });
        std::vector<nn::Tensor<double>*> pt;
        p64.for_each_tensor([&](const std::string&, nn::Tensor<double>& t) { pt.push_back(&t); });
        std::mt19937_64 rng(31);
        const double h = 1e-5;
        double max_rel = 0.0;
        for (size_t ti = 0; ti < pt.size(); ++ti)
            for (int rep = 0; rep < 4; ++rep) {
                const size_t j = rng() % pt[ti]->data.size();
                const double orig = pt[ti]->data[j];
                pt[ti]->data[j] = orig + h;
                const double up = batch_loss64();
                pt[ti]->data[j] = orig - h;
                const double down = batch_loss64();
                pt[ti]->data[j] = orig;
                const double fd = (up - down) / (2.0 * h);
                const double a = static_cast<double>(gt[ti]->data[j]);
                max_rel = std::max(max_rel, std::abs(a - fd) / (std::abs(fd) + floor));
            }
        return max_rel;
    };
    const double rel64 = check(p64, 1e-4);
    const double rel32 = check(p32, 1e-2);
    std::printf("max relative gradient error: 32-bit %.3e (threshold 1e-3), 64-bit %.3e "
                "(threshold 1e-6)\n",
                rel32, rel64);
    if (rel32 >= 1e-3 || rel64 >= 1e-6)
        throw Error(ErrorCode::NumericalError, "gradient check exceeded threshold");
    std::printf("gradient check passed\n");
    return 0;
}

int cmd_bench_latency(const GlobalArgs& g, const std::string& checkpoint,
                      const std::string& corpus_dir, const std::string& text_file,
                      int num_sentences, int runs, double word_delay) {
    nn::ModelConfig model;
    const auto params = nn::load_checkpoint(checkpoint, model);
    std::vector<std::vector<std::string>> sentences;
    if (!text_file.empty()) {
        std::ifstream is(text_file);
        if (!is) throw Error(ErrorCode::IoError, "cannot open " + text_file);
        for (std::string line; std::getline(is, line);) {
            const auto words = split_words(line);
            if (!words.empty()) sentences.push_back(words);
        }
    } else if (!corpus_dir.empty()) {
        const auto utts = corpus::load_corpus(corpus_dir);
        for (size_t i = 0; i < utts.size() && static_cast<int>(sentences.size()) < num_sentences;
             ++i)
            sentences.push_back(utts[i].words);
    } else {
        throw Error(ErrorCode::InvalidInput, "bench-latency needs --corpus or --text-file");
    }
    if (sentences.empty()) throw Error(ErrorCode::EmptyInput, "no bench sentences");

    const auto ecfg = engine_from(g, model);
    auto mel = mel_from(g);
    mel.num_channels = model.num_channels;
    dmel::BinSpec bins{model.num_bins, std::log(1e-10), 0.0};
    const json bj = section(g.config, "bins");
    bins.lo = get_or(bj, "lo", bins.lo);
    bins.hi = get_or(bj, "hi", bins.hi);
    const auto vcfg = vocoder_from(g);

    const auto report = pipeline::bench_latency(model, params, ecfg, mel, vcfg, bins, sentences,
                                                runs, word_delay);
    const auto tts = report.tts();
    const auto voc = report.vocoder();
    const auto total = report.total();
    std::printf("runs %zu, failures %d, vocoder frame latency %d frame(s)\n",
                report.samples.size(), report.failures, report.vocoder_frame_latency);
    std::printf("tts     %8.2f ms +/- %.2f\n", tts.mean * 1e3, tts.stddev * 1e3);
    std::printf("vocoder %8.2f ms +/- %.2f\n", voc.mean * 1e3, voc.stddev * 1e3);
    std::printf("total   %8.2f ms +/- %.2f\n", total.mean * 1e3, total.stddev * 1e3);

    fs::create_directories(g.out_dir);
    const std::string csv = (fs::path(g.out_dir) / "latency.csv").string();
    std::ofstream os(csv);
    os << "tts_s,handoff_s,vocoder_s,total_s,frames,words_waited\n";
    for (const auto& s : report.samples)
        os << s.tts << "," << s.handoff << "," << s.vocoder << "," << s.total << "," << s.frames
           << "," << s.words_waited << "\n";
    std::printf("per-run samples written to %s\n", csv.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    GlobalArgs g;
    CLI::App app{"streaming interleaved text-to-speech toolkit"};
    app.require_subcommand(1);
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "override RNG seeds");
    app.add_option("--out-dir", g.out_dir, "output directory");

    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");

    std::vector<std::string> wav_paths;
    int fit_bins_count = 16;
    auto* fit = app.add_subcommand("fit-bins", "fit quantizer bins over wav files");
    fit->add_option("wavs", wav_paths, "PCM16 mono wav files")->required();
    fit->add_option("--bins", fit_bins_count, "number of bins");

    std::string il_corpus;
    long il_index = -1;
    auto* il = app.add_subcommand("interleave", "dump interleaved token sequences");
    il->add_option("--corpus", il_corpus, "corpus directory")->required();
    il->add_option("--utterance", il_index, "single utterance index (default: all)");

    std::string train_corpus;
    auto* tr = app.add_subcommand("train", "train a model on a corpus");
    tr->add_option("--corpus", train_corpus, "corpus directory")->required();

    std::string eval_ckpt, eval_corpus;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint via streaming synthesis");
    ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    ev->add_option("--corpus", eval_corpus, "dev corpus directory")->required();

    std::string synth_ckpt, synth_text;
    double word_delay = 0.0;
    bool offline = false, emit_wav = false;
    auto* sy = app.add_subcommand("synth", "synthesize speech frames from text");
    sy->add_option("--checkpoint", synth_ckpt, "model checkpoint")->required();
    sy->add_option("--text-file", synth_text, "input text file (default: stdin)");
    sy->add_option("--word-delay", word_delay, "seconds between word arrivals");
    sy->add_flag("--offline", offline, "run the offline equivalence path");
    sy->add_flag("--wav", emit_wav, "also vocode to a wav file");

    auto* gc = app.add_subcommand("grad-check", "verify gradients against finite differences");

    std::string bench_ckpt, bench_corpus, bench_text;
    int bench_sentences = 10, bench_runs = 3;
    double bench_word_delay = 0.0;
    auto* bl = app.add_subcommand("bench-latency", "measure pipeline first-chunk latency");
    bl->add_option("--checkpoint", bench_ckpt, "model checkpoint")->required();
    bl->add_option("--corpus", bench_corpus, "corpus directory to sample sentences from");
    bl->add_option("--text-file", bench_text, "file with one sentence per line");
    bl->add_option("--sentences", bench_sentences, "number of corpus sentences");
    bl->add_option("--runs", bench_runs, "runs per sentence");
    bl->add_option("--word-delay", bench_word_delay, "seconds between word arrivals");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!g.config_path.empty()) {
            std::ifstream is(g.config_path);
            if (!is) throw Error(ErrorCode::IoError, "cannot open config " + g.config_path);
            is >> g.config;
        }
        if (gen->parsed()) return cmd_gen_corpus(g);
        if (fit->parsed()) return cmd_fit_bins(g, wav_paths, fit_bins_count);
        if (il->parsed()) return cmd_interleave(g, il_corpus, il_index);
        if (tr->parsed()) return cmd_train(g, train_corpus);
        if (ev->parsed()) return cmd_eval(g, eval_ckpt, eval_corpus);
        if (sy->parsed())
            return cmd_synth(g, synth_ckpt, synth_text, word_delay, offline, emit_wav);
        if (gc->parsed()) return cmd_grad_check(g);
        if (bl->parsed())
            return cmd_bench_latency(g, bench_ckpt, bench_corpus, bench_text, bench_sentences,
                                     bench_runs, bench_word_delay);
    } catch (const Error& e) {
        const json rec = {{"error", {{"code", error_code_name(e.code())},
                                     {"message", e.what()}}}};
        std::cerr << rec.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        const json rec = {{"error", {{"code", "Unhandled"}, {"message", e.what()}}}};
        std::cerr << rec.dump() << "\n";
        return 1;
    }
    return 0;
}
