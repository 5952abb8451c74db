#include "speakstream/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace speakstream::train {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void TrainConfig::validate() const {
    if (steps < warmup_steps || warmup_steps < 0)
        throw Error(ErrorCode::InvalidConfig, "need steps >= warmup_steps >= 0");
    if (peak_lr <= 0.0) throw Error(ErrorCode::InvalidConfig, "peak_lr must be > 0");
    if (grad_clip <= 0.0) throw Error(ErrorCode::InvalidConfig, "grad_clip must be > 0");
    if (batch < 1) throw Error(ErrorCode::InvalidConfig, "batch must be >= 1");
    interleave.validate();
}

double lr_at(const TrainConfig& cfg, long step) {
    if (step < 0 || step > cfg.steps)
        throw Error(ErrorCode::InvalidInput, "step outside [0, steps]");
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    if (step == 0) return 0.0;
    const double progress = cfg.steps == cfg.warmup_steps
                                ? 1.0
                                : static_cast<double>(step - cfg.warmup_steps) /
                                      static_cast<double>(cfg.steps - cfg.warmup_steps);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(kPi * progress));
}

TrainResult train(const std::vector<corpus::Utterance>& utterances,
                  const nn::ModelConfig& model_cfg, const TrainConfig& cfg) {
    cfg.validate();
    model_cfg.validate();
    if (utterances.empty()) throw Error(ErrorCode::EmptyInput, "empty training corpus");

    TrainResult result;
    result.params = nn::init_params<float>(model_cfg, cfg.seed);

    // Pre-built sequences: one fixed (scheme, m, n) per run.
    std::vector<interleave::TokenSequence> seqs;
    seqs.reserve(utterances.size());
    for (const auto& u : utterances) seqs.push_back(interleave::build(u, cfg.interleave));

    // Adam state.
    nn::Params<float> m_state = nn::zeros_like<float>(model_cfg);
    nn::Params<float> v_state = nn::zeros_like<float>(model_cfg);
    nn::Params<float> grads = nn::zeros_like<float>(model_cfg);

    std::vector<nn::Tensor<float>*> pt, mt, vt, gt;
    result.params.for_each_tensor([&](const std::string&, nn::Tensor<float>& t) { pt.push_back(&t); });
    m_state.for_each_tensor([&](const std::string&, nn::Tensor<float>& t) { mt.push_back(&t); });
    v_state.for_each_tensor([&](const std::string&, nn::Tensor<float>& t) { vt.push_back(&t); });
    grads.for_each_tensor([&](const std::string&, nn::Tensor<float>& t) { gt.push_back(&t); });

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(utterances.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();  // force an initial shuffle

    for (long step = 1; step <= cfg.steps; ++step) {
        for (auto* g : gt) std::fill(g->data.begin(), g->data.end(), 0.0f);

        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const auto& seq = seqs[order[cursor++]];
            nn::Tape<float> tape;
            auto loss = nn::build_loss(tape, model_cfg, result.params, &grads, seq);
            batch_loss += loss->val.data[0];
            tape.backward(loss);
        }
        batch_loss /= cfg.batch;
        if (!std::isfinite(batch_loss))
            throw Error(ErrorCode::NumericalError,
                        "non-finite loss at step " + std::to_string(step));
        result.loss_trace.push_back(batch_loss);

        // Mean gradient, then global-norm clipping.
        double sq = 0.0;
        for (auto* g : gt)
            for (float& v : g->data) {
                v /= static_cast<float>(cfg.batch);
                sq += static_cast<double>(v) * v;
            }
        const double norm = std::sqrt(sq);
        const double clip_scale = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
        result.grad_norms.push_back(std::min(norm, norm * clip_scale));

        const double lr = lr_at(cfg, step);
        const double bc1 = 1.0 - std::pow(cfg.beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step);
        for (size_t i = 0; i < pt.size(); ++i) {
            auto& p = pt[i]->data;
            auto& m = mt[i]->data;
            auto& v = vt[i]->data;
            auto& g = gt[i]->data;
            for (size_t j = 0; j < p.size(); ++j) {
                const double gj = g[j] * clip_scale;
                m[j] = static_cast<float>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj);
                v[j] = static_cast<float>(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
            }
        }
    }
    return result;
}

std::vector<EvalRow> evaluate(const nn::ModelConfig& model_cfg, const nn::Params<float>& params,
                              const std::vector<corpus::Utterance>& dev,
                              const corpus::CorpusSpec& corpus_spec,
                              const std::vector<EvalConfig>& configs,
                              int silence_prompt_frames, const nn::DecodeOptions& decode) {
    if (dev.empty()) throw Error(ErrorCode::EmptyInput, "empty dev corpus");
    const corpus::TemplateTable templates(corpus_spec);

    std::vector<EvalRow> rows;
    for (const auto& ec : configs) {
        EvalRow row;
        row.scheme = ec.scheme;
        row.m = ec.m;
        row.n = ec.n;
        double total_cer = 0.0;
        int scored = 0;
        for (const auto& utt : dev) {
            try {
                engine::EngineConfig cfg;
                cfg.scheme = ec.scheme;
                cfg.m = ec.m;
                cfg.n = ec.n;
                cfg.silence_prompt_frames = silence_prompt_frames;
                cfg.silence_frame = templates.silence();
                cfg.max_frames_per_segment =
                    20L * corpus_spec.frames_per_char_base * corpus_spec.chars_max * ec.m;
                cfg.decode = decode;
                engine::ModelDecoder decoder(model_cfg, params, decode);
                std::vector<engine::TimedWord> words;
                for (const auto& w : utt.words) words.push_back({w, 0.0});
                const auto run = engine::run_stream(decoder, cfg, words);

                std::string hyp;
                try {
                    hyp = corpus::oracle_decode(run.frames, corpus_spec);
                } catch (const Error&) {
                    // Off-length or empty output; retry with slack, then give
                    // up and score as fully wrong rather than excluding.
                    try {
                        hyp = corpus::oracle_decode(run.frames, corpus_spec,
                                                    corpus_spec.frames_per_char_base);
                    } catch (const Error&) {
                        hyp.clear();
                    }
                }
                total_cer += corpus::cer(utt.text(), hyp);
                ++scored;
            } catch (const Error&) {
                ++row.failures;
            }
        }
        row.cer = scored > 0 ? total_cer / scored : 1.0;
        rows.push_back(row);
    }
    return rows;
}

void save_loss_trace(const std::string& path, const std::vector<double>& trace) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    os << "step,loss\n";
    for (size_t i = 0; i < trace.size(); ++i) os << (i + 1) << "," << trace[i] << "\n";
}

void save_eval_table(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    os << "scheme,m,n,cer,failures\n";
    for (const auto& r : rows) {
        os << (r.scheme == interleave::Scheme::S1 ? "S1" : "S2") << "," << r.m << "," << r.n
           << "," << r.cer << "," << r.failures << "\n";
    }
}

}  // namespace speakstream::train
