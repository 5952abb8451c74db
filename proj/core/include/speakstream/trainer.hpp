#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speakstream/corpus.hpp"
#include "speakstream/engine.hpp"
#include "speakstream/interleave.hpp"
#include "speakstream/model.hpp"

namespace speakstream::train {

struct TrainConfig {
    long steps = 2000;
    long warmup_steps = 200;
    int batch = 8;
    double peak_lr = 1e-3;
    double grad_clip = 1.0;
    uint64_t seed = 0;
    interleave::InterleaveConfig interleave;
    long eval_every = 0;  // 0 disables periodic loss reporting

    // Adam moments; conventional defaults, recorded in checkpoint metadata.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// Linear warmup to peak_lr, then cosine decay to zero at the final step.
double lr_at(const TrainConfig& cfg, long step);

struct TrainResult {
    nn::Params<float> params;
    std::vector<double> loss_trace;  // per step
    std::vector<double> grad_norms;  // post-clip global norm per step
};

TrainResult train(const std::vector<corpus::Utterance>& utterances,
                  const nn::ModelConfig& model_cfg, const TrainConfig& cfg);

struct EvalConfig {
    interleave::Scheme scheme;
    int m;
    int n;
};

struct EvalRow {
    interleave::Scheme scheme;
    int m = 0;
    int n = 0;
    double cer = 0.0;
    int failures = 0;  // utterances excluded due to engine errors
};

// Runs streaming synthesis per dev utterance, decodes the frames with the
// corpus oracle, and reports mean CER per configuration.
std::vector<EvalRow> evaluate(const nn::ModelConfig& model_cfg, const nn::Params<float>& params,
                              const std::vector<corpus::Utterance>& dev,
                              const corpus::CorpusSpec& corpus_spec,
                              const std::vector<EvalConfig>& configs,
                              int silence_prompt_frames = 0,
                              const nn::DecodeOptions& decode = {});

void save_loss_trace(const std::string& path, const std::vector<double>& trace);
void save_eval_table(const std::string& path, const std::vector<EvalRow>& rows);

}  // namespace speakstream::train
