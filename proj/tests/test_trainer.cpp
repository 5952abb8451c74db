#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "speakstream/trainer.hpp"

using namespace speakstream;
using namespace speakstream::train;

namespace {

corpus::CorpusSpec tiny_corpus_spec() {
    corpus::CorpusSpec spec;
    spec.alphabet = "ab";
    spec.num_channels = 4;  // 2*4-1 >= 2*3
    spec.num_bins = 4;
    spec.frames_per_char_base = 2;
    spec.words_min = 1;
    spec.words_max = 2;
    spec.chars_min = 1;
    spec.chars_max = 2;
    spec.num_utterances = 6;
    spec.seed = 5;
    return spec;
}

nn::ModelConfig tiny_model(const corpus::CorpusSpec& cs) {
    nn::ModelConfig cfg;
    cfg.num_layers = 1;
    cfg.model_dim = 16;
    cfg.num_heads = 2;
    cfg.ffn_dim = 32;
    cfg.max_positions = 256;
    cfg.alphabet = cs.alphabet;
    cfg.num_channels = cs.num_channels;
    cfg.num_bins = cs.num_bins;
    return cfg;
}

TrainConfig tiny_train(long steps) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.warmup_steps = std::min<long>(5, steps);
    cfg.batch = 2;
    cfg.seed = 3;
    cfg.interleave = {interleave::Scheme::S1, 2, 1};
    return cfg;
}

}  // namespace

TEST_CASE("learning-rate schedule frozen values") {
    TrainConfig cfg;
    cfg.steps = 300;
    cfg.warmup_steps = 100;
    cfg.peak_lr = 1e-3;
    CHECK(lr_at(cfg, 0) == 0.0);
    CHECK(lr_at(cfg, 50) == doctest::Approx(5e-4));
    CHECK(lr_at(cfg, 100) == doctest::Approx(1e-3));
    CHECK(lr_at(cfg, 200) == doctest::Approx(5e-4));  // cosine midpoint
    CHECK(lr_at(cfg, 300) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(lr_at(cfg, -1), Error);
    CHECK_THROWS_AS(lr_at(cfg, 301), Error);
}

TEST_CASE("schedule peaks once at warmup and never increases afterward") {
    TrainConfig cfg;
    cfg.steps = 200;
    cfg.warmup_steps = 40;
    double prev = lr_at(cfg, cfg.warmup_steps);
    for (long s = cfg.warmup_steps + 1; s <= cfg.steps; ++s) {
        const double lr = lr_at(cfg, s);
        CHECK(lr <= prev + 1e-15);
        CHECK(lr <= cfg.peak_lr);
        prev = lr;
    }
    for (long s = 0; s < cfg.warmup_steps; ++s) CHECK(lr_at(cfg, s) < cfg.peak_lr);
}

TEST_CASE("training config validation") {
    TrainConfig cfg = tiny_train(10);
    CHECK_NOTHROW(cfg.validate());
    cfg.warmup_steps = 20;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = tiny_train(10);
    cfg.peak_lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = tiny_train(10);
    cfg.grad_clip = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto cs = tiny_corpus_spec();
    const auto utts = corpus::generate_corpus(cs);
    const auto mc = tiny_model(cs);
    const auto tc = tiny_train(4);
    const auto a = train::train(utts, mc, tc);
    const auto b = train::train(utts, mc, tc);
    CHECK(a.loss_trace == b.loss_trace);
    std::vector<const nn::Tensor<float>*> ta, tb;
    const_cast<nn::Params<float>&>(a.params).for_each_tensor(
        [&](const std::string&, nn::Tensor<float>& t) { ta.push_back(&t); });
    const_cast<nn::Params<float>&>(b.params).for_each_tensor(
        [&](const std::string&, nn::Tensor<float>& t) { tb.push_back(&t); });
    for (size_t i = 0; i < ta.size(); ++i) CHECK(ta[i]->data == tb[i]->data);
}

TEST_CASE("loss decreases and gradient norms respect the clip bound") {
    const auto cs = tiny_corpus_spec();
    const auto utts = corpus::generate_corpus(cs);
    const auto result = train::train(utts, tiny_model(cs), tiny_train(60));
    REQUIRE(result.loss_trace.size() == 60);
    CHECK(result.loss_trace.back() < result.loss_trace.front());
    for (double g : result.grad_norms) CHECK(g <= 1.0 + 1e-6);
}

TEST_CASE("evaluation scores ground-truth frames at zero error") {
    auto cs = tiny_corpus_spec();
    cs.rate_jitter = 0;
    const auto utts = corpus::generate_corpus(cs);
    // Decoding the generator's own frames through the oracle is exact.
    for (const auto& utt : utts) {
        CHECK(corpus::cer(utt.text(), corpus::oracle_decode(utt.frames, cs)) == 0.0);
    }
}

TEST_CASE("evaluate runs the streaming engine per config") {
    const auto cs = tiny_corpus_spec();
    const auto utts = corpus::generate_corpus(cs);
    const auto mc = tiny_model(cs);
    // A barely-trained model still produces a full, well-formed table.
    const auto result = train::train(utts, mc, tiny_train(8));
    const std::vector<EvalConfig> configs = {{interleave::Scheme::S1, 2, 1},
                                             {interleave::Scheme::S2, 2, 1}};
    const auto rows = evaluate(mc, result.params, {utts.begin(), utts.begin() + 2}, cs, configs);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.cer >= 0.0);
        CHECK(row.failures >= 0);
    }
    CHECK_THROWS_AS(evaluate(mc, result.params, {}, cs, configs), Error);
}

TEST_CASE("loss trace and eval table files are well-formed") {
    const std::string trace_path = "/tmp/speakstream_test_trace.csv";
    const std::string table_path = "/tmp/speakstream_test_table.csv";
    save_loss_trace(trace_path, {2.5, 1.5, 1.0});
    save_eval_table(table_path, {{interleave::Scheme::S1, 3, 1, 0.02, 0}});
    std::ifstream trace(trace_path);
    std::string line;
    std::getline(trace, line);
    CHECK(line == "step,loss");
    std::getline(trace, line);
    CHECK(line == "1,2.5");
    std::ifstream table(table_path);
    std::getline(table, line);
    CHECK(line == "scheme,m,n,cer,failures");
    std::getline(table, line);
    CHECK(line.substr(0, 7) == "S1,3,1,");
    std::remove(trace_path.c_str());
    std::remove(table_path.c_str());
}
