#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "speakstream/interleave.hpp"
#include "speakstream/tensor.hpp"

namespace speakstream::nn {

using interleave::Token;
using interleave::TokenKind;
using interleave::TokenSequence;

struct ModelConfig {
    int num_layers = 4;
    int model_dim = 128;
    int num_heads = 4;
    int ffn_dim = 512;
    int max_positions = 1024;
    std::string alphabet = "abcdefgh";
    int num_channels = 64;
    int num_bins = 16;

    // Character ids are alphabet indices; the five specials follow.
    int vocab() const { return static_cast<int>(alphabet.size()) + 5; }
    int sep_id() const { return static_cast<int>(alphabet.size()); }
    int text_bos_id() const { return static_cast<int>(alphabet.size()) + 1; }
    int text_eos_id() const { return static_cast<int>(alphabet.size()) + 2; }
    int speech_bos_id() const { return static_cast<int>(alphabet.size()) + 3; }
    int speech_eos_id() const { return static_cast<int>(alphabet.size()) + 4; }
    int head_dim() const { return model_dim / num_heads; }

    void validate() const {
        if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0)
            throw Error(ErrorCode::InvalidConfig, "model_dim must divide by num_heads");
        if (num_layers < 1 || ffn_dim < 1 || max_positions < 1 || num_channels < 1 ||
            num_bins < 2 || alphabet.empty())
            throw Error(ErrorCode::InvalidConfig, "all model dimensions must be positive");
    }

    int text_id(const Token& tok) const {
        switch (tok.kind) {
            case TokenKind::TextChar: {
                const auto pos = alphabet.find(tok.ch);
                if (pos == std::string::npos)
                    throw Error(ErrorCode::InvalidToken, "character outside alphabet");
                return static_cast<int>(pos);
            }
            case TokenKind::WordSep: return sep_id();
            case TokenKind::TextBos: return text_bos_id();
            case TokenKind::TextEos: return text_eos_id();
            case TokenKind::SpeechBos: return speech_bos_id();
            case TokenKind::SpeechEos: return speech_eos_id();
            default:
                throw Error(ErrorCode::InvalidToken, "not a table-embedded token");
        }
    }
};

template <typename T>
struct LayerParams {
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln2_g, ln2_b;
    Tensor<T> w_ff1, b_ff1, w_ff2, b_ff2;
};

template <typename T>
struct Params {
    Tensor<T> text_embed;  // [vocab, D]
    Tensor<T> bin_embed;   // [C*B, D]; frame embedding is the channel sum
    Tensor<T> pos_embed;   // [max_positions, D]
    std::vector<LayerParams<T>> layers;
    Tensor<T> ln_f_g, ln_f_b;
    Tensor<T> head_chan, head_chan_b;  // [D, C*B]
    Tensor<T> head_stop, head_stop_b;  // [D, 2]

    template <typename F>
    void for_each_tensor(F&& f) {
        f("text_embed", text_embed);
        f("bin_embed", bin_embed);
        f("pos_embed", pos_embed);
        for (size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            auto& lp = layers[l];
            f(p + "ln1_g", lp.ln1_g); f(p + "ln1_b", lp.ln1_b);
            f(p + "wq", lp.wq); f(p + "bq", lp.bq);
            f(p + "wk", lp.wk); f(p + "bk", lp.bk);
            f(p + "wv", lp.wv); f(p + "bv", lp.bv);
            f(p + "wo", lp.wo); f(p + "bo", lp.bo);
            f(p + "ln2_g", lp.ln2_g); f(p + "ln2_b", lp.ln2_b);
            f(p + "w_ff1", lp.w_ff1); f(p + "b_ff1", lp.b_ff1);
            f(p + "w_ff2", lp.w_ff2); f(p + "b_ff2", lp.b_ff2);
        }
        f("ln_f_g", ln_f_g);
        f("ln_f_b", ln_f_b);
        f("head_chan", head_chan); f("head_chan_b", head_chan_b);
        f("head_stop", head_stop); f("head_stop_b", head_stop_b);
    }
};

template <typename T>
Params<T> init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    auto randn = [&](long r, long c) {
        Tensor<T> t(r, c);
        for (auto& v : t.data) v = static_cast<T>(dist(rng));
        return t;
    };
    auto ones = [&](long c) {
        Tensor<T> t(1, c);
        for (auto& v : t.data) v = T(1);
        return t;
    };
    const long d = cfg.model_dim, f = cfg.ffn_dim;
    Params<T> p;
    p.text_embed = randn(cfg.vocab(), d);
    p.bin_embed = randn(static_cast<long>(cfg.num_channels) * cfg.num_bins, d);
    p.pos_embed = randn(cfg.max_positions, d);
    p.layers.resize(static_cast<size_t>(cfg.num_layers));
    for (auto& lp : p.layers) {
        lp.ln1_g = ones(d); lp.ln1_b = Tensor<T>(1, d);
        lp.wq = randn(d, d); lp.bq = Tensor<T>(1, d);
        lp.wk = randn(d, d); lp.bk = Tensor<T>(1, d);
        lp.wv = randn(d, d); lp.bv = Tensor<T>(1, d);
        lp.wo = randn(d, d); lp.bo = Tensor<T>(1, d);
        lp.ln2_g = ones(d); lp.ln2_b = Tensor<T>(1, d);
        lp.w_ff1 = randn(d, f); lp.b_ff1 = Tensor<T>(1, f);
        lp.w_ff2 = randn(f, d); lp.b_ff2 = Tensor<T>(1, d);
    }
    p.ln_f_g = ones(d); p.ln_f_b = Tensor<T>(1, d);
    p.head_chan = randn(d, static_cast<long>(cfg.num_channels) * cfg.num_bins);
    p.head_chan_b = Tensor<T>(1, static_cast<long>(cfg.num_channels) * cfg.num_bins);
    p.head_stop = randn(d, 2);
    p.head_stop_b = Tensor<T>(1, 2);
    return p;
}

// Embedding row groups for one token: text-table rows and bin-table rows.
template <typename T>
void embed_groups(const ModelConfig& cfg, const Token& tok, std::vector<long>& text_rows,
                  std::vector<long>& bin_rows) {
    text_rows.clear();
    bin_rows.clear();
    if (tok.kind == TokenKind::SpeechFrame) {
        if (static_cast<int>(tok.frame.bins.size()) != cfg.num_channels)
            throw Error(ErrorCode::InvalidToken, "frame channel count mismatch");
        for (int c = 0; c < cfg.num_channels; ++c) {
            if (tok.frame.bins[static_cast<size_t>(c)] >= cfg.num_bins)
                throw Error(ErrorCode::InvalidToken, "bin out of range");
            bin_rows.push_back(static_cast<long>(c) * cfg.num_bins +
                               tok.frame.bins[static_cast<size_t>(c)]);
        }
    } else {
        text_rows.push_back(cfg.text_id(tok));
    }
}

// Plain (non-tape) embedding of one token at an absolute position.
template <typename T>
void embed_token(const ModelConfig& cfg, const Params<T>& params, const Token& tok, long pos,
                 T* out /* [model_dim] */) {
    if (pos >= cfg.max_positions)
        throw Error(ErrorCode::InvalidToken, "sequence exceeds max_positions");
    std::vector<long> text_rows, bin_rows;
    embed_groups<T>(cfg, tok, text_rows, bin_rows);
    for (int j = 0; j < cfg.model_dim; ++j) out[j] = params.pos_embed.at(pos, j);
    for (long r : text_rows)
        for (int j = 0; j < cfg.model_dim; ++j) out[j] += params.text_embed.at(r, j);
    for (long r : bin_rows)
        for (int j = 0; j < cfg.model_dim; ++j) out[j] += params.bin_embed.at(r, j);
}

template <typename T>
struct ForwardOutput {
    Tensor<T> chan_logits;  // [L, C*B]
    Tensor<T> stop_logits;  // [L, 2]
};

template <typename T>
struct KvCache {
    // Per-layer cached keys/values, [length, model_dim] row-major.
    std::vector<std::vector<T>> keys;
    std::vector<std::vector<T>> values;
    long length = 0;

    explicit KvCache(int num_layers = 0) : keys(num_layers), values(num_layers) {}
};

namespace detail {

template <typename T>
void layer_norm_row(const T* x, const Tensor<T>& g, const Tensor<T>& b, long d, T* out) {
    T mean = 0;
    for (long j = 0; j < d; ++j) mean += x[j];
    mean /= T(d);
    T var = 0;
    for (long j = 0; j < d; ++j) {
        const T dv = x[j] - mean;
        var += dv * dv;
    }
    var /= T(d);
    const T istd = T(1) / std::sqrt(var + T(1e-5));
    for (long j = 0; j < d; ++j) out[j] = (x[j] - mean) * istd * g.data[j] + b.data[j];
}

template <typename T>
T gelu_scalar(T x) {
    return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

}  // namespace detail

// Incremental forward over the suffix of tokens not yet cached; updates the
// cache in place and returns logits for each new position.
template <typename T>
ForwardOutput<T> forward_incremental(const ModelConfig& cfg, const Params<T>& params,
                                     const std::vector<Token>& suffix, KvCache<T>& cache) {
    cfg.validate();
    if (static_cast<int>(cache.keys.size()) != cfg.num_layers)
        throw Error(ErrorCode::CacheDesync, "cache layer count mismatch");
    const long d = cfg.model_dim;
    const long hd = cfg.head_dim();
    const long nh = cfg.num_heads;
    const T inv_sqrt_hd = T(1) / std::sqrt(static_cast<T>(hd));

    ForwardOutput<T> out;
    out.chan_logits = Tensor<T>(static_cast<long>(suffix.size()),
                                static_cast<long>(cfg.num_channels) * cfg.num_bins);
    out.stop_logits = Tensor<T>(static_cast<long>(suffix.size()), 2);

    std::vector<T> x(d), h(d), q(d), kv(d), ctx(d), ff;
    for (size_t ti = 0; ti < suffix.size(); ++ti) {
        const long pos = cache.length;
        embed_token(cfg, params, suffix[ti], pos, x.data());
        for (int l = 0; l < cfg.num_layers; ++l) {
            const auto& lp = params.layers[static_cast<size_t>(l)];
            auto& lk = cache.keys[static_cast<size_t>(l)];
            auto& lv = cache.values[static_cast<size_t>(l)];
            detail::layer_norm_row(x.data(), lp.ln1_g, lp.ln1_b, d, h.data());

            using Mat = typename Tensor<T>::Mat;
            Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> hrow(h.data(), d);
            Eigen::Matrix<T, 1, Eigen::Dynamic> qr =
                hrow * lp.wq.map() + lp.bq.map().row(0);
            Eigen::Matrix<T, 1, Eigen::Dynamic> kr =
                hrow * lp.wk.map() + lp.bk.map().row(0);
            Eigen::Matrix<T, 1, Eigen::Dynamic> vr =
                hrow * lp.wv.map() + lp.bv.map().row(0);
            lk.insert(lk.end(), kr.data(), kr.data() + d);
            lv.insert(lv.end(), vr.data(), vr.data() + d);
            const long klen = static_cast<long>(lk.size()) / d;

            Eigen::Map<const Mat> kmat(lk.data(), klen, d);
            Eigen::Map<const Mat> vmat(lv.data(), klen, d);
            for (long hh = 0; hh < nh; ++hh) {
                const long c0 = hh * hd;
                Eigen::Matrix<T, Eigen::Dynamic, 1> scores =
                    kmat.middleCols(c0, hd) * qr.segment(c0, hd).transpose() * inv_sqrt_hd;
                const T mx = scores.maxCoeff();
                Eigen::Matrix<T, Eigen::Dynamic, 1> w = (scores.array() - mx).exp();
                w /= w.sum();
                Eigen::Matrix<T, 1, Eigen::Dynamic> c =
                    w.transpose() * vmat.middleCols(c0, hd);
                for (long j = 0; j < hd; ++j) ctx[static_cast<size_t>(c0 + j)] = c(j);
            }
            Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> ctxrow(ctx.data(), d);
            Eigen::Matrix<T, 1, Eigen::Dynamic> attn =
                ctxrow * lp.wo.map() + lp.bo.map().row(0);
            for (long j = 0; j < d; ++j) x[static_cast<size_t>(j)] += attn(j);

            detail::layer_norm_row(x.data(), lp.ln2_g, lp.ln2_b, d, h.data());
            Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> h2(h.data(), d);
            Eigen::Matrix<T, 1, Eigen::Dynamic> f1 = h2 * lp.w_ff1.map() + lp.b_ff1.map().row(0);
            for (long j = 0; j < f1.cols(); ++j) f1(j) = detail::gelu_scalar(f1(j));
            Eigen::Matrix<T, 1, Eigen::Dynamic> f2 = f1 * lp.w_ff2.map() + lp.b_ff2.map().row(0);
            for (long j = 0; j < d; ++j) x[static_cast<size_t>(j)] += f2(j);
        }
        detail::layer_norm_row(x.data(), params.ln_f_g, params.ln_f_b, d, h.data());
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> hf(h.data(), d);
        Eigen::Matrix<T, 1, Eigen::Dynamic> lc =
            hf * params.head_chan.map() + params.head_chan_b.map().row(0);
        Eigen::Matrix<T, 1, Eigen::Dynamic> ls =
            hf * params.head_stop.map() + params.head_stop_b.map().row(0);
        for (long j = 0; j < lc.cols(); ++j) out.chan_logits.at(static_cast<long>(ti), j) = lc(j);
        for (long j = 0; j < 2; ++j) out.stop_logits.at(static_cast<long>(ti), j) = ls(j);
        cache.length += 1;
    }
    return out;
}

// Full-sequence forward with batched matrix ops and an explicit causal mask.
// A deliberately different computation path from forward_incremental.
template <typename T>
ForwardOutput<T> forward_full(const ModelConfig& cfg, const Params<T>& params,
                              const std::vector<Token>& tokens) {
    cfg.validate();
    const long len = static_cast<long>(tokens.size());
    const long d = cfg.model_dim, hd = cfg.head_dim(), nh = cfg.num_heads;
    using Mat = typename Tensor<T>::Mat;

    Mat x(len, d);
    std::vector<T> row(static_cast<size_t>(d));
    for (long p = 0; p < len; ++p) {
        embed_token(cfg, params, tokens[static_cast<size_t>(p)], p, row.data());
        for (long j = 0; j < d; ++j) x(p, j) = row[static_cast<size_t>(j)];
    }

    auto layer_norm_mat = [&](const Mat& in, const Tensor<T>& g, const Tensor<T>& b) {
        Mat out(in.rows(), in.cols());
        for (long r = 0; r < in.rows(); ++r) {
            const T mean = in.row(r).mean();
            const T var = (in.row(r).array() - mean).square().mean();
            const T istd = T(1) / std::sqrt(var + T(1e-5));
            out.row(r) = ((in.row(r).array() - mean) * istd) * g.map().row(0).array() +
                         b.map().row(0).array();
        }
        return out;
    };

    const T inv_sqrt_hd = T(1) / std::sqrt(static_cast<T>(hd));
    for (int l = 0; l < cfg.num_layers; ++l) {
        const auto& lp = params.layers[static_cast<size_t>(l)];
        Mat h = layer_norm_mat(x, lp.ln1_g, lp.ln1_b);
        Mat q = (h * lp.wq.map()).rowwise() + lp.bq.map().row(0);
        Mat k = (h * lp.wk.map()).rowwise() + lp.bk.map().row(0);
        Mat v = (h * lp.wv.map()).rowwise() + lp.bv.map().row(0);
        Mat ctx(len, d);
        for (long hh = 0; hh < nh; ++hh) {
            const long c0 = hh * hd;
            Mat scores = q.middleCols(c0, hd) * k.middleCols(c0, hd).transpose() * inv_sqrt_hd;
            for (long i = 0; i < len; ++i) {
                const T mx = scores.row(i).head(i + 1).maxCoeff();
                Eigen::Matrix<T, 1, Eigen::Dynamic> w =
                    (scores.row(i).head(i + 1).array() - mx).exp();
                w /= w.sum();
                ctx.block(i, c0, 1, hd) = w * v.topRows(i + 1).middleCols(c0, hd);
            }
        }
        x += ((ctx * lp.wo.map()).rowwise() + lp.bo.map().row(0)).eval();
        Mat h2 = layer_norm_mat(x, lp.ln2_g, lp.ln2_b);
        Mat f1 = (h2 * lp.w_ff1.map()).rowwise() + lp.b_ff1.map().row(0);
        for (long i = 0; i < f1.size(); ++i) f1.data()[i] = detail::gelu_scalar(f1.data()[i]);
        x += ((f1 * lp.w_ff2.map()).rowwise() + lp.b_ff2.map().row(0)).eval();
    }
    Mat hf = layer_norm_mat(x, params.ln_f_g, params.ln_f_b);
    ForwardOutput<T> out;
    out.chan_logits = Tensor<T>(len, static_cast<long>(cfg.num_channels) * cfg.num_bins);
    out.stop_logits = Tensor<T>(len, 2);
    out.chan_logits.map() = (hf * params.head_chan.map()).rowwise() + params.head_chan_b.map().row(0);
    out.stop_logits.map() = (hf * params.head_stop.map()).rowwise() + params.head_stop_b.map().row(0);
    return out;
}

// ---- training graph ----

template <typename T>
Params<T> zeros_like(const ModelConfig& cfg) {
    Params<T> p = init_params<T>(cfg, 0);
    p.for_each_tensor([](const std::string&, Tensor<T>& t) {
        std::fill(t.data.begin(), t.data.end(), T(0));
    });
    return p;
}

// Builds the loss graph for one sequence. Gradients accumulate into *grads
// (same layout as params) when tape.backward runs.
template <typename T>
Var<T> build_loss(Tape<T>& tape, const ModelConfig& cfg, Params<T>& params, Params<T>* grads,
                  const TokenSequence& seq) {
    cfg.validate();
    const long len = static_cast<long>(seq.tokens.size());
    if (len > cfg.max_positions)
        throw Error(ErrorCode::InvalidToken, "sequence exceeds max_positions");
    long masked = 0;
    for (uint8_t m : seq.loss_mask) masked += m;
    if (masked == 0) throw Error(ErrorCode::EmptyLoss, "no masked positions in sequence");

    // Leaf nodes over the parameter tensors, grad sinks into *grads.
    std::vector<Tensor<T>*> sinks;
    if (grads) grads->for_each_tensor([&](const std::string&, Tensor<T>& t) { sinks.push_back(&t); });
    size_t idx = 0;
    std::vector<std::pair<std::string, Var<T>>> named;
    params.for_each_tensor([&](const std::string& name, Tensor<T>& t) {
        Var<T> v = tape.leaf(t, grads ? sinks[idx] : nullptr);
        named.emplace_back(name, v);
        ++idx;
    });
    auto get = [&](const std::string& name) -> Var<T> {
        for (auto& [n, v] : named)
            if (n == name) return v;
        throw Error(ErrorCode::InvalidInput, "unknown parameter " + name);
    };

    // Embedding: text rows + bin rows + positions.
    std::vector<std::vector<long>> text_groups(len), bin_groups(len), pos_groups(len);
    for (long p = 0; p < len; ++p) {
        embed_groups<T>(cfg, seq.tokens[static_cast<size_t>(p)], text_groups[p], bin_groups[p]);
        pos_groups[p] = {p};
    }
    Var<T> x = add(tape,
                   add(tape, gather_sum(tape, get("text_embed"), std::move(text_groups)),
                       gather_sum(tape, get("bin_embed"), std::move(bin_groups))),
                   gather_sum(tape, get("pos_embed"), std::move(pos_groups)));

    const long hd = cfg.head_dim();
    const T inv_sqrt_hd = T(1) / std::sqrt(static_cast<T>(hd));
    for (int l = 0; l < cfg.num_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        Var<T> h = layer_norm(tape, x, get(p + "ln1_g"), get(p + "ln1_b"));
        Var<T> q = add_rowvec(tape, matmul(tape, h, get(p + "wq")), get(p + "bq"));
        Var<T> k = add_rowvec(tape, matmul(tape, h, get(p + "wk")), get(p + "bk"));
        Var<T> v = add_rowvec(tape, matmul(tape, h, get(p + "wv")), get(p + "bv"));
        std::vector<Var<T>> heads;
        for (int hh = 0; hh < cfg.num_heads; ++hh) {
            Var<T> qh = slice_cols(tape, q, hh * hd, hd);
            Var<T> kh = slice_cols(tape, k, hh * hd, hd);
            Var<T> vh = slice_cols(tape, v, hh * hd, hd);
            Var<T> scores = scale(tape, matmul_nt(tape, qh, kh), inv_sqrt_hd);
            Var<T> probs = causal_softmax(tape, scores);
            heads.push_back(matmul(tape, probs, vh));
        }
        Var<T> ctx = concat_cols(tape, heads);
        x = add(tape, x, add_rowvec(tape, matmul(tape, ctx, get(p + "wo")), get(p + "bo")));
        Var<T> h2 = layer_norm(tape, x, get(p + "ln2_g"), get(p + "ln2_b"));
        Var<T> f1 = gelu(tape, add_rowvec(tape, matmul(tape, h2, get(p + "w_ff1")),
                                          get(p + "b_ff1")));
        x = add(tape, x, add_rowvec(tape, matmul(tape, f1, get(p + "w_ff2")), get(p + "b_ff2")));
    }
    Var<T> hf = layer_norm(tape, x, get("ln_f_g"), get("ln_f_b"));
    Var<T> chan = add_rowvec(tape, matmul(tape, hf, get("head_chan")), get("head_chan_b"));
    Var<T> stop = add_rowvec(tape, matmul(tape, hf, get("head_stop")), get("head_stop_b"));

    // Targets. Positions whose next token is a frame predict every channel
    // bin plus Continue; positions whose next token is EOS predict Eos only.
    std::vector<long> stop_targets(len, -1);
    std::vector<std::vector<long>> chan_targets(
        static_cast<size_t>(cfg.num_channels), std::vector<long>(len, -1));
    for (long p = 0; p < len; ++p) {
        if (!seq.loss_mask[static_cast<size_t>(p)]) continue;
        const Token& next = seq.tokens[static_cast<size_t>(p + 1)];
        if (next.kind == TokenKind::SpeechFrame) {
            stop_targets[static_cast<size_t>(p)] = 0;  // Continue
            for (int c = 0; c < cfg.num_channels; ++c)
                chan_targets[static_cast<size_t>(c)][static_cast<size_t>(p)] =
                    next.frame.bins[static_cast<size_t>(c)];
        } else {
            stop_targets[static_cast<size_t>(p)] = 1;  // Eos
        }
    }
    std::vector<Var<T>> terms;
    for (int c = 0; c < cfg.num_channels; ++c) {
        Var<T> slice = slice_cols(tape, chan, static_cast<long>(c) * cfg.num_bins, cfg.num_bins);
        terms.push_back(cross_entropy_sum(tape, slice, chan_targets[static_cast<size_t>(c)]));
    }
    terms.push_back(cross_entropy_sum(tape, stop, std::move(stop_targets)));
    return scale(tape, add_scalars(tape, terms), T(1) / static_cast<T>(masked));
}

// Loss value without gradients (fresh tape, no sinks).
template <typename T>
T loss_value(const ModelConfig& cfg, Params<T>& params, const TokenSequence& seq) {
    Tape<T> tape;
    return build_loss(tape, cfg, params, static_cast<Params<T>*>(nullptr), seq)->val.data[0];
}

struct DecodeOptions {
    double temperature = 0.0;  // 0 = greedy argmax
    uint64_t seed = 0;
};

struct StepResult {
    bool eos = false;
    dmel::DmelFrame frame;
};

// Consumes last_token into the cache and decodes the next step from its
// logits. The stop head decides Eos; otherwise per-channel bins form a frame.
template <typename T>
StepResult generate_step(const ModelConfig& cfg, const Params<T>& params, KvCache<T>& cache,
                         const Token& last_token, const DecodeOptions& opts = {},
                         std::mt19937_64* rng = nullptr) {
    if (cache.length < 1) throw Error(ErrorCode::CacheDesync, "cache is empty");
    const auto out = forward_incremental(cfg, params, {last_token}, cache);

    auto pick = [&](const T* logits, int k) -> int {
        if (opts.temperature <= 0.0 || rng == nullptr) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (logits[j] > logits[best]) best = j;
            return best;
        }
        std::vector<double> p(static_cast<size_t>(k));
        double mx = logits[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(logits[j]));
        double sum = 0;
        for (int j = 0; j < k; ++j) {
            p[static_cast<size_t>(j)] = std::exp((logits[j] - mx) / opts.temperature);
            sum += p[static_cast<size_t>(j)];
        }
        std::uniform_real_distribution<double> u(0.0, sum);
        double r = u(*rng);
        for (int j = 0; j < k; ++j) {
            r -= p[static_cast<size_t>(j)];
            if (r <= 0) return j;
        }
        return k - 1;
    };

    StepResult res;
    if (pick(out.stop_logits.data.data(), 2) == 1) {
        res.eos = true;
        return res;
    }
    res.frame.bins.resize(static_cast<size_t>(cfg.num_channels));
    for (int c = 0; c < cfg.num_channels; ++c) {
        const T* row = out.chan_logits.data.data() + static_cast<size_t>(c) * cfg.num_bins;
        res.frame.bins[static_cast<size_t>(c)] =
            static_cast<uint8_t>(pick(row, cfg.num_bins));
    }
    return res;
}

// Versioned binary checkpoint with CRC32 integrity checksum.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, Params<float>& params,
                     const std::string& metadata_json = "{}");
Params<float> load_checkpoint(const std::string& path, ModelConfig& cfg,
                              std::string* metadata_json = nullptr);

}  // namespace speakstream::nn
