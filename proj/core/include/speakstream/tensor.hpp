#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "speakstream/error.hpp"

namespace speakstream::nn {

template <typename T>
struct Tensor {
    long rows = 0;
    long cols = 0;
    std::vector<T> data;  // row-major

    Tensor() = default;
    Tensor(long r, long c) : rows(r), cols(c), data(static_cast<size_t>(r * c), T(0)) {}

    T& at(long r, long c) { return data[static_cast<size_t>(r * cols + c)]; }
    const T& at(long r, long c) const { return data[static_cast<size_t>(r * cols + c)]; }
    long size() const { return rows * cols; }

    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<Mat> map() { return {data.data(), rows, cols}; }
    Eigen::Map<const Mat> map() const { return {data.data(), rows, cols}; }
};

// A node in the reverse-mode tape. grad_sink, when set, receives the leaf's
// gradient in addition to the node-local accumulator (used for parameters
// whose gradients survive the tape).
template <typename T>
struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    Tensor<T>* grad_sink = nullptr;
    std::function<void()> backward;
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
class Tape {
public:
    // Backward closures capture their own node (and their inputs) by
    // shared_ptr, which forms reference cycles; clearing the closures here is
    // what actually releases the graph.
    ~Tape() {
        for (auto& node : order_) node->backward = nullptr;
    }

    Var<T> leaf(Tensor<T> value, Tensor<T>* grad_sink = nullptr) {
        auto node = std::make_shared<Node<T>>();
        node->val = std::move(value);
        node->grad = Tensor<T>(node->val.rows, node->val.cols);
        node->grad_sink = grad_sink;
        order_.push_back(node);
        return node;
    }

    Var<T> make(long rows, long cols) { return leaf(Tensor<T>(rows, cols)); }

    // Seeds the given scalar node with gradient 1 and runs the tape backward.
    void backward(const Var<T>& loss) {
        if (loss->val.size() != 1)
            throw Error(ErrorCode::InvalidInput, "backward expects a scalar node");
        loss->grad.data[0] = T(1);
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            if ((*it)->backward) (*it)->backward();
            if ((*it)->grad_sink) {
                auto& sink = *(*it)->grad_sink;
                for (long i = 0; i < (*it)->grad.size(); ++i)
                    sink.data[static_cast<size_t>(i)] += (*it)->grad.data[static_cast<size_t>(i)];
            }
        }
    }

private:
    std::vector<Var<T>> order_;
};

// ---- ops ----

template <typename T>
Var<T> matmul(Tape<T>& tape, Var<T> a, Var<T> b) {
    auto out = tape.make(a->val.rows, b->val.cols);
    out->val.map() = a->val.map() * b->val.map();
    out->backward = [out, a, b] {
        a->grad.map() += out->grad.map() * b->val.map().transpose();
        b->grad.map() += a->val.map().transpose() * out->grad.map();
    };
    return out;
}

// a [n,k] times b^T where b is [m,k]; avoids materializing transposes.
template <typename T>
Var<T> matmul_nt(Tape<T>& tape, Var<T> a, Var<T> b) {
    auto out = tape.make(a->val.rows, b->val.rows);
    out->val.map() = a->val.map() * b->val.map().transpose();
    out->backward = [out, a, b] {
        a->grad.map() += out->grad.map() * b->val.map();
        b->grad.map() += out->grad.map().transpose() * a->val.map();
    };
    return out;
}

template <typename T>
Var<T> add(Tape<T>& tape, Var<T> a, Var<T> b) {
    auto out = tape.make(a->val.rows, a->val.cols);
    out->val.map() = a->val.map() + b->val.map();
    out->backward = [out, a, b] {
        a->grad.map() += out->grad.map();
        b->grad.map() += out->grad.map();
    };
    return out;
}

// Broadcast-add a [1,c] bias row to every row of a.
template <typename T>
Var<T> add_rowvec(Tape<T>& tape, Var<T> a, Var<T> bias) {
    auto out = tape.make(a->val.rows, a->val.cols);
    out->val.map() = a->val.map().rowwise() + bias->val.map().row(0);
    out->backward = [out, a, bias] {
        a->grad.map() += out->grad.map();
        bias->grad.map().row(0) += out->grad.map().colwise().sum();
    };
    return out;
}

template <typename T>
Var<T> scale(Tape<T>& tape, Var<T> a, T factor) {
    auto out = tape.make(a->val.rows, a->val.cols);
    out->val.map() = a->val.map() * factor;
    out->backward = [out, a, factor] { a->grad.map() += out->grad.map() * factor; };
    return out;
}

template <typename T>
Var<T> slice_cols(Tape<T>& tape, Var<T> a, long c0, long width) {
    auto out = tape.make(a->val.rows, width);
    out->val.map() = a->val.map().middleCols(c0, width);
    out->backward = [out, a, c0, width] {
        a->grad.map().middleCols(c0, width) += out->grad.map();
    };
    return out;
}

template <typename T>
Var<T> concat_cols(Tape<T>& tape, const std::vector<Var<T>>& parts) {
    long cols = 0;
    for (const auto& p : parts) cols += p->val.cols;
    auto out = tape.make(parts[0]->val.rows, cols);
    long off = 0;
    for (const auto& p : parts) {
        out->val.map().middleCols(off, p->val.cols) = p->val.map();
        off += p->val.cols;
    }
    out->backward = [out, parts] {
        long off = 0;
        for (const auto& p : parts) {
            p->grad.map() += out->grad.map().middleCols(off, p->val.cols);
            off += p->val.cols;
        }
    };
    return out;
}

template <typename T>
Var<T> gelu(Tape<T>& tape, Var<T> a) {
    auto out = tape.make(a->val.rows, a->val.cols);
    for (long i = 0; i < a->val.size(); ++i) {
        const T x = a->val.data[static_cast<size_t>(i)];
        out->val.data[static_cast<size_t>(i)] =
            T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
    }
    out->backward = [out, a] {
        constexpr T inv_sqrt2pi = T(0.3989422804014327);
        for (long i = 0; i < a->val.size(); ++i) {
            const T x = a->val.data[static_cast<size_t>(i)];
            const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
            const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
            a->grad.data[static_cast<size_t>(i)] +=
                out->grad.data[static_cast<size_t>(i)] * (cdf + x * pdf);
        }
    };
    return out;
}

template <typename T>
Var<T> layer_norm(Tape<T>& tape, Var<T> a, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    const long n = a->val.rows, c = a->val.cols;
    auto out = tape.make(n, c);
    // Cache the normalized activations for the backward pass.
    auto xhat = std::make_shared<Tensor<T>>(n, c);
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(n));
    for (long r = 0; r < n; ++r) {
        T mean = 0;
        for (long j = 0; j < c; ++j) mean += a->val.at(r, j);
        mean /= T(c);
        T var = 0;
        for (long j = 0; j < c; ++j) {
            const T d = a->val.at(r, j) - mean;
            var += d * d;
        }
        var /= T(c);
        const T istd = T(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(r)] = istd;
        for (long j = 0; j < c; ++j) {
            const T xh = (a->val.at(r, j) - mean) * istd;
            xhat->at(r, j) = xh;
            out->val.at(r, j) = xh * gamma->val.at(0, j) + beta->val.at(0, j);
        }
    }
    out->backward = [out, a, gamma, beta, xhat, inv_std] {
        const long n = a->val.rows, c = a->val.cols;
        for (long r = 0; r < n; ++r) {
            T sum_dy_g = 0, sum_dy_g_xh = 0;
            for (long j = 0; j < c; ++j) {
                const T dy = out->grad.at(r, j);
                const T g = gamma->val.at(0, j);
                sum_dy_g += dy * g;
                sum_dy_g_xh += dy * g * xhat->at(r, j);
                gamma->grad.at(0, j) += dy * xhat->at(r, j);
                beta->grad.at(0, j) += dy;
            }
            const T istd = (*inv_std)[static_cast<size_t>(r)];
            for (long j = 0; j < c; ++j) {
                const T dy = out->grad.at(r, j);
                const T g = gamma->val.at(0, j);
                a->grad.at(r, j) += istd * (dy * g - (sum_dy_g + xhat->at(r, j) * sum_dy_g_xh) /
                                                        T(c));
            }
        }
    };
    return out;
}

// Row-wise softmax with a causal mask: entry (i, j) participates only when
// j <= i + offset. offset is the number of key positions preceding the first
// query (zero for a full square attention matrix).
template <typename T>
Var<T> causal_softmax(Tape<T>& tape, Var<T> scores, long offset = 0) {
    const long n = scores->val.rows, k = scores->val.cols;
    auto out = tape.make(n, k);
    for (long i = 0; i < n; ++i) {
        const long limit = std::min(k - 1, i + offset);
        T mx = scores->val.at(i, 0);
        for (long j = 1; j <= limit; ++j) mx = std::max(mx, scores->val.at(i, j));
        T denom = 0;
        for (long j = 0; j <= limit; ++j) denom += std::exp(scores->val.at(i, j) - mx);
        for (long j = 0; j < k; ++j)
            out->val.at(i, j) =
                j <= limit ? std::exp(scores->val.at(i, j) - mx) / denom : T(0);
    }
    out->backward = [out, scores, offset] {
        const long n = scores->val.rows, k = scores->val.cols;
        for (long i = 0; i < n; ++i) {
            const long limit = std::min(k - 1, i + offset);
            T dot = 0;
            for (long j = 0; j <= limit; ++j) dot += out->grad.at(i, j) * out->val.at(i, j);
            for (long j = 0; j <= limit; ++j)
                scores->grad.at(i, j) += out->val.at(i, j) * (out->grad.at(i, j) - dot);
        }
    };
    return out;
}

// Sums table rows per output row: out[i] = sum over r in groups[i] of
// table[r]. Covers single-token embeddings (one row) and dMel frame
// embeddings (one row per channel).
template <typename T>
Var<T> gather_sum(Tape<T>& tape, Var<T> table, std::vector<std::vector<long>> groups) {
    auto out = tape.make(static_cast<long>(groups.size()), table->val.cols);
    for (size_t i = 0; i < groups.size(); ++i)
        for (long r : groups[i]) out->val.map().row(static_cast<long>(i)) += table->val.map().row(r);
    out->backward = [out, table, groups = std::move(groups)] {
        for (size_t i = 0; i < groups.size(); ++i)
            for (long r : groups[i])
                table->grad.map().row(r) += out->grad.map().row(static_cast<long>(i));
    };
    return out;
}

// Sum of cross-entropies of logits rows against integer targets; rows with
// target < 0 are skipped. Returns a 1x1 node.
template <typename T>
Var<T> cross_entropy_sum(Tape<T>& tape, Var<T> logits, std::vector<long> targets) {
    const long n = logits->val.rows, k = logits->val.cols;
    if (static_cast<long>(targets.size()) != n)
        throw Error(ErrorCode::InvalidInput, "targets/logits row mismatch");
    auto out = tape.make(1, 1);
    T total = 0;
    for (long i = 0; i < n; ++i) {
        if (targets[static_cast<size_t>(i)] < 0) continue;
        T mx = logits->val.at(i, 0);
        for (long j = 1; j < k; ++j) mx = std::max(mx, logits->val.at(i, j));
        T lse = 0;
        for (long j = 0; j < k; ++j) lse += std::exp(logits->val.at(i, j) - mx);
        lse = std::log(lse) + mx;
        total += lse - logits->val.at(i, targets[static_cast<size_t>(i)]);
    }
    out->val.data[0] = total;
    out->backward = [out, logits, targets = std::move(targets)] {
        const long n = logits->val.rows, k = logits->val.cols;
        const T up = out->grad.data[0];
        for (long i = 0; i < n; ++i) {
            const long tgt = targets[static_cast<size_t>(i)];
            if (tgt < 0) continue;
            T mx = logits->val.at(i, 0);
            for (long j = 1; j < k; ++j) mx = std::max(mx, logits->val.at(i, j));
            T denom = 0;
            for (long j = 0; j < k; ++j) denom += std::exp(logits->val.at(i, j) - mx);
            for (long j = 0; j < k; ++j) {
                const T p = std::exp(logits->val.at(i, j) - mx) / denom;
                logits->grad.at(i, j) += up * (p - (j == tgt ? T(1) : T(0)));
            }
        }
    };
    return out;
}

template <typename T>
Var<T> add_scalars(Tape<T>& tape, const std::vector<Var<T>>& scalars) {
    auto out = tape.make(1, 1);
    for (const auto& s : scalars) out->val.data[0] += s->val.data[0];
    out->backward = [out, scalars] {
        for (const auto& s : scalars) s->grad.data[0] += out->grad.data[0];
    };
    return out;
}

}  // namespace speakstream::nn
