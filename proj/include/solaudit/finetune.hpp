#pragma once

// Desk-scale fine-tuning mechanics: vanilla gradient descent over either the
// full projection weights or low-rank adapter factors of a single-head
// attention layer. Only W_q, W_k, W_v are trainable in either mode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace solaudit::finetune {

// ---------------------------------------------------------------------------
// Matrix

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Matrix&) const = default;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul shape mismatch");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) {
                out.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
    }
    return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("add shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Matrix scaled(const Matrix& m, double s) {
    Matrix out = m;
    for (double& v : out.data) v *= s;
    return out;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double stddev = 1.0) {
    Matrix out(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : out.data) v = dist(rng);
    return out;
}

inline std::uint64_t matrix_checksum(const Matrix& m) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](std::uint64_t bits) {
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (bits >> (byte * 8)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    mix(m.rows);
    mix(m.cols);
    for (double v : m.data) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        mix(bits);
    }
    return h;
}

// ---------------------------------------------------------------------------
// LoRA adapter: frozen base W0 (d×k) plus trainable factors A (d×r), B (k×r).

struct LoraAdapter {
    Matrix frozen_base;  // W0, never updated
    Matrix A;
    Matrix B;
    std::size_t rank = 0;
};

// A gets i.i.d. Gaussian entries with std 1/sqrt(r); B starts at zero, so the
// initial delta is exactly the zero matrix.
inline LoraAdapter lora_init(std::size_t d, std::size_t k, std::size_t rank, std::uint64_t seed,
                             Matrix base) {
    if (rank < 1 || rank >= std::min(d, k)) {
        throw std::invalid_argument("lora rank must satisfy 1 <= r < min(d,k)");
    }
    if (base.rows != d || base.cols != k) throw std::invalid_argument("base shape mismatch");
    LoraAdapter adapter;
    adapter.frozen_base = std::move(base);
    adapter.A = random_matrix(d, rank, seed, 1.0 / std::sqrt(static_cast<double>(rank)));
    adapter.B = Matrix(k, rank);
    adapter.rank = rank;
    return adapter;
}

inline Matrix lora_delta(const LoraAdapter& adapter) {
    return matmul(adapter.A, transpose(adapter.B));
}

inline Matrix lora_merge(const LoraAdapter& adapter) {
    return add(adapter.frozen_base, lora_delta(adapter));
}

inline std::size_t lora_trainable_count(const LoraAdapter& adapter) {
    return adapter.rank * (adapter.frozen_base.rows + adapter.frozen_base.cols);
}

// One vanilla gradient-descent step: W - beta * grad. Pure.
inline Matrix fft_step(const Matrix& weights, const Matrix& grad, double learning_rate) {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (weights.rows != grad.rows || weights.cols != grad.cols) {
        throw std::invalid_argument("fft_step shape mismatch");
    }
    if (!grad.all_finite()) throw std::runtime_error("non-finite gradient");
    Matrix out = weights;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] -= learning_rate * grad.data[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy single-head attention layer

enum class Mode { Fft, Lora };

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t steps = 500;
    std::uint64_t seed = 0;
    Mode mode = Mode::Fft;
    std::size_t rank = 2;  // lora only
};

struct Projection {
    std::string name;  // "q", "k", "v"
    Matrix full;                        // fft mode
    std::optional<LoraAdapter> adapter;  // lora mode

    Matrix effective() const { return adapter ? lora_merge(*adapter) : full; }
};

struct ToyAttentionLayer {
    std::size_t model_dim = 0;
    Mode mode = Mode::Fft;
    std::vector<Projection> projections;  // exactly q, k, v; output projection is identity

    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& p : projections) {
            n += p.adapter ? lora_trainable_count(*p.adapter) : p.full.data.size();
        }
        return n;
    }
};

inline ToyAttentionLayer make_layer(std::size_t dim, Mode mode, std::size_t rank,
                                    std::uint64_t seed) {
    ToyAttentionLayer layer;
    layer.model_dim = dim;
    layer.mode = mode;
    std::uint64_t s = seed;
    for (const char* name : {"q", "k", "v"}) {
        Projection p;
        p.name = name;
        Matrix base = random_matrix(dim, dim, s++, 1.0 / std::sqrt(static_cast<double>(dim)));
        if (mode == Mode::Lora) {
            p.adapter = lora_init(dim, dim, rank, s++, std::move(base));
        } else {
            p.full = std::move(base);
        }
        layer.projections.push_back(std::move(p));
    }
    return layer;
}

// Shares the base weights of `src` so FFT and LoRA runs start from the same W0.
inline ToyAttentionLayer with_mode(const ToyAttentionLayer& src, Mode mode, std::size_t rank,
                                   std::uint64_t seed) {
    ToyAttentionLayer layer;
    layer.model_dim = src.model_dim;
    layer.mode = mode;
    std::uint64_t s = seed + 101;
    for (const auto& p : src.projections) {
        Projection q;
        q.name = p.name;
        Matrix base = p.adapter ? p.adapter->frozen_base : p.full;
        if (mode == Mode::Lora) {
            q.adapter = lora_init(base.rows, base.cols, rank, s++, std::move(base));
        } else {
            q.full = std::move(base);
        }
        layer.projections.push_back(std::move(q));
    }
    return layer;
}

struct ForwardCache {
    Matrix X, Q, K, V, P;  // P: row-softmaxed attention weights
};

// softmax(Q K^T / sqrt(d)) V, output projection identity.
inline Matrix forward(const ToyAttentionLayer& layer, const Matrix& X,
                      ForwardCache* cache = nullptr) {
    if (X.cols != layer.model_dim) throw std::invalid_argument("input dim mismatch");
    const Matrix Q = matmul(X, layer.projections[0].effective());
    const Matrix K = matmul(X, layer.projections[1].effective());
    const Matrix V = matmul(X, layer.projections[2].effective());

    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.model_dim));
    Matrix scores = matmul(Q, transpose(K));
    for (double& v : scores.data) v *= scale;

    Matrix P(scores.rows, scores.cols);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        double row_max = scores.at(i, 0);
        for (std::size_t j = 1; j < scores.cols; ++j) row_max = std::max(row_max, scores.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < scores.cols; ++j) {
            P.at(i, j) = std::exp(scores.at(i, j) - row_max);
            sum += P.at(i, j);
        }
        for (std::size_t j = 0; j < scores.cols; ++j) P.at(i, j) /= sum;
    }

    Matrix Y = matmul(P, V);
    if (cache) *cache = ForwardCache{X, Q, K, V, P};
    return Y;
}

// Gradient names: "Wq"/"Wk"/"Wv" in FFT mode, "Aq"/"Bq"/... in LoRA mode.
using Gradients = std::map<std::string, Matrix>;

inline Gradients backward(const ToyAttentionLayer& layer, const ForwardCache& cache,
                          const Matrix& upstream) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.model_dim));

    // Y = P V
    Matrix dV = matmul(transpose(cache.P), upstream);
    Matrix dP = matmul(upstream, transpose(cache.V));

    // row-softmax backward: dS_i = P_i ⊙ (dP_i − <dP_i, P_i>)
    Matrix dS(dP.rows, dP.cols);
    for (std::size_t i = 0; i < dP.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dP.cols; ++j) dot += dP.at(i, j) * cache.P.at(i, j);
        for (std::size_t j = 0; j < dP.cols; ++j) {
            dS.at(i, j) = cache.P.at(i, j) * (dP.at(i, j) - dot);
        }
    }
    for (double& v : dS.data) v *= scale;

    Matrix dQ = matmul(dS, cache.K);
    Matrix dK = matmul(transpose(dS), cache.Q);

    const Matrix Xt = transpose(cache.X);
    Matrix dWeff[3] = {matmul(Xt, dQ), matmul(Xt, dK), matmul(Xt, dV)};

    Gradients grads;
    for (int idx = 0; idx < 3; ++idx) {
        const Projection& p = layer.projections[idx];
        if (p.adapter) {
            // W_eff = W0 + A B^T; W0 is frozen and gets no gradient
            grads["A" + p.name] = matmul(dWeff[idx], p.adapter->B);
            grads["B" + p.name] = matmul(transpose(dWeff[idx]), p.adapter->A);
        } else {
            grads["W" + p.name] = std::move(dWeff[idx]);
        }
    }
    return grads;
}

// Mutable views of the trainable parameters, keyed like the gradients.
inline std::map<std::string, Matrix*> trainable_params(ToyAttentionLayer& layer) {
    std::map<std::string, Matrix*> params;
    for (auto& p : layer.projections) {
        if (p.adapter) {
            params["A" + p.name] = &p.adapter->A;
            params["B" + p.name] = &p.adapter->B;
        } else {
            params["W" + p.name] = &p.full;
        }
    }
    return params;
}

// ---------------------------------------------------------------------------
// Training on toy regression pairs

struct RegressionPair {
    Matrix input;   // n×d token sequence
    Matrix target;  // n×d expected output
};

struct TrainResult {
    ToyAttentionLayer layer;
    std::vector<double> loss_trace;  // loss before each step, plus the final loss
};

inline double mse_loss(const Matrix& predicted, const Matrix& target) {
    if (predicted.rows != target.rows || predicted.cols != target.cols) {
        throw std::invalid_argument("loss shape mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.data.size(); ++i) {
        const double diff = predicted.data[i] - target.data[i];
        sum += diff * diff;
    }
    return sum / static_cast<double>(predicted.data.size());
}

inline TrainResult train(ToyAttentionLayer layer, const std::vector<RegressionPair>& pairs,
                         const TrainConfig& config) {
    if (pairs.empty()) throw std::invalid_argument("training dataset is empty");

    TrainResult result;
    const double pair_norm = 1.0 / static_cast<double>(pairs.size());

    for (std::size_t step = 0; step <= config.steps; ++step) {
        double loss = 0.0;
        Gradients total;
        for (const auto& pair : pairs) {
            ForwardCache cache;
            Matrix predicted = forward(layer, pair.input, &cache);
            loss += mse_loss(predicted, pair.target) * pair_norm;

            // d(MSE)/dY = 2 (Y - T) / |entries|, averaged over pairs
            Matrix upstream(predicted.rows, predicted.cols);
            const double g = 2.0 * pair_norm / static_cast<double>(predicted.data.size());
            for (std::size_t i = 0; i < upstream.data.size(); ++i) {
                upstream.data[i] = g * (predicted.data[i] - pair.target.data[i]);
            }
            for (auto& [name, grad] : backward(layer, cache, upstream)) {
                auto it = total.find(name);
                if (it == total.end()) total.emplace(name, std::move(grad));
                else it->second = add(it->second, grad);
            }
        }
        if (!std::isfinite(loss)) {
            throw std::runtime_error("training diverged at step " + std::to_string(step));
        }
        result.loss_trace.push_back(loss);
        if (step == config.steps) break;

        auto params = trainable_params(layer);
        for (auto& [name, grad] : total) {
            *params.at(name) = fft_step(*params.at(name), grad, config.learning_rate);
        }
    }
    result.layer = std::move(layer);
    return result;
}

// Length-1 token sequences make attention degenerate to Y = X W_v, which
// keeps the regression task convex in FFT mode.
inline std::vector<RegressionPair> make_regression_dataset(const Matrix& target_map,
                                                           std::size_t n_samples,
                                                           std::uint64_t seed) {
    std::vector<RegressionPair> pairs;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Matrix x(1, target_map.rows);
        for (double& v : x.data) v = dist(rng);
        pairs.push_back({x, matmul(x, target_map)});
    }
    return pairs;
}

}  // namespace solaudit::finetune
