#include "mer/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mer/error.hpp"

namespace mer {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out[r] += M[r,:] . v  for r in [0, rows)
void matvec_acc(const Matrix& m, const double* v, double* out) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * v[c];
        out[r] += acc;
    }
}

// out[c] += M[:,c]^T . v  (transposed product)
void matvec_t_acc(const Matrix& m, const double* v, double* out) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r);
        const double vr = v[r];
        if (vr == 0.0) continue;
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * vr;
    }
}

// M += a * b^T (rank-1 update)
void rank1_acc(Matrix& m, const double* a, const double* b) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        const double ar = a[r];
        if (ar == 0.0) continue;
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += ar * b[c];
    }
}

void check_shapes(const LstmStack& stack, const DenseHead& head) {
    if (stack.layers.empty()) throw UsageError("network has no layers");
    std::size_t expect_input = stack.layers.front().input();
    for (const auto& layer : stack.layers) {
        if (layer.input() != expect_input || layer.hidden() != stack.hidden_size) {
            throw UsageError("layer shapes inconsistent with stack layout");
        }
        if (layer.input_weights.rows() != 4 * layer.hidden() ||
            layer.recurrent_weights.rows() != 4 * layer.hidden() ||
            layer.input_bias.size() != 4 * layer.hidden() ||
            layer.recurrent_bias.size() != 4 * layer.hidden()) {
            throw UsageError("layer parameter blocks have wrong shapes");
        }
        expect_input = layer.hidden();
    }
    if (head.weights.rows() != 2 || head.weights.cols() != stack.hidden_size ||
        head.bias.size() != 2) {
        throw UsageError("dense head shape does not match hidden size");
    }
}

}  // namespace

LstmLayerParams LstmLayerParams::zeros(std::size_t hidden, std::size_t input) {
    LstmLayerParams p;
    p.input_weights = Matrix(4 * hidden, input);
    p.recurrent_weights = Matrix(4 * hidden, hidden);
    p.input_bias.assign(4 * hidden, 0.0);
    p.recurrent_bias.assign(4 * hidden, 0.0);
    return p;
}

DenseHead DenseHead::zeros(std::size_t hidden) {
    DenseHead h;
    h.weights = Matrix(2, hidden);
    h.bias.assign(2, 0.0);
    return h;
}

LstmStack make_stack(std::size_t input_size, std::size_t hidden_size, std::size_t n_modules,
                     std::size_t layers_per_module, double dropout_p) {
    if (input_size < 1 || hidden_size < 1 || n_modules < 1 || layers_per_module < 1) {
        throw UsageError("make_stack: sizes must be >= 1");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw UsageError("make_stack: dropout_p must be in [0, 1)");
    }
    LstmStack stack;
    stack.hidden_size = hidden_size;
    stack.dropout_p = dropout_p;
    std::size_t d = input_size;
    for (std::size_t m = 0; m < n_modules; ++m) {
        stack.module_layout.push_back(layers_per_module);
        for (std::size_t l = 0; l < layers_per_module; ++l) {
            stack.layers.push_back(LstmLayerParams::zeros(hidden_size, d));
            d = hidden_size;
        }
    }
    return stack;
}

void init_network(LstmStack& stack, DenseHead& head, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(stack.hidden_size));
    for (auto& layer : stack.layers) {
        for (double& w : layer.input_weights.storage()) w = rng.uniform(-bound, bound);
        for (double& w : layer.recurrent_weights.storage()) w = rng.uniform(-bound, bound);
        std::fill(layer.input_bias.begin(), layer.input_bias.end(), 0.0);
        std::fill(layer.recurrent_bias.begin(), layer.recurrent_bias.end(), 0.0);
        const std::size_t h = layer.hidden();
        for (std::size_t j = h; j < 2 * h; ++j) layer.input_bias[j] = 1.0;  // forget gate
    }
    for (double& w : head.weights.storage()) w = rng.uniform(-bound, bound);
    std::fill(head.bias.begin(), head.bias.end(), 0.0);
}

void lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const LstmLayerParams& params,
                       std::span<double> h_out, std::span<double> c_out) {
    const std::size_t h = params.hidden();
    const std::size_t d = params.input();
    if (x.size() != d || h_prev.size() != h || c_prev.size() != h || h_out.size() != h ||
        c_out.size() != h) {
        throw UsageError("lstm_cell_forward: shape mismatch");
    }
    std::vector<double> a(4 * h);
    for (std::size_t j = 0; j < 4 * h; ++j) {
        a[j] = params.input_bias[j] + params.recurrent_bias[j];
    }
    matvec_acc(params.input_weights, x.data(), a.data());
    matvec_acc(params.recurrent_weights, h_prev.data(), a.data());
    for (std::size_t j = 0; j < h; ++j) {
        const double gi = sigmoid(a[j]);
        const double gf = sigmoid(a[h + j]);
        const double gg = std::tanh(a[2 * h + j]);
        const double go = sigmoid(a[3 * h + j]);
        c_out[j] = gf * c_prev[j] + gi * gg;
        h_out[j] = go * std::tanh(c_out[j]);
    }
}

std::vector<double> stack_forward(const Matrix& sequence, const LstmStack& stack,
                                  const DenseHead& head, RunMode mode, Rng& rng,
                                  ForwardCache* cache) {
    check_shapes(stack, head);
    if (sequence.rows() != stack.input_size() || sequence.cols() < 1) {
        throw UsageError("stack_forward: sequence is " + std::to_string(sequence.rows()) + " x " +
                         std::to_string(sequence.cols()) + ", want " +
                         std::to_string(stack.input_size()) + " rows and T >= 1");
    }
    const std::size_t T = sequence.cols();
    const std::size_t h = stack.hidden_size;
    const std::size_t L = stack.layers.size();
    const bool drop = mode == RunMode::Train && stack.dropout_p > 0.0;

    if (cache) {
        cache->layers.assign(L, {});
        cache->valid = false;
    }

    Matrix input = sequence;  // current layer input, d x T
    std::vector<double> h_prev(h), c_prev(h), h_cur(h), c_cur(h), a(4 * h);

    for (std::size_t l = 0; l < L; ++l) {
        const LstmLayerParams& params = stack.layers[l];
        const std::size_t d = params.input();
        Matrix h_seq(h, T);
        ForwardCache::LayerCache* lc = cache ? &cache->layers[l] : nullptr;
        if (lc) {
            lc->x = input;
            lc->gate_i = Matrix(h, T);
            lc->gate_f = Matrix(h, T);
            lc->gate_g = Matrix(h, T);
            lc->gate_o = Matrix(h, T);
            lc->c = Matrix(h, T);
            lc->tanh_c = Matrix(h, T);
        }
        std::fill(h_prev.begin(), h_prev.end(), 0.0);
        std::fill(c_prev.begin(), c_prev.end(), 0.0);
        std::vector<double> x_t(d);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t r = 0; r < d; ++r) x_t[r] = input(r, t);
            for (std::size_t j = 0; j < 4 * h; ++j) {
                a[j] = params.input_bias[j] + params.recurrent_bias[j];
            }
            matvec_acc(params.input_weights, x_t.data(), a.data());
            matvec_acc(params.recurrent_weights, h_prev.data(), a.data());
            for (std::size_t j = 0; j < h; ++j) {
                const double gi = sigmoid(a[j]);
                const double gf = sigmoid(a[h + j]);
                const double gg = std::tanh(a[2 * h + j]);
                const double go = sigmoid(a[3 * h + j]);
                const double c = gf * c_prev[j] + gi * gg;
                const double tc = std::tanh(c);
                c_cur[j] = c;
                h_cur[j] = go * tc;
                if (lc) {
                    lc->gate_i(j, t) = gi;
                    lc->gate_f(j, t) = gf;
                    lc->gate_g(j, t) = gg;
                    lc->gate_o(j, t) = go;
                    lc->c(j, t) = c;
                    lc->tanh_c(j, t) = tc;
                }
                h_seq(j, t) = h_cur[j];
            }
            std::swap(h_prev, h_cur);
            std::swap(c_prev, c_cur);
        }
        if (lc) lc->h = h_seq;

        if (l + 1 < L) {
            // inverted dropout on the layer's output sequence, train mode only
            if (drop) {
                Matrix mask(h, T);
                const double keep_scale = 1.0 / (1.0 - stack.dropout_p);
                for (std::size_t idx = 0; idx < mask.size(); ++idx) {
                    const bool keep = rng.uniform01() >= stack.dropout_p;
                    mask.storage()[idx] = keep ? keep_scale : 0.0;
                    h_seq.storage()[idx] *= mask.storage()[idx];
                }
                if (lc) lc->dropout_mask = std::move(mask);
            }
            input = std::move(h_seq);
        } else {
            input = std::move(h_seq);  // final layer output, no dropout
        }
    }

    // head reads the final timestep's top-layer hidden state
    std::vector<double> final_h(h);
    for (std::size_t j = 0; j < h; ++j) final_h[j] = input(j, T - 1);
    std::vector<double> pred(2);
    for (std::size_t r = 0; r < 2; ++r) {
        double acc = head.bias[r];
        const double* row = head.weights.row(r);
        for (std::size_t j = 0; j < h; ++j) acc += row[j] * final_h[j];
        pred[r] = acc;
    }
    if (cache) {
        cache->prediction = pred;
        cache->head_input = final_h;
        cache->valid = true;
    }
    return pred;
}

double mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw UsageError("mse: shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

NetworkGrads NetworkGrads::zeros_like(const LstmStack& stack, const DenseHead& head) {
    NetworkGrads g;
    g.layers.reserve(stack.layers.size());
    for (const auto& layer : stack.layers) {
        g.layers.push_back(LstmLayerParams::zeros(layer.hidden(), layer.input()));
    }
    g.head = DenseHead::zeros(head.weights.cols());
    return g;
}

void NetworkGrads::accumulate(const NetworkGrads& other) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& a = layers[l];
        const auto& b = other.layers[l];
        for (std::size_t i = 0; i < a.input_weights.size(); ++i) {
            a.input_weights.storage()[i] += b.input_weights.storage()[i];
        }
        for (std::size_t i = 0; i < a.recurrent_weights.size(); ++i) {
            a.recurrent_weights.storage()[i] += b.recurrent_weights.storage()[i];
        }
        for (std::size_t i = 0; i < a.input_bias.size(); ++i) {
            a.input_bias[i] += b.input_bias[i];
            a.recurrent_bias[i] += b.recurrent_bias[i];
        }
    }
    for (std::size_t i = 0; i < head.weights.size(); ++i) {
        head.weights.storage()[i] += other.head.weights.storage()[i];
    }
    for (std::size_t i = 0; i < head.bias.size(); ++i) head.bias[i] += other.head.bias[i];
}

void NetworkGrads::scale(double factor) {
    for (auto& layer : layers) {
        for (double& v : layer.input_weights.storage()) v *= factor;
        for (double& v : layer.recurrent_weights.storage()) v *= factor;
        for (double& v : layer.input_bias) v *= factor;
        for (double& v : layer.recurrent_bias) v *= factor;
    }
    for (double& v : head.weights.storage()) v *= factor;
    for (double& v : head.bias) v *= factor;
}

double NetworkGrads::squared_norm() const {
    double acc = 0.0;
    auto add = [&acc](const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) acc += p[i] * p[i];
    };
    for (const auto& layer : layers) {
        add(layer.input_weights.data(), layer.input_weights.size());
        add(layer.recurrent_weights.data(), layer.recurrent_weights.size());
        add(layer.input_bias.data(), layer.input_bias.size());
        add(layer.recurrent_bias.data(), layer.recurrent_bias.size());
    }
    add(head.weights.data(), head.weights.size());
    add(head.bias.data(), head.bias.size());
    return acc;
}

NetworkGrads backward(const LstmStack& stack, const DenseHead& head, const ForwardCache& cache,
                      std::span<const double> target) {
    if (!cache.valid || cache.layers.size() != stack.layers.size()) {
        throw UsageError("backward: stale or missing forward cache");
    }
    if (target.size() != 2) throw UsageError("backward: target must have 2 entries");

    const std::size_t h = stack.hidden_size;
    const std::size_t L = stack.layers.size();
    const std::size_t T = cache.layers[0].h.cols();

    NetworkGrads grads = NetworkGrads::zeros_like(stack, head);

    // dL/dpred for L = ((p0-t0)^2 + (p1-t1)^2) / 2
    std::vector<double> dpred(2);
    for (std::size_t r = 0; r < 2; ++r) dpred[r] = cache.prediction[r] - target[r];

    for (std::size_t r = 0; r < 2; ++r) {
        grads.head.bias[r] += dpred[r];
        double* row = grads.head.weights.row(r);
        for (std::size_t j = 0; j < h; ++j) row[j] += dpred[r] * cache.head_input[j];
    }

    // dh flowing into each layer's output sequence (pre-dropout)
    Matrix dh_out(h, T);
    for (std::size_t j = 0; j < h; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < 2; ++r) acc += head.weights(r, j) * dpred[r];
        dh_out(j, T - 1) = acc;
    }

    std::vector<double> dh(h), dc(h), da(4 * h), dh_rec(h), dc_rec(h);
    for (std::size_t li = L; li-- > 0;) {
        const LstmLayerParams& params = stack.layers[li];
        LstmLayerParams& g = grads.layers[li];
        const ForwardCache::LayerCache& lc = cache.layers[li];
        const std::size_t d = params.input();

        // dropout was applied to this layer's output before feeding upward
        if (!lc.dropout_mask.empty()) {
            for (std::size_t idx = 0; idx < dh_out.size(); ++idx) {
                dh_out.storage()[idx] *= lc.dropout_mask.storage()[idx];
            }
        }

        Matrix dx(d, T);
        std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
        std::fill(dc_rec.begin(), dc_rec.end(), 0.0);
        std::vector<double> x_t(d), h_prev(h), c_prev(h);

        for (std::size_t t = T; t-- > 0;) {
            for (std::size_t j = 0; j < h; ++j) {
                dh[j] = dh_out(j, t) + dh_rec[j];
            }
            for (std::size_t r = 0; r < d; ++r) x_t[r] = lc.x(r, t);
            if (t > 0) {
                for (std::size_t j = 0; j < h; ++j) {
                    h_prev[j] = lc.h(j, t - 1);
                    c_prev[j] = lc.c(j, t - 1);
                }
            } else {
                std::fill(h_prev.begin(), h_prev.end(), 0.0);
                std::fill(c_prev.begin(), c_prev.end(), 0.0);
            }

            for (std::size_t j = 0; j < h; ++j) {
                const double gi = lc.gate_i(j, t);
                const double gf = lc.gate_f(j, t);
                const double gg = lc.gate_g(j, t);
                const double go = lc.gate_o(j, t);
                const double tc = lc.tanh_c(j, t);

                const double d_o = dh[j] * tc;
                dc[j] = dc_rec[j] + dh[j] * go * (1.0 - tc * tc);
                const double d_i = dc[j] * gg;
                const double d_f = dc[j] * c_prev[j];
                const double d_g = dc[j] * gi;

                da[j] = d_i * gi * (1.0 - gi);
                da[h + j] = d_f * gf * (1.0 - gf);
                da[2 * h + j] = d_g * (1.0 - gg * gg);
                da[3 * h + j] = d_o * go * (1.0 - go);

                dc_rec[j] = dc[j] * gf;
            }

            rank1_acc(g.input_weights, da.data(), x_t.data());
            rank1_acc(g.recurrent_weights, da.data(), h_prev.data());
            for (std::size_t j = 0; j < 4 * h; ++j) {
                g.input_bias[j] += da[j];
                g.recurrent_bias[j] += da[j];
            }

            std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
            matvec_t_acc(params.recurrent_weights, da.data(), dh_rec.data());

            double* dx_col = x_t.data();  // reuse as scratch for dx column
            std::fill(dx_col, dx_col + d, 0.0);
            matvec_t_acc(params.input_weights, da.data(), dx_col);
            for (std::size_t r = 0; r < d; ++r) dx(r, t) = dx_col[r];
        }

        dh_out = std::move(dx);  // becomes the layer below's output gradient
    }

    return grads;
}

std::vector<std::span<double>> param_views(LstmStack& stack, DenseHead& head) {
    std::vector<std::span<double>> views;
    for (auto& layer : stack.layers) {
        views.emplace_back(layer.input_weights.storage());
        views.emplace_back(layer.recurrent_weights.storage());
        views.emplace_back(layer.input_bias);
        views.emplace_back(layer.recurrent_bias);
    }
    views.emplace_back(head.weights.storage());
    views.emplace_back(head.bias);
    return views;
}

std::vector<std::span<double>> grad_views(NetworkGrads& grads) {
    std::vector<std::span<double>> views;
    for (auto& layer : grads.layers) {
        views.emplace_back(layer.input_weights.storage());
        views.emplace_back(layer.recurrent_weights.storage());
        views.emplace_back(layer.input_bias);
        views.emplace_back(layer.recurrent_bias);
    }
    views.emplace_back(grads.head.weights.storage());
    views.emplace_back(grads.head.bias);
    return views;
}

std::size_t param_count(const LstmStack& stack, const DenseHead& head) {
    std::size_t n = 0;
    for (const auto& layer : stack.layers) {
        n += layer.input_weights.size() + layer.recurrent_weights.size() +
             layer.input_bias.size() + layer.recurrent_bias.size();
    }
    return n + head.weights.size() + head.bias.size();
}

AdamState AdamState::init(std::size_t n_params, double learning_rate) {
    AdamState s;
    s.first_moment.assign(n_params, 0.0);
    s.second_moment.assign(n_params, 0.0);
    s.learning_rate = learning_rate;
    return s;
}

void adam_step(std::vector<std::span<double>> params, std::vector<std::span<double>> grads,
               AdamState& state) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.size();
    if (params.size() != grads.size() || total != state.first_moment.size()) {
        throw UsageError("adam_step: parameter/moment shapes do not match");
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    std::size_t k = 0;
    for (std::size_t v = 0; v < params.size(); ++v) {
        if (params[v].size() != grads[v].size()) {
            throw UsageError("adam_step: gradient view shape mismatch");
        }
        for (std::size_t i = 0; i < params[v].size(); ++i, ++k) {
            const double g = grads[v][i];
            double& m = state.first_moment[k];
            double& s = state.second_moment[k];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            s = state.beta2 * s + (1.0 - state.beta2) * g * g;
            const double m_hat = m / bc1;
            const double s_hat = s / bc2;
            params[v][i] -= state.learning_rate * m_hat / (std::sqrt(s_hat) + state.epsilon);
        }
    }
}

double gradient_check(LstmStack& stack, DenseHead& head, const Matrix& input,
                      std::span<const double> target, double fd_step) {
    if (fd_step <= 0.0 || !std::isfinite(fd_step)) {
        throw InvalidValue("gradient_check: fd_step must be positive");
    }
    if (stack.dropout_p != 0.0) {
        throw UsageError("gradient_check: requires dropout_p == 0 for a deterministic loss");
    }

    Rng rng(0);  // unused on the deterministic path
    ForwardCache cache;
    stack_forward(input, stack, head, RunMode::Train, rng, &cache);
    NetworkGrads grads = backward(stack, head, cache, target);

    auto params = param_views(stack, head);
    auto analytic = grad_views(grads);

    double max_rel = 0.0;
    for (std::size_t v = 0; v < params.size(); ++v) {
        for (std::size_t i = 0; i < params[v].size(); ++i) {
            const double saved = params[v][i];
            params[v][i] = saved + fd_step;
            const double up = mse(stack_forward(input, stack, head, RunMode::Eval, rng), target);
            params[v][i] = saved - fd_step;
            const double down = mse(stack_forward(input, stack, head, RunMode::Eval, rng), target);
            params[v][i] = saved;
            const double numeric = (up - down) / (2.0 * fd_step);
            const double a = analytic[v][i];
            // the 1e-6 denominator guard absorbs the central-difference
            // noise floor (machine eps / step ~ 2e-11) on near-zero entries
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

namespace {

constexpr char kCheckpointMagic[4] = {'L', 'S', 'T', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint: " + path);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void write_f64le(std::ofstream& out, double v) {
    std::uint64_t raw;
    std::memcpy(&raw, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(raw >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64le(std::ifstream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint: " + path);
    std::uint64_t raw = 0;
    for (int i = 0; i < 8; ++i) raw |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &raw, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const LstmStack& stack, const DenseHead& head,
                     std::uint8_t task_tag) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);

    out.write(kCheckpointMagic, 4);
    write_u32le(out, kCheckpointVersion);
    out.put(static_cast<char>(task_tag));
    write_u32le(out, static_cast<std::uint32_t>(stack.hidden_size));
    write_u32le(out, static_cast<std::uint32_t>(stack.input_size()));
    write_u32le(out, static_cast<std::uint32_t>(stack.module_layout.size()));
    for (std::size_t layers : stack.module_layout) {
        write_u32le(out, static_cast<std::uint32_t>(layers));
    }
    write_f64le(out, stack.dropout_p);

    auto views = param_views(const_cast<LstmStack&>(stack), const_cast<DenseHead&>(head));
    for (const auto& view : views) {
        for (double v : view) write_f64le(out, v);
    }
    if (!out) throw IoError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw IoError("not a checkpoint file: " + path);
    }
    const std::uint32_t version = read_u32le(in, path);
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    }
    const int tag = in.get();
    if (tag < 0) throw IoError("truncated checkpoint: " + path);
    const std::uint32_t hidden = read_u32le(in, path);
    const std::uint32_t input = read_u32le(in, path);
    const std::uint32_t n_modules = read_u32le(in, path);
    if (hidden == 0 || input == 0 || n_modules == 0 || n_modules > 1024) {
        throw IoError("implausible checkpoint header: " + path);
    }
    std::vector<std::size_t> layout(n_modules);
    for (auto& l : layout) {
        l = read_u32le(in, path);
        if (l == 0 || l > 1024) throw IoError("implausible module layout: " + path);
    }

    Checkpoint ck;
    ck.task_tag = static_cast<std::uint8_t>(tag);
    ck.stack.hidden_size = hidden;
    ck.stack.dropout_p = read_f64le(in, path);
    ck.stack.module_layout = layout;
    std::size_t d = input;
    for (std::size_t layers : layout) {
        for (std::size_t l = 0; l < layers; ++l) {
            ck.stack.layers.push_back(LstmLayerParams::zeros(hidden, d));
            d = hidden;
        }
    }
    ck.head = DenseHead::zeros(hidden);

    auto views = param_views(ck.stack, ck.head);
    for (auto& view : views) {
        for (double& v : view) v = read_f64le(in, path);
    }
    char extra;
    if (in.read(&extra, 1)) throw IoError("trailing bytes in checkpoint: " + path);
    return ck;
}

}  // namespace mer
