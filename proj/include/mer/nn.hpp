#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mer/matrix.hpp"
#include "mer/rng.hpp"

namespace mer {

/// One LSTM layer. Gate rows are stacked in the order
/// input (i), forget (f), cell (g), output (o), so every weight block has
/// 4*hidden rows.
struct LstmLayerParams {
    Matrix input_weights;      // 4h x d
    Matrix recurrent_weights;  // 4h x h
    std::vector<double> input_bias;      // 4h
    std::vector<double> recurrent_bias;  // 4h

    std::size_t hidden() const { return recurrent_weights.cols(); }
    std::size_t input() const { return input_weights.cols(); }

    static LstmLayerParams zeros(std::size_t hidden, std::size_t input);
};

/// Stacked LSTM. A "module" is an independently stacked block; modules are
/// chained, and inverted dropout applies between every pair of consecutive
/// layers (across module boundaries too), never after the last layer.
struct LstmStack {
    std::vector<LstmLayerParams> layers;   // module-major order
    std::vector<std::size_t> module_layout;  // layers per module
    double dropout_p = 0.0;
    std::size_t hidden_size = 0;

    std::size_t total_layers() const { return layers.size(); }
    std::size_t input_size() const { return layers.empty() ? 0 : layers.front().input(); }
};

/// Linear readout of the final hidden state to (valence, arousal).
struct DenseHead {
    Matrix weights;  // 2 x h
    std::vector<double> bias;  // 2

    static DenseHead zeros(std::size_t hidden);
};

/// Builds an uninitialized-to-zeros stack with the given layout.
LstmStack make_stack(std::size_t input_size, std::size_t hidden_size, std::size_t n_modules,
                     std::size_t layers_per_module, double dropout_p);

/// Weight init: uniform in [-1/sqrt(h), 1/sqrt(h)]; forget-gate input bias
/// set to 1, all other biases 0.
void init_network(LstmStack& stack, DenseHead& head, Rng& rng);

/// One cell step: i,f,o = sigmoid, g = tanh of the gate preactivations;
/// c = f.c_prev + i.g; h = o.tanh(c).
void lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const LstmLayerParams& params,
                       std::span<double> h_out, std::span<double> c_out);

enum class RunMode { Train, Eval };

/// Everything the backward pass needs from one forward pass.
struct ForwardCache {
    struct LayerCache {
        Matrix x;      // d x T, the layer's actual input (after any dropout below)
        Matrix gate_i, gate_f, gate_g, gate_o;  // h x T, post-activation
        Matrix c, tanh_c, h;                    // h x T
        Matrix dropout_mask;  // h x T with entries {0, 1/(1-p)}; empty if none applied
    };
    std::vector<LayerCache> layers;
    std::vector<double> prediction;  // 2
    std::vector<double> head_input;  // h, final top hidden state
    bool valid = false;
};

/// Run the stack over a d x T sequence. Initial h and c are zero. Dropout
/// draws from rng in Train mode only. Returns the head's 2-vector and the
/// cache for backward().
std::vector<double> stack_forward(const Matrix& sequence, const LstmStack& stack,
                                  const DenseHead& head, RunMode mode, Rng& rng,
                                  ForwardCache* cache = nullptr);

/// Mean squared error over the two outputs.
double mse(std::span<const double> pred, std::span<const double> target);

/// Gradient holder with the same shapes as the parameters.
struct NetworkGrads {
    std::vector<LstmLayerParams> layers;
    DenseHead head;

    static NetworkGrads zeros_like(const LstmStack& stack, const DenseHead& head);
    void accumulate(const NetworkGrads& other);
    void scale(double factor);
    double squared_norm() const;
};

/// Exact BPTT gradients of mse(prediction, target) for one cached forward
/// pass, including the dropout masks as applied.
NetworkGrads backward(const LstmStack& stack, const DenseHead& head, const ForwardCache& cache,
                      std::span<const double> target);

/// Flat views over every parameter (or gradient) tensor, in declaration
/// order. The same order is used by the checkpoint format and Adam.
std::vector<std::span<double>> param_views(LstmStack& stack, DenseHead& head);
std::vector<std::span<double>> grad_views(NetworkGrads& grads);
std::size_t param_count(const LstmStack& stack, const DenseHead& head);

/// Adam with bias correction. Moments are kept flat, matching param_views.
struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(std::size_t n_params, double learning_rate);
};

void adam_step(std::vector<std::span<double>> params, std::vector<std::span<double>> grads,
               AdamState& state);

/// Max over all parameters of the relative error between analytic BPTT
/// gradients and central finite differences of the loss. Requires
/// dropout_p == 0 and fd_step > 0.
double gradient_check(LstmStack& stack, DenseHead& head, const Matrix& input,
                      std::span<const double> target, double fd_step);

/// Versioned binary checkpoint, little-endian, f64 parameters in
/// declaration order. task_tag: 0 = emotion (Task 1), 1 = next-point (Task 2).
void save_checkpoint(const std::string& path, const LstmStack& stack, const DenseHead& head,
                     std::uint8_t task_tag);
struct Checkpoint {
    LstmStack stack;
    DenseHead head;
    std::uint8_t task_tag = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mer
