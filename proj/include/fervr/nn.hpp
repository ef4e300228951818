#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fervr/matrix.hpp"

namespace fervr::nn {

inline constexpr std::size_t kNumClasses = 7;

enum class Activation { identity, relu, softmax };
enum class Mode { train, inference };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
    Matrix weights;  // [out x in]
    Vector bias;     // [out]
    Activation activation = Activation::identity;

    std::size_t in_size() const { return weights.cols; }
    std::size_t out_size() const { return weights.rows; }
};

// Glorot-uniform weights, zero bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng);
DenseLayer make_dense_zero(std::size_t in, std::size_t out, Activation act);

struct BatchNormLayer {
    Vector gamma;
    Vector beta;
    Vector running_mean;
    Vector running_var;
    double momentum = 0.99;
    double epsilon = 1e-5;

    std::size_t dim() const { return gamma.size(); }
};

BatchNormLayer make_batchnorm(std::size_t d, double momentum = 0.99, double epsilon = 1e-5);

struct DropoutLayer {
    double rate = 0.0;  // in [0, 1)
};

using Layer = std::variant<DenseLayer, BatchNormLayer, DropoutLayer>;

struct DenseNetwork {
    std::vector<Layer> layers;

    std::size_t parameter_count() const;
};

// ---- forward ----

Vector softmax(const Vector& v);
void softmax_rows_inplace(Matrix& m);

// Row-wise activation(batch * W^T + bias).
Matrix dense_forward(const DenseLayer& layer, const Matrix& batch);

// Train mode normalizes with batch statistics (requires >= 2 rows) and folds
// them into the running estimates; inference normalizes with running stats.
Matrix batchnorm_forward(BatchNormLayer& bn, const Matrix& batch, Mode mode);

// Inverted dropout: kept entries are scaled by 1/(1-rate) so the expected
// value matches the input. Inference is the identity.
Matrix dropout_forward(const DropoutLayer& layer, const Matrix& batch, Mode mode,
                       std::uint64_t rng_seed);

// Per-layer caches captured by a traced forward pass, enough to run backward.
struct DenseCache {
    Matrix input;
    Matrix pre_activation;
    Matrix output;
};
struct BatchNormCache {
    Matrix normalized;
    Vector inv_std;
};
struct DropoutCache {
    Matrix scaled_mask;  // empty when the layer acted as identity
};
using LayerCache = std::variant<DenseCache, BatchNormCache, DropoutCache>;

struct ForwardTrace {
    Mode mode = Mode::inference;
    std::vector<LayerCache> layers;
    Matrix output;
};

Matrix network_forward(DenseNetwork& net, const Matrix& batch, Mode mode,
                       std::uint64_t dropout_seed = 0);

// Inference-mode forward; never mutates the network (no dropout, batch norm on
// running statistics).
Matrix network_infer(const DenseNetwork& net, const Matrix& batch);

// Row-wise argmax with ties broken by the lowest index.
std::vector<int> argmax_rows(const Matrix& probs);
ForwardTrace network_forward_trace(DenseNetwork& net, const Matrix& batch, Mode mode,
                                   std::uint64_t dropout_seed = 0);

// ---- loss ----

// One positive weight per emotion class. Uniform weights of 1 reproduce the
// unweighted mean loss bitwise.
using ClassWeights = std::array<double, kNumClasses>;

ClassWeights uniform_class_weights();

// sum_i w_{y_i} * (-ln p_{i,y_i}) / sum_i w_{y_i}, with the looked-up
// probability clipped to [1e-12, 1] before the log.
double weighted_cross_entropy(const Matrix& probs, const std::vector<int>& labels,
                              const ClassWeights& weights);

// d(loss)/d(probs); zero everywhere except the labeled entries.
Matrix weighted_cross_entropy_grad(const Matrix& probs, const std::vector<int>& labels,
                                   const ClassWeights& weights);

// ---- backward ----

struct DenseGrads {
    Matrix weights;
    Vector bias;
};
struct BatchNormGrads {
    Vector gamma;
    Vector beta;
};
struct NoGrads {};
using LayerGrads = std::variant<DenseGrads, BatchNormGrads, NoGrads>;

struct NetworkGrads {
    std::vector<LayerGrads> layers;
};

// Row-wise gradient through the activation: given d(loss)/d(output), returns
// d(loss)/d(pre-activation).
Matrix activation_backward(Activation act, const Matrix& pre_activation, const Matrix& output,
                           const Matrix& grad_output);

// Exact analytic gradients of weighted_cross_entropy(output, labels, weights)
// with respect to every trainable parameter, replaying the traced pass.
NetworkGrads network_backward(const DenseNetwork& net, const ForwardTrace& trace,
                              const std::vector<int>& labels, const ClassWeights& weights);

// Backward pass seeded with an arbitrary d(loss)/d(output). grad_input is
// d(loss)/d(batch), which lets networks compose into larger graphs.
struct BackwardResult {
    NetworkGrads grads;
    Matrix grad_input;
};
BackwardResult network_backward_from(const DenseNetwork& net, const ForwardTrace& trace,
                                     const Matrix& grad_output);

// Trainable parameter views in a fixed order (per layer: weights then bias,
// or gamma then beta). grad_spans yields the matching order.
std::vector<std::span<double>> param_spans(DenseNetwork& net);
std::vector<std::span<const double>> grad_spans(const NetworkGrads& grads);

std::vector<double> snapshot_params(const DenseNetwork& net);
void restore_params(DenseNetwork& net, const std::vector<double>& snapshot);

// ---- optimizer ----

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_hat = 1e-8;
    std::int64_t step_count = 0;
    std::vector<Vector> first_moment;   // allocated on the first step
    std::vector<Vector> second_moment;

    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads);
};

// ---- gradient verification ----

struct FdOptions {
    double h = 1e-5;
    // 0 checks every parameter; otherwise each block is spot-checked on a
    // deterministic sample of at most this many entries.
    std::size_t max_checks_per_block = 0;
    std::uint64_t sample_seed = 0;
};

// Central finite differences of `loss` against the supplied analytic
// gradients. Relative error uses a max(|a|, |b|, 1e-8) denominator.
double fd_max_rel_error(const std::vector<std::span<double>>& params,
                        const std::vector<std::span<const double>>& analytic,
                        const std::function<double()>& loss, const FdOptions& opts = {});

// Checks network_backward for `net` on one batch, in inference mode (dropout
// off, batch norm on running statistics).
double finite_difference_check(DenseNetwork& net, const Matrix& batch,
                               const std::vector<int>& labels, const ClassWeights& weights,
                               double h);

}  // namespace fervr::nn
