#pragma once

// Unimodal FEA classifiers: multinomial logistic regression and an MLP, both
// trained by the shared mini-batch engine in train.hpp.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fervr/dataset.hpp"
#include "fervr/matrix.hpp"
#include "fervr/nn.hpp"
#include "fervr/train.hpp"

namespace fervr::model {

// Dense(63 -> hidden[0], relu), Dropout(rates[0]), ..., Dense(-> 7, softmax).
struct MlpConfig {
    std::vector<std::size_t> hidden_widths = {128, 64};
    std::vector<double> dropout_rates = {0.2, 0.2};
};

// Parameter count of the default architecture, asserted on construction.
inline constexpr std::size_t kDefaultMlpParameterCount =
    (63 * 128 + 128) + (128 * 64 + 64) + (64 * 7 + 7);

// Width of the default MLP's first hidden layer — the feature vector that
// extract_features produces and that intermediate fusion consumes.
inline constexpr std::size_t kMlpFeatureDim = 128;

struct MlpModel {
    nn::DenseNetwork net;
    MlpConfig arch;
};

struct LogRegModel {
    nn::DenseNetwork net;  // single Dense(63 -> 7, softmax) layer
    double l2_strength = 0.0;
    bool class_weighting = true;
};

MlpModel make_mlp(const MlpConfig& arch, std::uint64_t seed);
// Zero-initialized, so the untrained model predicts the uniform distribution.
LogRegModel make_logreg(double l2_strength = 0.0, bool class_weighting = true);

// Adapts a DenseNetwork over fixed train/val matrices to the train::fit
// Problem interface. The optional l2 penalty (l2/2 * ||W||^2) covers dense
// weight blocks only, never biases.
class NetworkProblem {
  public:
    NetworkProblem(nn::DenseNetwork& net, Matrix train_inputs, std::vector<int> train_labels,
                   Matrix val_inputs, std::vector<int> val_labels,
                   const nn::ClassWeights& class_weights, double l2_strength = 0.0);

    std::size_t train_size() const { return train_inputs_.rows; }
    std::size_t min_batch() const { return min_batch_; }
    std::vector<std::span<double>> params() { return nn::param_spans(*net_); }
    double compute_batch(const std::vector<std::size_t>& rows, std::uint64_t dropout_seed);
    std::vector<std::span<const double>> grads() const { return nn::grad_spans(grads_); }
    double train_accuracy() const;
    double val_accuracy() const;
    std::vector<double> snapshot() const { return nn::snapshot_params(*net_); }
    void restore(const std::vector<double>& state) { nn::restore_params(*net_, state); }

  private:
    nn::DenseNetwork* net_;
    Matrix train_inputs_;
    std::vector<int> train_labels_;
    Matrix val_inputs_;
    std::vector<int> val_labels_;
    nn::ClassWeights class_weights_;
    double l2_strength_;
    std::size_t min_batch_;
    nn::NetworkGrads grads_;
};

// Resolves the per-class loss weights for a bundle: balanced inverse-frequency
// weights when enabled (every class must appear in train), else uniform.
nn::ClassWeights resolve_class_weights(const data::DatasetBundle& bundle, bool class_weighting);

std::pair<MlpModel, train::TrainHistory> train_mlp(const data::DatasetBundle& bundle,
                                                   const train::TrainConfig& config,
                                                   const MlpConfig& arch = {});
std::pair<LogRegModel, train::TrainHistory> train_logreg(const data::DatasetBundle& bundle,
                                                         const train::TrainConfig& config);

Matrix predict_proba(const MlpModel& model, const Matrix& inputs);
Matrix predict_proba(const LogRegModel& model, const Matrix& inputs);
std::vector<int> predict_label(const MlpModel& model, const Matrix& inputs);
std::vector<int> predict_label(const LogRegModel& model, const Matrix& inputs);

// Output of the MLP's first dense layer after ReLU: [n x hidden_widths[0]].
Matrix extract_features(const MlpModel& model, const Matrix& inputs);

}  // namespace fervr::model
