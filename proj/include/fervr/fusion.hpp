#pragma once

// Multimodal fusion of FEA-based and image-based predictions: five late-fusion
// strategies over paired 7-dim probability vectors, and an intermediate-fusion
// network over 128-dim FEA features and 1280-dim image features.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fervr/classifiers.hpp"
#include "fervr/dataset.hpp"
#include "fervr/matrix.hpp"
#include "fervr/nn.hpp"
#include "fervr/train.hpp"

namespace fervr::fuse {

// ---- late fusion ----

enum class LateStrategy { average, weighted_sum, concat_dense, bilinear, cross_attention };

const char* to_string(LateStrategy s);
LateStrategy late_strategy_from_string(const std::string& name);

struct LateFusionModel {
    LateStrategy strategy = LateStrategy::average;
    // weighted_sum: two logits, softmaxed into the convex pair (alpha, beta).
    Vector mix_logits;
    // concat_dense: Dense(14 -> 7, softmax); bilinear: Dense(49 -> 7, softmax).
    nn::DenseNetwork head;
    // cross_attention: gate_a reads p_img and gates p_fea; gate_b reads p_fea
    // and gates p_img. Both are Dense(7 -> 7, softmax).
    nn::DenseLayer gate_a;
    nn::DenseLayer gate_b;
};

LateFusionModel make_late_fusion(LateStrategy strategy, std::uint64_t seed);
LateFusionModel make_late_fusion_zero(LateStrategy strategy);
std::size_t parameter_count(const LateFusionModel& model);

// Elementwise mean of two probability vectors; parameter-free.
Vector fuse_average(const Vector& p_fea, const Vector& p_img);
Matrix fuse_average_rows(const Matrix& p_fea, const Matrix& p_img);

// Row-wise fusion of paired probability matrices. `mode` is accepted for
// interface symmetry; no late strategy has stochastic layers.
Matrix late_fusion_forward(const LateFusionModel& model, const Matrix& p_fea,
                           const Matrix& p_img, nn::Mode mode = nn::Mode::inference);

// One split's paired model outputs: frozen FEA-model probabilities, image
// probabilities, and labels, row-aligned.
struct FusionSplit {
    Matrix fea_probs;
    Matrix img_probs;
    std::vector<int> labels;
};

// Collects a split from a paired bundle; fea_probs must hold the frozen
// model's probabilities for that split's rows (one per sample-view pair).
FusionSplit fusion_split(const data::MultimodalBundle& bundle, data::Split split,
                         const Matrix& fea_probs);

// Gradients for every trainable late-fusion parameter.
struct LateFusionGrads {
    Vector mix_logits;
    nn::NetworkGrads head;
    nn::DenseGrads gate_a;
    nn::DenseGrads gate_b;
};

// Adapts one trainable late-fusion head to the train::fit interface, and
// exposes whole-split loss/gradients for finite-difference verification.
class LateFusionProblem {
  public:
    LateFusionProblem(LateFusionModel& model, FusionSplit train_split, FusionSplit val_split,
                      const nn::ClassWeights& class_weights);

    std::size_t train_size() const { return train_.fea_probs.rows; }
    std::size_t min_batch() const { return 1; }
    std::vector<std::span<double>> params();
    double compute_batch(const std::vector<std::size_t>& rows, std::uint64_t dropout_seed);
    std::vector<std::span<const double>> grads() const;
    double train_accuracy() const;
    double val_accuracy() const;
    std::vector<double> snapshot() const;
    void restore(const std::vector<double>& state);

    // Whole-train-split loss without touching cached gradients (pure), and a
    // matching gradient refresh — the pair a finite-difference check needs.
    double eval_loss() const;
    void refresh_grads();

  private:
    LateFusionModel* model_;
    FusionSplit train_;
    FusionSplit val_;
    nn::ClassWeights class_weights_;
    LateFusionGrads grads_;
};

// Average fusion returns immediately with an empty history (nothing to train).
std::pair<LateFusionModel, train::TrainHistory> train_late_fusion(
    LateStrategy strategy, const FusionSplit& train_split, const FusionSplit& val_split,
    const nn::ClassWeights& class_weights, const train::TrainConfig& config);

// ---- intermediate fusion ----

enum class GateActivation { softmax, sigmoid };
const char* to_string(GateActivation g);
GateActivation gate_activation_from_string(const std::string& name);

struct IntermediateConfig {
    std::size_t projection_width = 512;  // valid range [128, 512]
    double dropout_rate = 0.4;
    GateActivation gate_activation = GateActivation::softmax;
};

struct IntermediateFusionModel {
    IntermediateConfig config;
    nn::DenseNetwork fea_branch;  // Dense(128 -> w, identity), BatchNorm(w)
    nn::DenseNetwork img_branch;  // Dense(1280 -> w, identity), BatchNorm(w)
    // Gate dense layers hold pre-activations; the configured gate activation
    // is applied by the fusion forward. gate_a reads h_img and gates h_fea;
    // gate_b reads h_fea and gates h_img.
    nn::DenseLayer gate_a;
    nn::DenseLayer gate_b;
    nn::DenseNetwork head;  // Dropout(rate), Dense(2w -> 7, softmax)

    std::size_t parameter_count() const;
};

IntermediateFusionModel make_intermediate_fusion(const IntermediateConfig& config,
                                                 std::uint64_t seed);

// Train mode updates batch-norm running statistics and applies dropout;
// inference is deterministic.
Matrix intermediate_fusion_forward(IntermediateFusionModel& model, const Matrix& fea_features,
                                   const Matrix& img_features, nn::Mode mode,
                                   std::uint64_t dropout_seed = 0);
Matrix intermediate_fusion_infer(const IntermediateFusionModel& model,
                                 const Matrix& fea_features, const Matrix& img_features);

// One split's frozen-extractor features: 128-dim FEA features, 1280-dim image
// features, and labels, row-aligned.
struct FeatureSplit {
    Matrix fea_features;
    Matrix img_features;
    std::vector<int> labels;
};

FeatureSplit feature_split(const data::MultimodalBundle& bundle, data::Split split,
                           const model::MlpModel& frozen);

struct IntermediateGrads {
    nn::NetworkGrads fea_branch;
    nn::NetworkGrads img_branch;
    nn::DenseGrads gate_a;
    nn::DenseGrads gate_b;
    nn::NetworkGrads head;
};

class IntermediateProblem {
  public:
    IntermediateProblem(IntermediateFusionModel& model, FeatureSplit train_split,
                        FeatureSplit val_split, const nn::ClassWeights& class_weights);

    std::size_t train_size() const { return train_.fea_features.rows; }
    std::size_t min_batch() const { return 2; }  // batch norm needs statistics
    std::vector<std::span<double>> params();
    double compute_batch(const std::vector<std::size_t>& rows, std::uint64_t dropout_seed);
    std::vector<std::span<const double>> grads() const;
    double train_accuracy() const;
    double val_accuracy() const;
    std::vector<double> snapshot() const;
    void restore(const std::vector<double>& state);

    // Inference-mode loss (pure) and gradient refresh over the train split,
    // for finite-difference verification.
    double eval_loss() const;
    void refresh_grads();

  private:
    IntermediateFusionModel* model_;
    FeatureSplit train_;
    FeatureSplit val_;
    nn::ClassWeights class_weights_;
    IntermediateGrads grads_;
};

// Extracts 128-dim features with the frozen MLP (verified bitwise unchanged),
// then trains every fusion parameter end-to-end.
std::pair<IntermediateFusionModel, train::TrainHistory> train_intermediate_fusion(
    const model::MlpModel& frozen, const data::MultimodalBundle& bundle,
    const IntermediateConfig& fusion_config, const train::TrainConfig& config);

}  // namespace fervr::fuse
