#include "fervr/classifiers.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace fervr::model {

namespace {

bool network_has_batchnorm(const nn::DenseNetwork& net) {
    for (const auto& layer : net.layers) {
        if (std::holds_alternative<nn::BatchNormLayer>(layer)) {
            return true;
        }
    }
    return false;
}

// loss += (l2/2) * ||W||^2 over dense weight blocks; grads updated in place.
double apply_l2_penalty(const nn::DenseNetwork& net, nn::NetworkGrads& grads, double l2) {
    double penalty = 0.0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto* dense = std::get_if<nn::DenseLayer>(&net.layers[i]);
        if (dense == nullptr) {
            continue;
        }
        auto& dense_grads = std::get<nn::DenseGrads>(grads.layers[i]);
        for (std::size_t k = 0; k < dense->weights.data.size(); ++k) {
            const double w = dense->weights.data[k];
            penalty += 0.5 * l2 * w * w;
            dense_grads.weights.data[k] += l2 * w;
        }
    }
    return penalty;
}

std::vector<int> take_labels(const std::vector<int>& labels,
                             const std::vector<std::size_t>& rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i] = labels[rows[i]];
    }
    return out;
}

}  // namespace

MlpModel make_mlp(const MlpConfig& arch, std::uint64_t seed) {
    if (arch.hidden_widths.empty()) {
        throw std::runtime_error("make_mlp: at least one hidden layer required");
    }
    if (arch.hidden_widths.size() != arch.dropout_rates.size()) {
        throw std::runtime_error("make_mlp: " + std::to_string(arch.hidden_widths.size()) +
                                 " hidden widths vs " + std::to_string(arch.dropout_rates.size()) +
                                 " dropout rates");
    }
    std::mt19937_64 rng(seed);
    MlpModel model;
    model.arch = arch;
    std::size_t in = data::kFeaDim;
    for (std::size_t i = 0; i < arch.hidden_widths.size(); ++i) {
        const std::size_t width = arch.hidden_widths[i];
        if (width == 0) {
            throw std::runtime_error("make_mlp: hidden width must be >= 1");
        }
        model.net.layers.push_back(nn::make_dense(in, width, nn::Activation::relu, rng));
        model.net.layers.push_back(nn::DropoutLayer{arch.dropout_rates[i]});
        in = width;
    }
    model.net.layers.push_back(nn::make_dense(in, nn::kNumClasses, nn::Activation::softmax, rng));

    const MlpConfig defaults;
    if (arch.hidden_widths == defaults.hidden_widths &&
        model.net.parameter_count() != kDefaultMlpParameterCount) {
        throw std::logic_error("make_mlp: default architecture has " +
                               std::to_string(model.net.parameter_count()) +
                               " parameters, expected " +
                               std::to_string(kDefaultMlpParameterCount));
    }
    return model;
}

LogRegModel make_logreg(double l2_strength, bool class_weighting) {
    if (l2_strength < 0.0) {
        throw std::runtime_error("make_logreg: l2_strength must be >= 0");
    }
    LogRegModel model;
    model.l2_strength = l2_strength;
    model.class_weighting = class_weighting;
    model.net.layers.push_back(
        nn::make_dense_zero(data::kFeaDim, nn::kNumClasses, nn::Activation::softmax));
    return model;
}

NetworkProblem::NetworkProblem(nn::DenseNetwork& net, Matrix train_inputs,
                               std::vector<int> train_labels, Matrix val_inputs,
                               std::vector<int> val_labels, const nn::ClassWeights& class_weights,
                               double l2_strength)
    : net_(&net),
      train_inputs_(std::move(train_inputs)),
      train_labels_(std::move(train_labels)),
      val_inputs_(std::move(val_inputs)),
      val_labels_(std::move(val_labels)),
      class_weights_(class_weights),
      l2_strength_(l2_strength),
      min_batch_(network_has_batchnorm(net) ? 2 : 1) {
    if (train_inputs_.rows != train_labels_.size()) {
        throw std::runtime_error("NetworkProblem: " + std::to_string(train_inputs_.rows) +
                                 " train rows vs " + std::to_string(train_labels_.size()) +
                                 " labels");
    }
    if (val_inputs_.rows != val_labels_.size()) {
        throw std::runtime_error("NetworkProblem: " + std::to_string(val_inputs_.rows) +
                                 " val rows vs " + std::to_string(val_labels_.size()) + " labels");
    }
}

double NetworkProblem::compute_batch(const std::vector<std::size_t>& rows,
                                     std::uint64_t dropout_seed) {
    const Matrix batch = take_rows(train_inputs_, rows);
    const std::vector<int> labels = take_labels(train_labels_, rows);
    const nn::ForwardTrace trace =
        nn::network_forward_trace(*net_, batch, nn::Mode::train, dropout_seed);
    double loss = nn::weighted_cross_entropy(trace.output, labels, class_weights_);
    grads_ = nn::network_backward(*net_, trace, labels, class_weights_);
    if (l2_strength_ > 0.0) {
        loss += apply_l2_penalty(*net_, grads_, l2_strength_);
    }
    return loss;
}

double NetworkProblem::train_accuracy() const {
    return train::accuracy_of(nn::argmax_rows(nn::network_infer(*net_, train_inputs_)),
                              train_labels_);
}

double NetworkProblem::val_accuracy() const {
    return train::accuracy_of(nn::argmax_rows(nn::network_infer(*net_, val_inputs_)), val_labels_);
}

nn::ClassWeights resolve_class_weights(const data::DatasetBundle& bundle, bool class_weighting) {
    return class_weighting ? data::compute_class_weights(bundle) : nn::uniform_class_weights();
}

std::pair<MlpModel, train::TrainHistory> train_mlp(const data::DatasetBundle& bundle,
                                                   const train::TrainConfig& config,
                                                   const MlpConfig& arch) {
    if (bundle.split_size(data::Split::train) == 0) {
        throw std::runtime_error("train_mlp: empty train split");
    }
    if (bundle.split_size(data::Split::val) == 0) {
        throw std::runtime_error("train_mlp: empty val split");
    }
    MlpModel model = make_mlp(arch, config.seed);
    NetworkProblem problem(model.net, data::fea_matrix(bundle, data::Split::train),
                           data::label_vector(bundle, data::Split::train),
                           data::fea_matrix(bundle, data::Split::val),
                           data::label_vector(bundle, data::Split::val),
                           resolve_class_weights(bundle, config.class_weighting));
    train::TrainHistory history = train::fit(problem, config);
    return {std::move(model), std::move(history)};
}

std::pair<LogRegModel, train::TrainHistory> train_logreg(const data::DatasetBundle& bundle,
                                                         const train::TrainConfig& config) {
    if (bundle.split_size(data::Split::train) == 0) {
        throw std::runtime_error("train_logreg: empty train split");
    }
    if (bundle.split_size(data::Split::val) == 0) {
        throw std::runtime_error("train_logreg: empty val split");
    }
    LogRegModel model = make_logreg(config.l2_strength, config.class_weighting);
    NetworkProblem problem(model.net, data::fea_matrix(bundle, data::Split::train),
                           data::label_vector(bundle, data::Split::train),
                           data::fea_matrix(bundle, data::Split::val),
                           data::label_vector(bundle, data::Split::val),
                           resolve_class_weights(bundle, config.class_weighting),
                           config.l2_strength);
    train::TrainHistory history = train::fit(problem, config);
    return {std::move(model), std::move(history)};
}

Matrix predict_proba(const MlpModel& model, const Matrix& inputs) {
    return nn::network_infer(model.net, inputs);
}

Matrix predict_proba(const LogRegModel& model, const Matrix& inputs) {
    return nn::network_infer(model.net, inputs);
}

std::vector<int> predict_label(const MlpModel& model, const Matrix& inputs) {
    return nn::argmax_rows(predict_proba(model, inputs));
}

std::vector<int> predict_label(const LogRegModel& model, const Matrix& inputs) {
    return nn::argmax_rows(predict_proba(model, inputs));
}

Matrix extract_features(const MlpModel& model, const Matrix& inputs) {
    if (model.net.layers.empty()) {
        throw std::runtime_error("extract_features: empty network");
    }
    const auto* first = std::get_if<nn::DenseLayer>(&model.net.layers.front());
    if (first == nullptr) {
        throw std::runtime_error("extract_features: first layer is not dense");
    }
    return nn::dense_forward(*first, inputs);
}

}  // namespace fervr::model
