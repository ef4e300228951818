#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fervr/classifiers.hpp"
#include "fervr/dataset.hpp"
#include "fervr/nn.hpp"
#include "fervr/train.hpp"

using namespace fervr;

namespace {

data::DatasetBundle easy_bundle(std::size_t per_train, std::size_t per_val, std::size_t per_test,
                                double sigma, std::uint64_t seed) {
    data::SynthConfig config;
    config.per_class_train = per_train;
    config.per_class_val = per_val;
    config.per_class_test = per_test;
    config.sigma = sigma;
    config.mode = data::SynthMode::easy;
    config.seed = seed;
    return data::generate_synthetic(config).fea;
}

// A dataset whose train and val splits are the same single sample.
data::DatasetBundle single_sample_bundle() {
    data::DatasetBundle bundle;
    data::LabeledSample sample;
    sample.id = "train-fear-0";
    sample.participant = "synthetic";
    sample.split = data::Split::train;
    sample.label = data::Emotion::fear;
    sample.fea.fill(0.25);
    bundle.samples.push_back(sample);
    sample.id = "val-fear-0";
    sample.split = data::Split::val;
    bundle.samples.push_back(sample);
    return bundle;
}

double max_abs_weight(const nn::DenseNetwork& net) {
    double m = 0.0;
    for (const auto& layer : net.layers) {
        if (const auto* d = std::get_if<nn::DenseLayer>(&layer)) {
            for (double w : d->weights.data) {
                m = std::max(m, std::abs(w));
            }
        }
    }
    return m;
}

Matrix random_inputs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix m(n, data::kFeaDim);
    for (double& v : m.data) {
        v = unit(rng);
    }
    return m;
}

}  // namespace

TEST_CASE("default MLP parameter count matches the layer arithmetic") {
    model::MlpModel model = model::make_mlp({}, 7);
    CHECK(model.net.parameter_count() ==
          (63 * 128 + 128) + (128 * 64 + 64) + (64 * 7 + 7));
    CHECK(model.net.parameter_count() == model::kDefaultMlpParameterCount);
    // Dense, dropout, dense, dropout, dense.
    CHECK(model.net.layers.size() == 5);
}

TEST_CASE("make_mlp rejects inconsistent architecture specs") {
    model::MlpConfig bad;
    bad.hidden_widths = {128};
    bad.dropout_rates = {0.2, 0.2};
    CHECK_THROWS_WITH_AS(model::make_mlp(bad, 0), doctest::Contains("hidden widths"),
                         std::runtime_error);
    bad.hidden_widths = {};
    bad.dropout_rates = {};
    CHECK_THROWS_WITH_AS(model::make_mlp(bad, 0), doctest::Contains("hidden layer"),
                         std::runtime_error);
}

TEST_CASE("zero-initialized logistic regression predicts the uniform distribution") {
    model::LogRegModel model = model::make_logreg();
    Matrix probs = model::predict_proba(model, random_inputs(10, 3));
    for (double p : probs.data) {
        CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    }
}

TEST_CASE("predict_proba rows are simplex points across random inputs") {
    model::MlpModel model = model::make_mlp({}, 11);
    Matrix inputs = random_inputs(1000, 5);
    Matrix probs = model::predict_proba(model, inputs);
    REQUIRE(probs.rows == 1000);
    REQUIRE(probs.cols == 7);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols; ++j) {
            CHECK(probs(i, j) >= 0.0);
            sum += probs(i, j);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("predict_proba is bitwise deterministic across calls") {
    model::MlpModel model = model::make_mlp({}, 13);
    Matrix inputs = random_inputs(32, 9);
    Matrix a = model::predict_proba(model, inputs);
    Matrix b = model::predict_proba(model, inputs);
    REQUIRE(a.data.size() == b.data.size());
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        CHECK(a.data[k] == b.data[k]);
    }
}

TEST_CASE("predict_label breaks ties toward the lowest class index") {
    // Build a logreg whose logits are all zero: a seven-way tie.
    model::LogRegModel model = model::make_logreg();
    Matrix inputs = random_inputs(3, 1);
    std::vector<int> labels = model::predict_label(model, inputs);
    for (int label : labels) {
        CHECK(label == 0);
    }

    // Bias pattern producing an exact two-way tie between indices 2 and 5.
    auto& dense = std::get<nn::DenseLayer>(model.net.layers[0]);
    dense.bias[2] = 3.0;
    dense.bias[5] = 3.0;
    Matrix zero(2, data::kFeaDim);
    std::vector<int> tied = model::predict_label(model, zero);
    for (int label : tied) {
        CHECK(label == 2);
    }

    dense.bias[0] = 9.0;
    std::vector<int> top = model::predict_label(model, zero);
    for (int label : top) {
        CHECK(label == 0);
    }
}

TEST_CASE("extract_features is the post-ReLU output of the first dense layer") {
    model::MlpModel model = model::make_mlp({}, 21);
    Matrix inputs = random_inputs(16, 4);
    Matrix features = model::extract_features(model, inputs);
    REQUIRE(features.rows == 16);
    REQUIRE(features.cols == 128);
    for (double v : features.data) {
        CHECK(v >= 0.0);
    }

    // Zero first layer -> all-zero features.
    model::MlpModel zeroed = model::make_mlp({}, 21);
    auto& first = std::get<nn::DenseLayer>(zeroed.net.layers[0]);
    std::fill(first.weights.data.begin(), first.weights.data.end(), 0.0);
    std::fill(first.bias.begin(), first.bias.end(), 0.0);
    Matrix zero_features = model::extract_features(zeroed, inputs);
    for (double v : zero_features.data) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("extract_features matches the intermediate activation of predict_proba") {
    // Replay the remaining layers on the extracted features; dropout is the
    // identity at inference, so the composition must reproduce predict_proba.
    model::MlpModel model = model::make_mlp({}, 31);
    Matrix inputs = random_inputs(8, 17);
    Matrix features = model::extract_features(model, inputs);

    nn::DenseNetwork tail;
    tail.layers.push_back(model.net.layers[2]);
    tail.layers.push_back(model.net.layers[4]);
    Matrix via_features = nn::network_infer(tail, features);
    Matrix direct = model::predict_proba(model, inputs);
    REQUIRE(via_features.data.size() == direct.data.size());
    for (std::size_t k = 0; k < direct.data.size(); ++k) {
        CHECK(via_features.data[k] == direct.data[k]);
    }
}

TEST_CASE("MLP reaches 100% test accuracy on zero-noise synthetic data") {
    data::DatasetBundle bundle = easy_bundle(50, 20, 20, 0.0, 42);
    train::TrainConfig config;
    config.max_epochs = 50;
    config.seed = 42;
    auto [model, history] = model::train_mlp(bundle, config);
    Matrix test_inputs = data::fea_matrix(bundle, data::Split::test);
    std::vector<int> predictions = model::predict_label(model, test_inputs);
    double accuracy =
        train::accuracy_of(predictions, data::label_vector(bundle, data::Split::test));
    CHECK(accuracy == 1.0);
    CHECK(history.epochs() == 50);
}

TEST_CASE("logistic regression reaches 100% test accuracy on zero-noise synthetic data") {
    data::DatasetBundle bundle = easy_bundle(50, 20, 20, 0.0, 7);
    train::TrainConfig config;
    config.max_epochs = 60;
    config.seed = 7;
    auto [model, history] = model::train_logreg(bundle, config);
    Matrix test_inputs = data::fea_matrix(bundle, data::Split::test);
    double accuracy = train::accuracy_of(model::predict_label(model, test_inputs),
                                         data::label_vector(bundle, data::Split::test));
    CHECK(accuracy == 1.0);
}

TEST_CASE("single-sample memorization selects the first perfect epoch") {
    data::DatasetBundle bundle = single_sample_bundle();
    train::TrainConfig config;
    config.max_epochs = 120;
    config.learning_rate = 0.01;
    config.class_weighting = false;  // only one class present
    config.seed = 3;
    auto [model, history] = model::train_mlp(bundle, config);
    REQUIRE(history.epochs() == 120);
    CHECK(history.val_accuracy[history.selected_epoch] == 1.0);
    for (std::size_t e = 0; e < history.selected_epoch; ++e) {
        CHECK(history.val_accuracy[e] < 1.0);
    }

    Matrix input(1, data::kFeaDim, 0.25);
    CHECK(model::predict_label(model, input)[0] == static_cast<int>(data::Emotion::fear));
}

TEST_CASE("logistic regression memorizes a one-sample dataset to near-zero loss") {
    data::DatasetBundle bundle = single_sample_bundle();
    train::TrainConfig config;
    config.max_epochs = 400;
    config.learning_rate = 0.05;
    config.class_weighting = false;
    config.l2_strength = 0.0;
    auto [model, history] = model::train_logreg(bundle, config);
    CHECK(history.train_loss.back() <= 1e-3);
}

TEST_CASE("class weighting is a no-op on perfectly balanced data") {
    data::DatasetBundle bundle = easy_bundle(10, 5, 5, 0.05, 19);
    train::TrainConfig config;
    config.max_epochs = 8;
    config.seed = 19;

    config.class_weighting = true;
    auto [weighted, _h1] = model::train_mlp(bundle, config);
    config.class_weighting = false;
    auto [unweighted, _h2] = model::train_mlp(bundle, config);

    Matrix inputs = data::fea_matrix(bundle, data::Split::test);
    Matrix a = model::predict_proba(weighted, inputs);
    Matrix b = model::predict_proba(unweighted, inputs);
    REQUIRE(a.data.size() == b.data.size());
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        CHECK(a.data[k] == b.data[k]);
    }
}

TEST_CASE("training is bitwise reproducible for identical data, config, and seed") {
    data::DatasetBundle bundle = easy_bundle(12, 4, 4, 0.1, 23);
    train::TrainConfig config;
    config.max_epochs = 6;
    config.seed = 23;

    auto [first, history_a] = model::train_mlp(bundle, config);
    auto [second, history_b] = model::train_mlp(bundle, config);

    std::vector<double> pa = nn::snapshot_params(first.net);
    std::vector<double> pb = nn::snapshot_params(second.net);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
        CHECK(pa[k] == pb[k]);
    }
    REQUIRE(history_a.train_loss.size() == history_b.train_loss.size());
    for (std::size_t e = 0; e < history_a.train_loss.size(); ++e) {
        CHECK(history_a.train_loss[e] == history_b.train_loss[e]);
        CHECK(history_a.val_accuracy[e] == history_b.val_accuracy[e]);
    }
    CHECK(history_a.selected_epoch == history_b.selected_epoch);
}

TEST_CASE("selected model's val accuracy dominates every epoch") {
    data::DatasetBundle bundle = easy_bundle(10, 6, 6, 0.25, 5);
    train::TrainConfig config;
    config.max_epochs = 15;
    config.seed = 5;
    auto [model, history] = model::train_mlp(bundle, config);
    const double best = history.val_accuracy[history.selected_epoch];
    for (double acc : history.val_accuracy) {
        CHECK(best >= acc);
    }
    // Earliest epoch on ties.
    for (std::size_t e = 0; e < history.selected_epoch; ++e) {
        CHECK(history.val_accuracy[e] < best);
    }
}

TEST_CASE("huge l2 shrinks logreg weights and flattens predictions toward the class prior") {
    data::DatasetBundle bundle = easy_bundle(10, 4, 4, 0.05, 29);
    train::TrainConfig config;
    config.max_epochs = 40;
    config.seed = 29;
    config.l2_strength = 1e6;
    auto [ridge, _h1] = model::train_logreg(bundle, config);
    config.l2_strength = 0.0;
    auto [free, _h2] = model::train_logreg(bundle, config);

    // Adam's normalized steps oscillate at the learning-rate scale, so the
    // penalized weights settle near (not exactly at) zero.
    CHECK(max_abs_weight(ridge.net) < 5e-3);
    CHECK(max_abs_weight(ridge.net) < max_abs_weight(free.net) / 10.0);

    // With weights pinned near zero, probabilities depend only on the bias,
    // which for balanced classes stays near the uniform prior.
    Matrix probs = model::predict_proba(ridge, data::fea_matrix(bundle, data::Split::test));
    for (double p : probs.data) {
        CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(0.15));
    }
}

TEST_CASE("l2=0 logreg drives loss below 1e-2 on separable two-class toy data") {
    // Two linearly separable classes: anger lives near 0.1, happiness near 0.9
    // on every coordinate.
    data::DatasetBundle bundle;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (int c = 0; c < 2; ++c) {
        const data::Emotion label = c == 0 ? data::Emotion::anger : data::Emotion::happiness;
        const double center = c == 0 ? 0.1 : 0.9;
        for (int i = 0; i < 12; ++i) {
            data::LabeledSample sample;
            sample.split = i < 8 ? data::Split::train : data::Split::val;
            sample.id = std::string(data::to_string(sample.split)) + "-" +
                        data::to_string(label) + "-" + std::to_string(i);
            sample.participant = "synthetic";
            sample.label = label;
            for (auto& v : sample.fea) {
                v = center + jitter(rng);
            }
            bundle.samples.push_back(sample);
        }
    }

    train::TrainConfig config;
    config.max_epochs = 300;
    config.learning_rate = 0.05;
    config.batch_size = 16;
    config.class_weighting = false;
    config.seed = 77;
    auto [model, history] = model::train_logreg(bundle, config);
    CHECK(history.train_loss.back() < 1e-2);
    // Loss decreases monotonically until it first dips below 1e-2; after that
    // Adam's fixed-scale steps may wiggle around the floor.
    std::size_t first_below = history.train_loss.size();
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        if (history.train_loss[e] < 1e-2) {
            first_below = e;
            break;
        }
    }
    REQUIRE(first_below < history.train_loss.size());
    for (std::size_t e = 1; e <= first_below; ++e) {
        CHECK(history.train_loss[e] <= history.train_loss[e - 1] + 1e-9);
    }
}

TEST_CASE("training rejects empty splits") {
    data::DatasetBundle bundle = easy_bundle(4, 2, 2, 0.0, 1);
    data::DatasetBundle train_only;
    for (const auto& sample : bundle.samples) {
        if (sample.split == data::Split::train) {
            train_only.samples.push_back(sample);
        }
    }
    train::TrainConfig config;
    config.max_epochs = 1;
    CHECK_THROWS_WITH_AS(model::train_mlp(train_only, config), doctest::Contains("empty val"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(model::train_logreg(data::DatasetBundle{}, config),
                         doctest::Contains("empty train"), std::runtime_error);
}

TEST_CASE("train config parsing applies defaults and rejects unknown fields") {
    train::TrainConfig defaults = train::train_config_from_string("{}");
    CHECK(defaults.batch_size == 32);
    CHECK(defaults.learning_rate == 1e-3);
    CHECK(defaults.max_epochs == 200);
    CHECK(defaults.class_weighting == true);
    CHECK(defaults.shuffle == true);
    CHECK(defaults.l2_strength == 0.0);

    train::TrainConfig custom = train::train_config_from_string(
        R"({"batch_size": 8, "learning_rate": 0.01, "max_epochs": 5,
            "seed": 99, "class_weighting": false, "shuffle": false, "l2_strength": 0.5})");
    CHECK(custom.batch_size == 8);
    CHECK(custom.learning_rate == 0.01);
    CHECK(custom.max_epochs == 5);
    CHECK(custom.seed == 99);
    CHECK(custom.class_weighting == false);
    CHECK(custom.shuffle == false);
    CHECK(custom.l2_strength == 0.5);

    CHECK_THROWS_WITH_AS(train::train_config_from_string(R"({"batchsize": 8})"),
                         doctest::Contains("unknown field"), std::runtime_error);
    CHECK_THROWS_WITH_AS(train::train_config_from_string("[1,2]"),
                         doctest::Contains("JSON object"), std::runtime_error);
}

TEST_CASE("fit rejects invalid configurations") {
    data::DatasetBundle bundle = easy_bundle(2, 1, 1, 0.0, 1);
    train::TrainConfig config;
    config.max_epochs = 0;
    CHECK_THROWS_WITH_AS(model::train_logreg(bundle, config),
                         doctest::Contains("max_epochs"), std::runtime_error);
    config.max_epochs = 1;
    config.learning_rate = 0.0;
    CHECK_THROWS_WITH_AS(model::train_logreg(bundle, config),
                         doctest::Contains("learning_rate"), std::runtime_error);
    config.learning_rate = 1e-3;
    config.batch_size = 0;
    CHECK_THROWS_WITH_AS(model::train_logreg(bundle, config),
                         doctest::Contains("batch_size"), std::runtime_error);
}

TEST_CASE("history serializes train curves and the selected epoch") {
    train::TrainHistory history;
    history.train_loss = {0.5, 0.25};
    history.train_accuracy = {0.5, 1.0};
    history.val_accuracy = {0.5, 1.0};
    history.selected_epoch = 1;
    const std::string json = train::history_to_json(history);
    CHECK(json.find("\"selected_epoch\": 1") != std::string::npos);
    CHECK(json.find("\"train_loss\"") != std::string::npos);
    CHECK(json.find("0.25") != std::string::npos);
}
