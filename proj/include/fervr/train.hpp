#pragma once

// Mini-batch Adam training engine with best-validation-accuracy snapshotting.
// `fit` is generic over a Problem type providing:
//   train_size()  -> std::size_t     number of training examples
//   min_batch()   -> std::size_t     smallest trainable batch (2 with batch norm)
//   params()      -> std::vector<std::span<double>>          trainable blocks
//   compute_batch(rows, dropout_seed) -> double              loss; caches grads
//   grads()       -> std::vector<std::span<const double>>    aligned with params()
//   train_accuracy() / val_accuracy() -> double              inference-mode
//   snapshot()    -> std::vector<double>                     full model state
//   restore(const std::vector<double>&)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fervr/nn.hpp"

namespace fervr::train {

struct TrainConfig {
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 0;
    bool class_weighting = true;
    bool shuffle = true;
    double l2_strength = 0.0;  // logistic regression weight penalty
};

TrainConfig train_config_from_string(const std::string& json_text);
TrainConfig train_config_from_file(const std::string& path);

// Variants that start from caller-supplied defaults instead of TrainConfig{};
// fields present in the JSON override the base, absent fields keep it.
TrainConfig train_config_from_string(const std::string& json_text, TrainConfig base);
TrainConfig train_config_from_file(const std::string& path, TrainConfig base);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_accuracy;
    std::size_t selected_epoch = 0;

    std::size_t epochs() const { return val_accuracy.size(); }
};

std::string history_to_json(const TrainHistory& history);

inline double accuracy_of(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw std::runtime_error("accuracy: " + std::to_string(predictions.size()) +
                                 " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) {
        throw std::runtime_error("accuracy: empty input");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predictions[i] == labels[i]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline std::uint64_t step_seed(std::uint64_t base, std::uint64_t step) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (step + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

template <class Problem>
TrainHistory fit(Problem& problem, const TrainConfig& config) {
    if (config.batch_size < 1) {
        throw std::runtime_error("fit: batch_size must be >= 1");
    }
    if (config.learning_rate <= 0.0) {
        throw std::runtime_error("fit: learning_rate must be positive");
    }
    if (config.max_epochs < 1) {
        throw std::runtime_error("fit: max_epochs must be >= 1");
    }
    const std::size_t n = problem.train_size();
    if (n == 0) {
        throw std::runtime_error("fit: empty train split");
    }
    if (n < problem.min_batch()) {
        throw std::runtime_error("fit: train split of " + std::to_string(n) +
                                 " is below the minimum batch of " +
                                 std::to_string(problem.min_batch()));
    }
    if (config.batch_size < problem.min_batch()) {
        throw std::runtime_error("fit: batch_size " + std::to_string(config.batch_size) +
                                 " is below the minimum batch of " +
                                 std::to_string(problem.min_batch()));
    }

    nn::AdamState adam;
    adam.learning_rate = config.learning_rate;
    auto params = problem.params();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(config.seed);

    TrainHistory history;
    double best_val = -1.0;
    std::size_t best_epoch = 0;
    std::vector<double> best_snapshot;
    std::uint64_t global_step = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        if (config.shuffle) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        }
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, n);
            if (end - start < problem.min_batch()) {
                continue;  // trailing remainder too small to train on
            }
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
            const double loss = problem.compute_batch(rows, step_seed(config.seed, global_step));
            ++global_step;
            if (!std::isfinite(loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            }
            adam.step(params, problem.grads());
            loss_sum += loss;
            ++batches;
        }
        history.train_loss.push_back(loss_sum / static_cast<double>(batches));
        history.train_accuracy.push_back(problem.train_accuracy());
        const double val_acc = problem.val_accuracy();
        history.val_accuracy.push_back(val_acc);
        if (val_acc > best_val) {
            best_val = val_acc;
            best_epoch = epoch;
            best_snapshot = problem.snapshot();
        }
    }
    problem.restore(best_snapshot);
    history.selected_epoch = best_epoch;
    return history;
}

}  // namespace fervr::train
