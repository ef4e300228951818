#include "fervr/hypersearch.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fervr/fusion.hpp"
#include "fervr/nn.hpp"
#include "fervr/train.hpp"

namespace fervr::search {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> kModelKinds = {"mlp", "logreg", "late_fusion",
                                              "intermediate_fusion"};

[[noreturn]] void spec_error(const std::string& message) {
    throw std::runtime_error("grid spec: " + message);
}

bool positive_integer(const json& v) {
    return v.is_number_integer() && v.get<long long>() >= 1;
}

void validate_axis_value(const std::string& model, const std::string& name, const json& v) {
    auto bad = [&](const std::string& why) { spec_error("axis '" + name + "': " + why); };
    auto only_for = [&](bool ok) {
        if (!ok) {
            spec_error("axis '" + name + "' is not valid for model '" + model + "'");
        }
    };
    if (name == "learning_rate") {
        if (!v.is_number() || v.get<double>() <= 0.0) {
            bad("values must be positive numbers");
        }
    } else if (name == "batch_size" || name == "max_epochs") {
        if (!positive_integer(v)) {
            bad("values must be integers >= 1");
        }
    } else if (name == "class_weighting") {
        if (!v.is_boolean()) {
            bad("values must be booleans");
        }
    } else if (name == "l2_strength") {
        only_for(model == "logreg");
        if (!v.is_number() || v.get<double>() < 0.0) {
            bad("values must be non-negative numbers");
        }
    } else if (name == "hidden_widths") {
        only_for(model == "mlp");
        if (!v.is_array() || v.empty()) {
            bad("values must be non-empty arrays of layer widths");
        }
        for (const json& w : v) {
            if (!positive_integer(w)) {
                bad("layer widths must be integers >= 1");
            }
        }
    } else if (name == "dropout_rates") {
        only_for(model == "mlp");
        if (!v.is_array()) {
            bad("values must be arrays of dropout rates");
        }
        for (const json& r : v) {
            if (!r.is_number() || r.get<double>() < 0.0 || r.get<double>() >= 1.0) {
                bad("dropout rates must lie in [0, 1)");
            }
        }
    } else if (name == "strategy") {
        only_for(model == "late_fusion");
        if (!v.is_string()) {
            bad("values must be strategy names");
        }
        (void)fuse::late_strategy_from_string(v.get<std::string>());
    } else if (name == "projection_width") {
        only_for(model == "intermediate_fusion");
        if (!positive_integer(v) || v.get<long long>() < 128 || v.get<long long>() > 512) {
            bad("values must be integers in [128, 512]");
        }
    } else if (name == "dropout_rate") {
        only_for(model == "intermediate_fusion");
        if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() >= 1.0) {
            bad("values must lie in [0, 1)");
        }
    } else if (name == "gate_activation") {
        only_for(model == "intermediate_fusion");
        if (!v.is_string()) {
            bad("values must be activation names");
        }
        (void)fuse::gate_activation_from_string(v.get<std::string>());
    } else {
        spec_error("unknown axis '" + name + "'");
    }
}

// Everything the candidates share, computed once before the worker pool runs.
struct Prepared {
    // Unimodal evaluation data.
    Matrix val_inputs;
    std::vector<int> val_labels;
    Matrix test_inputs;
    std::vector<int> test_labels;
    // Late fusion: frozen FEA probabilities joined with image probabilities.
    fuse::FusionSplit late_train;
    fuse::FusionSplit late_val;
    fuse::FusionSplit late_test;
    // Intermediate fusion evaluation features.
    fuse::FeatureSplit mid_val;
    fuse::FeatureSplit mid_test;
    std::array<std::size_t, nn::kNumClasses> paired_train_counts{};
};

Prepared prepare(const std::string& model, const SearchData& data) {
    Prepared p;
    if (model == "mlp" || model == "logreg") {
        if (data.fea == nullptr) {
            throw std::runtime_error("run_grid_search: model '" + model +
                                     "' requires a FEA dataset");
        }
        p.val_inputs = data::fea_matrix(*data.fea, data::Split::val);
        p.val_labels = data::label_vector(*data.fea, data::Split::val);
        p.test_inputs = data::fea_matrix(*data.fea, data::Split::test);
        p.test_labels = data::label_vector(*data.fea, data::Split::test);
        return p;
    }
    if (model == "late_fusion") {
        if (data.paired == nullptr || data.fea_model == nullptr) {
            throw std::runtime_error(
                "run_grid_search: late fusion requires paired observations and a FEA model");
        }
        auto split_of = [&](data::Split s) {
            const Matrix probs =
                io::fea_predict_proba(*data.fea_model, data::fea_matrix(*data.paired, s));
            return fuse::fusion_split(*data.paired, s, probs);
        };
        p.late_train = split_of(data::Split::train);
        p.late_val = split_of(data::Split::val);
        p.late_test = split_of(data::Split::test);
        p.paired_train_counts = data.paired->class_counts(data::Split::train);
        return p;
    }
    if (model == "intermediate_fusion") {
        if (data.paired == nullptr || data.extractor == nullptr) {
            throw std::runtime_error(
                "run_grid_search: intermediate fusion requires paired observations and an "
                "MLP feature extractor");
        }
        p.mid_val = fuse::feature_split(*data.paired, data::Split::val, *data.extractor);
        p.mid_test = fuse::feature_split(*data.paired, data::Split::test, *data.extractor);
        p.paired_train_counts = data.paired->class_counts(data::Split::train);
        return p;
    }
    throw std::runtime_error("run_grid_search: unknown model '" + model + "'");
}

train::TrainConfig base_train_config(const CandidateConfig& config, std::uint64_t seed) {
    train::TrainConfig tc;
    tc.seed = seed;
    if (config.contains("learning_rate")) {
        tc.learning_rate = config.at("learning_rate").get<double>();
    }
    if (config.contains("batch_size")) {
        tc.batch_size = config.at("batch_size").get<std::size_t>();
    }
    if (config.contains("max_epochs")) {
        tc.max_epochs = config.at("max_epochs").get<std::size_t>();
    }
    if (config.contains("class_weighting")) {
        tc.class_weighting = config.at("class_weighting").get<bool>();
    }
    if (config.contains("l2_strength")) {
        tc.l2_strength = config.at("l2_strength").get<double>();
    }
    return tc;
}

CandidateResult run_candidate(const GridSpec& spec, const SearchData& data, const Prepared& p,
                              std::size_t index, const CandidateConfig& config,
                              bool want_test) {
    CandidateResult result;
    result.index = index;
    result.seed = spec.base_seed + index;
    result.config = config;
    const auto started = std::chrono::steady_clock::now();
    try {
        const train::TrainConfig tc = base_train_config(config, result.seed);
        if (spec.model == "mlp") {
            model::MlpConfig arch;
            if (config.contains("hidden_widths")) {
                arch.hidden_widths = config.at("hidden_widths").get<std::vector<std::size_t>>();
            }
            if (config.contains("dropout_rates")) {
                arch.dropout_rates = config.at("dropout_rates").get<std::vector<double>>();
            }
            const auto [trained, history] = model::train_mlp(*data.fea, tc, arch);
            result.val_accuracy = train::accuracy_of(
                model::predict_label(trained, p.val_inputs), p.val_labels);
            if (want_test) {
                result.test_accuracy = train::accuracy_of(
                    model::predict_label(trained, p.test_inputs), p.test_labels);
            }
        } else if (spec.model == "logreg") {
            const auto [trained, history] = model::train_logreg(*data.fea, tc);
            result.val_accuracy = train::accuracy_of(
                model::predict_label(trained, p.val_inputs), p.val_labels);
            if (want_test) {
                result.test_accuracy = train::accuracy_of(
                    model::predict_label(trained, p.test_inputs), p.test_labels);
            }
        } else if (spec.model == "late_fusion") {
            const fuse::LateStrategy strategy = fuse::late_strategy_from_string(
                config.contains("strategy") ? config.at("strategy").get<std::string>()
                                            : "average");
            const nn::ClassWeights weights =
                tc.class_weighting ? data::compute_class_weights(p.paired_train_counts)
                                   : nn::uniform_class_weights();
            const auto [trained, history] =
                fuse::train_late_fusion(strategy, p.late_train, p.late_val, weights, tc);
            auto accuracy_on = [&](const fuse::FusionSplit& split) {
                const Matrix probs =
                    fuse::late_fusion_forward(trained, split.fea_probs, split.img_probs);
                return train::accuracy_of(nn::argmax_rows(probs), split.labels);
            };
            result.val_accuracy = accuracy_on(p.late_val);
            if (want_test) {
                result.test_accuracy = accuracy_on(p.late_test);
            }
        } else {
            fuse::IntermediateConfig icfg;
            if (config.contains("projection_width")) {
                icfg.projection_width = config.at("projection_width").get<std::size_t>();
            }
            if (config.contains("dropout_rate")) {
                icfg.dropout_rate = config.at("dropout_rate").get<double>();
            }
            if (config.contains("gate_activation")) {
                icfg.gate_activation = fuse::gate_activation_from_string(
                    config.at("gate_activation").get<std::string>());
            }
            const auto [trained, history] =
                fuse::train_intermediate_fusion(*data.extractor, *data.paired, icfg, tc);
            auto accuracy_on = [&](const fuse::FeatureSplit& split) {
                const Matrix probs = fuse::intermediate_fusion_infer(
                    trained, split.fea_features, split.img_features);
                return train::accuracy_of(nn::argmax_rows(probs), split.labels);
            };
            result.val_accuracy = accuracy_on(p.mid_val);
            if (want_test) {
                result.test_accuracy = accuracy_on(p.mid_test);
            }
        }
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
        result.val_accuracy = 0.0;
        result.test_accuracy.reset();
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace

GridSpec grid_spec_from_string(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const json::exception& e) {
        spec_error(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        spec_error("not a JSON object");
    }
    GridSpec spec;
    if (!doc.contains("model") || !doc.at("model").is_string()) {
        spec_error("missing model");
    }
    spec.model = doc.at("model").get<std::string>();
    if (std::find(kModelKinds.begin(), kModelKinds.end(), spec.model) == kModelKinds.end()) {
        spec_error("unknown model '" + spec.model + "'");
    }
    if (!doc.contains("axes") || !doc.at("axes").is_object()) {
        spec_error("missing axes object");
    }
    for (const auto& [name, values] : doc.at("axes").items()) {
        if (!values.is_array()) {
            spec_error("axis '" + name + "' must be an array of values");
        }
        if (values.empty()) {
            spec_error("axis '" + name + "' is empty");
        }
        GridAxis axis;
        axis.name = name;
        for (const json& v : values) {
            validate_axis_value(spec.model, name, v);
            axis.values.push_back(v);
        }
        spec.axes.push_back(std::move(axis));
    }
    if (doc.contains("base_seed")) {
        if (!doc.at("base_seed").is_number_integer() || doc.at("base_seed").get<long long>() < 0) {
            spec_error("base_seed must be a non-negative integer");
        }
        spec.base_seed = doc.at("base_seed").get<std::uint64_t>();
    }
    return spec;
}

GridSpec grid_spec_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return grid_spec_from_string(buffer.str());
}

std::vector<CandidateConfig> enumerate_grid(const GridSpec& spec) {
    std::size_t total = 1;
    for (const GridAxis& axis : spec.axes) {
        if (axis.values.empty()) {
            spec_error("axis '" + axis.name + "' is empty");
        }
        total *= axis.values.size();
    }
    // Rightmost axis varies fastest: stride of axis j is the product of the
    // sizes of all later axes.
    std::vector<std::size_t> strides(spec.axes.size(), 1);
    for (std::size_t j = spec.axes.size(); j-- > 1;) {
        strides[j - 1] = strides[j] * spec.axes[j].values.size();
    }
    std::vector<CandidateConfig> configs;
    configs.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        CandidateConfig config = CandidateConfig::object();
        for (std::size_t j = 0; j < spec.axes.size(); ++j) {
            const GridAxis& axis = spec.axes[j];
            config[axis.name] = axis.values[(i / strides[j]) % axis.values.size()];
        }
        configs.push_back(std::move(config));
    }
    return configs;
}

SearchOutcome run_grid_search(const GridSpec& spec, const SearchData& data,
                              std::size_t parallelism, bool evaluate_all_test) {
    if (parallelism < 1) {
        throw std::runtime_error("run_grid_search: parallelism must be >= 1");
    }
    const std::vector<CandidateConfig> configs = enumerate_grid(spec);
    const Prepared prepared = prepare(spec.model, data);

    std::vector<CandidateResult> results(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) {
                return;
            }
            results[i] = run_candidate(spec, data, prepared, i, configs[i], evaluate_all_test);
        }
    };
    const std::size_t threads = std::min(parallelism, configs.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    std::vector<std::size_t> order(results.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (results[a].failed != results[b].failed) {
            return !results[a].failed;  // successes first
        }
        if (!results[a].failed && results[a].val_accuracy != results[b].val_accuracy) {
            return results[a].val_accuracy > results[b].val_accuracy;
        }
        return a < b;
    });

    SearchOutcome outcome;
    outcome.ranked.reserve(results.size());
    for (std::size_t i : order) {
        outcome.ranked.push_back(std::move(results[i]));
    }
    if (outcome.ranked.front().failed) {
        throw std::runtime_error("run_grid_search: all " + std::to_string(configs.size()) +
                                 " candidates failed; first error: " +
                                 outcome.ranked.front().error);
    }
    if (!evaluate_all_test) {
        // Retrain the winner for its test accuracy; reproducible training
        // makes this bitwise identical to the original candidate run.
        CandidateResult& winner = outcome.ranked.front();
        CandidateResult rerun =
            run_candidate(spec, data, prepared, winner.index, winner.config, true);
        if (rerun.failed || rerun.val_accuracy != winner.val_accuracy) {
            throw std::logic_error(
                "run_grid_search: winner retraining did not reproduce its result");
        }
        winner.test_accuracy = rerun.test_accuracy;
    }
    return outcome;
}

std::string candidate_result_line(const CandidateResult& result) {
    ordered_json line;
    line["index"] = result.index;
    line["seed"] = result.seed;
    line["config"] = result.config;
    if (result.failed) {
        line["val_accuracy"] = nullptr;
        line["test_accuracy"] = nullptr;
        line["error"] = result.error;
    } else {
        line["val_accuracy"] = result.val_accuracy;
        if (result.test_accuracy.has_value()) {
            line["test_accuracy"] = *result.test_accuracy;
        } else {
            line["test_accuracy"] = nullptr;
        }
    }
    return line.dump();
}

std::string search_results_jsonl(const std::vector<CandidateResult>& ranked) {
    std::string out;
    for (const CandidateResult& result : ranked) {
        out += candidate_result_line(result);
        out += '\n';
    }
    return out;
}

}  // namespace fervr::search
