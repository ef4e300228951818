// fervr — command-line driver for the full workflow: synthesize data, train
// unimodal classifiers, extract features, train fusion models, evaluate,
// compare predictions, and grid-search hyperparameters.
//
// Exit codes: 0 success, 1 validation/domain error, 2 usage error.
// Diagnostics go to stderr; data goes to files or stdout. Output files are
// written to a temporary sibling and renamed on success, so a failed run
// never leaves a partial file behind.

#include <array>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fervr/classifiers.hpp"
#include "fervr/dataset.hpp"
#include "fervr/evaluation.hpp"
#include "fervr/fusion.hpp"
#include "fervr/hypersearch.hpp"
#include "fervr/matrix.hpp"
#include "fervr/model_io.hpp"
#include "fervr/nn.hpp"
#include "fervr/train.hpp"

namespace {

namespace fs = std::filesystem;
using fervr::Matrix;
using ordered_json = nlohmann::ordered_json;
namespace data = fervr::data;
namespace model = fervr::model;
namespace nn = fervr::nn;
namespace fuse = fervr::fuse;
namespace io = fervr::io;
namespace eval = fervr::eval;
namespace search = fervr::search;
namespace train = fervr::train;

// ---- atomic output helpers -------------------------------------------------

// Runs `saver` against a temporary path, then renames it over `path`.
template <typename Saver>
void write_via_temp(const std::string& path, Saver&& saver) {
    const std::string tmp = path + ".tmp";
    try {
        saver(tmp);
    } catch (...) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw;
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw std::runtime_error("cannot rename '" + tmp + "' to '" + path +
                                 "': " + ec.message());
    }
}

void write_text_atomic(const std::string& path, const std::string& content) {
    write_via_temp(path, [&](const std::string& tmp) {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write file '" + tmp + "'");
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("cannot write file '" + tmp + "'");
        }
    });
}

// ---- small shared helpers ---------------------------------------------------

double accuracy_of(const std::vector<int>& preds, const std::vector<int>& labels) {
    return eval::evaluate(preds, labels).accuracy;
}

train::TrainConfig load_train_config(const std::string& path, train::TrainConfig base) {
    if (path.empty()) {
        return base;
    }
    return train::train_config_from_file(path, base);
}

Matrix all_fea_rows(const data::DatasetBundle& bundle) {
    Matrix inputs(bundle.samples.size(), data::kFeaDim);
    for (std::size_t r = 0; r < bundle.samples.size(); ++r) {
        std::copy(bundle.samples[r].fea.begin(), bundle.samples[r].fea.end(),
                  inputs.row(r).begin());
    }
    return inputs;
}

std::vector<eval::PredictionRecord> records_from(const std::vector<std::string>& ids,
                                                 const std::vector<std::optional<data::View>>& views,
                                                 const Matrix& probs) {
    std::vector<eval::PredictionRecord> records(probs.rows);
    const std::vector<int> preds = nn::argmax_rows(probs);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        records[r].sample_id = ids[r];
        records[r].view = views[r];
        records[r].pred = static_cast<data::Emotion>(preds[r]);
        const auto row = probs.row(r);
        std::copy(row.begin(), row.end(), records[r].probs.begin());
    }
    return records;
}

// ---- flag containers ---------------------------------------------------------

struct SynthFlags {
    std::string config;
    std::string out_dir;
};

struct TrainFlags {
    std::string data;
    std::string model;
    std::string config;
    std::string out;
    std::string history;
};

struct ExtractFlags {
    std::string model;
    std::string data;
    std::string out;
};

struct FuseFlags {
    std::string strategy;
    std::string fea_model;
    std::string data;
    std::string image_obs;
    std::string config;
    std::string out;
    std::string history;
    std::size_t projection_width = 512;
    double dropout_rate = 0.4;
    std::string gate_activation = "softmax";
};

struct EvaluateFlags {
    std::string model;
    std::string data;
    std::string image_obs;
    std::string report;
    std::string format = "json";
    std::string split = "test";
    std::string preds;
};

struct CompareFlags {
    std::string preds_a;
    std::string preds_b;
    std::string labels;
    std::string report;
    std::string format = "json";
};

struct GridFlags {
    std::string spec;
    std::string data;
    std::string image_obs;
    std::string fea_model;
    std::string out;
    std::size_t parallelism = 1;
    bool all_test = false;
};

// ---- subcommands -------------------------------------------------------------

void cmd_synth(const SynthFlags& flags) {
    const data::SynthConfig config = data::synth_config_from_file(flags.config);
    const data::SynthData synth = data::generate_synthetic(config);
    fs::create_directories(flags.out_dir);
    const std::string fea_path = (fs::path(flags.out_dir) / "fea.jsonl").string();
    const std::string obs_path = (fs::path(flags.out_dir) / "image_obs.jsonl").string();
    write_via_temp(fea_path,
                   [&](const std::string& tmp) { data::save_fea_dataset(tmp, synth.fea); });
    write_via_temp(obs_path, [&](const std::string& tmp) {
        data::save_image_observations(tmp, synth.observations);
    });
    std::cout << data::split_summary_json(data::split_summary(synth.fea)) << "\n";
}

void cmd_train(const TrainFlags& flags) {
    const data::DatasetBundle bundle = data::load_fea_dataset(flags.data);
    const train::TrainConfig config = load_train_config(flags.config, train::TrainConfig{});

    io::AnyModel saved;
    train::TrainHistory history;
    std::size_t parameter_count = 0;
    if (flags.model == "mlp") {
        auto [trained, hist] = model::train_mlp(bundle, config);
        parameter_count = trained.net.parameter_count();
        history = std::move(hist);
        saved = std::move(trained);
    } else {
        auto [trained, hist] = model::train_logreg(bundle, config);
        parameter_count = trained.net.parameter_count();
        history = std::move(hist);
        saved = std::move(trained);
    }

    write_via_temp(flags.out, [&](const std::string& tmp) { io::save_model(tmp, saved); });
    if (!flags.history.empty()) {
        write_text_atomic(flags.history, train::history_to_json(history));
    }

    ordered_json line;
    line["kind"] = flags.model;
    line["parameter_count"] = parameter_count;
    line["selected_epoch"] = history.selected_epoch;
    const io::FeaModel scorer = (flags.model == "mlp")
                                    ? io::FeaModel(std::get<model::MlpModel>(saved))
                                    : io::FeaModel(std::get<model::LogRegModel>(saved));
    for (data::Split split : {data::Split::train, data::Split::val, data::Split::test}) {
        const std::string key = std::string(data::to_string(split)) + "_accuracy";
        if (bundle.split_size(split) == 0) {
            line[key] = nullptr;
            continue;
        }
        const Matrix probs = io::fea_predict_proba(scorer, data::fea_matrix(bundle, split));
        line[key] = accuracy_of(nn::argmax_rows(probs), data::label_vector(bundle, split));
    }
    std::cout << line.dump() << "\n";
}

void cmd_extract_features(const ExtractFlags& flags) {
    const io::FeaModel loaded = io::load_fea_model(flags.model);
    const auto* mlp = std::get_if<model::MlpModel>(&loaded);
    if (mlp == nullptr) {
        throw std::runtime_error("extract-features requires an MLP model, got '" +
                                 io::fea_model_kind(loaded) + "'");
    }
    const data::DatasetBundle bundle = data::load_fea_dataset(flags.data);
    const Matrix features = model::extract_features(*mlp, all_fea_rows(bundle));

    std::string out;
    for (std::size_t r = 0; r < features.rows; ++r) {
        const data::LabeledSample& sample = bundle.samples[r];
        ordered_json line;
        line["id"] = sample.id;
        line["split"] = data::to_string(sample.split);
        line["label"] = data::to_string(sample.label);
        const auto row = features.row(r);
        line["features"] = std::vector<double>(row.begin(), row.end());
        out += line.dump();
        out += "\n";
    }
    write_text_atomic(flags.out, out);

    ordered_json summary;
    summary["samples"] = features.rows;
    summary["feature_dim"] = features.cols;
    std::cout << summary.dump() << "\n";
}

void fuse_late(const FuseFlags& flags, const data::MultimodalBundle& paired,
               const train::TrainConfig& config) {
    const io::FeaModel fea_model = io::load_fea_model(flags.fea_model);
    const fuse::LateStrategy strategy = fuse::late_strategy_from_string(flags.strategy);

    auto split_of = [&](data::Split split) {
        const Matrix fea_probs =
            io::fea_predict_proba(fea_model, data::fea_matrix(paired, split));
        return fuse::fusion_split(paired, split, fea_probs);
    };
    const fuse::FusionSplit train_split = split_of(data::Split::train);
    const fuse::FusionSplit val_split = split_of(data::Split::val);
    const fuse::FusionSplit test_split = split_of(data::Split::test);

    const nn::ClassWeights weights =
        config.class_weighting
            ? data::compute_class_weights(paired.class_counts(data::Split::train))
            : nn::uniform_class_weights();
    auto [fused_model, history] =
        fuse::train_late_fusion(strategy, train_split, val_split, weights, config);

    const io::LateFusionArtifact artifact{fused_model, fea_model};
    write_via_temp(flags.out, [&](const std::string& tmp) { io::save_model(tmp, artifact); });
    if (!flags.history.empty()) {
        write_text_atomic(flags.history, train::history_to_json(history));
    }

    ordered_json line;
    line["strategy"] = flags.strategy;
    line["parameter_count"] = fuse::parameter_count(fused_model);
    line["epochs"] = history.epochs();
    if (test_split.labels.empty()) {
        line["fea_accuracy"] = nullptr;
        line["image_accuracy"] = nullptr;
        line["fused_accuracy"] = nullptr;
    } else {
        const Matrix fused =
            fuse::late_fusion_forward(fused_model, test_split.fea_probs, test_split.img_probs);
        line["fea_accuracy"] =
            accuracy_of(nn::argmax_rows(test_split.fea_probs), test_split.labels);
        line["image_accuracy"] =
            accuracy_of(nn::argmax_rows(test_split.img_probs), test_split.labels);
        line["fused_accuracy"] = accuracy_of(nn::argmax_rows(fused), test_split.labels);
    }
    std::cout << line.dump() << "\n";
}

void fuse_intermediate(const FuseFlags& flags, const data::MultimodalBundle& paired,
                       const train::TrainConfig& config) {
    const io::FeaModel loaded = io::load_fea_model(flags.fea_model);
    const auto* mlp = std::get_if<model::MlpModel>(&loaded);
    if (mlp == nullptr) {
        throw std::runtime_error("intermediate fusion requires an MLP feature extractor, got '" +
                                 io::fea_model_kind(loaded) + "'");
    }
    fuse::IntermediateConfig fusion_config;
    fusion_config.projection_width = flags.projection_width;
    fusion_config.dropout_rate = flags.dropout_rate;
    fusion_config.gate_activation = fuse::gate_activation_from_string(flags.gate_activation);

    auto [fused_model, history] =
        fuse::train_intermediate_fusion(*mlp, paired, fusion_config, config);
    const io::IntermediateArtifact artifact{fused_model, *mlp};
    write_via_temp(flags.out, [&](const std::string& tmp) { io::save_model(tmp, artifact); });
    if (!flags.history.empty()) {
        write_text_atomic(flags.history, train::history_to_json(history));
    }

    ordered_json line;
    line["strategy"] = flags.strategy;
    line["parameter_count"] = fused_model.parameter_count();
    line["epochs"] = history.epochs();
    if (paired.split_size(data::Split::test) == 0) {
        line["fea_accuracy"] = nullptr;
        line["image_accuracy"] = nullptr;
        line["fused_accuracy"] = nullptr;
    } else {
        const Matrix fea_inputs = data::fea_matrix(paired, data::Split::test);
        const std::vector<int> labels = data::label_vector(paired, data::Split::test);
        const Matrix fused = io::predict_fused(
            artifact, fea_inputs, data::image_feature_matrix(paired, data::Split::test));
        line["fea_accuracy"] =
            accuracy_of(model::predict_label(*mlp, fea_inputs), labels);
        try {
            const Matrix img_probs = data::image_probs_matrix(paired, data::Split::test);
            line["image_accuracy"] = accuracy_of(nn::argmax_rows(img_probs), labels);
        } catch (const std::exception&) {
            line["image_accuracy"] = nullptr;  // observations carry features only
        }
        line["fused_accuracy"] = accuracy_of(nn::argmax_rows(fused), labels);
    }
    std::cout << line.dump() << "\n";
}

void cmd_fuse(const FuseFlags& flags) {
    const data::DatasetBundle bundle = data::load_fea_dataset(flags.data);
    const std::vector<data::ImageObservation> observations =
        data::load_image_observations(flags.image_obs);
    const data::MultimodalBundle paired = data::pair_multimodal(bundle, observations, false);

    if (flags.strategy == "intermediate") {
        train::TrainConfig base;
        base.batch_size = 128;
        fuse_intermediate(flags, paired, load_train_config(flags.config, base));
    } else {
        fuse_late(flags, paired, load_train_config(flags.config, train::TrainConfig{}));
    }
}

void cmd_evaluate(const EvaluateFlags& flags) {
    const io::AnyModel loaded = io::load_model(flags.model);
    const std::string kind = io::model_kind(loaded);
    const data::DatasetBundle bundle = data::load_fea_dataset(flags.data);
    const data::Split split = data::split_from_string(flags.split);
    const eval::ReportFormat format = eval::report_format_from_string(flags.format);

    Matrix probs;
    std::vector<int> labels;
    std::vector<std::string> ids;
    std::vector<std::optional<data::View>> views;

    const bool is_fusion = std::holds_alternative<io::LateFusionArtifact>(loaded) ||
                           std::holds_alternative<io::IntermediateArtifact>(loaded);
    if (is_fusion) {
        if (flags.image_obs.empty()) {
            throw std::runtime_error("model kind '" + kind + "' requires --image-obs");
        }
        const data::MultimodalBundle paired =
            data::pair_multimodal(bundle, data::load_image_observations(flags.image_obs), false);
        labels = data::label_vector(paired, split);
        const Matrix fea_inputs = data::fea_matrix(paired, split);
        if (const auto* late = std::get_if<io::LateFusionArtifact>(&loaded)) {
            probs = io::predict_fused(*late, fea_inputs, data::image_probs_matrix(paired, split));
        } else {
            probs = io::predict_fused(std::get<io::IntermediateArtifact>(loaded), fea_inputs,
                                      data::image_feature_matrix(paired, split));
        }
        for (std::size_t i : paired.split_indices(split)) {
            ids.push_back(paired.samples[i].fea.id);
            views.push_back(paired.samples[i].image.view);
        }
    } else {
        if (!flags.image_obs.empty()) {
            std::cerr << "note: --image-obs is ignored for model kind '" << kind << "'\n";
        }
        const io::FeaModel fea_model = std::holds_alternative<model::MlpModel>(loaded)
                                           ? io::FeaModel(std::get<model::MlpModel>(loaded))
                                           : io::FeaModel(std::get<model::LogRegModel>(loaded));
        labels = data::label_vector(bundle, split);
        probs = io::fea_predict_proba(fea_model, data::fea_matrix(bundle, split));
        for (std::size_t i : bundle.split_indices(split)) {
            ids.push_back(bundle.samples[i].id);
            views.push_back(std::nullopt);
        }
    }

    if (labels.empty()) {
        throw std::runtime_error("split '" + flags.split + "' has no samples");
    }
    const std::vector<int> preds = nn::argmax_rows(probs);
    const eval::EvalReport report = eval::evaluate(preds, labels);
    write_text_atomic(flags.report, eval::render_report(report, format));
    if (!flags.preds.empty()) {
        const auto records = records_from(ids, views, probs);
        write_via_temp(flags.preds,
                       [&](const std::string& tmp) { eval::save_predictions(tmp, records); });
    }

    ordered_json line;
    line["kind"] = kind;
    line["split"] = flags.split;
    line["samples"] = labels.size();
    line["accuracy"] = report.accuracy;
    line["macro_f1"] = report.macro.f1;
    std::cout << line.dump() << "\n";
}

void cmd_compare(const CompareFlags& flags) {
    const std::vector<eval::PredictionRecord> a = eval::load_predictions(flags.preds_a);
    const std::vector<eval::PredictionRecord> b = eval::load_predictions(flags.preds_b);
    if (a.size() != b.size()) {
        throw std::runtime_error("prediction files have " + std::to_string(a.size()) + " and " +
                                 std::to_string(b.size()) + " records; counts must match");
    }
    if (a.empty()) {
        throw std::runtime_error("prediction files are empty");
    }
    const data::DatasetBundle bundle = data::load_fea_dataset(flags.labels);

    std::unordered_map<std::string, int> label_of;
    for (const data::LabeledSample& sample : bundle.samples) {
        label_of[sample.id] = static_cast<int>(sample.label);
    }
    auto key_of = [](const eval::PredictionRecord& record) {
        return record.sample_id + '\x1f' +
               (record.view ? data::to_string(*record.view) : "-");
    };
    std::unordered_map<std::string, std::size_t> b_index;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!b_index.emplace(key_of(b[i]), i).second) {
            throw std::runtime_error("duplicate prediction for sample '" + b[i].sample_id +
                                     "' in '" + flags.preds_b + "'");
        }
    }

    std::vector<int> preds_a;
    std::vector<int> preds_b;
    std::vector<int> labels;
    for (const eval::PredictionRecord& record : a) {
        const auto match = b_index.find(key_of(record));
        if (match == b_index.end()) {
            throw std::runtime_error("sample '" + record.sample_id + "' missing from '" +
                                     flags.preds_b + "'");
        }
        const auto label = label_of.find(record.sample_id);
        if (label == label_of.end()) {
            throw std::runtime_error("sample '" + record.sample_id + "' not present in '" +
                                     flags.labels + "'");
        }
        preds_a.push_back(static_cast<int>(record.pred));
        preds_b.push_back(static_cast<int>(b[match->second].pred));
        labels.push_back(label->second);
    }

    eval::EvalReport report = eval::evaluate(preds_a, labels);
    report.agreement = eval::agreement_analysis(preds_a, preds_b, labels);
    report.oracle_accuracy = eval::oracle_fusion_accuracy(preds_a, preds_b, labels);
    write_text_atomic(flags.report,
                      eval::render_report(report, eval::report_format_from_string(flags.format)));

    ordered_json line;
    line["total"] = report.agreement->total;
    line["both_correct"] = report.agreement->both_correct;
    line["only_a_correct"] = report.agreement->only_a_correct;
    line["only_b_correct"] = report.agreement->only_b_correct;
    line["both_wrong"] = report.agreement->both_wrong;
    line["accuracy_a"] = report.accuracy;
    line["accuracy_b"] = accuracy_of(preds_b, labels);
    line["oracle_accuracy"] = *report.oracle_accuracy;
    std::cout << line.dump() << "\n";
}

void cmd_gridsearch(const GridFlags& flags) {
    const search::GridSpec spec = search::grid_spec_from_file(flags.spec);
    const data::DatasetBundle bundle = data::load_fea_dataset(flags.data);

    std::optional<data::MultimodalBundle> paired;
    std::optional<io::FeaModel> fea_model;
    search::SearchData search_data;
    search_data.fea = &bundle;
    if (!flags.image_obs.empty()) {
        paired = data::pair_multimodal(bundle, data::load_image_observations(flags.image_obs),
                                       false);
        search_data.paired = &*paired;
    }
    if (!flags.fea_model.empty()) {
        fea_model = io::load_fea_model(flags.fea_model);
        search_data.fea_model = &*fea_model;
        if (const auto* mlp = std::get_if<model::MlpModel>(&*fea_model)) {
            search_data.extractor = mlp;
        }
    }

    const search::SearchOutcome outcome =
        search::run_grid_search(spec, search_data, flags.parallelism, flags.all_test);
    write_text_atomic(flags.out, search::search_results_jsonl(outcome.ranked));
    std::cout << search::candidate_result_line(outcome.winner()) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fervr — facial-expression recognition from VR-headset FEA vectors,\n"
                 "with late and intermediate fusion of image-model outputs."};
    app.require_subcommand(1);

    SynthFlags synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_cmd->add_option("--config", synth.config, "Synthesis config JSON file")->required();
    synth_cmd->add_option("--out-dir", synth.out_dir,
                          "Directory for fea.jsonl and image_obs.jsonl")
        ->required();

    TrainFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a unimodal FEA classifier");
    train_cmd->add_option("--data", train_flags.data, "FEA dataset JSONL")->required();
    train_cmd->add_option("--model", train_flags.model, "Classifier kind")
        ->required()
        ->check(CLI::IsMember({"mlp", "logreg"}));
    train_cmd->add_option("--config", train_flags.config, "Training config JSON file");
    train_cmd->add_option("--out", train_flags.out, "Output model JSON file")->required();
    train_cmd->add_option("--history", train_flags.history, "Output training-history JSON file");

    ExtractFlags extract;
    CLI::App* extract_cmd =
        app.add_subcommand("extract-features", "Emit MLP hidden-layer features per sample");
    extract_cmd->add_option("--model", extract.model, "Trained MLP model JSON file")->required();
    extract_cmd->add_option("--data", extract.data, "FEA dataset JSONL")->required();
    extract_cmd->add_option("--out", extract.out, "Output features JSONL")->required();

    FuseFlags fuse_flags;
    CLI::App* fuse_cmd = app.add_subcommand("fuse", "Train a fusion model over paired data");
    fuse_cmd->add_option("--strategy", fuse_flags.strategy, "Fusion strategy")
        ->required()
        ->check(CLI::IsMember({"average", "weighted_sum", "concat_dense", "bilinear",
                               "cross_attention", "intermediate"}));
    fuse_cmd->add_option("--fea-model", fuse_flags.fea_model, "Frozen FEA model JSON file")
        ->required();
    fuse_cmd->add_option("--data", fuse_flags.data, "FEA dataset JSONL")->required();
    fuse_cmd->add_option("--image-obs", fuse_flags.image_obs, "Image observations JSONL")
        ->required();
    fuse_cmd->add_option("--config", fuse_flags.config, "Training config JSON file");
    fuse_cmd->add_option("--out", fuse_flags.out, "Output fusion model JSON file")->required();
    fuse_cmd->add_option("--history", fuse_flags.history, "Output training-history JSON file");
    fuse_cmd->add_option("--projection-width", fuse_flags.projection_width,
                         "Intermediate fusion: branch projection width (128..512)");
    fuse_cmd->add_option("--dropout-rate", fuse_flags.dropout_rate,
                         "Intermediate fusion: head dropout rate");
    fuse_cmd->add_option("--gate-activation", fuse_flags.gate_activation,
                         "Intermediate fusion: gate activation")
        ->check(CLI::IsMember({"softmax", "sigmoid"}));

    EvaluateFlags evaluate;
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a model on one split");
    evaluate_cmd->add_option("--model", evaluate.model, "Model JSON file (any kind)")->required();
    evaluate_cmd->add_option("--data", evaluate.data, "FEA dataset JSONL")->required();
    evaluate_cmd->add_option("--image-obs", evaluate.image_obs,
                             "Image observations JSONL (required for fusion models)");
    evaluate_cmd->add_option("--report", evaluate.report, "Output report file")->required();
    evaluate_cmd->add_option("--format", evaluate.format, "Report format")
        ->check(CLI::IsMember({"json", "markdown"}));
    evaluate_cmd->add_option("--split", evaluate.split, "Dataset split to evaluate")
        ->check(CLI::IsMember({"train", "val", "test"}));
    evaluate_cmd->add_option("--preds", evaluate.preds, "Optional output predictions JSONL");

    CompareFlags compare;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Agreement analysis between two prediction files");
    compare_cmd->add_option("--preds-a", compare.preds_a, "First predictions JSONL")->required();
    compare_cmd->add_option("--preds-b", compare.preds_b, "Second predictions JSONL")->required();
    compare_cmd->add_option("--labels", compare.labels, "FEA dataset JSONL providing labels")
        ->required();
    compare_cmd->add_option("--report", compare.report, "Output report file")->required();
    compare_cmd->add_option("--format", compare.format, "Report format")
        ->check(CLI::IsMember({"json", "markdown"}));

    GridFlags grid;
    CLI::App* grid_cmd = app.add_subcommand("gridsearch", "Deterministic hyperparameter search");
    grid_cmd->add_option("--spec", grid.spec, "Grid spec JSON file")->required();
    grid_cmd->add_option("--data", grid.data, "FEA dataset JSONL")->required();
    grid_cmd->add_option("--image-obs", grid.image_obs,
                         "Image observations JSONL (fusion searches)");
    grid_cmd->add_option("--fea-model", grid.fea_model,
                         "Frozen FEA model JSON file (fusion searches)");
    grid_cmd->add_option("--parallelism", grid.parallelism, "Worker thread count (>= 1)");
    grid_cmd->add_option("--out", grid.out, "Output ranked results JSONL")->required();
    grid_cmd->add_flag("--all-test", grid.all_test,
                       "Evaluate test accuracy for every candidate, not just the winner");

    try {
        app.parse(argc, argv);
        if (*synth_cmd) {
            cmd_synth(synth);
        } else if (*train_cmd) {
            cmd_train(train_flags);
        } else if (*extract_cmd) {
            cmd_extract_features(extract);
        } else if (*fuse_cmd) {
            cmd_fuse(fuse_flags);
        } else if (*evaluate_cmd) {
            cmd_evaluate(evaluate);
        } else if (*compare_cmd) {
            cmd_compare(compare);
        } else if (*grid_cmd) {
            cmd_gridsearch(grid);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the usage error
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
