#pragma once

// Deterministic grid search over training configurations. Candidates are
// enumerated in declared axis order (rightmost axis fastest), trained with
// per-candidate seeds (base_seed + index), and ranked by validation accuracy.
// Results are a pure function of (spec, data): parallelism never changes them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fervr/classifiers.hpp"
#include "fervr/dataset.hpp"
#include "fervr/model_io.hpp"

namespace fervr::search {

struct GridAxis {
    std::string name;
    std::vector<nlohmann::json> values;
};

// Parsed {"model": ..., "axes": {name: [values]}, "base_seed": int}. Axis
// declaration order is preserved; every axis must be valid for the model.
struct GridSpec {
    std::string model;  // "mlp" | "logreg" | "late_fusion" | "intermediate_fusion"
    std::vector<GridAxis> axes;
    std::uint64_t base_seed = 0;
};

GridSpec grid_spec_from_string(const std::string& text);
GridSpec grid_spec_from_file(const std::string& path);

// One resolved configuration: {axis name: value} in declared order.
using CandidateConfig = nlohmann::ordered_json;

// Cartesian product in declared order, rightmost axis varying fastest.
// An empty axes object yields the single all-defaults candidate.
std::vector<CandidateConfig> enumerate_grid(const GridSpec& spec);

struct CandidateResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    CandidateConfig config;
    bool failed = false;
    std::string error;  // set only when failed
    double val_accuracy = 0.0;
    std::optional<double> test_accuracy;  // winner only, unless evaluate_all_test
    double wall_seconds = 0.0;            // diagnostic only; never serialized
};

// Immutable inputs shared by all candidates. Unimodal kinds need `fea`;
// late_fusion needs `paired` + `fea_model`; intermediate_fusion needs
// `paired` + `extractor`.
struct SearchData {
    const data::DatasetBundle* fea = nullptr;
    const data::MultimodalBundle* paired = nullptr;
    const io::FeaModel* fea_model = nullptr;
    const model::MlpModel* extractor = nullptr;
};

// Ranked best-first: successes by val accuracy descending (ties to the lower
// index), then failures by index. The winner is ranked.front().
struct SearchOutcome {
    std::vector<CandidateResult> ranked;

    const CandidateResult& winner() const { return ranked.front(); }
};

SearchOutcome run_grid_search(const GridSpec& spec, const SearchData& data,
                              std::size_t parallelism, bool evaluate_all_test = false);

// One JSONL line per candidate; wall time is deliberately omitted so the
// serialized results are byte-identical across parallelism levels.
std::string candidate_result_line(const CandidateResult& result);
std::string search_results_jsonl(const std::vector<CandidateResult>& ranked);

}  // namespace fervr::search
