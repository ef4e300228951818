#pragma once

// Metrics, confusion matrices, two-model agreement analysis, and report
// rendering for seven-class emotion predictions.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fervr/dataset.hpp"
#include "fervr/nn.hpp"

namespace fervr::eval {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

// Rows = true class, cols = predicted class.
using Confusion = std::array<std::array<std::size_t, nn::kNumClasses>, nn::kNumClasses>;

struct AgreementTable {
    std::size_t both_correct = 0;
    std::size_t only_a_correct = 0;
    std::size_t only_b_correct = 0;
    std::size_t both_wrong = 0;
    std::size_t total = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    std::array<ClassMetrics, nn::kNumClasses> per_class{};
    ClassMetrics macro{};  // unweighted mean over classes; support = total samples
    Confusion confusion{};
    std::optional<AgreementTable> agreement;
    std::optional<double> oracle_accuracy;
};

Confusion confusion_matrix(const std::vector<int>& predictions, const std::vector<int>& labels);

// Harmonic mean 2PR/(P+R), or 0 when P+R = 0.
double f1_score(double precision, double recall);

// Precision/recall/F1 use the zero-when-undefined convention, so every metric
// is defined even for absent classes.
EvalReport evaluate(const std::vector<int>& predictions, const std::vector<int>& labels);

// Partitions samples by which of the two prediction lists is correct.
AgreementTable agreement_analysis(const std::vector<int>& preds_a,
                                  const std::vector<int>& preds_b,
                                  const std::vector<int>& labels);

// Accuracy of a perfect model selector: correct whenever either input is.
double oracle_fusion_accuracy(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
                              const std::vector<int>& labels);

enum class ReportFormat { json, markdown };
ReportFormat report_format_from_string(const std::string& s);

// JSON is a lossless round-trip; markdown renders percentages to two decimals
// (half-up) with one row per class plus an Average row.
std::string render_report(const EvalReport& report, ReportFormat format);
EvalReport report_from_json(const std::string& json_text);

// One model's prediction for one (sample, optional view).
struct PredictionRecord {
    std::string sample_id;
    std::optional<data::View> view;
    data::Emotion pred = data::Emotion::anger;
    std::array<double, nn::kNumClasses> probs{};
};

std::vector<PredictionRecord> load_predictions(const std::string& path);
std::vector<PredictionRecord> parse_predictions(std::istream& in, const std::string& source_name);
void save_predictions(const std::string& path, const std::vector<PredictionRecord>& records);
std::string prediction_line(const PredictionRecord& record);

}  // namespace fervr::eval
