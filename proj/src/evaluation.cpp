#include "fervr/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace fervr::eval {

namespace {

void check_lengths(const char* func, std::size_t a, std::size_t b) {
    if (a != b) {
        throw std::runtime_error(std::string(func) + ": " + std::to_string(a) +
                                 " predictions vs " + std::to_string(b) + " labels");
    }
}

void check_class_index(const char* func, int value) {
    if (value < 0 || value >= static_cast<int>(nn::kNumClasses)) {
        throw std::runtime_error(std::string(func) + ": class index " + std::to_string(value) +
                                 " out of range");
    }
}

// value/denominator with the zero-when-undefined convention.
double safe_ratio(double value, double denominator) {
    return denominator == 0.0 ? 0.0 : value / denominator;
}

// Percent to two decimals, half-up: 0.680237 -> "68.02".
std::string format_percent(double fraction) {
    const long long scaled = std::llround(fraction * 10000.0);
    std::ostringstream out;
    out << scaled / 100 << '.' << std::setw(2) << std::setfill('0') << scaled % 100;
    return out.str();
}

nlohmann::ordered_json metrics_to_json(const ClassMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
            {"support", m.support}};
}

ClassMetrics metrics_from_json(const nlohmann::json& doc) {
    ClassMetrics m;
    m.precision = doc.at("precision").get<double>();
    m.recall = doc.at("recall").get<double>();
    m.f1 = doc.at("f1").get<double>();
    m.support = doc.at("support").get<std::size_t>();
    return m;
}

}  // namespace

Confusion confusion_matrix(const std::vector<int>& predictions, const std::vector<int>& labels) {
    check_lengths("confusion_matrix", predictions.size(), labels.size());
    Confusion counts{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        check_class_index("confusion_matrix", labels[i]);
        check_class_index("confusion_matrix", predictions[i]);
        ++counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }
    return counts;
}

double f1_score(double precision, double recall) {
    return safe_ratio(2.0 * precision * recall, precision + recall);
}

EvalReport evaluate(const std::vector<int>& predictions, const std::vector<int>& labels) {
    check_lengths("evaluate", predictions.size(), labels.size());
    if (labels.empty()) {
        throw std::runtime_error("evaluate: empty input");
    }
    EvalReport report;
    report.confusion = confusion_matrix(predictions, labels);

    std::size_t correct = 0;
    for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
        correct += report.confusion[c][c];
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

    for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
        std::size_t support = 0;
        std::size_t predicted = 0;
        for (std::size_t j = 0; j < nn::kNumClasses; ++j) {
            support += report.confusion[c][j];
            predicted += report.confusion[j][c];
        }
        const auto tp = static_cast<double>(report.confusion[c][c]);
        ClassMetrics& m = report.per_class[c];
        m.support = support;
        m.precision = safe_ratio(tp, static_cast<double>(predicted));
        m.recall = safe_ratio(tp, static_cast<double>(support));
        m.f1 = f1_score(m.precision, m.recall);
        report.macro.precision += m.precision;
        report.macro.recall += m.recall;
        report.macro.f1 += m.f1;
    }
    report.macro.precision /= static_cast<double>(nn::kNumClasses);
    report.macro.recall /= static_cast<double>(nn::kNumClasses);
    report.macro.f1 /= static_cast<double>(nn::kNumClasses);
    report.macro.support = labels.size();
    return report;
}

AgreementTable agreement_analysis(const std::vector<int>& preds_a,
                                  const std::vector<int>& preds_b,
                                  const std::vector<int>& labels) {
    check_lengths("agreement_analysis", preds_a.size(), labels.size());
    check_lengths("agreement_analysis", preds_b.size(), labels.size());
    AgreementTable table;
    table.total = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool a = preds_a[i] == labels[i];
        const bool b = preds_b[i] == labels[i];
        if (a && b) {
            ++table.both_correct;
        } else if (a) {
            ++table.only_a_correct;
        } else if (b) {
            ++table.only_b_correct;
        } else {
            ++table.both_wrong;
        }
    }
    return table;
}

double oracle_fusion_accuracy(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
                              const std::vector<int>& labels) {
    if (labels.empty()) {
        throw std::runtime_error("oracle_fusion_accuracy: empty input");
    }
    const AgreementTable t = agreement_analysis(preds_a, preds_b, labels);
    return static_cast<double>(t.both_correct + t.only_a_correct + t.only_b_correct) /
           static_cast<double>(t.total);
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "json") {
        return ReportFormat::json;
    }
    if (s == "markdown") {
        return ReportFormat::markdown;
    }
    throw std::runtime_error("unknown report format '" + s + "'");
}

std::string render_report(const EvalReport& report, ReportFormat format) {
    if (format == ReportFormat::json) {
        nlohmann::ordered_json doc;
        doc["accuracy"] = report.accuracy;
        nlohmann::ordered_json per_class;
        for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
            per_class[data::to_string(static_cast<data::Emotion>(c))] =
                metrics_to_json(report.per_class[c]);
        }
        doc["per_class"] = per_class;
        doc["macro"] = metrics_to_json(report.macro);
        nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
        for (const auto& row : report.confusion) {
            confusion.push_back(row);
        }
        doc["confusion"] = confusion;
        if (report.agreement.has_value()) {
            const AgreementTable& t = *report.agreement;
            nlohmann::ordered_json agreement;
            agreement["both_correct"] = t.both_correct;
            agreement["only_a_correct"] = t.only_a_correct;
            agreement["only_b_correct"] = t.only_b_correct;
            agreement["both_wrong"] = t.both_wrong;
            agreement["total"] = t.total;
            if (report.oracle_accuracy.has_value()) {
                agreement["oracle_accuracy"] = *report.oracle_accuracy;
            }
            doc["agreement"] = agreement;
        }
        return doc.dump(2) + "\n";
    }

    std::ostringstream out;
    out << "| Class | Precision | Recall | F1 | Support |\n";
    out << "|---|---|---|---|---|\n";
    for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
        const ClassMetrics& m = report.per_class[c];
        out << "| " << data::to_string(static_cast<data::Emotion>(c)) << " | "
            << format_percent(m.precision) << " | " << format_percent(m.recall) << " | "
            << format_percent(m.f1) << " | " << m.support << " |\n";
    }
    out << "| Average | " << format_percent(report.macro.precision) << " | "
        << format_percent(report.macro.recall) << " | " << format_percent(report.macro.f1)
        << " | " << report.macro.support << " |\n";
    out << "\nAccuracy: " << format_percent(report.accuracy) << "%\n";
    if (report.agreement.has_value()) {
        const AgreementTable& t = *report.agreement;
        out << "\n| Agreement | Count |\n|---|---|\n";
        out << "| both correct | " << t.both_correct << " |\n";
        out << "| only A correct | " << t.only_a_correct << " |\n";
        out << "| only B correct | " << t.only_b_correct << " |\n";
        out << "| both wrong | " << t.both_wrong << " |\n";
        out << "| total | " << t.total << " |\n";
        if (report.oracle_accuracy.has_value()) {
            out << "\nOracle accuracy: " << format_percent(*report.oracle_accuracy) << "%\n";
        }
    }
    return out.str();
}

EvalReport report_from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid report JSON: ") + e.what());
    }
    EvalReport report;
    report.accuracy = doc.at("accuracy").get<double>();
    for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
        const char* label = data::to_string(static_cast<data::Emotion>(c));
        report.per_class[c] = metrics_from_json(doc.at("per_class").at(label));
    }
    report.macro = metrics_from_json(doc.at("macro"));
    const auto& confusion = doc.at("confusion");
    if (!confusion.is_array() || confusion.size() != nn::kNumClasses) {
        throw std::runtime_error("report: confusion matrix must have 7 rows");
    }
    for (std::size_t r = 0; r < nn::kNumClasses; ++r) {
        if (confusion[r].size() != nn::kNumClasses) {
            throw std::runtime_error("report: confusion row " + std::to_string(r) +
                                     " must have 7 entries");
        }
        for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
            report.confusion[r][c] = confusion[r][c].get<std::size_t>();
        }
    }
    if (doc.contains("agreement")) {
        const auto& a = doc.at("agreement");
        AgreementTable table;
        table.both_correct = a.at("both_correct").get<std::size_t>();
        table.only_a_correct = a.at("only_a_correct").get<std::size_t>();
        table.only_b_correct = a.at("only_b_correct").get<std::size_t>();
        table.both_wrong = a.at("both_wrong").get<std::size_t>();
        table.total = a.at("total").get<std::size_t>();
        report.agreement = table;
        if (a.contains("oracle_accuracy")) {
            report.oracle_accuracy = a.at("oracle_accuracy").get<double>();
        }
    }
    return report;
}

std::string prediction_line(const PredictionRecord& record) {
    nlohmann::ordered_json doc;
    doc["sample_id"] = record.sample_id;
    if (record.view.has_value()) {
        doc["view"] = data::to_string(*record.view);
    }
    doc["pred"] = data::to_string(record.pred);
    doc["probs"] = record.probs;
    return doc.dump();
}

std::vector<PredictionRecord> parse_predictions(std::istream& in,
                                                const std::string& source_name) {
    auto fail_at = [&](std::size_t line, const std::string& message) -> std::runtime_error {
        return std::runtime_error(source_name + ":" + std::to_string(line) + ": " + message);
    };
    std::vector<PredictionRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw fail_at(line_number, std::string("invalid JSON: ") + e.what());
        }
        PredictionRecord record;
        try {
            record.sample_id = doc.at("sample_id").get<std::string>();
            if (doc.contains("view")) {
                record.view = data::view_from_string(doc.at("view").get<std::string>());
            }
            record.pred = data::emotion_from_string(doc.at("pred").get<std::string>());
            const auto& probs = doc.at("probs");
            if (!probs.is_array() || probs.size() != nn::kNumClasses) {
                throw std::runtime_error("probs must have exactly 7 entries");
            }
            for (std::size_t c = 0; c < nn::kNumClasses; ++c) {
                record.probs[c] = probs[c].get<double>();
            }
        } catch (const std::exception& e) {
            throw fail_at(line_number, e.what());
        }
        const std::string key =
            record.sample_id + "\x1f" + (record.view ? data::to_string(*record.view) : "");
        if (!seen.insert(key).second) {
            throw fail_at(line_number, "duplicate prediction for sample '" + record.sample_id +
                                           "'");
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    return parse_predictions(in, path);
}

void save_predictions(const std::string& path, const std::vector<PredictionRecord>& records) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write file '" + path + "'");
    }
    for (const PredictionRecord& record : records) {
        out << prediction_line(record) << '\n';
    }
}

}  // namespace fervr::eval
