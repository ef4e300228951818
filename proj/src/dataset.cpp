#include "fervr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace fervr::data {

namespace {

using ordered_json = nlohmann::ordered_json;

// Smoothing mass spread over all 7 classes in synthetic image probabilities,
// so no probability is ever exactly zero.
constexpr double kProbSmoothing = 0.02;

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& msg) {
    throw std::runtime_error(source + ":" + std::to_string(line) + ": " + msg);
}

const ordered_json& require_field(const ordered_json& record, const char* key,
                                  const std::string& source, std::size_t line) {
    auto it = record.find(key);
    if (it == record.end()) {
        fail_at(source, line, std::string("missing field '") + key + "'");
    }
    return *it;
}

std::string require_string(const ordered_json& record, const char* key, const std::string& source,
                           std::size_t line) {
    const ordered_json& value = require_field(record, key, source, line);
    if (!value.is_string()) {
        fail_at(source, line, std::string("field '") + key + "' must be a string");
    }
    return value.get<std::string>();
}

}  // namespace

const char* to_string(Emotion e) {
    switch (e) {
        case Emotion::anger: return "anger";
        case Emotion::disgust: return "disgust";
        case Emotion::fear: return "fear";
        case Emotion::happiness: return "happiness";
        case Emotion::neutral: return "neutral";
        case Emotion::sadness: return "sadness";
        case Emotion::surprise: return "surprise";
    }
    return "?";
}

Emotion emotion_from_string(const std::string& name) {
    for (int i = 0; i < static_cast<int>(kNumClasses); ++i) {
        if (name == to_string(static_cast<Emotion>(i))) {
            return static_cast<Emotion>(i);
        }
    }
    throw std::runtime_error("unknown label '" + name + "'");
}

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw std::runtime_error("unknown split '" + name + "'");
}

const char* to_string(View v) {
    return v == View::central ? "central" : "side";
}

View view_from_string(const std::string& name) {
    if (name == "central") return View::central;
    if (name == "side") return View::side;
    throw std::runtime_error("unknown view '" + name + "'");
}

std::vector<std::size_t> DatasetBundle::split_indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == s) {
            idx.push_back(i);
        }
    }
    return idx;
}

std::array<std::size_t, kNumClasses> DatasetBundle::class_counts(Split s) const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const LabeledSample& sample : samples) {
        if (sample.split == s) {
            counts[static_cast<std::size_t>(sample.label)] += 1;
        }
    }
    return counts;
}

std::size_t DatasetBundle::split_size(Split s) const {
    return split_indices(s).size();
}

std::vector<std::size_t> MultimodalBundle::split_indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].fea.split == s) {
            idx.push_back(i);
        }
    }
    return idx;
}

std::array<std::size_t, kNumClasses> MultimodalBundle::class_counts(Split s) const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const MultimodalSample& sample : samples) {
        if (sample.fea.split == s) {
            counts[static_cast<std::size_t>(sample.fea.label)] += 1;
        }
    }
    return counts;
}

std::size_t MultimodalBundle::split_size(Split s) const {
    return split_indices(s).size();
}

// ---- FEA ingestion ---------------------------------------------------------

DatasetBundle parse_fea_dataset(std::istream& in, const std::string& source_name) {
    DatasetBundle bundle;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        ordered_json record;
        try {
            record = ordered_json::parse(line);
        } catch (const std::exception& e) {
            fail_at(source_name, line_no, std::string("invalid JSON: ") + e.what());
        }
        LabeledSample sample;
        sample.id = require_string(record, "id", source_name, line_no);
        sample.participant = require_string(record, "participant", source_name, line_no);
        try {
            sample.split = split_from_string(require_string(record, "split", source_name, line_no));
            sample.label = emotion_from_string(require_string(record, "label", source_name, line_no));
        } catch (const std::exception& e) {
            fail_at(source_name, line_no, e.what());
        }
        const ordered_json& fea = require_field(record, "fea", source_name, line_no);
        if (!fea.is_array()) {
            fail_at(source_name, line_no, "field 'fea' must be an array");
        }
        if (fea.size() != kFeaDim) {
            fail_at(source_name, line_no,
                    "fea length " + std::to_string(fea.size()) + " != " + std::to_string(kFeaDim));
        }
        for (std::size_t d = 0; d < kFeaDim; ++d) {
            if (!fea[d].is_number()) {
                fail_at(source_name, line_no, "fea[" + std::to_string(d) + "] is not a number");
            }
            const double v = fea[d].get<double>();
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                std::ostringstream msg;
                msg << "fea[" << d << "] = " << v << " outside [0,1]";
                fail_at(source_name, line_no, msg.str());
            }
            sample.fea[d] = v;
        }
        if (!seen_ids.insert(sample.id).second) {
            fail_at(source_name, line_no, "duplicate id '" + sample.id + "'");
        }
        bundle.samples.push_back(std::move(sample));
    }
    return bundle;
}

DatasetBundle load_fea_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    return parse_fea_dataset(in, path);
}

std::string fea_record_line(const LabeledSample& sample) {
    ordered_json record;
    record["id"] = sample.id;
    record["participant"] = sample.participant;
    record["split"] = to_string(sample.split);
    record["label"] = to_string(sample.label);
    record["fea"] = std::vector<double>(sample.fea.begin(), sample.fea.end());
    return record.dump();
}

void save_fea_dataset(const std::string& path, const DatasetBundle& bundle) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write file '" + path + "'");
    }
    for (const LabeledSample& sample : bundle.samples) {
        out << fea_record_line(sample) << '\n';
    }
}

// ---- image observation ingestion --------------------------------------------

std::vector<ImageObservation> parse_image_observations(std::istream& in,
                                                       const std::string& source_name) {
    std::vector<ImageObservation> result;
    std::unordered_set<std::string> seen_keys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        ordered_json record;
        try {
            record = ordered_json::parse(line);
        } catch (const std::exception& e) {
            fail_at(source_name, line_no, std::string("invalid JSON: ") + e.what());
        }
        ImageObservation obs;
        obs.sample_id = require_string(record, "sample_id", source_name, line_no);
        try {
            obs.view = view_from_string(require_string(record, "view", source_name, line_no));
        } catch (const std::exception& e) {
            fail_at(source_name, line_no, e.what());
        }
        if (auto it = record.find("probs"); it != record.end()) {
            if (!it->is_array() || it->size() != kNumClasses) {
                fail_at(source_name, line_no,
                        "probs must be an array of " + std::to_string(kNumClasses));
            }
            Vector probs(kNumClasses);
            double sum = 0.0;
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                const double v = (*it)[c].get<double>();
                if (!std::isfinite(v) || v < 0.0) {
                    std::ostringstream msg;
                    msg << "probs[" << c << "] = " << v << " is negative or non-finite";
                    fail_at(source_name, line_no, msg.str());
                }
                probs[c] = v;
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-4) {
                std::ostringstream msg;
                msg << "probs sum " << sum << " outside 1 +/- 0.0001";
                fail_at(source_name, line_no, msg.str());
            }
            // Renormalize rounded exports, but leave already-normalized rows
            // untouched so our own files round-trip byte-identically.
            if (std::abs(sum - 1.0) > 1e-9) {
                for (double& v : probs) {
                    v /= sum;
                }
            }
            obs.probs = std::move(probs);
        }
        if (auto it = record.find("features"); it != record.end()) {
            if (!it->is_array()) {
                fail_at(source_name, line_no, "features must be an array");
            }
            if (it->size() != kImageFeatureDim) {
                fail_at(source_name, line_no,
                        "features length " + std::to_string(it->size()) +
                            " != " + std::to_string(kImageFeatureDim));
            }
            Vector features(kImageFeatureDim);
            for (std::size_t d = 0; d < kImageFeatureDim; ++d) {
                features[d] = (*it)[d].get<double>();
            }
            obs.features = std::move(features);
        }
        if (!obs.probs && !obs.features) {
            fail_at(source_name, line_no, "record has neither probs nor features");
        }
        const std::string key = obs.sample_id + "\x1f" + to_string(obs.view);
        if (!seen_keys.insert(key).second) {
            fail_at(source_name, line_no,
                    "duplicate observation for ('" + obs.sample_id + "', " +
                        to_string(obs.view) + ")");
        }
        result.push_back(std::move(obs));
    }
    return result;
}

std::vector<ImageObservation> load_image_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    return parse_image_observations(in, path);
}

std::string image_observation_line(const ImageObservation& obs) {
    ordered_json record;
    record["sample_id"] = obs.sample_id;
    record["view"] = to_string(obs.view);
    if (obs.probs) {
        record["probs"] = *obs.probs;
    }
    if (obs.features) {
        record["features"] = *obs.features;
    }
    return record.dump();
}

void save_image_observations(const std::string& path, const std::vector<ImageObservation>& obs) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write file '" + path + "'");
    }
    for (const ImageObservation& o : obs) {
        out << image_observation_line(o) << '\n';
    }
}

// ---- derived data ------------------------------------------------------------

nn::ClassWeights compute_class_weights(const std::array<std::size_t, kNumClasses>& counts) {
    std::size_t total = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0) {
            throw std::runtime_error(std::string("class '") +
                                     to_string(static_cast<Emotion>(c)) +
                                     "' has no training samples");
        }
        total += counts[c];
    }
    nn::ClassWeights weights;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        weights[c] = static_cast<double>(total) /
                     (static_cast<double>(kNumClasses) * static_cast<double>(counts[c]));
    }
    return weights;
}

nn::ClassWeights compute_class_weights(const DatasetBundle& bundle) {
    return compute_class_weights(bundle.class_counts(Split::train));
}

MultimodalBundle pair_multimodal(const DatasetBundle& bundle,
                                 const std::vector<ImageObservation>& observations,
                                 bool require_both_views) {
    std::unordered_map<std::string, std::size_t> id_to_sample;
    for (std::size_t i = 0; i < bundle.samples.size(); ++i) {
        id_to_sample.emplace(bundle.samples[i].id, i);
    }
    // per sample: observation index per view, -1 when absent
    std::vector<std::array<std::ptrdiff_t, 2>> by_view(bundle.samples.size(), {-1, -1});
    for (std::size_t o = 0; o < observations.size(); ++o) {
        const ImageObservation& obs = observations[o];
        auto it = id_to_sample.find(obs.sample_id);
        if (it == id_to_sample.end()) {
            throw std::runtime_error("image observation references unknown sample_id '" +
                                     obs.sample_id + "'");
        }
        std::ptrdiff_t& slot = by_view[it->second][static_cast<std::size_t>(obs.view)];
        if (slot != -1) {
            throw std::runtime_error("duplicate observation for ('" + obs.sample_id + "', " +
                                     to_string(obs.view) + ")");
        }
        slot = static_cast<std::ptrdiff_t>(o);
    }
    MultimodalBundle result;
    for (std::size_t i = 0; i < bundle.samples.size(); ++i) {
        for (View view : {View::central, View::side}) {
            const std::ptrdiff_t o = by_view[i][static_cast<std::size_t>(view)];
            if (o == -1) {
                if (require_both_views) {
                    throw std::runtime_error("sample '" + bundle.samples[i].id + "' missing " +
                                             to_string(view) + " view");
                }
                continue;
            }
            result.samples.push_back(
                MultimodalSample{bundle.samples[i], observations[static_cast<std::size_t>(o)]});
        }
    }
    return result;
}

Matrix fea_matrix(const DatasetBundle& bundle, Split split) {
    const std::vector<std::size_t> idx = bundle.split_indices(split);
    Matrix m(idx.size(), kFeaDim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const FeaVector& fea = bundle.samples[idx[r]].fea;
        std::copy(fea.begin(), fea.end(), m.row(r).begin());
    }
    return m;
}

std::vector<int> label_vector(const DatasetBundle& bundle, Split split) {
    std::vector<int> labels;
    for (std::size_t i : bundle.split_indices(split)) {
        labels.push_back(static_cast<int>(bundle.samples[i].label));
    }
    return labels;
}

Matrix fea_matrix(const MultimodalBundle& bundle, Split split) {
    const std::vector<std::size_t> idx = bundle.split_indices(split);
    Matrix m(idx.size(), kFeaDim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const FeaVector& fea = bundle.samples[idx[r]].fea.fea;
        std::copy(fea.begin(), fea.end(), m.row(r).begin());
    }
    return m;
}

Matrix image_probs_matrix(const MultimodalBundle& bundle, Split split) {
    const std::vector<std::size_t> idx = bundle.split_indices(split);
    Matrix m(idx.size(), kNumClasses);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const MultimodalSample& sample = bundle.samples[idx[r]];
        if (!sample.image.probs) {
            throw std::runtime_error("sample '" + sample.fea.id + "' (" +
                                     to_string(sample.image.view) +
                                     ") has no image probabilities");
        }
        std::copy(sample.image.probs->begin(), sample.image.probs->end(), m.row(r).begin());
    }
    return m;
}

Matrix image_feature_matrix(const MultimodalBundle& bundle, Split split) {
    const std::vector<std::size_t> idx = bundle.split_indices(split);
    Matrix m(idx.size(), kImageFeatureDim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const MultimodalSample& sample = bundle.samples[idx[r]];
        if (!sample.image.features) {
            throw std::runtime_error("sample '" + sample.fea.id + "' (" +
                                     to_string(sample.image.view) +
                                     ") has no image features");
        }
        std::copy(sample.image.features->begin(), sample.image.features->end(), m.row(r).begin());
    }
    return m;
}

std::vector<int> label_vector(const MultimodalBundle& bundle, Split split) {
    std::vector<int> labels;
    for (std::size_t i : bundle.split_indices(split)) {
        labels.push_back(static_cast<int>(bundle.samples[i].fea.label));
    }
    return labels;
}

// ---- synthetic data -----------------------------------------------------------

const char* to_string(SynthMode m) {
    return m == SynthMode::easy ? "easy" : "complementary";
}

SynthMode synth_mode_from_string(const std::string& name) {
    if (name == "easy") return SynthMode::easy;
    if (name == "complementary") return SynthMode::complementary;
    throw std::runtime_error("unknown mode '" + name + "'");
}

SynthConfig synth_config_from_string(const std::string& json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid synth config JSON: ") + e.what());
    }
    SynthConfig config;
    auto require_int = [&](const char* key) {
        if (!doc.contains(key) || !doc[key].is_number_integer()) {
            throw std::runtime_error(std::string("synth config: missing integer field '") + key +
                                     "'");
        }
        return doc[key].get<std::int64_t>();
    };
    config.per_class_train = static_cast<int>(require_int("per_class_train"));
    config.per_class_val = static_cast<int>(require_int("per_class_val"));
    config.per_class_test = static_cast<int>(require_int("per_class_test"));
    if (!doc.contains("sigma") || !doc["sigma"].is_number()) {
        throw std::runtime_error("synth config: missing numeric field 'sigma'");
    }
    config.sigma = doc["sigma"].get<double>();
    if (!doc.contains("mode") || !doc["mode"].is_string()) {
        throw std::runtime_error("synth config: missing string field 'mode'");
    }
    config.mode = synth_mode_from_string(doc["mode"].get<std::string>());
    config.seed = static_cast<std::uint64_t>(require_int("seed"));
    return config;
}

SynthConfig synth_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return synth_config_from_string(buffer.str());
}

namespace {

// Classes whose image prototypes merge in complementary mode, and the class
// group the image modality can still distinguish for class c.
std::vector<std::size_t> image_group(SynthMode mode, std::size_t c) {
    if (mode == SynthMode::complementary && c <= 2) {
        return {0, 1, 2};
    }
    return {c};
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& config) {
    if (config.sigma < 0.0) {
        throw std::runtime_error("synth config: sigma must be >= 0, got " +
                                 std::to_string(config.sigma));
    }
    for (int count : {config.per_class_train, config.per_class_val, config.per_class_test}) {
        if (count < 1) {
            throw std::runtime_error("synth config: per-class counts must be >= 1");
        }
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> proto_dist(0.2, 0.8);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::array<std::vector<double>, kNumClasses> fea_protos;
    for (auto& proto : fea_protos) {
        proto.resize(kFeaDim);
        for (double& v : proto) {
            v = proto_dist(rng);
        }
    }
    std::array<std::vector<double>, kNumClasses> img_protos;
    for (auto& proto : img_protos) {
        proto.resize(kImageFeatureDim);
        for (double& v : proto) {
            v = proto_dist(rng);
        }
    }
    if (config.mode == SynthMode::complementary) {
        fea_protos[5] = fea_protos[4];  // sadness, surprise fold into neutral
        fea_protos[6] = fea_protos[4];
        img_protos[1] = img_protos[0];  // disgust, fear fold into anger
        img_protos[2] = img_protos[0];
    }

    SynthData out;
    const std::array<std::pair<Split, int>, 3> plan = {{
        {Split::train, config.per_class_train},
        {Split::val, config.per_class_val},
        {Split::test, config.per_class_test},
    }};
    for (const auto& [split, count] : plan) {
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            const std::vector<std::size_t> group = image_group(config.mode, c);
            for (int i = 0; i < count; ++i) {
                LabeledSample sample;
                sample.id = std::string(to_string(split)) + "-" +
                            to_string(static_cast<Emotion>(c)) + "-" + std::to_string(i);
                sample.participant = "synthetic";
                sample.split = split;
                sample.label = static_cast<Emotion>(c);
                for (std::size_t d = 0; d < kFeaDim; ++d) {
                    const double v = fea_protos[c][d] + config.sigma * noise(rng);
                    sample.fea[d] = std::clamp(v, 0.0, 1.0);
                }
                out.fea.samples.push_back(sample);

                for (View view : {View::central, View::side}) {
                    ImageObservation obs;
                    obs.sample_id = sample.id;
                    obs.view = view;
                    Vector logits(kNumClasses);
                    for (std::size_t j = 0; j < kNumClasses; ++j) {
                        const bool in_group = std::find(group.begin(), group.end(), j) !=
                                              group.end();
                        const double target =
                            (in_group ? (1.0 - kProbSmoothing) / static_cast<double>(group.size())
                                      : 0.0) +
                            kProbSmoothing / static_cast<double>(kNumClasses);
                        logits[j] = std::log(target) + config.sigma * noise(rng);
                    }
                    obs.probs = nn::softmax(logits);
                    Vector features(kImageFeatureDim);
                    for (std::size_t d = 0; d < kImageFeatureDim; ++d) {
                        features[d] = img_protos[c][d] + config.sigma * noise(rng);
                    }
                    obs.features = std::move(features);
                    out.observations.push_back(std::move(obs));
                }
            }
        }
    }
    return out;
}

// ---- reporting ------------------------------------------------------------------

SplitSummary split_summary(const DatasetBundle& bundle) {
    SplitSummary summary;
    for (Split s : {Split::train, Split::val, Split::test}) {
        const auto idx = static_cast<std::size_t>(s);
        summary.counts[idx] = bundle.class_counts(s);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            summary.totals[idx] += summary.counts[idx][c];
        }
    }
    return summary;
}

std::string split_summary_text(const SplitSummary& summary) {
    std::ostringstream out;
    out << std::left << std::setw(7) << "split";
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        out << std::right << std::setw(11) << to_string(static_cast<Emotion>(c));
    }
    out << std::right << std::setw(11) << "total" << '\n';
    for (Split s : {Split::train, Split::val, Split::test}) {
        const auto idx = static_cast<std::size_t>(s);
        out << std::left << std::setw(7) << to_string(s);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            out << std::right << std::setw(11) << summary.counts[idx][c];
        }
        out << std::right << std::setw(11) << summary.totals[idx] << '\n';
    }
    return out.str();
}

std::string split_summary_json(const SplitSummary& summary) {
    ordered_json doc;
    for (Split s : {Split::train, Split::val, Split::test}) {
        const auto idx = static_cast<std::size_t>(s);
        ordered_json row;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            row[to_string(static_cast<Emotion>(c))] = summary.counts[idx][c];
        }
        row["total"] = summary.totals[idx];
        doc[to_string(s)] = std::move(row);
    }
    return doc.dump(2);
}

}  // namespace fervr::data
