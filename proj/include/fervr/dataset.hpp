#pragma once

// FEA/image data model, JSONL ingestion, class weighting, multimodal pairing,
// and the synthetic data generator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fervr/matrix.hpp"
#include "fervr/nn.hpp"

namespace fervr::data {

inline constexpr std::size_t kFeaDim = 63;
inline constexpr std::size_t kImageFeatureDim = 1280;
using nn::kNumClasses;

enum class Emotion : int {
    anger = 0,
    disgust,
    fear,
    happiness,
    neutral,
    sadness,
    surprise,
};

const char* to_string(Emotion e);
Emotion emotion_from_string(const std::string& name);

enum class Split : int { train = 0, val, test };
const char* to_string(Split s);
Split split_from_string(const std::string& name);

enum class View : int { central = 0, side };
const char* to_string(View v);
View view_from_string(const std::string& name);

using FeaVector = std::array<double, kFeaDim>;

struct LabeledSample {
    std::string id;
    std::string participant;
    Split split = Split::train;
    Emotion label = Emotion::anger;
    FeaVector fea{};
};

struct ImageObservation {
    std::string sample_id;
    View view = View::central;
    std::optional<Vector> probs;     // 7-dim simplex point
    std::optional<Vector> features;  // 1280-dim pooled feature vector
};

struct DatasetBundle {
    std::vector<LabeledSample> samples;  // file order

    std::vector<std::size_t> split_indices(Split s) const;
    std::array<std::size_t, kNumClasses> class_counts(Split s) const;
    std::size_t split_size(Split s) const;
};

// One FEA sample paired with one image observation; label and split come from
// the FEA side.
struct MultimodalSample {
    LabeledSample fea;
    ImageObservation image;
};

struct MultimodalBundle {
    std::vector<MultimodalSample> samples;

    std::vector<std::size_t> split_indices(Split s) const;
    std::array<std::size_t, kNumClasses> class_counts(Split s) const;
    std::size_t split_size(Split s) const;
};

// ---- ingestion ----------------------------------------------------------
// All loader errors carry "<source>:<line>: message".

DatasetBundle load_fea_dataset(const std::string& path);
DatasetBundle parse_fea_dataset(std::istream& in, const std::string& source_name);
void save_fea_dataset(const std::string& path, const DatasetBundle& bundle);
std::string fea_record_line(const LabeledSample& sample);

std::vector<ImageObservation> load_image_observations(const std::string& path);
std::vector<ImageObservation> parse_image_observations(std::istream& in,
                                                       const std::string& source_name);
void save_image_observations(const std::string& path, const std::vector<ImageObservation>& obs);
std::string image_observation_line(const ImageObservation& obs);

// ---- derived data --------------------------------------------------------

// w_c = N / (K * n_c) over the training split, so uniform counts give all 1.
nn::ClassWeights compute_class_weights(const std::array<std::size_t, kNumClasses>& counts);
nn::ClassWeights compute_class_weights(const DatasetBundle& bundle);

MultimodalBundle pair_multimodal(const DatasetBundle& bundle,
                                 const std::vector<ImageObservation>& observations,
                                 bool require_both_views);

Matrix fea_matrix(const DatasetBundle& bundle, Split split);
std::vector<int> label_vector(const DatasetBundle& bundle, Split split);

Matrix fea_matrix(const MultimodalBundle& bundle, Split split);
Matrix image_probs_matrix(const MultimodalBundle& bundle, Split split);
Matrix image_feature_matrix(const MultimodalBundle& bundle, Split split);
std::vector<int> label_vector(const MultimodalBundle& bundle, Split split);

// ---- synthetic data ------------------------------------------------------

enum class SynthMode : int { easy = 0, complementary };
const char* to_string(SynthMode m);
SynthMode synth_mode_from_string(const std::string& name);

struct SynthConfig {
    int per_class_train = 50;
    int per_class_val = 20;
    int per_class_test = 20;
    double sigma = 0.05;
    SynthMode mode = SynthMode::easy;
    std::uint64_t seed = 0;
};

SynthConfig synth_config_from_string(const std::string& json_text);
SynthConfig synth_config_from_file(const std::string& path);

struct SynthData {
    DatasetBundle fea;
    std::vector<ImageObservation> observations;
};

// Draws one 63-dim FEA prototype and one 1280-dim image prototype per class,
// then samples = prototype + sigma * gaussian noise (FEA clipped to [0,1]).
// In complementary mode the FEA prototypes of {neutral, sadness, surprise}
// collapse to one and the image prototypes of {anger, disgust, fear} collapse
// to one, so each modality is blind where the other sees.  Image probs are
// near-one-hot over the class group visible to the image modality.  Every
// sample gets a central and a side observation carrying probs and features.
SynthData generate_synthetic(const SynthConfig& config);

// ---- reporting -----------------------------------------------------------

struct SplitSummary {
    std::array<std::array<std::size_t, kNumClasses>, 3> counts{};  // [split][class]
    std::array<std::size_t, 3> totals{};
};

SplitSummary split_summary(const DatasetBundle& bundle);
std::string split_summary_text(const SplitSummary& summary);
std::string split_summary_json(const SplitSummary& summary);

}  // namespace fervr::data
