#pragma once

// Versioned JSON persistence for trained models. Every file carries
// {"format_version": 1, "kind": ..., "layers": [...], "params": {...}};
// fusion files additionally embed the frozen FEA model under "fea_model", so
// one artifact is enough to reproduce its predictions.

#include <string>
#include <variant>

#include "fervr/classifiers.hpp"
#include "fervr/fusion.hpp"
#include "fervr/matrix.hpp"

namespace fervr::io {

inline constexpr int kFormatVersion = 1;

// A unimodal probability model over 63-dim FEA vectors.
using FeaModel = std::variant<model::MlpModel, model::LogRegModel>;

Matrix fea_predict_proba(const FeaModel& m, const Matrix& inputs);
std::string fea_model_kind(const FeaModel& m);  // "mlp" | "logreg"

// A late-fusion head bundled with the frozen FEA model that feeds it.
struct LateFusionArtifact {
    fuse::LateFusionModel fusion;
    FeaModel fea;
};

// An intermediate-fusion network bundled with its frozen feature extractor.
struct IntermediateArtifact {
    fuse::IntermediateFusionModel fusion;
    model::MlpModel fea;
};

// End-to-end prediction from raw inputs. The image argument is per-row
// probabilities for late fusion and 1280-dim features for intermediate.
Matrix predict_fused(const LateFusionArtifact& artifact, const Matrix& fea_inputs,
                     const Matrix& img_probs);
Matrix predict_fused(const IntermediateArtifact& artifact, const Matrix& fea_inputs,
                     const Matrix& img_features);

using AnyModel =
    std::variant<model::MlpModel, model::LogRegModel, LateFusionArtifact, IntermediateArtifact>;

// "mlp", "logreg", "late_fusion:<strategy>", or "intermediate_fusion".
std::string model_kind(const AnyModel& m);

std::string model_to_json_text(const AnyModel& m);
AnyModel model_from_json_text(const std::string& text, const std::string& source);

void save_model(const std::string& path, const AnyModel& m);
AnyModel load_model(const std::string& path);

// Typed loader for contexts that need a unimodal model; rejects fusion kinds.
FeaModel load_fea_model(const std::string& path);

}  // namespace fervr::io
