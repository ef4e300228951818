#include "fervr/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace fervr::io {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& source, const std::string& message) {
    throw std::runtime_error("model file " + source + ": " + message);
}

Vector vector_from_json(const json& value, std::size_t expected, const std::string& source,
                        const std::string& what) {
    if (!value.is_array()) {
        fail(source, what + " must be an array");
    }
    if (value.size() != expected) {
        fail(source, what + " has " + std::to_string(value.size()) + " entries, expected " +
                         std::to_string(expected));
    }
    Vector out;
    out.reserve(expected);
    for (const json& entry : value) {
        if (!entry.is_number()) {
            fail(source, what + " holds a non-numeric entry");
        }
        out.push_back(entry.get<double>());
    }
    return out;
}

// ---- layer serialization ----

ordered_json dense_descriptor(const nn::DenseLayer& layer) {
    ordered_json desc;
    desc["type"] = "dense";
    desc["in"] = layer.in_size();
    desc["out"] = layer.out_size();
    desc["activation"] = nn::to_string(layer.activation);
    return desc;
}

ordered_json layer_descriptor(const nn::Layer& layer) {
    if (const auto* dense = std::get_if<nn::DenseLayer>(&layer)) {
        return dense_descriptor(*dense);
    }
    if (const auto* bn = std::get_if<nn::BatchNormLayer>(&layer)) {
        ordered_json desc;
        desc["type"] = "batchnorm";
        desc["dim"] = bn->dim();
        desc["momentum"] = bn->momentum;
        desc["epsilon"] = bn->epsilon;
        return desc;
    }
    const auto& dropout = std::get<nn::DropoutLayer>(layer);
    ordered_json desc;
    desc["type"] = "dropout";
    desc["rate"] = dropout.rate;
    return desc;
}

ordered_json dense_params(const nn::DenseLayer& layer) {
    ordered_json entry;
    entry["weights"] = layer.weights.data;  // row-major [out x in]
    entry["bias"] = layer.bias;
    return entry;
}

// Emits one network's layers into shared descriptor/params arrays. A non-empty
// role tags each descriptor so multi-network models can be reassembled.
void emit_net(ordered_json& layers, ordered_json& params, const nn::DenseNetwork& net,
              const std::string& role, std::size_t& index) {
    for (const nn::Layer& layer : net.layers) {
        ordered_json desc = layer_descriptor(layer);
        if (!role.empty()) {
            desc["role"] = role;
        }
        if (const auto* dense = std::get_if<nn::DenseLayer>(&layer)) {
            params["layer" + std::to_string(index)] = dense_params(*dense);
        } else if (const auto* bn = std::get_if<nn::BatchNormLayer>(&layer)) {
            ordered_json entry;
            entry["gamma"] = bn->gamma;
            entry["beta"] = bn->beta;
            entry["running_mean"] = bn->running_mean;
            entry["running_var"] = bn->running_var;
            params["layer" + std::to_string(index)] = entry;
        }
        layers.push_back(std::move(desc));
        ++index;
    }
}

nn::DenseLayer dense_from_json(const json& desc, const json& params, const std::string& source,
                               const std::string& what) {
    if (!desc.contains("in") || !desc.contains("out") || !desc.contains("activation")) {
        fail(source, what + " is missing in/out/activation");
    }
    const std::size_t in = desc.at("in").get<std::size_t>();
    const std::size_t out = desc.at("out").get<std::size_t>();
    if (in == 0 || out == 0) {
        fail(source, what + " has a zero dimension");
    }
    nn::DenseLayer layer;
    layer.activation = nn::activation_from_string(desc.at("activation").get<std::string>());
    if (!params.is_object() || !params.contains("weights") || !params.contains("bias")) {
        fail(source, what + " is missing weights/bias parameters");
    }
    layer.weights = Matrix(out, in);
    layer.weights.data =
        vector_from_json(params.at("weights"), out * in, source, what + " weights");
    layer.bias = vector_from_json(params.at("bias"), out, source, what + " bias");
    return layer;
}

nn::Layer layer_from_json(const json& desc, const json& params, const std::string& source,
                          const std::string& what) {
    if (!desc.is_object() || !desc.contains("type")) {
        fail(source, what + " is missing its type");
    }
    const std::string type = desc.at("type").get<std::string>();
    if (type == "dense") {
        return dense_from_json(desc, params, source, what);
    }
    if (type == "batchnorm") {
        const std::size_t dim = desc.at("dim").get<std::size_t>();
        if (dim == 0) {
            fail(source, what + " has a zero dimension");
        }
        nn::BatchNormLayer bn = nn::make_batchnorm(dim, desc.at("momentum").get<double>(),
                                                   desc.at("epsilon").get<double>());
        if (!params.is_object()) {
            fail(source, what + " is missing batch-norm parameters");
        }
        bn.gamma = vector_from_json(params.at("gamma"), dim, source, what + " gamma");
        bn.beta = vector_from_json(params.at("beta"), dim, source, what + " beta");
        bn.running_mean =
            vector_from_json(params.at("running_mean"), dim, source, what + " running_mean");
        bn.running_var =
            vector_from_json(params.at("running_var"), dim, source, what + " running_var");
        return bn;
    }
    if (type == "dropout") {
        nn::DropoutLayer dropout;
        dropout.rate = desc.at("rate").get<double>();
        if (dropout.rate < 0.0 || dropout.rate >= 1.0) {
            fail(source, what + " has dropout rate outside [0, 1)");
        }
        return dropout;
    }
    fail(source, what + " has unknown layer type '" + type + "'");
}

// One descriptor entry with its params, addressed by global index.
nn::Layer load_layer(const json& layers, const json& params, std::size_t index,
                     const std::string& source) {
    const std::string what = "layer " + std::to_string(index);
    const json& desc = layers.at(index);
    const std::string key = "layer" + std::to_string(index);
    static const json kNoParams;
    const json& layer_params = params.contains(key) ? params.at(key) : kNoParams;
    return layer_from_json(desc, layer_params, source, what);
}

std::string role_of(const json& desc) {
    if (desc.is_object() && desc.contains("role")) {
        return desc.at("role").get<std::string>();
    }
    return "";
}

// ---- whole-network (de)serialization for single-net kinds ----

nn::DenseNetwork net_from_json(const json& layers, const json& params,
                               const std::string& source) {
    if (!layers.is_array() || layers.empty()) {
        fail(source, "layers must be a non-empty array");
    }
    if (!params.is_object()) {
        fail(source, "params must be an object");
    }
    nn::DenseNetwork net;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        net.layers.push_back(load_layer(layers, params, i, source));
    }
    return net;
}

model::MlpConfig arch_of(const nn::DenseNetwork& net) {
    model::MlpConfig arch;
    arch.hidden_widths.clear();
    arch.dropout_rates.clear();
    std::vector<std::size_t> dense_widths;
    for (const nn::Layer& layer : net.layers) {
        if (const auto* dense = std::get_if<nn::DenseLayer>(&layer)) {
            dense_widths.push_back(dense->out_size());
        } else if (const auto* dropout = std::get_if<nn::DropoutLayer>(&layer)) {
            arch.dropout_rates.push_back(dropout->rate);
        }
    }
    if (!dense_widths.empty()) {
        dense_widths.pop_back();  // final softmax layer is not a hidden layer
    }
    arch.hidden_widths = std::move(dense_widths);
    return arch;
}

void check_fea_head(const nn::DenseNetwork& net, const std::string& source,
                    const std::string& kind) {
    const auto* first = std::get_if<nn::DenseLayer>(net.layers.empty() ? nullptr
                                                                       : &net.layers.front());
    if (first == nullptr || first->in_size() != data::kFeaDim) {
        fail(source, kind + " must start with a dense layer over " +
                         std::to_string(data::kFeaDim) + "-dim FEA inputs");
    }
    const auto* last = std::get_if<nn::DenseLayer>(&net.layers.back());
    if (last == nullptr || last->out_size() != nn::kNumClasses ||
        last->activation != nn::Activation::softmax) {
        fail(source, kind + " must end with a softmax dense layer over " +
                         std::to_string(nn::kNumClasses) + " classes");
    }
}

// ---- kind-specific emitters ----

ordered_json mlp_to_json(const model::MlpModel& m) {
    ordered_json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "mlp";
    ordered_json layers = ordered_json::array();
    ordered_json params = ordered_json::object();
    std::size_t index = 0;
    emit_net(layers, params, m.net, "", index);
    doc["layers"] = std::move(layers);
    doc["params"] = std::move(params);
    return doc;
}

ordered_json logreg_to_json(const model::LogRegModel& m) {
    ordered_json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "logreg";
    doc["l2_strength"] = m.l2_strength;
    doc["class_weighting"] = m.class_weighting;
    ordered_json layers = ordered_json::array();
    ordered_json params = ordered_json::object();
    std::size_t index = 0;
    emit_net(layers, params, m.net, "", index);
    doc["layers"] = std::move(layers);
    doc["params"] = std::move(params);
    return doc;
}

ordered_json fea_model_to_json(const FeaModel& m) {
    if (const auto* mlp = std::get_if<model::MlpModel>(&m)) {
        return mlp_to_json(*mlp);
    }
    return logreg_to_json(std::get<model::LogRegModel>(m));
}

ordered_json late_to_json(const LateFusionArtifact& artifact) {
    const fuse::LateFusionModel& fusion = artifact.fusion;
    ordered_json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = std::string("late_fusion:") + fuse::to_string(fusion.strategy);
    ordered_json layers = ordered_json::array();
    ordered_json params = ordered_json::object();
    std::size_t index = 0;
    switch (fusion.strategy) {
        case fuse::LateStrategy::average:
            break;
        case fuse::LateStrategy::weighted_sum: {
            ordered_json desc;
            desc["type"] = "mix";
            desc["size"] = fusion.mix_logits.size();
            layers.push_back(std::move(desc));
            params["layer0"]["logits"] = fusion.mix_logits;
            break;
        }
        case fuse::LateStrategy::concat_dense:
        case fuse::LateStrategy::bilinear:
            emit_net(layers, params, fusion.head, "", index);
            break;
        case fuse::LateStrategy::cross_attention: {
            ordered_json desc_a = dense_descriptor(fusion.gate_a);
            desc_a["role"] = "gate_a";
            layers.push_back(std::move(desc_a));
            params["layer0"] = dense_params(fusion.gate_a);
            ordered_json desc_b = dense_descriptor(fusion.gate_b);
            desc_b["role"] = "gate_b";
            layers.push_back(std::move(desc_b));
            params["layer1"] = dense_params(fusion.gate_b);
            break;
        }
    }
    doc["layers"] = std::move(layers);
    doc["params"] = std::move(params);
    doc["fea_model"] = fea_model_to_json(artifact.fea);
    return doc;
}

ordered_json intermediate_to_json(const IntermediateArtifact& artifact) {
    const fuse::IntermediateFusionModel& fusion = artifact.fusion;
    ordered_json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "intermediate_fusion";
    ordered_json config;
    config["projection_width"] = fusion.config.projection_width;
    config["dropout_rate"] = fusion.config.dropout_rate;
    config["gate_activation"] = fuse::to_string(fusion.config.gate_activation);
    doc["config"] = std::move(config);
    ordered_json layers = ordered_json::array();
    ordered_json params = ordered_json::object();
    std::size_t index = 0;
    emit_net(layers, params, fusion.fea_branch, "fea_branch", index);
    emit_net(layers, params, fusion.img_branch, "img_branch", index);
    {
        ordered_json desc = dense_descriptor(fusion.gate_a);
        desc["role"] = "gate_a";
        layers.push_back(std::move(desc));
        params["layer" + std::to_string(index)] = dense_params(fusion.gate_a);
        ++index;
        desc = dense_descriptor(fusion.gate_b);
        desc["role"] = "gate_b";
        layers.push_back(std::move(desc));
        params["layer" + std::to_string(index)] = dense_params(fusion.gate_b);
        ++index;
    }
    emit_net(layers, params, fusion.head, "head", index);
    doc["layers"] = std::move(layers);
    doc["params"] = std::move(params);
    doc["fea_model"] = mlp_to_json(artifact.fea);
    return doc;
}

// ---- kind-specific loaders ----

model::MlpModel mlp_from_json(const json& doc, const std::string& source) {
    model::MlpModel m;
    m.net = net_from_json(doc.at("layers"), doc.at("params"), source);
    check_fea_head(m.net, source, "an MLP");
    m.arch = arch_of(m.net);
    return m;
}

model::LogRegModel logreg_from_json(const json& doc, const std::string& source) {
    model::LogRegModel m;
    m.net = net_from_json(doc.at("layers"), doc.at("params"), source);
    check_fea_head(m.net, source, "logistic regression");
    if (m.net.layers.size() != 1) {
        fail(source, "logistic regression must hold exactly one dense layer");
    }
    if (doc.contains("l2_strength")) {
        m.l2_strength = doc.at("l2_strength").get<double>();
    }
    if (doc.contains("class_weighting")) {
        m.class_weighting = doc.at("class_weighting").get<bool>();
    }
    return m;
}

FeaModel fea_model_from_json(const json& doc, const std::string& source);

nn::DenseLayer expect_gate(const json& layers, const json& params, std::size_t index,
                           const std::string& role, std::size_t in, std::size_t out,
                           const std::string& source) {
    if (layers.size() <= index) {
        fail(source, "missing " + role + " layer");
    }
    if (role_of(layers.at(index)) != role) {
        fail(source, "layer " + std::to_string(index) + " must carry role '" + role + "'");
    }
    nn::Layer layer = load_layer(layers, params, index, source);
    auto* dense = std::get_if<nn::DenseLayer>(&layer);
    if (dense == nullptr || dense->in_size() != in || dense->out_size() != out) {
        fail(source, role + " must be a dense layer of shape " + std::to_string(out) + "x" +
                         std::to_string(in));
    }
    return std::move(*dense);
}

LateFusionArtifact late_from_json(const json& doc, const std::string& kind,
                                  const std::string& source) {
    LateFusionArtifact artifact;
    artifact.fusion.strategy =
        fuse::late_strategy_from_string(kind.substr(std::string("late_fusion:").size()));
    const json& layers = doc.at("layers");
    const json& params = doc.at("params");
    if (!layers.is_array() || !params.is_object()) {
        fail(source, "layers must be an array and params an object");
    }
    switch (artifact.fusion.strategy) {
        case fuse::LateStrategy::average:
            if (!layers.empty()) {
                fail(source, "average fusion carries no layers");
            }
            break;
        case fuse::LateStrategy::weighted_sum: {
            if (layers.size() != 1 || layers.at(0).value("type", "") != "mix") {
                fail(source, "weighted_sum fusion must carry one mix layer");
            }
            artifact.fusion.mix_logits = vector_from_json(
                params.at("layer0").at("logits"), 2, source, "mix logits");
            break;
        }
        case fuse::LateStrategy::concat_dense:
        case fuse::LateStrategy::bilinear: {
            artifact.fusion.head = net_from_json(layers, params, source);
            const std::size_t expected_in =
                artifact.fusion.strategy == fuse::LateStrategy::concat_dense
                    ? 2 * nn::kNumClasses
                    : nn::kNumClasses * nn::kNumClasses;
            const auto* dense = artifact.fusion.head.layers.size() == 1
                                    ? std::get_if<nn::DenseLayer>(&artifact.fusion.head.layers[0])
                                    : nullptr;
            if (dense == nullptr || dense->in_size() != expected_in ||
                dense->out_size() != nn::kNumClasses) {
                fail(source, "fusion head must be one dense layer of shape " +
                                 std::to_string(nn::kNumClasses) + "x" +
                                 std::to_string(expected_in));
            }
            break;
        }
        case fuse::LateStrategy::cross_attention:
            artifact.fusion.gate_a = expect_gate(layers, params, 0, "gate_a", nn::kNumClasses,
                                                 nn::kNumClasses, source);
            artifact.fusion.gate_b = expect_gate(layers, params, 1, "gate_b", nn::kNumClasses,
                                                 nn::kNumClasses, source);
            break;
    }
    if (!doc.contains("fea_model")) {
        fail(source, "fusion model is missing its embedded fea_model");
    }
    artifact.fea = fea_model_from_json(doc.at("fea_model"), source + " (fea_model)");
    return artifact;
}

IntermediateArtifact intermediate_from_json(const json& doc, const std::string& source) {
    IntermediateArtifact artifact;
    if (!doc.contains("config") || !doc.at("config").is_object()) {
        fail(source, "intermediate fusion is missing its config object");
    }
    const json& config = doc.at("config");
    fuse::IntermediateConfig icfg;
    icfg.projection_width = config.at("projection_width").get<std::size_t>();
    icfg.dropout_rate = config.at("dropout_rate").get<double>();
    icfg.gate_activation =
        fuse::gate_activation_from_string(config.at("gate_activation").get<std::string>());
    if (icfg.projection_width < 128 || icfg.projection_width > 512) {
        fail(source, "projection width " + std::to_string(icfg.projection_width) +
                         " outside [128, 512]");
    }
    artifact.fusion.config = icfg;
    const std::size_t w = icfg.projection_width;

    const json& layers = doc.at("layers");
    const json& params = doc.at("params");
    if (!layers.is_array() || layers.size() != 8 || !params.is_object()) {
        fail(source, "intermediate fusion must carry exactly 8 layers");
    }
    auto expect_role = [&](std::size_t index, const std::string& role) {
        if (role_of(layers.at(index)) != role) {
            fail(source, "layer " + std::to_string(index) + " must carry role '" + role + "'");
        }
        return load_layer(layers, params, index, source);
    };
    auto take_branch = [&](std::size_t first, const std::string& role, std::size_t in) {
        nn::DenseNetwork branch;
        branch.layers.push_back(expect_role(first, role));
        branch.layers.push_back(expect_role(first + 1, role));
        const auto* dense = std::get_if<nn::DenseLayer>(&branch.layers[0]);
        const auto* bn = std::get_if<nn::BatchNormLayer>(&branch.layers[1]);
        if (dense == nullptr || bn == nullptr || dense->in_size() != in ||
            dense->out_size() != w || bn->dim() != w) {
            fail(source, role + " must be dense " + std::to_string(w) + "x" +
                             std::to_string(in) + " followed by batchnorm");
        }
        return branch;
    };
    artifact.fusion.fea_branch = take_branch(0, "fea_branch", model::kMlpFeatureDim);
    artifact.fusion.img_branch = take_branch(2, "img_branch", data::kImageFeatureDim);
    artifact.fusion.gate_a = expect_gate(layers, params, 4, "gate_a", w, w, source);
    artifact.fusion.gate_b = expect_gate(layers, params, 5, "gate_b", w, w, source);
    {
        nn::DenseNetwork head;
        head.layers.push_back(expect_role(6, "head"));
        head.layers.push_back(expect_role(7, "head"));
        const auto* dropout = std::get_if<nn::DropoutLayer>(&head.layers[0]);
        const auto* dense = std::get_if<nn::DenseLayer>(&head.layers[1]);
        if (dropout == nullptr || dense == nullptr || dense->in_size() != 2 * w ||
            dense->out_size() != nn::kNumClasses) {
            fail(source, "head must be dropout followed by dense " +
                             std::to_string(nn::kNumClasses) + "x" + std::to_string(2 * w));
        }
        artifact.fusion.head = std::move(head);
    }

    if (!doc.contains("fea_model")) {
        fail(source, "fusion model is missing its embedded fea_model");
    }
    FeaModel fea = fea_model_from_json(doc.at("fea_model"), source + " (fea_model)");
    auto* mlp = std::get_if<model::MlpModel>(&fea);
    if (mlp == nullptr) {
        fail(source, "intermediate fusion requires an embedded MLP feature extractor");
    }
    artifact.fea = std::move(*mlp);
    return artifact;
}

AnyModel any_model_from_json(const json& doc, const std::string& source) {
    if (!doc.is_object()) {
        fail(source, "not a JSON object");
    }
    if (!doc.contains("format_version") || !doc.at("format_version").is_number_integer()) {
        fail(source, "missing format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
        fail(source, "unsupported format_version " + std::to_string(version) + " (expected " +
                         std::to_string(kFormatVersion) + ")");
    }
    if (!doc.contains("kind") || !doc.at("kind").is_string()) {
        fail(source, "missing kind");
    }
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "mlp") {
        return mlp_from_json(doc, source);
    }
    if (kind == "logreg") {
        return logreg_from_json(doc, source);
    }
    if (kind.rfind("late_fusion:", 0) == 0) {
        return late_from_json(doc, kind, source);
    }
    if (kind == "intermediate_fusion") {
        return intermediate_from_json(doc, source);
    }
    fail(source, "unknown model kind '" + kind + "'");
}

FeaModel fea_model_from_json(const json& doc, const std::string& source) {
    AnyModel any = any_model_from_json(doc, source);
    if (auto* mlp = std::get_if<model::MlpModel>(&any)) {
        return std::move(*mlp);
    }
    if (auto* logreg = std::get_if<model::LogRegModel>(&any)) {
        return std::move(*logreg);
    }
    fail(source, "expected a unimodal FEA model, found kind '" + model_kind(any) + "'");
}

}  // namespace

// ---- public surface ----

Matrix fea_predict_proba(const FeaModel& m, const Matrix& inputs) {
    return std::visit([&](const auto& typed) { return model::predict_proba(typed, inputs); }, m);
}

std::string fea_model_kind(const FeaModel& m) {
    return std::holds_alternative<model::MlpModel>(m) ? "mlp" : "logreg";
}

Matrix predict_fused(const LateFusionArtifact& artifact, const Matrix& fea_inputs,
                     const Matrix& img_probs) {
    const Matrix p_fea = fea_predict_proba(artifact.fea, fea_inputs);
    return fuse::late_fusion_forward(artifact.fusion, p_fea, img_probs);
}

Matrix predict_fused(const IntermediateArtifact& artifact, const Matrix& fea_inputs,
                     const Matrix& img_features) {
    const Matrix features = model::extract_features(artifact.fea, fea_inputs);
    return fuse::intermediate_fusion_infer(artifact.fusion, features, img_features);
}

std::string model_kind(const AnyModel& m) {
    if (std::holds_alternative<model::MlpModel>(m)) {
        return "mlp";
    }
    if (std::holds_alternative<model::LogRegModel>(m)) {
        return "logreg";
    }
    if (const auto* late = std::get_if<LateFusionArtifact>(&m)) {
        return std::string("late_fusion:") + fuse::to_string(late->fusion.strategy);
    }
    return "intermediate_fusion";
}

std::string model_to_json_text(const AnyModel& m) {
    const ordered_json doc = std::visit(
        [](const auto& typed) -> ordered_json {
            using T = std::decay_t<decltype(typed)>;
            if constexpr (std::is_same_v<T, model::MlpModel>) {
                return mlp_to_json(typed);
            } else if constexpr (std::is_same_v<T, model::LogRegModel>) {
                return logreg_to_json(typed);
            } else if constexpr (std::is_same_v<T, LateFusionArtifact>) {
                return late_to_json(typed);
            } else {
                return intermediate_to_json(typed);
            }
        },
        m);
    return doc.dump(2) + "\n";
}

AnyModel model_from_json_text(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(source, std::string("invalid JSON: ") + e.what());
    }
    try {
        return any_model_from_json(doc, source);
    } catch (const json::exception& e) {
        fail(source, std::string("malformed model document: ") + e.what());
    }
}

void save_model(const std::string& path, const AnyModel& m) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write file '" + path + "'");
    }
    out << model_to_json_text(m);
    if (!out) {
        throw std::runtime_error("failed writing file '" + path + "'");
    }
}

AnyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_json_text(buffer.str(), path);
}

FeaModel load_fea_model(const std::string& path) {
    AnyModel any = load_model(path);
    if (auto* mlp = std::get_if<model::MlpModel>(&any)) {
        return std::move(*mlp);
    }
    if (auto* logreg = std::get_if<model::LogRegModel>(&any)) {
        return std::move(*logreg);
    }
    throw std::runtime_error("model file " + path + ": expected a unimodal FEA model, found '" +
                             model_kind(any) + "'");
}

}  // namespace fervr::io
