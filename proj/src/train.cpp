#include "fervr/train.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fervr::train {

TrainConfig train_config_from_string(const std::string& json_text) {
    return train_config_from_string(json_text, TrainConfig{});
}

TrainConfig train_config_from_string(const std::string& json_text, TrainConfig base) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid train config JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw std::runtime_error("train config must be a JSON object");
    }
    TrainConfig config = base;
    for (const auto& [key, value] : doc.items()) {
        if (key == "batch_size") {
            config.batch_size = value.get<std::size_t>();
        } else if (key == "learning_rate") {
            config.learning_rate = value.get<double>();
        } else if (key == "max_epochs") {
            config.max_epochs = value.get<std::size_t>();
        } else if (key == "seed") {
            config.seed = value.get<std::uint64_t>();
        } else if (key == "class_weighting") {
            config.class_weighting = value.get<bool>();
        } else if (key == "shuffle") {
            config.shuffle = value.get<bool>();
        } else if (key == "l2_strength") {
            config.l2_strength = value.get<double>();
        } else {
            throw std::runtime_error("train config: unknown field '" + key + "'");
        }
    }
    return config;
}

TrainConfig train_config_from_file(const std::string& path) {
    return train_config_from_file(path, TrainConfig{});
}

TrainConfig train_config_from_file(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return train_config_from_string(buffer.str(), base);
}

std::string history_to_json(const TrainHistory& history) {
    nlohmann::ordered_json doc;
    doc["train_loss"] = history.train_loss;
    doc["train_accuracy"] = history.train_accuracy;
    doc["val_accuracy"] = history.val_accuracy;
    doc["selected_epoch"] = history.selected_epoch;
    return doc.dump(2);
}

}  // namespace fervr::train
