#pragma once

#include <string>

#include <json.hpp>

#include "rt/data.hpp"
#include "rt/model_config.hpp"
#include "rt/train.hpp"

namespace rt {

// Unified experiment configuration: model, training recipe, synthesizer
// recipe, and paths, loaded from one JSON document. The schema is strict —
// unknown keys anywhere in the document are rejected with their full path.
struct RunConfig {
    ModelConfig model;
    train::TrainConfig training;
    data::BlemishSpec blemish;
    std::string dataset_dir;
    std::string checkpoint_path;
    std::string out_dir = ".";
    uint64_t seed = 0;

    int resolution() const { return model.gp.output_resolution(); }

    void validate() const;
    nlohmann::json to_json() const;  // fully resolved, suitable for logging

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

}  // namespace rt
