#pragma once

#include <json.hpp>

#include "rt/model_config.hpp"

namespace rt {

inline nlohmann::json to_json(const GPConfig& g) {
    return {{"levels", g.levels},
            {"latent_dim", g.latent_dim},
            {"channel_base", g.channel_base},
            {"channel_max", g.channel_max},
            {"rgb_channels", g.rgb_channels},
            {"demodulation", g.demodulation},
            {"noise_injection", g.noise_injection}};
}

inline GPConfig gp_config_from_json(const nlohmann::json& j) {
    GPConfig g;
    g.levels = j.value("levels", g.levels);
    g.latent_dim = j.value("latent_dim", g.latent_dim);
    g.channel_base = j.value("channel_base", g.channel_base);
    g.channel_max = j.value("channel_max", g.channel_max);
    g.rgb_channels = j.value("rgb_channels", g.rgb_channels);
    g.demodulation = j.value("demodulation", g.demodulation);
    g.noise_injection = j.value("noise_injection", g.noise_injection);
    return g;
}

inline nlohmann::json to_json(const ModelConfig& m) {
    return {{"gp", to_json(m.gp)},
            {"blend_mode", blend_mode_name(m.blend_mode)},
            {"skip_levels", m.skip_levels}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    if (j.contains("gp")) m.gp = gp_config_from_json(j.at("gp"));
    if (j.contains("blend_mode")) m.blend_mode = blend_mode_from(j.at("blend_mode"));
    if (j.contains("skip_levels"))
        m.skip_levels = j.at("skip_levels").get<std::set<int>>();
    return m;
}

}  // namespace rt
