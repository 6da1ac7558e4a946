#include "rt/run_config.hpp"

#include <fstream>
#include <set>

#include "rt/errors.hpp"

namespace rt {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
    if (!j.is_object())
        throw ConfigError("config: '" + path + "' must be an object");
}

// Strict schema: any key outside the allowed set is reported with its path.
void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" +
                              (path.empty() ? it.key() : path + "." + it.key()) + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + path + "." + key + "': " + e.what());
    }
}

GPConfig parse_gp(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, path,
               {"levels", "latent_dim", "channel_base", "channel_max", "rgb_channels",
                "demodulation", "noise_injection"});
    GPConfig g;
    g.levels = get_or(j, "levels", path, g.levels);
    g.latent_dim = get_or(j, "latent_dim", path, g.latent_dim);
    g.channel_base = get_or(j, "channel_base", path, g.channel_base);
    g.channel_max = get_or(j, "channel_max", path, g.channel_max);
    g.rgb_channels = get_or(j, "rgb_channels", path, g.rgb_channels);
    g.demodulation = get_or(j, "demodulation", path, g.demodulation);
    g.noise_injection = get_or(j, "noise_injection", path, g.noise_injection);
    return g;
}

ModelConfig parse_model(const json& j) {
    require_object(j, "model");
    check_keys(j, "model", {"gp", "blend_mode", "skip_levels"});
    ModelConfig m;
    if (j.contains("gp")) m.gp = parse_gp(j.at("gp"), "model.gp");
    if (j.contains("blend_mode")) {
        if (!j.at("blend_mode").is_string())
            throw ConfigError("config: 'model.blend_mode' must be a string");
        try {
            m.blend_mode = blend_mode_from(j.at("blend_mode").get<std::string>());
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (j.contains("skip_levels")) {
        try {
            m.skip_levels = j.at("skip_levels").get<std::set<int>>();
        } catch (const json::exception&) {
            throw ConfigError("config: 'model.skip_levels' must be an array of integers");
        }
    }
    return m;
}

train::TrainConfig parse_train(const json& j, uint64_t default_seed) {
    require_object(j, "train");
    check_keys(j, "train",
               {"steps", "batch", "lr_g", "lr_d", "seed", "checkpoint_every", "augmentation",
                "r1_interval", "weights"});
    train::TrainConfig t;
    t.seed = default_seed;
    t.steps = get_or(j, "steps", "train", t.steps);
    t.batch = get_or(j, "batch", "train", t.batch);
    t.lr_g = get_or(j, "lr_g", "train", t.lr_g);
    t.lr_d = get_or(j, "lr_d", "train", t.lr_d);
    t.seed = get_or(j, "seed", "train", t.seed);
    t.checkpoint_every = get_or(j, "checkpoint_every", "train", t.checkpoint_every);
    t.augmentation = get_or(j, "augmentation", "train", t.augmentation);
    t.r1_interval = get_or(j, "r1_interval", "train", t.r1_interval);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        require_object(w, "train.weights");
        check_keys(w, "train.weights", {"w_l1", "w_perc", "w_adv", "r1_gamma"});
        t.weights.w_l1 = get_or(w, "w_l1", "train.weights", t.weights.w_l1);
        t.weights.w_perc = get_or(w, "w_perc", "train.weights", t.weights.w_perc);
        t.weights.w_adv = get_or(w, "w_adv", "train.weights", t.weights.w_adv);
        t.weights.r1_gamma = get_or(w, "r1_gamma", "train.weights", t.weights.r1_gamma);
    }
    return t;
}

data::BlemishSpec parse_blemish(const json& j, uint64_t default_seed) {
    require_object(j, "blemish");
    check_keys(j, "blemish",
               {"spot_count_min", "spot_count_max", "spot_radius_min", "spot_radius_max",
                "spot_strength_min", "spot_strength_max", "scratch_count_min",
                "scratch_count_max", "scratch_length_min", "scratch_length_max",
                "reflection_count_min", "reflection_count_max", "reflection_radius_min",
                "reflection_radius_max", "allow_overlap", "seed"});
    data::BlemishSpec b;
    b.seed = default_seed;
    b.spot_count_min = get_or(j, "spot_count_min", "blemish", b.spot_count_min);
    b.spot_count_max = get_or(j, "spot_count_max", "blemish", b.spot_count_max);
    b.spot_radius_min = get_or(j, "spot_radius_min", "blemish", b.spot_radius_min);
    b.spot_radius_max = get_or(j, "spot_radius_max", "blemish", b.spot_radius_max);
    b.spot_strength_min = get_or(j, "spot_strength_min", "blemish", b.spot_strength_min);
    b.spot_strength_max = get_or(j, "spot_strength_max", "blemish", b.spot_strength_max);
    b.scratch_count_min = get_or(j, "scratch_count_min", "blemish", b.scratch_count_min);
    b.scratch_count_max = get_or(j, "scratch_count_max", "blemish", b.scratch_count_max);
    b.scratch_length_min = get_or(j, "scratch_length_min", "blemish", b.scratch_length_min);
    b.scratch_length_max = get_or(j, "scratch_length_max", "blemish", b.scratch_length_max);
    b.reflection_count_min = get_or(j, "reflection_count_min", "blemish", b.reflection_count_min);
    b.reflection_count_max = get_or(j, "reflection_count_max", "blemish", b.reflection_count_max);
    b.reflection_radius_min =
        get_or(j, "reflection_radius_min", "blemish", b.reflection_radius_min);
    b.reflection_radius_max =
        get_or(j, "reflection_radius_max", "blemish", b.reflection_radius_max);
    b.allow_overlap = get_or(j, "allow_overlap", "blemish", b.allow_overlap);
    b.seed = get_or(j, "seed", "blemish", b.seed);
    return b;
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    training.validate();
    try {
        blemish.validate();
    } catch (const ArgumentError& e) {
        // Blemish ranges arriving via the config file are configuration errors.
        throw ConfigError(e.what());
    }
}

nlohmann::json RunConfig::to_json() const {
    return {{"seed", seed},
            {"model", rt::to_json(model)},
            {"train",
             {{"steps", training.steps},
              {"batch", training.batch},
              {"lr_g", training.lr_g},
              {"lr_d", training.lr_d},
              {"seed", training.seed},
              {"checkpoint_every", training.checkpoint_every},
              {"augmentation", training.augmentation},
              {"r1_interval", training.r1_interval},
              {"weights",
               {{"w_l1", training.weights.w_l1},
                {"w_perc", training.weights.w_perc},
                {"w_adv", training.weights.w_adv},
                {"r1_gamma", training.weights.r1_gamma}}}}},
            {"blemish",
             {{"spot_count_min", blemish.spot_count_min},
              {"spot_count_max", blemish.spot_count_max},
              {"spot_radius_min", blemish.spot_radius_min},
              {"spot_radius_max", blemish.spot_radius_max},
              {"spot_strength_min", blemish.spot_strength_min},
              {"spot_strength_max", blemish.spot_strength_max},
              {"scratch_count_min", blemish.scratch_count_min},
              {"scratch_count_max", blemish.scratch_count_max},
              {"scratch_length_min", blemish.scratch_length_min},
              {"scratch_length_max", blemish.scratch_length_max},
              {"reflection_count_min", blemish.reflection_count_min},
              {"reflection_count_max", blemish.reflection_count_max},
              {"reflection_radius_min", blemish.reflection_radius_min},
              {"reflection_radius_max", blemish.reflection_radius_max},
              {"allow_overlap", blemish.allow_overlap},
              {"seed", blemish.seed}}},
            {"paths",
             {{"dataset", dataset_dir},
              {"checkpoint", checkpoint_path},
              {"out_dir", out_dir}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    require_object(j, "");
    check_keys(j, "", {"seed", "model", "train", "blemish", "paths"});
    RunConfig c;
    c.seed = get_or(j, "seed", "", c.seed);
    if (j.contains("model")) c.model = parse_model(j.at("model"));
    if (j.contains("train")) c.training = parse_train(j.at("train"), c.seed);
    else c.training.seed = c.seed;
    if (j.contains("blemish")) c.blemish = parse_blemish(j.at("blemish"), c.seed);
    else c.blemish.seed = c.seed;
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        require_object(p, "paths");
        check_keys(p, "paths", {"dataset", "checkpoint", "out_dir"});
        c.dataset_dir = get_or<std::string>(p, "dataset", "paths", c.dataset_dir);
        c.checkpoint_path = get_or<std::string>(p, "checkpoint", "paths", c.checkpoint_path);
        c.out_dir = get_or<std::string>(p, "out_dir", "paths", c.out_dir);
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

}  // namespace rt
