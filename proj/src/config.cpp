#include "rt/model_config.hpp"
#include "rt/param_specs.hpp"

namespace rt {

std::map<std::string, Shape> expected_param_shapes(const ModelConfig& cfg) {
    std::map<std::string, Shape> out;
    for (const auto& sp : specs::model_specs(cfg)) out[sp.name] = sp.shape;
    return out;
}

namespace shapes {

std::map<std::string, Shape> gp_param_shapes(const GPConfig& gp) {
    std::map<std::string, Shape> out;
    for (const auto& sp : specs::gp_specs(gp)) out[sp.name] = sp.shape;
    return out;
}

}  // namespace shapes
}  // namespace rt
