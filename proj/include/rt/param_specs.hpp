#pragma once

#include <string>
#include <vector>

#include "rt/model_config.hpp"

namespace rt {

enum class ParamKind { ConvWeight, FcWeight, AffineWeight, Bias, AffineBias, Constant, ToRgbWeight };

struct ParamSpec {
    std::string name;
    Shape shape;
    ParamKind kind;
};

namespace specs {

inline void push(std::vector<ParamSpec>& v, std::string n, Shape s, ParamKind k) {
    v.push_back({std::move(n), std::move(s), k});
}

inline std::vector<ParamSpec> gp_specs(const GPConfig& gp) {
    std::vector<ParamSpec> v;
    int L = gp.levels, d = gp.latent_dim;
    push(v, "gp.const", {gp.channels(L), 4, 4}, ParamKind::Constant);
    for (int i = L; i >= 1; --i) {
        int cin = gp.unit_in_channels(i);
        int cout = gp.channels(i);
        std::string u = "gp.unit" + std::to_string(i) + ".";
        push(v, u + "conv1.weight", {cout, cin, 3, 3}, ParamKind::ConvWeight);
        push(v, u + "conv1.bias", {cout}, ParamKind::Bias);
        push(v, u + "conv1.affine.weight", {cin, d}, ParamKind::AffineWeight);
        push(v, u + "conv1.affine.bias", {cin}, ParamKind::AffineBias);
        if (i < L) {
            push(v, u + "conv2.weight", {cout, cout, 3, 3}, ParamKind::ConvWeight);
            push(v, u + "conv2.bias", {cout}, ParamKind::Bias);
            push(v, u + "conv2.affine.weight", {cout, d}, ParamKind::AffineWeight);
            push(v, u + "conv2.affine.bias", {cout}, ParamKind::AffineBias);
        }
        push(v, u + "torgb.weight", {gp.rgb_channels, cout, 1, 1}, ParamKind::ToRgbWeight);
        push(v, u + "torgb.bias", {gp.rgb_channels}, ParamKind::Bias);
        if (gp.noise_injection) {
            push(v, u + "conv1.noise_strength", {1}, ParamKind::Bias);
            if (i < L) push(v, u + "conv2.noise_strength", {1}, ParamKind::Bias);
        }
    }
    return v;
}

inline std::vector<ParamSpec> encoder_specs(const EncoderConfig& ec) {
    std::vector<ParamSpec> v;
    const GPConfig& gp = ec.gp;
    int L = gp.levels, d = gp.latent_dim;
    for (int i = 1; i <= L; ++i) {
        int cin = i == 1 ? gp.rgb_channels : ec.intermediate_channels(i - 1);
        int cout = ec.intermediate_channels(i);
        std::string u = "se.unit" + std::to_string(i) + ".";
        push(v, u + "conv1.weight", {cout, cin, 3, 3}, ParamKind::ConvWeight);
        push(v, u + "conv1.bias", {cout}, ParamKind::Bias);
        push(v, u + "conv2.weight", {cout, cout, 3, 3}, ParamKind::ConvWeight);
        push(v, u + "conv2.bias", {cout}, ParamKind::Bias);
    }
    for (int i = 1; i <= L - 1; ++i) {
        std::string u = "se.fs" + std::to_string(i) + ".";
        push(v, u + "weight", {ec.semantic_channels(i), ec.intermediate_channels(i + 1), 3, 3},
             ParamKind::ConvWeight);
        push(v, u + "bias", {ec.semantic_channels(i)}, ParamKind::Bias);
    }
    int ctop = ec.intermediate_channels(L);
    push(v, "leh.conv.weight", {ctop, ctop, 3, 3}, ParamKind::ConvWeight);
    push(v, "leh.conv.bias", {ctop}, ParamKind::Bias);
    push(v, "leh.fc.weight", {gp.style_count() * d, ctop * 16}, ParamKind::FcWeight);
    push(v, "leh.fc.bias", {gp.style_count() * d}, ParamKind::Bias);
    return v;
}

inline std::vector<ParamSpec> blend_specs(const ModelConfig& cfg) {
    std::vector<ParamSpec> v;
    const GPConfig& gp = cfg.gp;
    for (int i = 1; i <= gp.levels - 1; ++i) {
        int c = gp.channels(i + 1);
        std::string u = (cfg.blend_mode == BlendMode::Concat ? "concat.l" : "bafs.l") +
                        std::to_string(i) + ".";
        if (cfg.blend_mode == BlendMode::Concat) {
            push(v, u + "proj.weight", {c, 2 * c, 1, 1}, ParamKind::ConvWeight);
            push(v, u + "proj.bias", {c}, ParamKind::Bias);
            continue;
        }
        push(v, u + "fuse.weight", {c, 2 * c, 3, 3}, ParamKind::ConvWeight);
        push(v, u + "fuse.bias", {c}, ParamKind::Bias);
        if (cfg.blend_mode != BlendMode::SpatialOnly) {
            push(v, u + "ch.fc1.weight", {c, c}, ParamKind::FcWeight);
            push(v, u + "ch.fc1.bias", {c}, ParamKind::Bias);
            push(v, u + "ch.fc2.weight", {2 * c, c}, ParamKind::FcWeight);
            push(v, u + "ch.fc2.bias", {2 * c}, ParamKind::Bias);
        }
        if (cfg.blend_mode != BlendMode::ChannelOnly) {
            push(v, u + "sp.conv1.weight", {c, c, 3, 3}, ParamKind::ConvWeight);
            push(v, u + "sp.conv1.bias", {c}, ParamKind::Bias);
            push(v, u + "sp.conv2.weight", {2, c, 3, 3}, ParamKind::ConvWeight);
            push(v, u + "sp.conv2.bias", {2}, ParamKind::Bias);
        }
    }
    return v;
}

inline std::vector<ParamSpec> model_specs(const ModelConfig& cfg) {
    auto v = gp_specs(cfg.gp);
    auto e = encoder_specs(cfg.encoder());
    auto b = blend_specs(cfg);
    v.insert(v.end(), e.begin(), e.end());
    v.insert(v.end(), b.begin(), b.end());
    return v;
}

// Discriminator: fromRGB, then stride-2 stages down to 4x4, then a head.
inline std::vector<ParamSpec> discriminator_specs(const GPConfig& gp) {
    std::vector<ParamSpec> v;
    int L = gp.levels;
    push(v, "disc.fromrgb.weight", {gp.channels(1), gp.rgb_channels, 1, 1}, ParamKind::ConvWeight);
    push(v, "disc.fromrgb.bias", {gp.channels(1)}, ParamKind::Bias);
    for (int i = 1; i <= L - 1; ++i) {  // stage i maps res 2^(L+2-i) -> half
        int cin = gp.channels(i);
        int cout = gp.channels(i + 1);
        std::string u = "disc.stage" + std::to_string(i) + ".";
        push(v, u + "conv1.weight", {cin, cin, 3, 3}, ParamKind::ConvWeight);
        push(v, u + "conv1.bias", {cin}, ParamKind::Bias);
        push(v, u + "conv2.weight", {cout, cin, 3, 3}, ParamKind::ConvWeight);  // stride 2
        push(v, u + "conv2.bias", {cout}, ParamKind::Bias);
    }
    int ctop = gp.channels(L);
    push(v, "disc.head.conv.weight", {ctop, ctop, 3, 3}, ParamKind::ConvWeight);
    push(v, "disc.head.conv.bias", {ctop}, ParamKind::Bias);
    push(v, "disc.head.fc.weight", {1, ctop * 16}, ParamKind::FcWeight);
    push(v, "disc.head.fc.bias", {1}, ParamKind::Bias);
    return v;
}

}  // namespace specs
}  // namespace rt
