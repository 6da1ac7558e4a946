#pragma once

#include <map>
#include <set>
#include <string>

#include "rt/errors.hpp"
#include "rt/tensor.hpp"

namespace rt {

// Progressive synthesis backbone configuration. Level L is the coarse 4x4
// level fed by the learned constant; level 1 emits the final image.
struct GPConfig {
    int levels = 5;        // L >= 3; 9 gives 1024-pixel output
    int latent_dim = 128;  // 512 at full scale
    int channel_base = 32;
    int channel_max = 256;
    int rgb_channels = 3;
    bool demodulation = true;
    bool noise_injection = false;

    int style_count() const { return 2 * levels; }
    int output_resolution() const { return 1 << (levels + 1); }
    // Resolution of F^i_I emitted by GP unit i.
    int resolution(int i) const { return 1 << (levels + 2 - i); }
    int channels(int i) const {
        int64_t c = static_cast<int64_t>(channel_base) << (i - 1);
        return static_cast<int>(std::min<int64_t>(channel_max, c));
    }
    // Input channel count of GP unit i (what the blended map must carry).
    int unit_in_channels(int i) const { return i == levels ? channels(levels) : channels(i + 1); }

    void validate() const {
        if (levels < 3) throw ConfigError("GPConfig: levels must be >= 3, got " + std::to_string(levels));
        if (latent_dim < 1 || channel_base < 1 || channel_max < channel_base)
            throw ConfigError("GPConfig: bad latent/channel settings");
    }
};

// The encoder mirrors the GP pyramid: intermediate I^i at resolution
// 2^(L+2-i), semantic map F^i_S at 2^(L+1-i) with GP level-(i+1) channels so
// the two sides blend elementwise.
struct EncoderConfig {
    GPConfig gp;
    int input_resolution() const { return gp.output_resolution(); }
    int intermediate_channels(int i) const { return gp.channels(i); }
    int intermediate_resolution(int i) const { return 1 << (gp.levels + 2 - i); }
    int semantic_channels(int i) const { return gp.channels(i + 1); }
    int semantic_resolution(int i) const { return 1 << (gp.levels + 1 - i); }
};

enum class BlendMode { Concat, SpatialOnly, ChannelOnly, SpatialChannel };

inline const char* blend_mode_name(BlendMode m) {
    switch (m) {
        case BlendMode::Concat: return "concat";
        case BlendMode::SpatialOnly: return "spatial_only";
        case BlendMode::ChannelOnly: return "channel_only";
        case BlendMode::SpatialChannel: return "spatial_channel";
    }
    return "?";
}

inline BlendMode blend_mode_from(const std::string& s) {
    if (s == "concat") return BlendMode::Concat;
    if (s == "spatial_only" || s == "spatial") return BlendMode::SpatialOnly;
    if (s == "channel_only" || s == "channel") return BlendMode::ChannelOnly;
    if (s == "spatial_channel" || s == "sc") return BlendMode::SpatialChannel;
    throw ConfigError("unknown blend mode '" + s + "'");
}

// Retouching strength. s scales the GAN-prior side of the channel weighting
// at levels 2..L-1; level 1 is never modified and s=1 is a bit-exact no-op.
struct StrengthSpec {
    double s = 1.0;
    void validate() const {
        if (s < 0.0) throw ArgumentError("strength must be nonnegative, got " + std::to_string(s));
    }
    bool affects_level(int level, int total_levels) const {
        return s != 1.0 && level >= 2 && level <= total_levels - 1;
    }
};

struct ModelConfig {
    GPConfig gp;
    BlendMode blend_mode = BlendMode::SpatialChannel;
    std::set<int> skip_levels;

    EncoderConfig encoder() const { return EncoderConfig{gp}; }

    void validate() const {
        gp.validate();
        for (int s : skip_levels) {
            if (s == gp.levels)
                throw ConfigError("cannot skip the constant-input level " + std::to_string(s));
            if (s < 1 || s > gp.levels)
                throw ConfigError("skip level " + std::to_string(s) + " out of range");
        }
    }
};

// Expected parameter shapes, derivable from configuration alone. Used both to
// build models and to validate checkpoints before any data is read.
std::map<std::string, Shape> expected_param_shapes(const ModelConfig& cfg);

namespace shapes {

// Names for the GP-only subset (external checkpoint import).
std::map<std::string, Shape> gp_param_shapes(const GPConfig& gp);

}  // namespace shapes

}  // namespace rt
