#pragma once

#include "rt/model_config.hpp"
#include "rt/ops.hpp"
#include "rt/params.hpp"

namespace rt::bafs {

constexpr double kLreluSlope = 0.2;

template <class T>
struct MaskPair {
    ag::Var<T> m;  // channel mask is [B,C,1,1], spatial mask is [B,1,H,W]
    ag::Var<T> complement() const { return ag::one_minus(m); }
};

// Channel weights after strength control: w_gp = clamp(s * (1 - M_C), 0, 1),
// w_s = 1 - w_gp. s = 1 returns (M_C, 1 - M_C) bit-exactly.
template <class T>
std::pair<ag::Var<T>, ag::Var<T>> strength_adjust(const MaskPair<T>& m_c, double s) {
    if (s < 0.0) throw ArgumentError("strength must be nonnegative, got " + std::to_string(s));
    if (s == 1.0) return {m_c.m, m_c.complement()};
    auto w_gp = ag::clamp(ag::scale(m_c.complement(), static_cast<T>(s)), T(0), T(1));
    return {ag::one_minus(w_gp), w_gp};
}

template <class T>
struct FuseResult {
    ag::Var<T> blend;
    MaskPair<T> spatial;
    MaskPair<T> channel;
};

// Blemish-aware selection between the semantic map F_S and the GAN-prior map
// F_I at one level: complementary two-way softmax masks over channels and
// space, combined elementwise.
template <class T>
FuseResult<T> bafs_fuse(const ModelConfig& cfg, const ParamStore<T>& ps, int level,
                        const ag::Var<T>& f_s, const ag::Var<T>& f_i,
                        const StrengthSpec& strength = {}) {
    strength.validate();
    const Shape& ss = f_s->value.shape();
    const Shape& si = f_i->value.shape();
    if (ss != si)
        throw ContractError("bafs level " + std::to_string(level) + ": feature shapes differ, F_S=" +
                            shape_str(ss) + " F_I=" + shape_str(si));
    if (cfg.blend_mode == BlendMode::Concat)
        throw ConfigError("bafs_fuse called in concat mode");
    int b = ss[0], c = ss[1], h = ss[2], w = ss[3];
    std::string u = "bafs.l" + std::to_string(level) + ".";

    auto cat = ag::concat(f_s, f_i, 1);
    auto hid = ag::conv2d(cat, ps.get(u + "fuse.weight"), 1, 1);
    hid = ag::leaky_relu(ag::bias_add(hid, ps.get(u + "fuse.bias")), T(kLreluSlope));

    FuseResult<T> out;
    bool use_channel = cfg.blend_mode != BlendMode::SpatialOnly;
    bool use_spatial = cfg.blend_mode != BlendMode::ChannelOnly;

    if (use_channel) {
        auto pooled = ag::reshape(ag::mean_axes(hid, {2, 3}, false), {b, c});
        auto h1 = ag::leaky_relu(
            ag::linear(pooled, ps.get(u + "ch.fc1.weight"), ps.get(u + "ch.fc1.bias")),
            T(kLreluSlope));
        auto logits = ag::linear(h1, ps.get(u + "ch.fc2.weight"), ps.get(u + "ch.fc2.bias"));
        auto m = ag::two_way_softmax(ag::slice(logits, 1, 0, c), ag::slice(logits, 1, c, c));
        out.channel.m = ag::reshape(m, {b, c, 1, 1});
    }
    if (use_spatial) {
        auto sh = ag::conv2d(hid, ps.get(u + "sp.conv1.weight"), 1, 1);
        sh = ag::leaky_relu(ag::bias_add(sh, ps.get(u + "sp.conv1.bias")), T(kLreluSlope));
        auto logits = ag::bias_add(ag::conv2d(sh, ps.get(u + "sp.conv2.weight"), 1, 1),
                                   ps.get(u + "sp.conv2.bias"));
        out.spatial.m =
            ag::two_way_softmax(ag::slice(logits, 1, 0, 1), ag::slice(logits, 1, 1, 1));
    }

    ag::Var<T> w_s, w_gp;
    if (use_channel) {
        bool adjust = strength.affects_level(level, cfg.gp.levels);
        auto pair = strength_adjust(out.channel, adjust ? strength.s : 1.0);
        w_s = pair.first;
        w_gp = pair.second;
    }
    switch (cfg.blend_mode) {
        case BlendMode::SpatialChannel:
            out.blend = ag::add(ag::mul(ag::mul(out.spatial.m, w_s), f_s),
                                ag::mul(ag::mul(out.spatial.complement(), w_gp), f_i));
            break;
        case BlendMode::SpatialOnly:
            out.blend = ag::add(ag::mul(out.spatial.m, f_s),
                                ag::mul(out.spatial.complement(), f_i));
            break;
        case BlendMode::ChannelOnly:
            out.blend = ag::add(ag::mul(w_s, f_s), ag::mul(w_gp, f_i));
            break;
        case BlendMode::Concat:
            break;  // unreachable
    }
    return out;
}

// Concat-ablation replacement: channel concatenation + 1x1 projection.
template <class T>
ag::Var<T> concat_fuse(const ParamStore<T>& ps, int level, const ag::Var<T>& f_s,
                       const ag::Var<T>& f_i) {
    if (f_s->value.shape() != f_i->value.shape())
        throw ContractError("concat level " + std::to_string(level) + ": feature shapes differ");
    std::string u = "concat.l" + std::to_string(level) + ".";
    auto cat = ag::concat(f_s, f_i, 1);
    return ag::bias_add(ag::conv2d(cat, ps.get(u + "proj.weight"), 1, 0), ps.get(u + "proj.bias"));
}

}  // namespace rt::bafs
