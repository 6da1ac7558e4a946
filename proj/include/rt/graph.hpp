#pragma once

#include <map>
#include <optional>

#include "rt/bafs.hpp"
#include "rt/encoder.hpp"
#include "rt/gp.hpp"

namespace rt {

template <class T>
struct Model {
    ModelConfig cfg;
    ParamStore<T> params;
};

template <class T>
Model<T> build_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model<T> m;
    m.cfg = cfg;
    build_params(m.params, specs::model_specs(cfg), seed);
    return m;
}

template <class T>
struct RetouchDiagnostics {
    ag::Var<T> latent;
    std::map<int, ag::Var<T>> spatial_masks;  // M^i_S, levels 1..L-1 (when present)
    std::map<int, ag::Var<T>> channel_masks;  // M^i_C
    std::map<int, ag::Var<T>> blends;         // F^i_Blend
};

template <class T>
struct RetouchResult {
    ag::Var<T> output;
    RetouchDiagnostics<T> diagnostics;
};

// Full pipeline on [B,3,R,R] input in [-1,1]: SE -> LEH -> interleaved
// BAFS/GP descent. `raw` leaves the output unclamped (training path).
template <class T>
RetouchResult<T> forward(const Model<T>& model, const ag::Var<T>& input,
                         const StrengthSpec& strength = {}, bool raw = false,
                         const gp::NoiseContext& noise = {}) {
    strength.validate();
    const ModelConfig& cfg = model.cfg;
    const GPConfig& g = cfg.gp;
    const ParamStore<T>& ps = model.params;
    int L = g.levels;
    int b = input->value.dim(0);

    auto enc = se::se_forward(cfg.encoder(), ps, input);
    RetouchResult<T> res;
    res.diagnostics.latent = se::leh_forward(cfg.encoder(), ps, enc.intermediates.back());

    ag::Var<T> rgb;
    ag::Var<T> features;
    for (int i = L; i >= 1; --i) {
        auto [la, lb] = gp::latent_slices(g, res.diagnostics.latent, i);
        if (i == L) {
            auto c = ag::reshape(ps.get("gp.const"), {1, g.channels(L), 4, 4});
            auto cb = ag::mul(c, ag::constant(Tensor<T>::full({b, 1, 1, 1}, T(1))));
            auto r = gp::gp_unit_forward(g, ps, i, cb, la, lb, rgb, noise);
            features = r.features;
            rgb = r.rgb_acc;
            continue;
        }
        const auto& f_s = enc.semantic[static_cast<size_t>(i - 1)];
        ag::Var<T> blend;
        if (cfg.blend_mode == BlendMode::Concat) {
            blend = bafs::concat_fuse(ps, i, f_s, features);
        } else {
            auto fused = bafs::bafs_fuse(cfg, ps, i, f_s, features, strength);
            blend = fused.blend;
            if (fused.spatial.m) res.diagnostics.spatial_masks[i] = fused.spatial.m;
            if (fused.channel.m) res.diagnostics.channel_masks[i] = fused.channel.m;
        }
        res.diagnostics.blends[i] = blend;
        if (cfg.skip_levels.count(i)) {
            features = gp::channel_adapt(ag::upsample2x(blend), g.channels(i));
            if (rgb) rgb = ag::upsample2x(rgb);
        } else {
            auto r = gp::gp_unit_forward(g, ps, i, blend, la, lb, rgb, noise);
            features = r.features;
            rgb = r.rgb_acc;
        }
    }
    res.output = raw ? rgb : ag::clamp(rgb, T(-1), T(1));
    return res;
}

template <class T>
RetouchResult<T> retouch(const Model<T>& model, const ag::Var<T>& input,
                         const StrengthSpec& strength = {}) {
    return forward(model, input, strength, false);
}

}  // namespace rt
