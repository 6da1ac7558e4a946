#pragma once

#include <map>
#include <optional>

#include "rt/model_config.hpp"
#include "rt/ops.hpp"
#include "rt/param_specs.hpp"
#include "rt/params.hpp"

namespace rt {

template <class T>
void build_params(ParamStore<T>& store, const std::vector<ParamSpec>& specs, uint64_t seed) {
    for (const auto& sp : specs) {
        switch (sp.kind) {
            case ParamKind::ConvWeight:
                store.add(sp.name, init::he_conv<T>(sp.shape, seed, sp.name));
                break;
            case ParamKind::FcWeight:
                store.add(sp.name, init::he_fc<T>(sp.shape, seed, sp.name));
                break;
            case ParamKind::AffineWeight:
                store.add(sp.name, init::style_affine_w<T>(sp.shape, seed, sp.name));
                break;
            case ParamKind::AffineBias:
                store.add(sp.name, Tensor<T>::full(sp.shape, T(1)));
                break;
            case ParamKind::Bias:
                store.add(sp.name, Tensor<T>::zeros(sp.shape));
                break;
            case ParamKind::Constant:
                store.add(sp.name, init::normal<T>(sp.shape, seed, sp.name, 1.0));
                break;
            case ParamKind::ToRgbWeight: {
                double fan_in = static_cast<double>(sp.shape[1]);
                store.add(sp.name, init::normal<T>(sp.shape, seed, sp.name, 1.0 / std::sqrt(fan_in)));
                break;
            }
        }
    }
}

namespace gp {

constexpr double kLreluSlope = 0.2;
constexpr double kDemodEps = 1e-8;

template <class T>
ag::Var<T> rsqrt(const ag::Var<T>& v) {
    return ag::divide(ag::constant(Tensor<T>::full(v->value.shape(), T(1))), ag::sqrt_(v));
}

// Style-modulated 3x3 (or 1x1) convolution with optional weight demodulation.
// Modulation is folded into the input (x * s) and demodulation applied as a
// per-(sample, out-channel) rescale, which matches modulating the weights.
template <class T>
ag::Var<T> modulated_conv2d(const ag::Var<T>& x, const ag::Var<T>& w, const ag::Var<T>& style,
                            bool demodulate, int pad) {
    int b = x->value.dim(0);
    int cin = x->value.dim(1);
    int cout = w->value.dim(0);
    auto xm = ag::mul(x, ag::reshape(style, {b, cin, 1, 1}));
    auto y = ag::conv2d(xm, w, 1, pad);
    if (demodulate) {
        int kk = w->value.dim(2) * w->value.dim(3);
        auto w2 = ag::sum_axes(ag::square(ag::reshape(w, {cout, cin, kk})), {2}, false);  // [O,I]
        auto s2 = ag::square(style);                                                      // [B,I]
        auto norm = ag::matmul(s2, ag::transpose2d(w2));                                  // [B,O]
        auto d = rsqrt(ag::offset(norm, T(kDemodEps)));
        y = ag::mul(y, ag::reshape(d, {b, cout, 1, 1}));
    }
    return y;
}

// Per-unit style vector from a latent slice.
template <class T>
ag::Var<T> style_affine(const ParamStore<T>& ps, const std::string& prefix, const ag::Var<T>& l) {
    return ag::linear(l, ps.get(prefix + ".affine.weight"), ps.get(prefix + ".affine.bias"));
}

struct NoiseContext {
    bool enabled = false;
    uint64_t seed = 0;
};

template <class T>
struct UnitResult {
    ag::Var<T> features;
    ag::Var<T> rgb_acc;
};

// One GP unit: consumes the blended map at half the unit's output resolution
// (the learned constant at level L), emits F^i_I and the updated RGB skip.
template <class T>
UnitResult<T> gp_unit_forward(const GPConfig& cfg, const ParamStore<T>& ps, int i,
                              const ag::Var<T>& f_in, const ag::Var<T>& l_a, const ag::Var<T>& l_b,
                              const ag::Var<T>& rgb_acc, const NoiseContext& noise = {}) {
    int L = cfg.levels;
    int res = cfg.resolution(i);
    int cin = cfg.unit_in_channels(i);
    int in_res = i == L ? 4 : res / 2;
    const Shape& s = f_in->value.shape();
    if (s.size() != 4 || s[1] != cin || s[2] != in_res || s[3] != in_res)
        throw ContractError("gp unit " + std::to_string(i) + ": expected input [B," +
                            std::to_string(cin) + "," + std::to_string(in_res) + "," +
                            std::to_string(in_res) + "], got " + shape_str(s));
    std::string u = "gp.unit" + std::to_string(i) + ".";

    auto x = i == L ? f_in : ag::upsample2x(f_in);
    auto apply_noise = [&](ag::Var<T> h, const std::string& conv) {
        if (!cfg.noise_injection) return h;
        Rng rng = Rng::derive(noise.seed, fnv1a(u + conv));
        Tensor<T> n({h->value.dim(0), 1, h->value.dim(2), h->value.dim(3)});
        for (int64_t k = 0; k < n.numel(); ++k) n[k] = static_cast<T>(rng.normal());
        auto strength = ps.get(u + conv + ".noise_strength");
        return ag::add(h, ag::mul(ag::constant(std::move(n)),
                                  ag::reshape(strength, {1, 1, 1, 1})));
    };

    auto s1 = style_affine(ps, u + "conv1", l_a);
    auto h = modulated_conv2d(x, ps.get(u + "conv1.weight"), s1, cfg.demodulation, 1);
    h = apply_noise(h, "conv1");
    h = ag::leaky_relu(ag::bias_add(h, ps.get(u + "conv1.bias")), T(kLreluSlope));
    if (i < L) {
        auto s2 = style_affine(ps, u + "conv2", l_b);
        h = modulated_conv2d(h, ps.get(u + "conv2.weight"), s2, cfg.demodulation, 1);
        h = apply_noise(h, "conv2");
        h = ag::leaky_relu(ag::bias_add(h, ps.get(u + "conv2.bias")), T(kLreluSlope));
    }
    auto rgb = ag::bias_add(ag::conv2d(h, ps.get(u + "torgb.weight"), 1, 0), ps.get(u + "torgb.bias"));
    auto acc = rgb_acc ? ag::add(ag::upsample2x(rgb_acc), rgb) : rgb;
    return {h, acc};
}

// Deterministic 1x1 channel adapter (linear interpolation across the channel
// index) used when a GP level is bypassed.
template <class T>
ag::Var<T> channel_adapt(const ag::Var<T>& x, int cout) {
    int cin = x->value.dim(1);
    if (cin == cout) return x;
    Tensor<T> w({cout, cin, 1, 1});
    for (int o = 0; o < cout; ++o) {
        double pos = cout == 1 ? 0.0
                               : static_cast<double>(o) * (cin - 1) / std::max(1, cout - 1);
        int lo = static_cast<int>(pos);
        double frac = pos - lo;
        w[static_cast<int64_t>(o) * cin + lo] += static_cast<T>(1.0 - frac);
        if (lo + 1 < cin) w[static_cast<int64_t>(o) * cin + lo + 1] += static_cast<T>(frac);
    }
    return ag::conv2d(x, ag::constant(std::move(w)), 1, 0);
}

// Latent slices (2i-2, 2i-1) in top-down order: unit L consumes slices 0,1.
template <class T>
std::pair<ag::Var<T>, ag::Var<T>> latent_slices(const GPConfig& cfg, const ag::Var<T>& latent,
                                                int i) {
    int b = latent->value.dim(0);
    int d = cfg.latent_dim;
    int base = 2 * (cfg.levels - i);
    auto a = ag::reshape(ag::slice(latent, 1, base, 1), {b, d});
    auto bb = ag::reshape(ag::slice(latent, 1, base + 1, 1), {b, d});
    return {a, bb};
}

template <class T>
struct ForwardResult {
    ag::Var<T> image;                   // accumulated RGB at 2^(L+1), unclamped
    std::map<int, ag::Var<T>> features; // F^i_I per level
};

// Standalone backbone pass over externally supplied (already blended) maps.
// Levels in skip_levels (or with an absent injection) are bridged by
// upsampling + channel-adapting the map that would have fed them.
template <class T>
ForwardResult<T> gp_forward(const GPConfig& cfg, const ParamStore<T>& ps, const ag::Var<T>& latent,
                            const std::map<int, ag::Var<T>>& injected,
                            const std::set<int>& skip_levels = {},
                            const NoiseContext& noise = {}) {
    int L = cfg.levels;
    const Shape& ls = latent->value.shape();
    if (ls.size() != 3 || ls[1] != cfg.style_count() || ls[2] != cfg.latent_dim)
        throw ContractError("latent must be [B," + std::to_string(cfg.style_count()) + "," +
                            std::to_string(cfg.latent_dim) + "], got " + shape_str(ls));
    int b = ls[0];
    if (skip_levels.count(L)) throw ConfigError("cannot skip constant-input level");

    ForwardResult<T> out;
    ag::Var<T> rgb;
    ag::Var<T> features;
    for (int i = L; i >= 1; --i) {
        auto [la, lb] = latent_slices(cfg, latent, i);
        if (i == L) {
            auto c = ag::reshape(ps.get("gp.const"), {1, cfg.channels(L), 4, 4});
            auto cb = ag::mul(c, ag::constant(Tensor<T>::full({b, 1, 1, 1}, T(1))));
            auto r = gp_unit_forward(cfg, ps, i, cb, la, lb, rgb, noise);
            features = r.features;
            rgb = r.rgb_acc;
        } else {
            auto it = injected.find(i);
            bool skipped = skip_levels.count(i) > 0;
            if (it == injected.end() && !skipped)
                throw ConfigError("gp_forward: no injected map for level " + std::to_string(i));
            if (skipped) {
                auto src = it != injected.end() ? it->second : features;
                features = channel_adapt(ag::upsample2x(src), cfg.channels(i));
                if (rgb) rgb = ag::upsample2x(rgb);
            } else {
                auto r = gp_unit_forward(cfg, ps, i, it->second, la, lb, rgb, noise);
                features = r.features;
                rgb = r.rgb_acc;
            }
        }
        out.features[i] = features;
    }
    out.image = rgb;
    return out;
}

}  // namespace gp
}  // namespace rt
