#pragma once

#include <vector>

#include "rt/model_config.hpp"
#include "rt/ops.hpp"
#include "rt/params.hpp"

namespace rt::se {

constexpr double kLreluSlope = 0.2;

template <class T>
struct EncoderState {
    std::vector<ag::Var<T>> intermediates;  // I^1..I^L   (index i-1)
    std::vector<ag::Var<T>> semantic;       // F^1..F^{L-1}
};

template <class T>
ag::Var<T> conv_block(const ParamStore<T>& ps, const std::string& prefix, const ag::Var<T>& x,
                      int stride) {
    auto h = ag::conv2d(x, ps.get(prefix + "conv1.weight"), stride, 1);
    h = ag::leaky_relu(ag::bias_add(h, ps.get(prefix + "conv1.bias")), T(kLreluSlope));
    h = ag::conv2d(h, ps.get(prefix + "conv2.weight"), 1, 1);
    return ag::leaky_relu(ag::bias_add(h, ps.get(prefix + "conv2.bias")), T(kLreluSlope));
}

// Cascade of SE units: unit 1 is a resolution-preserving stem, units 2..L
// halve resolution; each level past the first also emits a semantic map
// through a dedicated convolution.
template <class T>
EncoderState<T> se_forward(const EncoderConfig& cfg, const ParamStore<T>& ps, const ag::Var<T>& img) {
    int L = cfg.gp.levels;
    int r = cfg.input_resolution();
    const Shape& s = img->value.shape();
    if (s.size() != 4 || s[1] != cfg.gp.rgb_channels || s[2] != r || s[3] != r)
        throw ContractError("se_forward: expected input [B," + std::to_string(cfg.gp.rgb_channels) +
                            "," + std::to_string(r) + "," + std::to_string(r) + "], got " +
                            shape_str(s));
    EncoderState<T> st;
    ag::Var<T> h = img;
    for (int i = 1; i <= L; ++i) {
        h = conv_block(ps, "se.unit" + std::to_string(i) + ".", h, i == 1 ? 1 : 2);
        st.intermediates.push_back(h);
    }
    for (int i = 1; i <= L - 1; ++i) {
        std::string u = "se.fs" + std::to_string(i) + ".";
        auto f = ag::conv2d(st.intermediates[static_cast<size_t>(i)], ps.get(u + "weight"), 1, 1);
        st.semantic.push_back(ag::bias_add(f, ps.get(u + "bias")));
    }
    return st;
}

// Latent extraction head: convolution + fully connected layer over the 4x4
// top feature, emitting the 2L x d extended latent.
template <class T>
ag::Var<T> leh_forward(const EncoderConfig& cfg, const ParamStore<T>& ps, const ag::Var<T>& top) {
    const Shape& s = top->value.shape();
    int c = cfg.intermediate_channels(cfg.gp.levels);
    if (s.size() != 4 || s[1] != c || s[2] != 4 || s[3] != 4)
        throw ContractError("leh_forward: expected [B," + std::to_string(c) +
                            ",4,4] input, got " + shape_str(s));
    int b = s[0];
    auto h = ag::conv2d(top, ps.get("leh.conv.weight"), 1, 1);
    h = ag::leaky_relu(ag::bias_add(h, ps.get("leh.conv.bias")), T(kLreluSlope));
    auto flat = ag::reshape(h, {b, c * 16});
    auto l = ag::linear(flat, ps.get("leh.fc.weight"), ps.get("leh.fc.bias"));
    return ag::reshape(l, {b, cfg.gp.style_count(), cfg.gp.latent_dim});
}

}  // namespace rt::se
