#pragma once

#include <map>
#include <string>
#include <vector>

#include "rt/autodiff.hpp"
#include "rt/errors.hpp"
#include "rt/rng.hpp"

namespace rt {

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Named trainable tensors. Iteration order is the sorted name order, which
// makes checkpoints and optimizer traversal deterministic.
template <class T>
class ParamStore {
public:
    ag::Var<T> add(const std::string& name, Tensor<T> init) {
        auto v = ag::leaf(std::move(init), true);
        auto [it, inserted] = params_.emplace(name, v);
        if (!inserted) throw ContractError("duplicate parameter '" + name + "'");
        return v;
    }

    const ag::Var<T>& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("missing parameter '" + name + "'");
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) > 0; }
    size_t size() const { return params_.size(); }

    std::map<std::string, ag::Var<T>>& map() { return params_; }
    const std::map<std::string, ag::Var<T>>& map() const { return params_; }

    std::vector<ag::Var<T>> all() const {
        std::vector<ag::Var<T>> out;
        out.reserve(params_.size());
        for (auto& [k, v] : params_) out.push_back(v);
        return out;
    }

private:
    std::map<std::string, ag::Var<T>> params_;
};

namespace init {

// Initializers keyed on (seed, name) so construction order never matters.
template <class T>
Tensor<T> normal(const Shape& s, uint64_t seed, const std::string& name, double stddev) {
    Rng rng = Rng::derive(seed, fnv1a(name));
    Tensor<T> t(s);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * stddev);
    return t;
}

template <class T>
Tensor<T> he_conv(const Shape& s, uint64_t seed, const std::string& name) {
    double fan_in = static_cast<double>(s[1]) * s[2] * s[3];
    return normal<T>(s, seed, name, std::sqrt(2.0 / fan_in));
}

template <class T>
Tensor<T> he_fc(const Shape& s, uint64_t seed, const std::string& name) {
    return normal<T>(s, seed, name, std::sqrt(2.0 / static_cast<double>(s[1])));
}

// Style affine: weights near zero, bias one, so modulation starts as identity.
template <class T>
Tensor<T> style_affine_w(const Shape& s, uint64_t seed, const std::string& name) {
    return normal<T>(s, seed, name, 0.2 / std::sqrt(static_cast<double>(s[1])));
}

}  // namespace init

}  // namespace rt
