#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rt/checkpoint.hpp"
#include "rt/data.hpp"
#include "rt/graph.hpp"
#include "rt/metrics.hpp"
#include "rt/serialize.hpp"

namespace rt::train {

constexpr double kLreluSlope = 0.2;

// ---------------------------------------------------------------------------
// Discriminator: fromRGB, L-1 stride-2 stages down to 4x4, scalar-logit head.
// ---------------------------------------------------------------------------

template <class T>
ag::Var<T> disc_forward(const GPConfig& g, const ParamStore<T>& ps, const ag::Var<T>& image) {
    int r = g.output_resolution();
    const Shape& s = image->value.shape();
    if (s.size() != 4 || s[1] != g.rgb_channels || s[2] != r || s[3] != r)
        throw ContractError("discriminator expects [B," + std::to_string(g.rgb_channels) + "," +
                            std::to_string(r) + "," + std::to_string(r) + "], got " +
                            shape_str(s));
    auto lrelu = [](const ag::Var<T>& x) { return ag::leaky_relu(x, T(kLreluSlope)); };
    auto x = lrelu(ag::bias_add(ag::conv2d(image, ps.get("disc.fromrgb.weight"), 1, 0),
                                ps.get("disc.fromrgb.bias")));
    for (int i = 1; i <= g.levels - 1; ++i) {
        std::string u = "disc.stage" + std::to_string(i) + ".";
        x = lrelu(ag::bias_add(ag::conv2d(x, ps.get(u + "conv1.weight"), 1, 1),
                               ps.get(u + "conv1.bias")));
        x = lrelu(ag::bias_add(ag::conv2d(x, ps.get(u + "conv2.weight"), 2, 1),
                               ps.get(u + "conv2.bias")));
    }
    x = lrelu(ag::bias_add(ag::conv2d(x, ps.get("disc.head.conv.weight"), 1, 1),
                           ps.get("disc.head.conv.bias")));
    int b = s[0];
    int flat = x->value.dim(1) * x->value.dim(2) * x->value.dim(3);
    auto fx = ag::reshape(x, {b, flat});
    return ag::linear(fx, ps.get("disc.head.fc.weight"), ps.get("disc.head.fc.bias"));
}

// ---------------------------------------------------------------------------
// Perceptual feature extractor: a fixed, seeded, untrained conv pyramid.
// Weights are constants, so it is deterministic and never trained; any other
// extractor with the same call shape can be plugged in instead.
// ---------------------------------------------------------------------------

template <class T>
using Extractor = std::function<std::vector<ag::Var<T>>(const ag::Var<T>&)>;

template <class T>
class FixedPyramidExtractor {
public:
    explicit FixedPyramidExtractor(uint64_t seed = 77, int base_channels = 8, int stages = 3)
        : stages_(stages) {
        int cin = 3;
        for (int k = 0; k < stages; ++k) {
            int cout = base_channels << k;
            std::string name = "perc.stage" + std::to_string(k) + ".weight";
            weights_.push_back(ag::constant(
                init::he_conv<T>({cout, cin, 3, 3}, seed, name)));
            cin = cout;
        }
    }

    std::vector<ag::Var<T>> operator()(const ag::Var<T>& image) const {
        std::vector<ag::Var<T>> feats;
        auto x = image;
        for (int k = 0; k < stages_; ++k) {
            x = ag::leaky_relu(ag::conv2d(x, weights_[static_cast<size_t>(k)], k == 0 ? 1 : 2, 1),
                               T(kLreluSlope));
            feats.push_back(x);
        }
        return feats;
    }

private:
    int stages_;
    std::vector<ag::Var<T>> weights_;
};

// Adapts the pyramid to the evaluation-side feature interface ([C,H,W]
// float image in, plain feature tensors out, no autodiff graph).
inline metrics::FeatureFn as_feature_fn(std::shared_ptr<FixedPyramidExtractor<float>> pyr) {
    return [pyr](const Tensor<float>& im) {
        ag::NoGradGuard ng;
        auto batched = ag::constant(im.reshaped({1, im.dim(0), im.dim(1), im.dim(2)}));
        std::vector<Tensor<float>> out;
        for (auto& f : (*pyr)(batched)) out.push_back(f->value);
        return out;
    };
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <class T>
ag::Var<T> loss_l1(const ag::Var<T>& output, const ag::Var<T>& target) {
    if (output->value.shape() != target->value.shape())
        throw ContractError("l1 loss: shapes differ, " + shape_str(output->value.shape()) +
                            " vs " + shape_str(target->value.shape()));
    return ag::mean_all(ag::abs_(ag::sub(output, target)));
}

template <class T>
ag::Var<T> loss_perceptual(const ag::Var<T>& output, const ag::Var<T>& target,
                           const Extractor<T>& extractor) {
    std::vector<ag::Var<T>> fo, ft;
    try {
        fo = extractor(output);
        ft = extractor(target);
    } catch (const std::exception& e) {
        throw ContractError(std::string("perceptual extractor failed: ") + e.what());
    }
    if (fo.size() != ft.size() || fo.empty())
        throw ContractError("perceptual extractor returned mismatched feature lists");
    ag::Var<T> total;
    for (size_t k = 0; k < fo.size(); ++k) {
        auto term = ag::mean_all(ag::square(ag::sub(fo[k], ft[k])));
        total = total ? ag::add(total, term) : term;
    }
    return total;
}

// Non-saturating logistic objectives.
template <class T>
ag::Var<T> loss_adversarial_g(const ag::Var<T>& d_logits_fake) {
    return ag::mean_all(ag::softplus(ag::neg(d_logits_fake)));
}

template <class T>
ag::Var<T> loss_adversarial_d(const ag::Var<T>& d_logits_real, const ag::Var<T>& d_logits_fake) {
    return ag::add(ag::mean_all(ag::softplus(ag::neg(d_logits_real))),
                   ag::mean_all(ag::softplus(d_logits_fake)));
}

// 0.5 * mean over the batch of ||d D/d x||^2 on real images; differentiable
// w.r.t. the discriminator parameters (double backward).
template <class T>
ag::Var<T> r1_penalty(const std::function<ag::Var<T>(const ag::Var<T>&)>& disc,
                      const Tensor<T>& real_batch) {
    auto x = ag::leaf(real_batch, true);
    auto logits = disc(x);
    auto g = ag::grad_of(ag::sum_all(logits), std::vector<ag::Var<T>>{x}, true)[0];
    if (!g) return ag::constant(Tensor<T>::scalar(T(0)));
    T inv_b = T(1) / static_cast<T>(real_batch.dim(0));
    return ag::scale(ag::sum_all(ag::square(g)), T(0.5) * inv_b);
}

// ---------------------------------------------------------------------------
// Optimizer: adaptive moment estimation with bias correction.
// ---------------------------------------------------------------------------

template <class T>
class Adam {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(ParamStore<T>& ps, double lr) {
        ++t_;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (auto& [name, p] : ps.map()) {
            if (!p->grad) continue;  // parameter untouched by this loss
            const Tensor<T>& g = p->grad->value;
            auto& m = moment(m_, name, p->value.shape());
            auto& v = moment(v_, name, p->value.shape());
            for (int64_t i = 0; i < g.numel(); ++i) {
                double gi = static_cast<double>(g[i]);
                double mi = beta1 * m[i] + (1.0 - beta1) * gi;
                double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                double upd = (mi / c1) / (std::sqrt(vi / c2) + eps);
                p->value[i] = static_cast<T>(p->value[i] - lr * upd);
            }
        }
    }

    int64_t steps_taken() const { return t_; }

    // Checkpoint plumbing: moments become archive tensors under `prefix`.
    void export_state(std::map<std::string, Tensor<T>>& out, const std::string& prefix) const {
        for (const auto& [n, t] : m_) out.emplace(prefix + ".m." + n, t);
        for (const auto& [n, t] : v_) out.emplace(prefix + ".v." + n, t);
    }
    void import_state(const std::map<std::string, Tensor<T>>& in, const std::string& prefix,
                      int64_t steps) {
        m_.clear();
        v_.clear();
        t_ = steps;
        std::string mp = prefix + ".m.", vp = prefix + ".v.";
        for (const auto& [n, t] : in) {
            if (n.rfind(mp, 0) == 0) m_.emplace(n.substr(mp.size()), t);
            else if (n.rfind(vp, 0) == 0) v_.emplace(n.substr(vp.size()), t);
        }
    }

private:
    Tensor<T>& moment(std::map<std::string, Tensor<T>>& store, const std::string& name,
                      const Shape& shape) {
        auto it = store.find(name);
        if (it == store.end()) it = store.emplace(name, Tensor<T>::zeros(shape)).first;
        return it->second;
    }

    int64_t t_ = 0;
    std::map<std::string, Tensor<T>> m_, v_;
};

// ---------------------------------------------------------------------------
// Training loop state
// ---------------------------------------------------------------------------

struct LossWeights {
    double w_l1 = 1.0, w_perc = 0.8, w_adv = 0.05, r1_gamma = 1.0;
    void validate() const {
        if (w_l1 < 0 || w_perc < 0 || w_adv < 0 || r1_gamma < 0)
            throw ConfigError("loss weights must be nonnegative");
        if (w_l1 == 0 && w_perc == 0 && w_adv == 0)
            throw ConfigError("at least one loss weight must be positive");
    }
};

struct TrainConfig {
    int steps = 600;
    int batch = 4;
    double lr_g = 2e-3;
    double lr_d = 2e-3;
    uint64_t seed = 0;
    int checkpoint_every = 0;  // 0: only at the end
    LossWeights weights;
    bool augmentation = true;
    int r1_interval = 16;

    void validate() const {
        if (steps <= 0 || batch <= 0) throw ConfigError("steps and batch must be positive");
        if (lr_g < 0 || lr_d < 0) throw ConfigError("learning rates must be nonnegative");
        if (r1_interval <= 0) throw ConfigError("r1 interval must be positive");
        weights.validate();
    }
};

struct StepMetrics {
    int64_t step = 0;
    double l1 = 0, perc = 0, adv_g = 0, adv_d = 0, r1 = 0, total = 0;
};

template <class T>
struct Trainer {
    Model<T> model;
    ParamStore<T> disc;
    Adam<T> opt_g, opt_d;
    Rng rng;            // drives batch assembly and augmentation draws
    int64_t step = 0;
    TrainConfig cfg;
    FixedPyramidExtractor<T> perceptual;

    Trainer() : perceptual(77) {}
};

template <class T>
Trainer<T> make_trainer(const ModelConfig& mc, const TrainConfig& tc) {
    tc.validate();
    Trainer<T> tr;
    tr.cfg = tc;
    tr.model = build_model<T>(mc, tc.seed);
    build_params(tr.disc, specs::discriminator_specs(mc.gp), tc.seed + 0xd15c);
    tr.rng = Rng::derive(tc.seed, 0x7ea1u);
    return tr;
}

namespace detail {

template <class T>
double scalar_of(const ag::Var<T>& v) {
    return static_cast<double>(v->value[0]);
}

inline void check_finite(double v, const char* what, int64_t step) {
    if (!std::isfinite(v))
        throw ContractError(std::string("non-finite ") + what + " at step " +
                            std::to_string(step) + " (value " + std::to_string(v) + ")");
}

}  // namespace detail

// One alternating discriminator/generator update on a [B,3,R,R] batch pair.
// The R1 penalty runs lazily every cfg.r1_interval steps, scaled by the
// interval so its effective strength is unchanged.
template <class T>
StepMetrics train_step(Trainer<T>& tr, const Tensor<T>& raw_batch,
                       const Tensor<T>& clean_batch) {
    const auto& w = tr.cfg.weights;
    StepMetrics m;
    m.step = tr.step;

    // --- Discriminator update (generator frozen, no graph kept). ---
    Tensor<T> fake_value;
    {
        ag::NoGradGuard ng;
        fake_value = forward(tr.model, ag::constant(raw_batch), {}, true).output->value;
    }
    auto d_real = disc_forward(tr.model.cfg.gp, tr.disc, ag::constant(clean_batch));
    auto d_fake = disc_forward(tr.model.cfg.gp, tr.disc, ag::constant(fake_value));
    auto d_loss = loss_adversarial_d(d_real, d_fake);
    m.adv_d = detail::scalar_of(d_loss);

    ag::Var<T> d_total = d_loss;
    if (w.r1_gamma > 0 && tr.step % tr.cfg.r1_interval == 0) {
        auto pen = r1_penalty<T>(
            [&](const ag::Var<T>& x) { return disc_forward(tr.model.cfg.gp, tr.disc, x); },
            clean_batch);
        m.r1 = detail::scalar_of(pen);
        d_total = ag::add(d_total,
                          ag::scale(pen, static_cast<T>(w.r1_gamma * tr.cfg.r1_interval)));
    }
    detail::check_finite(m.adv_d, "discriminator loss", tr.step);
    detail::check_finite(m.r1, "r1 penalty", tr.step);
    {
        auto visited = ag::backward(d_total);
        tr.opt_d.step(tr.disc, tr.cfg.lr_d);
        ag::clear_grads(visited);
    }

    // --- Generator update. ---
    auto out = forward(tr.model, ag::constant(raw_batch), {}, true).output;
    auto target = ag::constant(clean_batch);
    auto l1 = loss_l1(out, target);
    Extractor<T> ex = [&](const ag::Var<T>& v) { return tr.perceptual(v); };
    auto perc = loss_perceptual(out, target, ex);
    auto adv_g = loss_adversarial_g(disc_forward(tr.model.cfg.gp, tr.disc, out));
    auto total = ag::add(ag::add(ag::scale(l1, static_cast<T>(w.w_l1)),
                                 ag::scale(perc, static_cast<T>(w.w_perc))),
                         ag::scale(adv_g, static_cast<T>(w.w_adv)));
    m.l1 = detail::scalar_of(l1);
    m.perc = detail::scalar_of(perc);
    m.adv_g = detail::scalar_of(adv_g);
    m.total = detail::scalar_of(total);
    detail::check_finite(m.total, "generator loss", tr.step);
    {
        auto visited = ag::backward(total);
        tr.opt_g.step(tr.model.params, tr.cfg.lr_g);
        ag::clear_grads(visited);
    }

    ++tr.step;
    return m;
}

// Assembles the next [B,3,R,R] batch from dataset entries, applying the
// residual-scaling augmentation with a fresh factor per visit when enabled.
template <class T>
void next_batch(Trainer<T>& tr, const std::string& dir,
                const std::vector<data::ManifestEntry>& entries, size_t& cursor,
                Tensor<T>& raw_out, Tensor<T>& clean_out) {
    if (entries.empty()) throw ArgumentError("empty training split");
    int b = tr.cfg.batch;
    int r = tr.model.cfg.gp.output_resolution();
    raw_out = Tensor<T>({b, 3, r, r});
    clean_out = Tensor<T>({b, 3, r, r});
    int64_t plane = static_cast<int64_t>(3) * r * r;
    for (int k = 0; k < b; ++k) {
        const auto& e = entries[cursor % entries.size()];
        ++cursor;
        auto s = data::load_sample(dir, e);
        if (s.raw.dim(1) != r || s.raw.dim(2) != r)
            throw ContractError("sample " + e.id + " resolution " +
                                std::to_string(s.raw.dim(1)) + " does not match model " +
                                std::to_string(r));
        Tensor<float> input = tr.cfg.augmentation
                                  ? data::augment(s, tr.rng.uniform(0.0, 1.0))
                                  : s.raw;
        for (int64_t i = 0; i < plane; ++i) {
            raw_out[static_cast<int64_t>(k) * plane + i] = static_cast<T>(input[i]);
            clean_out[static_cast<int64_t>(k) * plane + i] = static_cast<T>(s.clean[i]);
        }
    }
}

// ---------------------------------------------------------------------------
// Full-state checkpointing: parameters, optimizer moments, RNG, step counter.
// ---------------------------------------------------------------------------

template <class T>
void save_trainer(const std::string& path, const Trainer<T>& tr) {
    ckpt::Archive<T> a;
    a.tensors = ckpt::params_to_tensors(tr.model.params);
    for (const auto& [n, v] : tr.disc.map()) a.tensors.emplace(n, v->value);
    tr.opt_g.export_state(a.tensors, "opt_g");
    tr.opt_d.export_state(a.tensors, "opt_d");
    a.meta = {{"kind", "trainer"},
              {"model_config", to_json(tr.model.cfg)},
              {"step", tr.step},
              {"opt_g_steps", tr.opt_g.steps_taken()},
              {"opt_d_steps", tr.opt_d.steps_taken()},
              {"rng_state", tr.rng.state()},
              {"rng_inc", tr.rng.inc()},
              {"train_config",
               {{"steps", tr.cfg.steps},
                {"batch", tr.cfg.batch},
                {"lr_g", tr.cfg.lr_g},
                {"lr_d", tr.cfg.lr_d},
                {"seed", tr.cfg.seed},
                {"checkpoint_every", tr.cfg.checkpoint_every},
                {"augmentation", tr.cfg.augmentation},
                {"r1_interval", tr.cfg.r1_interval},
                {"w_l1", tr.cfg.weights.w_l1},
                {"w_perc", tr.cfg.weights.w_perc},
                {"w_adv", tr.cfg.weights.w_adv},
                {"r1_gamma", tr.cfg.weights.r1_gamma}}}};
    ckpt::save_archive(path, a);
}

template <class T>
Trainer<T> load_trainer(const std::string& path) {
    auto a = ckpt::load_archive<T>(path);
    if (a.meta.value("kind", "") != "trainer")
        throw ContractError(path + " is not a trainer checkpoint");
    ModelConfig mc = model_config_from_json(a.meta.at("model_config"));
    const auto& tc = a.meta.at("train_config");
    TrainConfig cfg;
    cfg.steps = tc.at("steps");
    cfg.batch = tc.at("batch");
    cfg.lr_g = tc.at("lr_g");
    cfg.lr_d = tc.at("lr_d");
    cfg.seed = tc.at("seed");
    cfg.checkpoint_every = tc.at("checkpoint_every");
    cfg.augmentation = tc.at("augmentation");
    cfg.r1_interval = tc.at("r1_interval");
    cfg.weights.w_l1 = tc.at("w_l1");
    cfg.weights.w_perc = tc.at("w_perc");
    cfg.weights.w_adv = tc.at("w_adv");
    cfg.weights.r1_gamma = tc.at("r1_gamma");

    Trainer<T> tr = make_trainer<T>(mc, cfg);
    ckpt::tensors_into_params(tr.model.params, a.tensors);
    std::map<std::string, Tensor<T>> disc_only;
    for (auto& [n, t] : a.tensors)
        if (n.rfind("disc.", 0) == 0) disc_only.emplace(n, t);
    ckpt::tensors_into_params(tr.disc, disc_only);
    tr.opt_g.import_state(a.tensors, "opt_g", a.meta.at("opt_g_steps"));
    tr.opt_d.import_state(a.tensors, "opt_d", a.meta.at("opt_d_steps"));
    tr.step = a.meta.at("step");
    tr.rng.restore(a.meta.at("rng_state"), a.meta.at("rng_inc"));
    return tr;
}

}  // namespace rt::train
