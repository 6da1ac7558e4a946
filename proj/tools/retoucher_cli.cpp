// Single entry-point tool for the portrait retouching pipeline: dataset
// synthesis, augmentation preview, training, retouching, evaluation,
// ablations, mask dumps, and strength sweeps.
//
// Exit codes: 0 success, 2 configuration/usage error, 1 runtime failure.
// Every subcommand logs its fully resolved configuration and seed so a run
// can be reproduced from the log alone.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rt/image.hpp"
#include "rt/metrics.hpp"
#include "rt/run_config.hpp"
#include "rt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Checkpoint paths may live under a shared cache directory; a relative path
// is resolved against $RT_CHECKPOINT_DIR when that is set.
std::string resolve_checkpoint(const std::string& path) {
    if (path.empty()) return path;
    if (fs::path(path).is_absolute()) return path;
    const char* base = std::getenv("RT_CHECKPOINT_DIR");
    if (!base || !*base) return path;
    return (fs::path(base) / path).string();
}

struct CommonOpts {
    std::string config_file;
    std::optional<uint64_t> seed;
    std::string dataset;
    std::string checkpoint;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_file, "JSON run configuration file");
    cmd->add_option("--seed", o.seed, "Override the top-level seed");
    cmd->add_option("--dataset", o.dataset, "Dataset directory (overrides paths.dataset)");
    cmd->add_option("--checkpoint", o.checkpoint,
                    "Checkpoint path (overrides paths.checkpoint; relative paths resolve "
                    "under $RT_CHECKPOINT_DIR)");
    cmd->add_option("--out-dir", o.out_dir, "Output directory (overrides paths.out_dir)");
}

// Loads the config file (or defaults) and applies flag overrides; flags win.
rt::RunConfig resolve_config(const CommonOpts& o) {
    rt::RunConfig cfg;
    if (!o.config_file.empty()) cfg = rt::RunConfig::load(o.config_file);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.training.seed = *o.seed;
        cfg.blemish.seed = *o.seed;
    }
    if (!o.dataset.empty()) cfg.dataset_dir = o.dataset;
    if (!o.checkpoint.empty()) cfg.checkpoint_path = o.checkpoint;
    if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
    cfg.validate();
    return cfg;
}

void log_resolved(const std::string& subcommand, const rt::RunConfig& cfg) {
    json j = {{"event", "resolved_config"}, {"subcommand", subcommand},
              {"seed", cfg.seed}, {"config", cfg.to_json()}};
    std::cerr << j.dump() << "\n";
}

void check_strength(double s) {
    if (s < 0.0 || s > 4.0)
        throw rt::ConfigError("strength must be in [0,4], got " + std::to_string(s));
}

// [C,H,W] image in, retouched [C,H,W] out, no gradients.
rt::Tensor<float> run_single(const rt::Model<float>& model, const rt::Tensor<float>& chw,
                             double strength) {
    int r = model.cfg.gp.output_resolution();
    if (chw.dim(0) != 3 || chw.dim(1) != r || chw.dim(2) != r)
        throw rt::ContractError("input image must be 3x" + std::to_string(r) + "x" +
                                std::to_string(r) + ", got " + rt::shape_str(chw.shape()));
    rt::ag::NoGradGuard ng;
    rt::StrengthSpec sp;
    sp.s = strength;
    auto res = rt::retouch(model, rt::ag::constant(chw.reshaped({1, 3, r, r})), sp);
    return res.output->value.reshaped({3, r, r});
}

rt::Model<float> model_for_inference(const rt::RunConfig& cfg) {
    if (!cfg.checkpoint_path.empty()) {
        auto tr = rt::train::load_trainer<float>(resolve_checkpoint(cfg.checkpoint_path));
        return std::move(tr.model);
    }
    // No checkpoint: a freshly seeded (untrained) model, useful for smoke runs.
    return rt::build_model<float>(cfg.model, cfg.seed);
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw rt::ConfigError("bad numeric value '" + tok + "' in list '" + csv + "'");
        }
    }
    if (out.empty()) throw rt::ConfigError("empty value list");
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_synth_data(const CommonOpts& common, int count, int resolution, double train_fraction) {
    auto cfg = resolve_config(common);
    log_resolved("synth-data", cfg);
    if (cfg.dataset_dir.empty())
        throw rt::ConfigError("synth-data needs a dataset directory (--dataset or paths.dataset)");
    if (resolution == 0) resolution = cfg.resolution();
    rt::data::dataset_build(count, cfg.blemish, cfg.seed, cfg.dataset_dir, resolution,
                            train_fraction);
    std::cerr << json{{"event", "dataset_built"}, {"dir", cfg.dataset_dir},
                      {"count", count}, {"resolution", resolution}}.dump()
              << "\n";
    return 0;
}

int cmd_augment(const CommonOpts& common, const std::string& id, double lambda,
                const std::string& out_png) {
    auto cfg = resolve_config(common);
    log_resolved("augment", cfg);
    if (cfg.dataset_dir.empty())
        throw rt::ConfigError("augment needs a dataset directory (--dataset or paths.dataset)");
    auto entries = rt::data::manifest_read(cfg.dataset_dir);
    for (const auto& e : entries) {
        if (e.id != id) continue;
        auto s = rt::data::load_sample(cfg.dataset_dir, e);
        rt::img::write_png(out_png, rt::img::to_u8(rt::data::augment(s, lambda)));
        std::cerr << json{{"event", "augment_preview"}, {"id", id},
                          {"lambda", lambda}, {"out", out_png}}.dump()
                  << "\n";
        return 0;
    }
    throw rt::ConfigError("sample id '" + id + "' not found in " + cfg.dataset_dir);
}

int cmd_train(const CommonOpts& common, const std::string& resume, const std::string& log_file,
              std::optional<int> steps_override) {
    auto cfg = resolve_config(common);
    if (steps_override) cfg.training.steps = *steps_override;
    cfg.training.validate();
    log_resolved("train", cfg);
    if (cfg.dataset_dir.empty())
        throw rt::ConfigError("train needs a dataset directory (--dataset or paths.dataset)");
    if (cfg.checkpoint_path.empty())
        throw rt::ConfigError("train needs a checkpoint path (--checkpoint or paths.checkpoint)");

    rt::train::Trainer<float> tr =
        resume.empty() ? rt::train::make_trainer<float>(cfg.model, cfg.training)
                       : rt::train::load_trainer<float>(resolve_checkpoint(resume));
    if (!resume.empty()) {
        // Optimizer state, RNG, and step counter come from the checkpoint; the
        // schedule knobs of the resolved config win so a run can be extended
        // or cooled down.
        tr.cfg.steps = cfg.training.steps;
        tr.cfg.lr_g = cfg.training.lr_g;
        tr.cfg.lr_d = cfg.training.lr_d;
        tr.cfg.batch = cfg.training.batch;
        tr.cfg.weights = cfg.training.weights;
        tr.cfg.checkpoint_every = cfg.training.checkpoint_every;
    }

    auto entries =
        rt::data::dataset_iterate(cfg.dataset_dir, "train", cfg.training.seed);
    size_t cursor = static_cast<size_t>(tr.step) * static_cast<size_t>(tr.cfg.batch);

    fs::create_directories(cfg.out_dir);
    std::string log_path =
        log_file.empty() ? (fs::path(cfg.out_dir) / "train_log.jsonl").string() : log_file;
    std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw rt::IoError("cannot open training log " + log_path);

    std::string ckpt = resolve_checkpoint(cfg.checkpoint_path);
    if (fs::path(ckpt).has_parent_path()) fs::create_directories(fs::path(ckpt).parent_path());

    rt::Tensor<float> raw, clean;
    while (tr.step < tr.cfg.steps) {
        rt::train::next_batch(tr, cfg.dataset_dir, entries, cursor, raw, clean);
        auto m = rt::train::train_step(tr, raw, clean);
        log << json{{"step", m.step}, {"l1", m.l1}, {"perc", m.perc}, {"adv_g", m.adv_g},
                    {"adv_d", m.adv_d}, {"r1", m.r1}, {"total", m.total}}.dump()
            << "\n";
        if (tr.cfg.checkpoint_every > 0 && tr.step % tr.cfg.checkpoint_every == 0)
            rt::train::save_trainer(ckpt, tr);
    }
    log.flush();
    rt::train::save_trainer(ckpt, tr);
    std::cerr << json{{"event", "training_done"}, {"steps", tr.step},
                      {"checkpoint", ckpt}, {"log", log_path}}.dump()
              << "\n";
    return 0;
}

int cmd_retouch(const CommonOpts& common, const std::string& in_png, const std::string& out_png,
                double strength) {
    check_strength(strength);
    auto cfg = resolve_config(common);
    log_resolved("retouch", cfg);
    if (!out_png.empty() && fs::exists(in_png) && fs::exists(out_png) &&
        fs::equivalent(in_png, out_png))
        throw rt::ConfigError("refusing to overwrite the input file; pick a different --out");
    auto model = model_for_inference(cfg);
    auto im = rt::img::read_png(in_png);
    auto out = run_single(model, rt::img::to_model(im), strength);
    rt::img::write_png(out_png, rt::img::to_u8(out));
    std::cerr << json{{"event", "retouched"}, {"in", in_png}, {"out", out_png},
                      {"strength", strength}}.dump()
              << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& split,
                 const std::string& report_base, double strength) {
    check_strength(strength);
    auto cfg = resolve_config(common);
    log_resolved("evaluate", cfg);
    if (cfg.dataset_dir.empty())
        throw rt::ConfigError("evaluate needs a dataset directory (--dataset or paths.dataset)");
    auto model = model_for_inference(cfg);
    auto pyr = std::make_shared<rt::train::FixedPyramidExtractor<float>>();
    std::string base = report_base.empty()
                           ? (fs::path(cfg.out_dir) / "eval_report").string()
                           : report_base;
    fs::create_directories(fs::path(base).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(base).parent_path());
    auto rep = rt::metrics::evaluate_dataset(
        [&](const rt::Tensor<float>& raw) { return run_single(model, raw, strength); },
        cfg.dataset_dir, split, rt::train::as_feature_fn(pyr), base, cfg.to_json());
    auto mp = rep.aggregate(rep.model_rows, &rt::metrics::SampleMetrics::psnr_db);
    auto bp = rep.aggregate(rep.baseline_rows, &rt::metrics::SampleMetrics::psnr_db);
    auto mc = rep.aggregate(rep.model_rows, &rt::metrics::SampleMetrics::changed_ratio);
    std::cout << json{{"event", "evaluated"}, {"split", split},
                      {"model_psnr_mean", mp.mean}, {"baseline_psnr_mean", bp.mean},
                      {"changed_ratio_mean", mc.mean}, {"report", base + ".{json,csv}"}}.dump()
              << "\n";
    return 0;
}

int cmd_ablate(const CommonOpts& common, const std::string& modes_csv,
               const std::string& seeds_csv, const std::string& out_csv,
               std::optional<int> steps_override) {
    auto cfg = resolve_config(common);
    if (steps_override) cfg.training.steps = *steps_override;
    cfg.training.validate();
    log_resolved("ablate", cfg);
    if (cfg.dataset_dir.empty())
        throw rt::ConfigError("ablate needs a dataset directory (--dataset or paths.dataset)");

    std::vector<rt::BlendMode> modes;
    {
        std::stringstream ss(modes_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                modes.push_back(rt::blend_mode_from(tok));
            } catch (const rt::ArgumentError& e) {
                throw rt::ConfigError(std::string("ablate: ") + e.what());
            }
        }
    }
    if (modes.empty()) throw rt::ConfigError("ablate: empty --modes list");
    std::vector<uint64_t> seeds;
    for (double v : parse_values(seeds_csv)) seeds.push_back(static_cast<uint64_t>(v));

    auto pyr = std::make_shared<rt::train::FixedPyramidExtractor<float>>();
    fs::create_directories(cfg.out_dir);
    std::string csv_path =
        out_csv.empty() ? (fs::path(cfg.out_dir) / "ablation.csv").string() : out_csv;
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw rt::IoError("cannot open " + csv_path);
    csv << "mode,seed,psnr_db,ssim,perc_dist,changed_ratio\n";
    csv.precision(10);

    struct Acc { double psnr = 0, ssim = 0, perc = 0, changed = 0; int n = 0; };
    std::map<std::string, Acc> by_mode;

    for (auto mode : modes) {
        for (uint64_t seed : seeds) {
            rt::RunConfig run = cfg;
            run.model.blend_mode = mode;
            run.training.seed = seed;
            auto tr = rt::train::make_trainer<float>(run.model, run.training);
            auto entries = rt::data::dataset_iterate(run.dataset_dir, "train", seed);
            size_t cursor = 0;
            rt::Tensor<float> raw, clean;
            while (tr.step < tr.cfg.steps) {
                rt::train::next_batch(tr, run.dataset_dir, entries, cursor, raw, clean);
                rt::train::train_step(tr, raw, clean);
            }
            auto rep = rt::metrics::evaluate_dataset(
                [&](const rt::Tensor<float>& r) { return run_single(tr.model, r, 1.0); },
                run.dataset_dir, "test", rt::train::as_feature_fn(pyr), "", run.to_json());
            auto g = [&](double rt::metrics::SampleMetrics::*f) {
                return rep.aggregate(rep.model_rows, f).mean;
            };
            double psnr = g(&rt::metrics::SampleMetrics::psnr_db);
            double ssim = g(&rt::metrics::SampleMetrics::ssim);
            double perc = g(&rt::metrics::SampleMetrics::perc_dist);
            double changed = g(&rt::metrics::SampleMetrics::changed_ratio);
            std::string name = rt::blend_mode_name(mode);
            csv << name << ',' << seed << ',' << psnr << ',' << ssim << ',' << perc << ','
                << changed << '\n';
            csv.flush();
            auto& a = by_mode[name];
            a.psnr += psnr; a.ssim += ssim; a.perc += perc; a.changed += changed; ++a.n;
            std::cerr << json{{"event", "ablation_run"}, {"mode", name}, {"seed", seed},
                              {"psnr_db", psnr}, {"ssim", ssim}}.dump()
                      << "\n";
        }
    }
    for (const auto& [name, a] : by_mode)
        csv << name << ",mean," << a.psnr / a.n << ',' << a.ssim / a.n << ',' << a.perc / a.n
            << ',' << a.changed / a.n << '\n';
    std::cout << json{{"event", "ablation_done"}, {"csv", csv_path}}.dump() << "\n";
    return 0;
}

int cmd_masks(const CommonOpts& common, const std::string& in_png, double strength) {
    check_strength(strength);
    auto cfg = resolve_config(common);
    log_resolved("masks", cfg);
    auto model = model_for_inference(cfg);
    int r = model.cfg.gp.output_resolution();
    auto chw = rt::img::to_model(rt::img::read_png(in_png));
    if (chw.dim(0) != 3 || chw.dim(1) != r || chw.dim(2) != r)
        throw rt::ContractError("input image must be 3x" + std::to_string(r) + "x" +
                                std::to_string(r) + ", got " + rt::shape_str(chw.shape()));
    rt::ag::NoGradGuard ng;
    rt::StrengthSpec sp;
    sp.s = strength;
    auto res = rt::forward(model, rt::ag::constant(chw.reshaped({1, 3, r, r})), sp);
    fs::create_directories(cfg.out_dir);

    json chan = json::object();
    for (const auto& [level, m] : res.diagnostics.channel_masks) {
        const auto& t = m->value;  // [1,C,1,1]
        std::vector<double> vals;
        for (int64_t i = 0; i < t.numel(); ++i) vals.push_back(t[i]);
        chan[std::to_string(level)] = vals;
    }
    std::ofstream cj(fs::path(cfg.out_dir) / "channel_masks.json", std::ios::trunc);
    cj << chan.dump(1) << "\n";

    int written = 0;
    for (const auto& [level, m] : res.diagnostics.spatial_masks) {
        const auto& t = m->value;  // [1,1,H,W], values already in (0,1)
        int h = t.dim(2), w = t.dim(3);
        rt::img::ImageU8 im;
        im.width = w;
        im.height = h;
        im.channels = 1;
        im.pixels.resize(static_cast<size_t>(h) * w);
        for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i)
            im.pixels[static_cast<size_t>(i)] = static_cast<uint8_t>(
                std::lround(std::min(1.0f, std::max(0.0f, t[i])) * 255.0f));
        std::string path =
            (fs::path(cfg.out_dir) / ("mask_l" + std::to_string(level) + ".png")).string();
        rt::img::write_png(path, im);
        ++written;
    }
    std::cout << json{{"event", "masks_written"}, {"out_dir", cfg.out_dir},
                      {"spatial_levels", written}}.dump()
              << "\n";
    return 0;
}

int cmd_strength_sweep(const CommonOpts& common, const std::string& in_png,
                       const std::string& values_csv) {
    auto values = parse_values(values_csv);
    for (double v : values) check_strength(v);
    auto cfg = resolve_config(common);
    log_resolved("strength-sweep", cfg);
    auto model = model_for_inference(cfg);
    auto chw = rt::img::to_model(rt::img::read_png(in_png));
    fs::create_directories(cfg.out_dir);
    json outs = json::array();
    for (double v : values) {
        auto out = run_single(model, chw, v);
        std::ostringstream name;
        name << "strength_" << v << ".png";
        std::string path = (fs::path(cfg.out_dir) / name.str()).string();
        rt::img::write_png(path, rt::img::to_u8(out));
        outs.push_back({{"strength", v}, {"path", path}});
    }
    std::cout << json{{"event", "strength_sweep_done"}, {"outputs", outs}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Portrait blemish retouching: synthesis-prior model toolkit"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* sd = app.add_subcommand("synth-data", "Build a synthetic paired dataset");
    add_common(sd, common);
    int sd_count = 200, sd_resolution = 0;
    double sd_frac = 0.9;
    sd->add_option("--count", sd_count, "Number of pairs")->check(CLI::PositiveNumber);
    sd->add_option("--resolution", sd_resolution, "Image side (default: model resolution)");
    sd->add_option("--train-fraction", sd_frac, "Train split fraction");

    auto* au = app.add_subcommand("augment", "Write an augmentation preview for one sample");
    add_common(au, common);
    std::string au_id, au_out;
    double au_lambda = 0.5;
    au->add_option("--id", au_id, "Sample id")->required();
    au->add_option("--lambda", au_lambda, "Blend factor in [0,1]");
    au->add_option("--out", au_out, "Output PNG")->required();

    auto* tn = app.add_subcommand("train", "Train the retoucher");
    add_common(tn, common);
    std::string tn_resume, tn_log;
    std::optional<int> tn_steps;
    tn->add_option("--resume", tn_resume, "Resume from this trainer checkpoint");
    tn->add_option("--log", tn_log, "JSON-lines metrics log path");
    tn->add_option("--steps", tn_steps, "Override train.steps");

    auto* rt_ = app.add_subcommand("retouch", "Retouch one image");
    add_common(rt_, common);
    std::string rt_in, rt_out;
    double rt_strength = 1.0;
    rt_->add_option("--in", rt_in, "Input PNG")->required();
    rt_->add_option("--out", rt_out, "Output PNG")->required();
    rt_->add_option("--strength", rt_strength, "Retouching strength in [0,4]");

    auto* ev = app.add_subcommand("evaluate", "Evaluate on a dataset split");
    add_common(ev, common);
    std::string ev_split = "test", ev_report;
    double ev_strength = 1.0;
    ev->add_option("--split", ev_split, "Dataset split");
    ev->add_option("--report", ev_report, "Report base path (writes .json and .csv)");
    ev->add_option("--strength", ev_strength, "Retouching strength in [0,4]");

    auto* ab = app.add_subcommand("ablate", "Train and evaluate blending variants");
    add_common(ab, common);
    std::string ab_modes = "concat,spatial,channel,sc", ab_seeds = "0,1,2", ab_out;
    std::optional<int> ab_steps;
    ab->add_option("--modes", ab_modes, "Comma-separated blend modes");
    ab->add_option("--seeds", ab_seeds, "Comma-separated training seeds");
    ab->add_option("--out", ab_out, "Results CSV path");
    ab->add_option("--steps", ab_steps, "Override train.steps per run");

    auto* mk = app.add_subcommand("masks", "Dump per-level blemish masks for one image");
    add_common(mk, common);
    std::string mk_in;
    double mk_strength = 1.0;
    mk->add_option("--in", mk_in, "Input PNG")->required();
    mk->add_option("--strength", mk_strength, "Retouching strength in [0,4]");

    auto* sw = app.add_subcommand("strength-sweep", "Retouch one image at several strengths");
    add_common(sw, common);
    std::string sw_in, sw_values = "0.5,1,2";
    sw->add_option("--in", sw_in, "Input PNG")->required();
    sw->add_option("--values", sw_values, "Comma-separated strengths in [0,4]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sd->parsed()) return cmd_synth_data(common, sd_count, sd_resolution, sd_frac);
        if (au->parsed()) return cmd_augment(common, au_id, au_lambda, au_out);
        if (tn->parsed()) return cmd_train(common, tn_resume, tn_log, tn_steps);
        if (rt_->parsed()) return cmd_retouch(common, rt_in, rt_out, rt_strength);
        if (ev->parsed()) return cmd_evaluate(common, ev_split, ev_report, ev_strength);
        if (ab->parsed()) return cmd_ablate(common, ab_modes, ab_seeds, ab_out, ab_steps);
        if (mk->parsed()) return cmd_masks(common, mk_in, mk_strength);
        if (sw->parsed()) return cmd_strength_sweep(common, sw_in, sw_values);
    } catch (const rt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rt::ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;  // unreachable with require_subcommand(1)
}
