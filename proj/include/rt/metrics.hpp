#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rt/errors.hpp"
#include "rt/tensor.hpp"

namespace rt::metrics {

// All metrics take single images as [C,H,W] tensors in the model range
// [-1,1]; internally they are mapped to [0,1], the conventional metric scale.

// 10*log10(1/mse), capped at 100 dB when mse < 1e-10.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

// Mean local structural similarity on the luma plane (0.299/0.587/0.114),
// Gaussian window (base size 11, sigma 1.5, shrunk to fit small images),
// K1=0.01, K2=0.03, range 1. Only fully valid windows contribute.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

// Fraction of pixels whose max-channel absolute change exceeds tau
// (in [0,1] units).
double changed_pixel_ratio(const Tensor<float>& input, const Tensor<float>& output,
                           double tau = 1.0 / 255.0);

// Sum over pyramid levels of mean squared feature differences; symmetric and
// zero iff the features agree. The extractor maps a [1,C,H,W] batch to a
// feature list, same interface as in training.
using FeatureFn = std::function<std::vector<Tensor<float>>(const Tensor<float>&)>;
double perceptual_distance(const Tensor<float>& a, const Tensor<float>& b,
                           const FeatureFn& extractor);

struct SampleMetrics {
    std::string id;
    double psnr_db = 0, ssim = 0, perc_dist = 0, changed_ratio = 0;
};

struct Aggregate {
    double mean = 0, stddev = 0;
};

struct MetricReport {
    std::vector<SampleMetrics> model_rows;     // retouched output vs clean
    std::vector<SampleMetrics> baseline_rows;  // raw input vs clean
    nlohmann::json config_fingerprint;

    Aggregate aggregate(const std::vector<SampleMetrics>& rows,
                        double SampleMetrics::*field) const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// Runs the model over one split and reports model and baseline rows side by
// side. When report_base is nonempty, writes report_base + ".json"/".csv".
// An empty split is an error, never an empty report.
MetricReport evaluate_dataset(
    const std::function<Tensor<float>(const Tensor<float>&)>& run_model,
    const std::string& dataset_dir, const std::string& split, const FeatureFn& extractor,
    const std::string& report_base, const nlohmann::json& config_fingerprint);

}  // namespace rt::metrics
