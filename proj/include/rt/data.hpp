#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rt/errors.hpp"
#include "rt/image.hpp"
#include "rt/rng.hpp"
#include "rt/tensor.hpp"

namespace rt::data {

// One training pair in model range [-1,1], channel-first. The mask (when
// present) is a [1,H,W] 0/1 raster covering exactly the pixels where raw and
// clean differ by more than 1/255; pixels outside it are bit-identical.
struct PairedSample {
    Tensor<float> raw;    // blemished input
    Tensor<float> clean;  // retouched target
    std::optional<Tensor<float>> blemish_mask;
    std::string id;
};

// Residual-scaling augmentation: (1-lambda)*clean + lambda*raw. Exact at the
// endpoints; lambda outside [0,1] is an argument error.
Tensor<float> augment(const PairedSample& s, double lambda);

// Procedural blemish recipe. Radii are fractions of the image side.
struct BlemishSpec {
    int spot_count_min = 1, spot_count_max = 4;
    double spot_radius_min = 0.02, spot_radius_max = 0.06;
    double spot_strength_min = 0.35, spot_strength_max = 0.85;
    int scratch_count_min = 0, scratch_count_max = 2;
    double scratch_length_min = 0.1, scratch_length_max = 0.3;
    int reflection_count_min = 0, reflection_count_max = 1;
    double reflection_radius_min = 0.05, reflection_radius_max = 0.12;
    bool allow_overlap = true;  // off: spots are kept disjoint with a margin
    uint64_t seed = 0;

    void validate() const;  // non-degenerate ranges, nonnegative counts
};

// Deterministic paired sample: a smooth skin-like base with fine texture and
// persistent details, plus composited blemishes on the raw side. Both images
// are quantized to the 8-bit grid so the stored PNGs reproduce them exactly.
PairedSample synth_pair(uint64_t sample_seed, const BlemishSpec& spec, int resolution);

struct ManifestEntry {
    std::string id;
    std::string raw_path;    // relative to the dataset directory
    std::string clean_path;
    std::string mask_path;   // empty when absent
    std::string split;       // "train" or "test"
};

// Writes n synthetic pairs as PNGs plus manifest.json; deterministic given
// (n, spec, seed). Roughly train_fraction of ids go to the train split.
void dataset_build(int n, const BlemishSpec& spec, uint64_t seed, const std::string& out_dir,
                   int resolution, double train_fraction = 0.9);

std::vector<ManifestEntry> manifest_read(const std::string& dir);

// Entries of one split in a deterministic shuffled order.
std::vector<ManifestEntry> dataset_iterate(const std::string& dir, const std::string& split,
                                           uint64_t shuffle_seed);

PairedSample load_sample(const std::string& dir, const ManifestEntry& e);

}  // namespace rt::data
