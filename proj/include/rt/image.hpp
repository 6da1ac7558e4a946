#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rt/errors.hpp"
#include "rt/tensor.hpp"

namespace rt::img {

// 8-bit interleaved raster, row-major. channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;

    uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& im);

// [C,H,W] float tensor in the model range [-1,1] <-> 8-bit raster.
// to_u8 clamps, maps to [0,255], and rounds to nearest.
Tensor<float> to_model(const ImageU8& im);
ImageU8 to_u8(const Tensor<float>& chw);

}  // namespace rt::img
