#include "rt/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace rt::img {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// Quiet handlers: errors unwind via longjmp, warnings are ignored, and
// nothing is printed to stderr.
void on_png_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

ImageU8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open PNG " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit gray or RGB.
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = static_cast<int>(png_get_channels(png, info));
    ImageU8 im;
    im.width = static_cast<int>(w);
    im.height = static_cast<int>(h);
    im.channels = channels;
    im.pixels.resize(static_cast<size_t>(w) * h * channels);

    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = im.pixels.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (im.channels != 1 && im.channels != 3)
        throw IoError(path + ": unsupported channel count " + std::to_string(im.channels));
    return im;
}

void write_png(const std::string& path, const ImageU8& im) {
    if (im.channels != 1 && im.channels != 3)
        throw ArgumentError("write_png supports 1 or 3 channels, got " +
                            std::to_string(im.channels));
    if (im.width <= 0 || im.height <= 0 ||
        im.pixels.size() != static_cast<size_t>(im.width) * im.height * im.channels)
        throw ArgumentError("write_png: raster size disagrees with dimensions");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write PNG " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(im.width),
                 static_cast<png_uint_32>(im.height), 8,
                 im.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = const_cast<png_bytep>(im.pixels.data() +
                                        static_cast<size_t>(y) * im.width * im.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor<float> to_model(const ImageU8& im) {
    Tensor<float> t({im.channels, im.height, im.width});
    for (int c = 0; c < im.channels; ++c)
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                t[(static_cast<int64_t>(c) * im.height + y) * im.width + x] =
                    static_cast<float>(im.at(y, x, c)) / 255.0f * 2.0f - 1.0f;
    return t;
}

ImageU8 to_u8(const Tensor<float>& chw) {
    if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3))
        throw ArgumentError("to_u8 expects a [1|3,H,W] tensor, got " + shape_str(chw.shape()));
    ImageU8 im;
    im.channels = chw.dim(0);
    im.height = chw.dim(1);
    im.width = chw.dim(2);
    im.pixels.resize(static_cast<size_t>(im.width) * im.height * im.channels);
    for (int c = 0; c < im.channels; ++c)
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) {
                float v = chw[(static_cast<int64_t>(c) * im.height + y) * im.width + x];
                v = std::min(1.0f, std::max(-1.0f, v));
                im.at(y, x, c) = static_cast<uint8_t>(std::lround((v + 1.0f) * 0.5f * 255.0f));
            }
    return im;
}

}  // namespace rt::img
