#include "bitexpand/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "bitexpand/errors.hpp"

namespace bitexpand {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void on_png_error(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg;
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

int storage_bits_for(int bit_depth) { return bit_depth <= 8 ? 8 : 16; }

PngReadResult read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw LoadError("cannot open " + path.string());
    unsigned char sig[8] = {};
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw LoadError(path.string() + ": not a PNG file");
    }
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError(path.string() + ": libpng initialisation failed");
    }
    PngReadResult result;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError(path.string() + ": corrupt PNG (" + error + ")");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
        depth = 8;
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
        result.warnings.push_back(path.string() + ": alpha channel stripped");
    }
    if (depth == 16) png_set_swap(png);  // little-endian host order for uint16 rows
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError(path.string() + ": unsupported channel count " + std::to_string(channels));
    }
    if (depth != 8 && depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError(path.string() + ": unsupported bit-depth " + std::to_string(depth));
    }
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageBuffer img(width, height, static_cast<std::size_t>(channels), depth);
    const std::size_t count = img.pixels.size();
    if (depth == 8) {
        for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i];
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            img.pixels[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
        }
    }
    result.image = std::move(img);
    return result;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& img, int storage_bits) {
    validate(img);
    if (storage_bits != 8 && storage_bits != 16) throw ArgumentError("PNG storage depth must be 8 or 16");
    if (img.bit_depth > storage_bits) throw ArgumentError("image bit-depth exceeds PNG storage depth");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    const std::size_t row_values = img.width * img.channels;
    std::vector<unsigned char> raw(row_values * img.height * (storage_bits / 8));
    if (storage_bits == 8) {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) raw[i] = static_cast<unsigned char>(img.pixels[i]);
    } else {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            raw[2 * i] = static_cast<unsigned char>(img.pixels[i] >> 8);  // PNG is big-endian
            raw[2 * i + 1] = static_cast<unsigned char>(img.pixels[i] & 0xff);
        }
    }
    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = raw.data() + y * row_values * (storage_bits / 8);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed writing " + path.string() + ": " + error);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), storage_bits,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace bitexpand
