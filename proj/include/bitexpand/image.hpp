#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace bitexpand {

/// Integer raster with an explicit bit-depth. Pixels are row-major with
/// channels interleaved; every value is below 2^bit_depth.
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> pixels;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h, std::size_t c, int bits, std::uint16_t fill = 0)
        : width(w), height(h), channels(c), bit_depth(bits), pixels(w * h * c, fill) {}

    std::uint16_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    std::uint16_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }

    std::uint32_t max_value() const { return (1u << bit_depth) - 1u; }
    bool same_geometry(const ImageBuffer& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

struct NamedImage {
    std::string name;
    ImageBuffer image;
};

/// Throws ArgumentError on a bad header and DomainError if any pixel exceeds the range.
void validate(const ImageBuffer& img);

ImageBuffer hflip(const ImageBuffer& img);

}  // namespace bitexpand
