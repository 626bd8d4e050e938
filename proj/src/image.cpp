#include "bitexpand/image.hpp"

#include <algorithm>
#include <string>

#include "bitexpand/errors.hpp"

namespace bitexpand {

void validate(const ImageBuffer& img) {
    if (img.bit_depth < 1 || img.bit_depth > 16) {
        throw ArgumentError("image bit-depth " + std::to_string(img.bit_depth) + " outside [1, 16]");
    }
    if (img.channels != 1 && img.channels != 3) {
        throw ArgumentError("image must have 1 or 3 channels, got " + std::to_string(img.channels));
    }
    if (img.pixels.size() != img.width * img.height * img.channels) {
        throw ArgumentError("image pixel count does not match its geometry");
    }
    const std::uint32_t limit = img.max_value();
    for (auto p : img.pixels) {
        if (p > limit) {
            throw DomainError("pixel value " + std::to_string(p) + " exceeds " + std::to_string(img.bit_depth) +
                              "-bit range");
        }
    }
}

ImageBuffer hflip(const ImageBuffer& img) {
    ImageBuffer out = img;
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < img.channels; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
        }
    }
    return out;
}

}  // namespace bitexpand
