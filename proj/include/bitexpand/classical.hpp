#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bitexpand/image.hpp"

namespace bitexpand {

/// Source bit-depth q and target bit-depth H with 1 <= q < H <= 16.
struct BitDepthSpec {
    int q = 8;
    int H = 16;

    void check() const;
};

enum class ClassicalMethod { ZeroPad, IdealGain, BitReplicate };

/// Per-value expansion table of size 2^q.
std::vector<std::uint16_t> expansion_table(ClassicalMethod method, BitDepthSpec spec);

std::uint16_t zero_pad_value(std::uint32_t v, BitDepthSpec spec);
std::uint16_t mig_value(std::uint32_t v, BitDepthSpec spec);
std::uint16_t bit_replicate_value(std::uint32_t v, BitDepthSpec spec);

/// Left shift by H - q.
ImageBuffer zero_pad(const ImageBuffer& x, BitDepthSpec spec);
/// round(v * (2^H - 1) / (2^q - 1)), halves rounded up.
ImageBuffer mig(const ImageBuffer& x, BitDepthSpec spec);
/// Source bits repeated MSB-first until H bits are filled.
ImageBuffer bit_replicate(const ImageBuffer& x, BitDepthSpec spec);

ImageBuffer expand(ClassicalMethod method, const ImageBuffer& x, BitDepthSpec spec);

ClassicalMethod parse_classical(const std::string& name);
std::string to_string(ClassicalMethod m);

}  // namespace bitexpand
