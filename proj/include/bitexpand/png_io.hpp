#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bitexpand/image.hpp"

namespace bitexpand {

struct PngReadResult {
    ImageBuffer image;
    std::vector<std::string> warnings;
};

/// Reads an 8- or 16-bit grayscale or RGB PNG. Alpha is dropped with a
/// warning. Throws LoadError on unreadable or unsupported files.
PngReadResult read_png(const std::filesystem::path& path);

/// Writes the image stored at `storage_bits` (8 or 16). Values are written
/// as-is, so a q-bit image stored in an 8-bit container keeps its q-bit codes.
void write_png(const std::filesystem::path& path, const ImageBuffer& img, int storage_bits);

/// Container depth chosen for a given content bit-depth: 8 if it fits, else 16.
int storage_bits_for(int bit_depth);

}  // namespace bitexpand
