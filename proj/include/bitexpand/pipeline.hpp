#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bitexpand/image.hpp"
#include "bitexpand/rng.hpp"
#include "bitexpand/tensor.hpp"

namespace bitexpand {

/// Keeps the top q bits: x >> (b - q).
ImageBuffer quantize(const ImageBuffer& x, int q);

/// (1, c, h, w) tensor of pixel / (2^b - 1).
Tensor to_tensor(const ImageBuffer& img);
/// Clamps to [0, 1] and rounds v * (2^bits - 1) to the nearest integer, halves up.
ImageBuffer from_tensor(const Tensor& t, int bits);

/// Bit-info plane value for a q-bit source: the normalised quantisation step.
inline float bit_info_value(int q) { return 1.0f / static_cast<float>((1u << q) - 1u); }

struct SamplePair {
    Tensor input;   // zero-padded LBD in [0, 1] plus the bit-info plane
    Tensor target;  // HBD in [0, 1]
    int q = 0;
};

/// Builds one training pair. An HBD image deeper than target_bits is first
/// truncated to target_bits.
SamplePair make_pair(const ImageBuffer& hbd, int q, int target_bits, bool with_bit_info = true);

struct AugmentConfig {
    double hflip_prob = 0.5;
    double scale_min = 0.5;
    double scale_max = 1.0;
    int q_min = 3;
    int q_max = 6;
    std::size_t patch_size = 128;  // 0 keeps the whole image
    std::uint64_t seed = 10000;

    void validate() const;
};

struct Augmented {
    ImageBuffer image;
    int q = 0;
    bool crop_skipped = false;
};

/// Bilinear rescale of an integer image, rounding back to its bit-depth.
ImageBuffer rescale(const ImageBuffer& img, double factor);
ImageBuffer crop_image(const ImageBuffer& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h);
/// Crops right/bottom so both sides are multiples of m.
ImageBuffer crop_to_multiple(const ImageBuffer& img, std::size_t m);

/// Flip, rescale, bit-depth draw and optional patch crop, in that order.
Augmented augment(const ImageBuffer& hbd, const AugmentConfig& cfg, Rng& rng);

struct SplitSpec {
    double train_fraction = 0.8;
};

/// Sorted PNG listing of a directory, split into train/eval by index.
struct CorpusSplit {
    std::vector<std::filesystem::path> train;
    std::vector<std::filesystem::path> eval;
};

/// Throws ArgumentError if the directory holds no PNG files.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);
CorpusSplit split_corpus(const std::filesystem::path& dir, const SplitSpec& split);

/// Decodes files, skipping unreadable ones. Each skip adds one warning.
std::vector<NamedImage> load_images(const std::vector<std::filesystem::path>& files,
                                    std::vector<std::string>* warnings = nullptr);

/// Deterministic epoch stream of training pairs over an in-memory corpus.
class SampleStream {
public:
    SampleStream(std::vector<NamedImage> images, AugmentConfig cfg, int target_bits, std::size_t size_multiple,
                 bool with_bit_info);

    /// Shuffles the visiting order with rng; call once per epoch.
    void begin_epoch(Rng& rng);
    /// Next pair of the epoch, or nullopt when exhausted.
    std::optional<SamplePair> next(Rng& rng);

    std::size_t size() const { return images_.size(); }
    std::size_t warnings() const { return warnings_; }

private:
    std::vector<NamedImage> images_;
    AugmentConfig cfg_;
    int target_bits_;
    std::size_t multiple_;
    bool bit_info_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t warnings_ = 0;
};

/// Smooth multi-directional gradients with faint texture, for tests and demos.
ImageBuffer synthetic_image(std::size_t width, std::size_t height, std::size_t channels, int bits,
                            std::uint64_t seed);

}  // namespace bitexpand
