#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "bitexpand/classical.hpp"
#include "bitexpand/image.hpp"

namespace bitexpand {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) with peak = 2^b - 1; +inf for identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5, K1 0.01,
/// K2 0.03, L = 2^b - 1), averaged over channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct MetricRow {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
    double seconds = 0.0;
    std::string error;  // non-empty when the image failed

    bool ok() const { return error.empty(); }
};

struct MetricReport {
    std::vector<MetricRow> rows;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_seconds = 0.0;
    std::size_t failures = 0;

    /// Recomputes aggregates over successful rows.
    void finalize();
    void write_csv(std::ostream& os) const;
    void write_summary(std::ostream& os) const;
};

/// LBD image and bit-depths in, H-bit image out.
using Expander = std::function<ImageBuffer(const ImageBuffer& lbd, BitDepthSpec spec)>;

Expander classical_expander(ClassicalMethod method);

/// Quantises each reference to q bits, expands back to H bits and scores
/// against the reference. Only the expander call is timed.
MetricReport evaluate(const Expander& expander, const std::vector<NamedImage>& references, BitDepthSpec spec,
                      int threads = 1);
MetricReport evaluate(const Expander& expander, const std::filesystem::path& corpus_dir, BitDepthSpec spec,
                      int threads = 1);

}  // namespace bitexpand
