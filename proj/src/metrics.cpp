#include "bitexpand/metrics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <iomanip>

#include "bitexpand/errors.hpp"
#include "bitexpand/parallel.hpp"
#include "bitexpand/pipeline.hpp"

namespace bitexpand {

namespace {

void check_comparable(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (!a.same_geometry(b) || a.bit_depth != b.bit_depth) {
        throw ArgumentError(std::string(what) + ": images differ in size, channels or bit-depth");
    }
    if (a.pixels.size() != a.width * a.height * a.channels || b.pixels.size() != a.pixels.size()) {
        throw ArgumentError(std::string(what) + ": pixel buffer does not match geometry");
    }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// 'valid' separable Gaussian filter of a single plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::array<double, kWindow>& taps) {
    const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
    std::vector<double> rows(ow * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * src[y * w + x + k];
            rows[y * ow + x] = acc;
        }
    }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    }
    return out;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    check_comparable(a, b, "psnr");
    if (a.pixels.empty()) throw ArgumentError("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        sse += d * d;
    }
    if (sse == 0.0) return kInfinitePsnr;
    const double mse = sse / static_cast<double>(a.pixels.size());
    const double peak = a.max_value();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_comparable(a, b, "ssim");
    if (a.width < kWindow || a.height < kWindow) throw ArgumentError("ssim: image smaller than the 11x11 window");
    const double L = a.max_value();
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);
    const auto taps = gaussian_taps();
    const std::size_t n = a.width * a.height;
    double total = 0.0;
    for (std::size_t c = 0; c < a.channels; ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.pixels[i * a.channels + c];
            y[i] = b.pixels[i * a.channels + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, a.width, a.height, taps);
        const auto my = filter_valid(y, a.width, a.height, taps);
        const auto sxx = filter_valid(xx, a.width, a.height, taps);
        const auto syy = filter_valid(yy, a.width, a.height, taps);
        const auto sxy = filter_valid(xy, a.width, a.height, taps);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / static_cast<double>(a.channels);
}

void MetricReport::finalize() {
    mean_psnr = mean_ssim = mean_seconds = 0.0;
    failures = 0;
    std::size_t ok = 0;
    for (const auto& r : rows) {
        if (!r.ok()) {
            ++failures;
            continue;
        }
        mean_psnr += r.psnr;
        mean_ssim += r.ssim;
        mean_seconds += r.seconds;
        ++ok;
    }
    if (ok > 0) {
        mean_psnr /= static_cast<double>(ok);
        mean_ssim /= static_cast<double>(ok);
        mean_seconds /= static_cast<double>(ok);
    }
}

void MetricReport::write_csv(std::ostream& os) const {
    os << "name,psnr_db,ssim,seconds,error\n";
    os << std::setprecision(10);
    for (const auto& r : rows) {
        os << r.name << ',' << r.psnr << ',' << r.ssim << ',' << r.seconds << ',' << r.error << '\n';
    }
    os << "MEAN," << mean_psnr << ',' << mean_ssim << ',' << mean_seconds << ",\n";
}

void MetricReport::write_summary(std::ostream& os) const {
    os << std::fixed << std::setprecision(4);
    os << "images: " << rows.size() << " (" << failures << " failed)\n";
    os << "mean PSNR: " << mean_psnr << " dB\n";
    os << "mean SSIM: " << mean_ssim << "\n";
    os << "mean time: " << mean_seconds << " s\n";
    os << std::defaultfloat;
}

Expander classical_expander(ClassicalMethod method) {
    return [method](const ImageBuffer& lbd, BitDepthSpec spec) { return expand(method, lbd, spec); };
}

MetricReport evaluate(const Expander& expander, const std::vector<NamedImage>& references, BitDepthSpec spec,
                      int threads) {
    spec.check();
    MetricReport report;
    report.rows.resize(references.size());
    parallel_for(references.size(), threads, [&](std::size_t i) {
        MetricRow& row = report.rows[i];
        row.name = references[i].name;
        try {
            const ImageBuffer& src = references[i].image;
            if (src.bit_depth < spec.H) {
                throw ArgumentError("reference has only " + std::to_string(src.bit_depth) + " bits");
            }
            const ImageBuffer ref = src.bit_depth > spec.H ? quantize(src, spec.H) : src;
            const ImageBuffer lbd = quantize(ref, spec.q);
            const auto t0 = std::chrono::steady_clock::now();
            const ImageBuffer out = expander(lbd, spec);
            const auto t1 = std::chrono::steady_clock::now();
            row.seconds = std::chrono::duration<double>(t1 - t0).count();
            row.psnr = psnr(out, ref);
            row.ssim = ssim(out, ref);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    report.finalize();
    return report;
}

MetricReport evaluate(const Expander& expander, const std::filesystem::path& corpus_dir, BitDepthSpec spec,
                      int threads) {
    std::vector<std::string> warnings;
    const auto files = list_pngs(corpus_dir);
    auto images = load_images(files, &warnings);
    MetricReport report = evaluate(expander, images, spec, threads);
    // unreadable files are reported as failed rows
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        const bool loaded = std::any_of(images.begin(), images.end(), [&](const auto& im) { return im.name == name; });
        if (!loaded) report.rows.push_back({name, 0.0, 0.0, 0.0, "unreadable PNG"});
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    report.finalize();
    return report;
}

}  // namespace bitexpand
