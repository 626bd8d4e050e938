#include "bitexpand/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "bitexpand/classical.hpp"
#include "bitexpand/errors.hpp"
#include "bitexpand/ops.hpp"
#include "bitexpand/png_io.hpp"

namespace bitexpand {

ImageBuffer quantize(const ImageBuffer& x, int q) {
    if (q < 1 || q >= x.bit_depth) {
        throw ArgumentError("quantize: target " + std::to_string(q) + " bits must be in [1, " +
                            std::to_string(x.bit_depth - 1) + "]");
    }
    ImageBuffer out(x.width, x.height, x.channels, q);
    const int shift = x.bit_depth - q;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) out.pixels[i] = static_cast<std::uint16_t>(x.pixels[i] >> shift);
    return out;
}

Tensor to_tensor(const ImageBuffer& img) {
    Tensor t({1, img.channels, img.height, img.width});
    const double scale = 1.0 / static_cast<double>(img.max_value());
    for (std::size_t c = 0; c < img.channels; ++c) {
        float* plane = t.plane(0, c);
        for (std::size_t y = 0; y < img.height; ++y) {
            for (std::size_t x = 0; x < img.width; ++x) {
                plane[y * img.width + x] = static_cast<float>(img.at(x, y, c) * scale);
            }
        }
    }
    return t;
}

ImageBuffer from_tensor(const Tensor& t, int bits) {
    if (t.n() != 1 || (t.c() != 1 && t.c() != 3)) throw ArgumentError("from_tensor: expected (1, 1|3, h, w) tensor");
    if (bits < 1 || bits > 16) throw ArgumentError("from_tensor: bit-depth outside [1, 16]");
    ImageBuffer img(t.w(), t.h(), t.c(), bits);
    const double peak = static_cast<double>(img.max_value());
    for (std::size_t c = 0; c < t.c(); ++c) {
        const float* plane = t.plane(0, c);
        for (std::size_t y = 0; y < t.h(); ++y) {
            for (std::size_t x = 0; x < t.w(); ++x) {
                const double v = std::clamp(static_cast<double>(plane[y * t.w() + x]), 0.0, 1.0);
                img.at(x, y, c) = static_cast<std::uint16_t>(std::floor(v * peak + 0.5));
            }
        }
    }
    return img;
}

SamplePair make_pair(const ImageBuffer& hbd, int q, int target_bits, bool with_bit_info) {
    validate(hbd);
    if (hbd.bit_depth < target_bits) {
        throw ArgumentError("make_pair: image has " + std::to_string(hbd.bit_depth) + " bits, target needs " +
                            std::to_string(target_bits));
    }
    const BitDepthSpec spec{q, target_bits};
    spec.check();
    const ImageBuffer reference = hbd.bit_depth > target_bits ? quantize(hbd, target_bits) : hbd;
    const ImageBuffer coarse = zero_pad(quantize(reference, q), spec);
    SamplePair pair;
    pair.q = q;
    pair.target = to_tensor(reference);
    pair.input = to_tensor(coarse);
    if (with_bit_info) {
        pair.input = concat_channels(pair.input, Tensor({1, 1, hbd.height, hbd.width}, bit_info_value(q)));
    }
    return pair;
}

void AugmentConfig::validate() const {
    if (hflip_prob < 0.0 || hflip_prob > 1.0) throw ConfigError("hflip_prob must lie in [0, 1]");
    if (!(scale_min > 0.0) || scale_min > scale_max) throw ConfigError("scale range must satisfy 0 < min <= max");
    if (q_min < 1 || q_min > q_max || q_max > 15) throw ConfigError("bit-depth range must satisfy 1 <= min <= max");
}

ImageBuffer rescale(const ImageBuffer& img, double factor) {
    if (!(factor > 0.0)) throw ArgumentError("rescale: factor must be positive");
    const auto out_w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.width * factor)));
    const auto out_h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.height * factor)));
    if (out_w == img.width && out_h == img.height) return img;
    Tensor t({1, img.channels, img.height, img.width});
    for (std::size_t c = 0; c < img.channels; ++c) {
        for (std::size_t y = 0; y < img.height; ++y) {
            for (std::size_t x = 0; x < img.width; ++x) t.at(0, c, y, x) = img.at(x, y, c);
        }
    }
    const Tensor r = bilinear_resize(t, out_h, out_w);
    ImageBuffer out(out_w, out_h, img.channels, img.bit_depth);
    const double peak = img.max_value();
    for (std::size_t c = 0; c < img.channels; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                const double v = std::clamp(static_cast<double>(r.at(0, c, y, x)), 0.0, peak);
                out.at(x, y, c) = static_cast<std::uint16_t>(std::floor(v + 0.5));
            }
        }
    }
    return out;
}

ImageBuffer crop_image(const ImageBuffer& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
    if (x0 + w > img.width || y0 + h > img.height) throw ArgumentError("crop_image: window outside image");
    ImageBuffer out(w, h, img.channels, img.bit_depth);
    for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(((y0 + y) * img.width + x0) * img.channels),
                    w * img.channels, out.pixels.begin() + static_cast<std::ptrdiff_t>(y * w * img.channels));
    }
    return out;
}

ImageBuffer crop_to_multiple(const ImageBuffer& img, std::size_t m) {
    const std::size_t w = img.width / m * m, h = img.height / m * m;
    if (w == 0 || h == 0) throw ArgumentError("crop_to_multiple: image smaller than " + std::to_string(m));
    if (w == img.width && h == img.height) return img;
    return crop_image(img, 0, 0, w, h);
}

Augmented augment(const ImageBuffer& hbd, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    Augmented out;
    const bool flip = rng.uniform() < cfg.hflip_prob;
    const double factor = rng.uniform(cfg.scale_min, cfg.scale_max);
    out.q = static_cast<int>(rng.uniform_int(cfg.q_min, cfg.q_max));
    out.image = flip ? hflip(hbd) : hbd;
    out.image = rescale(out.image, factor);
    if (cfg.patch_size > 0) {
        const std::size_t p = cfg.patch_size;
        if (out.image.width < p || out.image.height < p) {
            out.crop_skipped = true;
        } else {
            const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(out.image.width - p)));
            const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(out.image.height - p)));
            out.image = crop_image(out.image, x0, y0, p, p);
        }
    }
    return out;
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw ArgumentError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") files.push_back(entry.path());
    }
    if (files.empty()) throw ArgumentError("no PNG files in " + dir.string());
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

CorpusSplit split_corpus(const std::filesystem::path& dir, const SplitSpec& split) {
    if (split.train_fraction < 0.0 || split.train_fraction > 1.0) {
        throw ArgumentError("train fraction must lie in [0, 1]");
    }
    const auto files = list_pngs(dir);
    const auto n_train = static_cast<std::size_t>(std::floor(files.size() * split.train_fraction + 1e-9));
    CorpusSplit s;
    s.train.assign(files.begin(), files.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.eval.assign(files.begin() + static_cast<std::ptrdiff_t>(n_train), files.end());
    return s;
}

std::vector<NamedImage> load_images(const std::vector<std::filesystem::path>& files,
                                    std::vector<std::string>* warnings) {
    std::vector<NamedImage> out;
    for (const auto& f : files) {
        try {
            auto r = read_png(f);
            if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
            out.push_back({f.filename().string(), std::move(r.image)});
        } catch (const LoadError& e) {
            if (warnings) warnings->push_back(std::string("skipped: ") + e.what());
        }
    }
    return out;
}

SampleStream::SampleStream(std::vector<NamedImage> images, AugmentConfig cfg, int target_bits,
                           std::size_t size_multiple, bool with_bit_info)
    : images_(std::move(images)),
      cfg_(cfg),
      target_bits_(target_bits),
      multiple_(std::max<std::size_t>(1, size_multiple)),
      bit_info_(with_bit_info) {
    if (images_.empty()) throw ArgumentError("training corpus is empty");
    cfg_.validate();
    if (cfg_.q_max >= target_bits_) throw ConfigError("augmentation bit-depths must be below the target bit-depth");
}

void SampleStream::begin_epoch(Rng& rng) {
    order_.resize(images_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(order_[i - 1], order_[j]);
    }
    cursor_ = 0;
}

std::optional<SamplePair> SampleStream::next(Rng& rng) {
    if (cursor_ >= order_.size()) return std::nullopt;
    const NamedImage& src = images_[order_[cursor_++]];
    Augmented a = augment(src.image, cfg_, rng);
    if (a.crop_skipped) ++warnings_;
    return make_pair(crop_to_multiple(a.image, multiple_), a.q, target_bits_, bit_info_);
}

ImageBuffer synthetic_image(std::size_t width, std::size_t height, std::size_t channels, int bits,
                            std::uint64_t seed) {
    Rng rng(seed);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double angle = rng.uniform(0.0, two_pi);
    const double ramp = rng.uniform(0.3, 0.6);
    const double wave_fx = rng.uniform(0.3, 1.2), wave_fy = rng.uniform(0.3, 1.2);
    const double wave_phase = rng.uniform(0.0, two_pi);
    const double wave_amp = rng.uniform(0.05, 0.15);
    const double cx = rng.uniform(0.2, 0.8), cy = rng.uniform(0.2, 0.8);
    const double blob_amp = rng.uniform(-0.15, 0.15), blob_r = rng.uniform(0.15, 0.4);
    const double tex_period = rng.uniform(3.0, 7.0), tex_angle = rng.uniform(0.0, two_pi);
    const double tex_amp = rng.uniform(0.002, 0.008);
    std::vector<double> offset(channels), gain(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        offset[c] = rng.uniform(0.3, 0.7);
        gain[c] = rng.uniform(0.6, 1.0);
    }

    ImageBuffer img(width, height, channels, bits);
    const double peak = img.max_value();
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double tc = std::cos(tex_angle), ts = std::sin(tex_angle);
    for (std::size_t y = 0; y < height; ++y) {
        const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(height);
        for (std::size_t x = 0; x < width; ++x) {
            const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(width);
            const double g = ramp * ((u - 0.5) * ca + (v - 0.5) * sa);
            const double wave = wave_amp * std::sin(two_pi * (wave_fx * u + wave_fy * v) + wave_phase);
            const double d2 = ((u - cx) * (u - cx) + (v - cy) * (v - cy)) / (blob_r * blob_r);
            const double blob = blob_amp * std::exp(-d2);
            const double tex =
                tex_amp * std::sin(two_pi * (tc * static_cast<double>(x) + ts * static_cast<double>(y)) / tex_period);
            for (std::size_t c = 0; c < channels; ++c) {
                const double val = std::clamp(offset[c] + gain[c] * (g + wave + blob) + tex, 0.0, 1.0);
                img.at(x, y, c) = static_cast<std::uint16_t>(std::floor(val * peak + 0.5));
            }
        }
    }
    return img;
}

}  // namespace bitexpand
