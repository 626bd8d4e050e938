#include "bitexpand/classical.hpp"

#include "bitexpand/errors.hpp"

namespace bitexpand {

void BitDepthSpec::check() const {
    if (q < 1 || q > 15 || H <= q || H > 16) {
        throw ArgumentError("invalid bit-depth pair q=" + std::to_string(q) + " H=" + std::to_string(H) +
                            " (need 1 <= q < H <= 16)");
    }
}

namespace {

void check_value(std::uint32_t v, BitDepthSpec spec) {
    spec.check();
    if (v >= (1u << spec.q)) {
        throw DomainError("value " + std::to_string(v) + " does not fit in " + std::to_string(spec.q) + " bits");
    }
}

}  // namespace

std::uint16_t zero_pad_value(std::uint32_t v, BitDepthSpec spec) {
    check_value(v, spec);
    return static_cast<std::uint16_t>(v << (spec.H - spec.q));
}

std::uint16_t mig_value(std::uint32_t v, BitDepthSpec spec) {
    check_value(v, spec);
    const std::uint64_t num = (1ull << spec.H) - 1;
    const std::uint64_t den = (1ull << spec.q) - 1;
    return static_cast<std::uint16_t>((2 * v * num + den) / (2 * den));
}

std::uint16_t bit_replicate_value(std::uint32_t v, BitDepthSpec spec) {
    check_value(v, spec);
    std::uint32_t out = 0;
    for (int k = 0; k < spec.H; ++k) {
        const int src_bit = spec.q - 1 - (k % spec.q);
        out = (out << 1) | ((v >> src_bit) & 1u);
    }
    return static_cast<std::uint16_t>(out);
}

std::vector<std::uint16_t> expansion_table(ClassicalMethod method, BitDepthSpec spec) {
    spec.check();
    std::vector<std::uint16_t> lut(std::size_t{1} << spec.q);
    for (std::uint32_t v = 0; v < lut.size(); ++v) {
        switch (method) {
            case ClassicalMethod::ZeroPad: lut[v] = zero_pad_value(v, spec); break;
            case ClassicalMethod::IdealGain: lut[v] = mig_value(v, spec); break;
            case ClassicalMethod::BitReplicate: lut[v] = bit_replicate_value(v, spec); break;
        }
    }
    return lut;
}

ImageBuffer expand(ClassicalMethod method, const ImageBuffer& x, BitDepthSpec spec) {
    spec.check();
    const auto lut = expansion_table(method, spec);
    ImageBuffer out(x.width, x.height, x.channels, spec.H);
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const std::uint16_t v = x.pixels[i];
        check_value(v, spec);
        out.pixels[i] = lut[v];
    }
    return out;
}

ImageBuffer zero_pad(const ImageBuffer& x, BitDepthSpec spec) { return expand(ClassicalMethod::ZeroPad, x, spec); }
ImageBuffer mig(const ImageBuffer& x, BitDepthSpec spec) { return expand(ClassicalMethod::IdealGain, x, spec); }
ImageBuffer bit_replicate(const ImageBuffer& x, BitDepthSpec spec) {
    return expand(ClassicalMethod::BitReplicate, x, spec);
}

ClassicalMethod parse_classical(const std::string& name) {
    if (name == "zp") return ClassicalMethod::ZeroPad;
    if (name == "mig") return ClassicalMethod::IdealGain;
    if (name == "br") return ClassicalMethod::BitReplicate;
    throw ArgumentError("unknown classical method '" + name + "'");
}

std::string to_string(ClassicalMethod m) {
    switch (m) {
        case ClassicalMethod::ZeroPad: return "zp";
        case ClassicalMethod::IdealGain: return "mig";
        case ClassicalMethod::BitReplicate: return "br";
    }
    return "?";
}

}  // namespace bitexpand
