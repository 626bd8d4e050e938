#include "bitexpand/inference.hpp"

#include "bitexpand/errors.hpp"
#include "bitexpand/pipeline.hpp"

namespace bitexpand {

Tensor network_input(const ImageBuffer& lbd, BitDepthSpec spec, bool with_bit_info) {
    spec.check();
    if (lbd.bit_depth != spec.q) {
        throw ArgumentError("input image is " + std::to_string(lbd.bit_depth) + "-bit, expected " +
                            std::to_string(spec.q));
    }
    Tensor x = to_tensor(zero_pad(lbd, spec));
    if (with_bit_info) x = concat_channels(x, Tensor({1, 1, lbd.height, lbd.width}, bit_info_value(spec.q)));
    return x;
}

Tensor run_network(const BitNetModel& model, const Tensor& input) {
    const BitNetConfig& cfg = model.config();
    CropSpec spec;
    const Tensor padded = pad_to_multiple(input, cfg.size_multiple(), spec);
    if (cfg.variant == Variant::Rgb) return crop(model.forward(padded), spec);

    const std::size_t extra = cfg.use_bit_info ? 1 : 0;
    const std::size_t colours = padded.c() - extra;
    if (colours == 3) return crop(model.forward_chan(padded), spec);
    if (colours == 1) return crop(model.forward(padded), spec);
    throw ArgumentError("chan model expects 1 or 3 colour planes, got " + std::to_string(colours));
}

ImageBuffer bitnet_expand(const BitNetModel& model, const ImageBuffer& lbd, BitDepthSpec spec) {
    const BitNetConfig& cfg = model.config();
    if (cfg.variant == Variant::Rgb && lbd.channels != 3) {
        throw ArgumentError("rgb BitNet needs a 3-channel image, got " + std::to_string(lbd.channels));
    }
    const Tensor y = run_network(model, network_input(lbd, spec, cfg.use_bit_info));
    return from_tensor(y, spec.H);
}

Expander bitnet_expander(std::shared_ptr<const BitNetModel> model) {
    return [model = std::move(model)](const ImageBuffer& lbd, BitDepthSpec spec) {
        return bitnet_expand(*model, lbd, spec);
    };
}

}  // namespace bitexpand
