#pragma once

#include <memory>

#include "bitexpand/bitnet.hpp"
#include "bitexpand/classical.hpp"
#include "bitexpand/image.hpp"
#include "bitexpand/metrics.hpp"

namespace bitexpand {

/// Network input for an LBD image: zero-padded to H bits, normalised, with the
/// bit-info plane appended when the model uses it. Shape (1, c [+1], h, w).
Tensor network_input(const ImageBuffer& lbd, BitDepthSpec spec, bool with_bit_info);

/// Runs the model on a normalised input of any spatial size, padding to the
/// stage multiple and cropping back. Dispatches to forward_chan for the chan variant.
Tensor run_network(const BitNetModel& model, const Tensor& input);

/// Full LBD -> HBD expansion with a trained model. Output is rounded to H bits.
ImageBuffer bitnet_expand(const BitNetModel& model, const ImageBuffer& lbd, BitDepthSpec spec);

Expander bitnet_expander(std::shared_ptr<const BitNetModel> model);

}  // namespace bitexpand
