#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bitexpand/ops.hpp"
#include "bitexpand/tensor.hpp"

namespace bitexpand {

inline constexpr float kLeakySlope = 0.2f;

enum class Variant { Rgb, Chan };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct BitNetConfig {
    Variant variant = Variant::Rgb;
    int num_stages = 4;
    std::vector<int> widths{16, 32, 64, 128};
    int r_d = 2;
    int r_u = 2;
    int head_width = 0;  // 0 selects widths[0]
    bool use_bit_info = true;
    bool use_msfi = true;
    int msfi_disconnect_from_smallest = 0;

    /// Throws ConfigError when the configuration is inconsistent.
    void validate() const;

    int image_channels() const { return variant == Variant::Rgb ? 3 : 1; }
    int input_channels() const { return image_channels() + (use_bit_info ? 1 : 0); }
    int output_channels() const { return image_channels(); }
    int effective_head_width() const { return head_width > 0 ? head_width : widths.empty() ? 0 : widths.front(); }
    /// Spatial sizes must be divisible by this.
    std::size_t size_multiple() const { return std::size_t{1} << num_stages; }
    /// Number of MSFI taps that contribute to the output.
    int active_msfi_taps() const;

    bool operator==(const BitNetConfig&) const = default;
};

enum class LayerKind { Conv, Transposed };

struct Layer {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    bool preact = true;
    ConvParams params;
};

/// Parameter gradients aligned with BitNetModel::layers().
struct ModelGrads {
    std::vector<Tensor> weight;
    std::vector<std::vector<float>> bias;
};

class BitNetModel {
public:
    /// Identity-centred 3x3 kernels, Xavier-uniform 1x1 kernels, zero biases.
    static BitNetModel build(const BitNetConfig& config, std::uint64_t seed);

    const BitNetConfig& config() const { return config_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    const Layer& layer(const std::string& name) const;
    std::size_t layer_index(const std::string& name) const;

    std::size_t parameter_count() const;

    /// Flat views over every weight and bias array, in manifest order.
    std::vector<std::span<float>> parameter_views();
    std::vector<std::string> parameter_names() const;

    /// Runs the network on an input whose channels match config().input_channels().
    Tensor forward(const Tensor& x) const;

    /// Forward pass that keeps activations for backward().
    struct Trace;
    Tensor forward(const Tensor& x, Trace& trace) const;
    /// Gradients of a scalar loss given dL/d(output). Optionally returns dL/dx.
    ModelGrads backward(const Trace& trace, const Tensor& grad_out, Tensor* grad_input = nullptr) const;

    /// Channel-separate inference for the chan variant: input holds the three
    /// colour planes followed by the bit-info plane when enabled.
    Tensor forward_chan(const Tensor& rgb) const;

    bool operator==(const BitNetModel& o) const;

private:
    BitNetConfig config_;
    std::vector<Layer> layers_;
    // layer indices
    std::size_t head0_ = 0, head1_ = 0, tail0_ = 0, tail1_ = 0;
    std::vector<std::size_t> down_stride_, down_dilated_, up_dilated_, up_transposed_, msfi_;

    friend BitNetModel make_model_skeleton(const BitNetConfig& config);
    Tensor run(const Tensor& x, Trace* trace) const;
};

struct BitNetModel::Trace {
    std::vector<Tensor> layer_input;   // before pre-activation
    std::vector<Tensor> upstage;       // u_j after skip addition, index j
    std::vector<Tensor> msfi_activated;
};

/// Model with the layer table laid out and all parameters zeroed.
BitNetModel make_model_skeleton(const BitNetConfig& config);

/// Closed-form parameter count derived from the layer table.
std::size_t analytic_parameter_count(const BitNetConfig& config);

struct CropSpec {
    std::size_t h = 0, w = 0;
};

/// Reflect-pads right and bottom up to the next multiple of m.
Tensor pad_to_multiple(const Tensor& x, std::size_t m, CropSpec& crop);
Tensor crop(const Tensor& x, const CropSpec& crop);

}  // namespace bitexpand
