#include "bitexpand/bitnet.hpp"

#include <algorithm>
#include <cmath>

#include "bitexpand/errors.hpp"
#include "bitexpand/rng.hpp"

namespace bitexpand {

std::string to_string(Variant v) { return v == Variant::Rgb ? "rgb" : "chan"; }

Variant parse_variant(const std::string& s) {
    if (s == "rgb") return Variant::Rgb;
    if (s == "chan") return Variant::Chan;
    throw ConfigError("unknown variant '" + s + "'");
}

void BitNetConfig::validate() const {
    if (num_stages < 1) throw ConfigError("num_stages must be positive");
    if (widths.size() != static_cast<std::size_t>(num_stages)) {
        throw ConfigError("widths has " + std::to_string(widths.size()) + " entries, expected " +
                          std::to_string(num_stages));
    }
    for (int w : widths) {
        if (w <= 0) throw ConfigError("widths must be positive");
    }
    if (r_d < 1 || r_d > 2 || r_u < 1 || r_u > 2) throw ConfigError("dilation rates must be 1 or 2");
    if (head_width < 0) throw ConfigError("head_width must be non-negative");
    if (msfi_disconnect_from_smallest < 0 || msfi_disconnect_from_smallest > num_stages) {
        throw ConfigError("msfi_disconnect_from_smallest must lie in [0, num_stages]");
    }
}

int BitNetConfig::active_msfi_taps() const { return use_msfi ? num_stages - msfi_disconnect_from_smallest : 0; }

namespace {

Layer make_layer(std::string name, LayerKind kind, bool preact, std::size_t c_in, std::size_t c_out, std::size_t k,
                 int stride, int dilation) {
    Layer l;
    l.name = std::move(name);
    l.kind = kind;
    l.preact = preact;
    l.params.stride = stride;
    l.params.dilation = dilation;
    if (kind == LayerKind::Conv) {
        l.params.weight = Tensor({c_out, c_in, k, k});
    } else {
        l.params.weight = Tensor({c_in, c_out, k, k});
    }
    l.params.bias.assign(c_out, 0.0f);
    return l;
}

std::size_t layer_out_channels(const Layer& l) {
    return l.kind == LayerKind::Conv ? l.params.weight.n() : l.params.weight.c();
}

std::size_t layer_in_channels(const Layer& l) {
    return l.kind == LayerKind::Conv ? l.params.weight.c() : l.params.weight.n();
}

}  // namespace

BitNetModel make_model_skeleton(const BitNetConfig& config) {
    config.validate();
    BitNetModel m;
    m.config_ = config;
    const std::size_t D = static_cast<std::size_t>(config.num_stages);
    const auto hw = static_cast<std::size_t>(config.effective_head_width());
    const auto width = [&](std::size_t i) { return static_cast<std::size_t>(config.widths[i]); };
    auto& L = m.layers_;
    auto push = [&](Layer l) {
        L.push_back(std::move(l));
        return L.size() - 1;
    };

    m.head0_ = push(make_layer("head0", LayerKind::Conv, false, config.input_channels(), hw, 3, 1, 1));
    m.head1_ = push(make_layer("head1", LayerKind::Conv, true, hw, hw, 3, 1, 1));
    for (std::size_t i = 0; i < D; ++i) {
        const std::size_t c_prev = i == 0 ? hw : width(i - 1);
        const std::string base = "down" + std::to_string(i);
        m.down_stride_.push_back(push(make_layer(base + ".stride", LayerKind::Conv, true, c_prev, width(i), 3, 2, 1)));
        m.down_dilated_.push_back(
            push(make_layer(base + ".dilated", LayerKind::Conv, true, width(i), width(i), 3, 1, config.r_d)));
    }
    m.up_dilated_.assign(D, 0);
    m.up_transposed_.assign(D, 0);
    for (std::size_t jj = 0; jj < D; ++jj) {
        const std::size_t j = D - 1 - jj;
        const std::size_t c_next = j == 0 ? hw : width(j - 1);
        const std::string base = "up" + std::to_string(j);
        m.up_dilated_[j] =
            push(make_layer(base + ".dilated", LayerKind::Conv, true, width(j), width(j), 3, 1, config.r_u));
        m.up_transposed_[j] =
            push(make_layer(base + ".transposed", LayerKind::Transposed, true, width(j), c_next, 3, 2, 1));
    }
    for (std::size_t j = 0; j < D; ++j) {
        const std::size_t c_tap = j == 0 ? hw : width(j - 1);
        // activation is applied before the upsampling, not by the layer itself
        m.msfi_.push_back(push(make_layer("msfi" + std::to_string(j), LayerKind::Conv, false, c_tap, hw, 1, 1, 1)));
    }
    m.tail0_ = push(make_layer("tail0", LayerKind::Conv, true, hw, hw, 3, 1, 1));
    m.tail1_ = push(make_layer("tail1", LayerKind::Conv, true, hw, config.output_channels(), 1, 1, 1));
    return m;
}

BitNetModel BitNetModel::build(const BitNetConfig& config, std::uint64_t seed) {
    BitNetModel m = make_model_skeleton(config);
    Rng rng(seed);
    for (auto& layer : m.layers_) {
        Tensor& w = layer.params.weight;
        const std::size_t k = w.h();
        if (k == 3) {
            const std::size_t c_out = layer_out_channels(layer), c_in = layer_in_channels(layer);
            for (std::size_t j = 0; j < c_out; ++j) {
                const std::size_t i = j % c_in;
                if (layer.kind == LayerKind::Conv) {
                    w.at(j, i, 1, 1) = 1.0f;
                } else {
                    w.at(i, j, 1, 1) = 1.0f;
                }
            }
        } else {
            const double fan_in = static_cast<double>(layer_in_channels(layer) * k * k);
            const double fan_out = static_cast<double>(layer_out_channels(layer) * k * k);
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (float& v : w.data()) v = static_cast<float>(rng.uniform(-limit, limit));
        }
    }
    return m;
}

const Layer& BitNetModel::layer(const std::string& name) const { return layers_[layer_index(name)]; }

std::size_t BitNetModel::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].name == name) return i;
    }
    throw ArgumentError("no layer named '" + name + "'");
}

std::size_t BitNetModel::parameter_count() const {
    std::size_t total = 0;
    for (const auto& l : layers_) total += l.params.weight.numel() + l.params.bias.size();
    return total;
}

std::vector<std::span<float>> BitNetModel::parameter_views() {
    std::vector<std::span<float>> views;
    for (auto& l : layers_) {
        views.emplace_back(l.params.weight.data());
        views.emplace_back(l.params.bias);
    }
    return views;
}

std::vector<std::string> BitNetModel::parameter_names() const {
    std::vector<std::string> names;
    for (const auto& l : layers_) {
        names.push_back(l.name + ".weight");
        names.push_back(l.name + ".bias");
    }
    return names;
}

bool BitNetModel::operator==(const BitNetModel& o) const {
    if (!(config_ == o.config_) || layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i].params;
        const auto& b = o.layers_[i].params;
        if (layers_[i].name != o.layers_[i].name || a.weight.shape() != b.weight.shape() ||
            a.weight.storage() != b.weight.storage() || a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

namespace {

Tensor apply_layer(const Layer& l, const Tensor& x) {
    const Tensor a = l.preact ? leaky_relu(x, kLeakySlope) : x;
    return l.kind == LayerKind::Conv ? conv2d(a, l.params) : transposed_conv2d(a, l.params);
}

}  // namespace

Tensor BitNetModel::forward(const Tensor& x) const { return run(x, nullptr); }

Tensor BitNetModel::forward(const Tensor& x, Trace& trace) const { return run(x, &trace); }

Tensor BitNetModel::run(const Tensor& x, Trace* trace) const {
    if (x.c() != static_cast<std::size_t>(config_.input_channels())) {
        throw ArgumentError("forward: input has " + std::to_string(x.c()) + " channels, model expects " +
                            std::to_string(config_.input_channels()));
    }
    const std::size_t mult = config_.size_multiple();
    if (x.h() == 0 || x.w() == 0 || x.h() % mult != 0 || x.w() % mult != 0) {
        throw ArgumentError("forward: spatial size " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                            " must be a positive multiple of " + std::to_string(mult));
    }
    const std::size_t D = static_cast<std::size_t>(config_.num_stages);
    if (trace) {
        trace->layer_input.assign(layers_.size(), Tensor{});
        trace->upstage.assign(D, Tensor{});
        trace->msfi_activated.assign(D, Tensor{});
    }
    auto step = [&](std::size_t idx, const Tensor& in) {
        if (trace) trace->layer_input[idx] = in;
        return apply_layer(layers_[idx], in);
    };

    const Tensor f0 = step(head1_, step(head0_, x));
    std::vector<Tensor> skips(D);
    Tensor h = f0;
    for (std::size_t i = 0; i < D; ++i) {
        h = step(down_dilated_[i], step(down_stride_[i], h));
        skips[i] = h;
    }
    std::vector<Tensor> up(D);
    for (std::size_t jj = 0; jj < D; ++jj) {
        const std::size_t j = D - 1 - jj;
        h = step(up_transposed_[j], step(up_dilated_[j], h));
        add_inplace(h, j == 0 ? f0 : skips[j - 1]);
        up[j] = h;
    }
    Tensor merged = up[0];
    const std::size_t taps = static_cast<std::size_t>(config_.active_msfi_taps());
    for (std::size_t j = 0; j < taps; ++j) {
        const Tensor act = leaky_relu(up[j], kLeakySlope);
        const Tensor big = bilinear_upsample(act, x.h(), x.w());
        add_inplace(merged, step(msfi_[j], big));
        if (trace) trace->msfi_activated[j] = act;
    }
    if (trace) trace->upstage = up;
    return step(tail1_, step(tail0_, merged));
}

namespace {

// Backpropagates through one layer and accumulates its parameter gradients.
Tensor layer_backward(const Layer& l, const Tensor& input, const Tensor& grad_y, Tensor& gw, std::vector<float>& gb) {
    const Tensor a = l.preact ? leaky_relu(input, kLeakySlope) : input;
    ConvGrads g = l.kind == LayerKind::Conv ? conv2d_backward(a, l.params, grad_y)
                                            : transposed_conv2d_backward(a, l.params, grad_y);
    gw = std::move(g.grad_weight);
    gb = std::move(g.grad_bias);
    return l.preact ? leaky_relu_backward(input, kLeakySlope, g.grad_x) : std::move(g.grad_x);
}

void accumulate(Tensor& acc, const Tensor& g) {
    if (acc.numel() == 0) {
        acc = g;
    } else {
        add_inplace(acc, g);
    }
}

}  // namespace

ModelGrads BitNetModel::backward(const Trace& trace, const Tensor& grad_out, Tensor* grad_input) const {
    if (trace.layer_input.size() != layers_.size()) throw ArgumentError("backward: trace does not match model");
    const std::size_t D = static_cast<std::size_t>(config_.num_stages);
    ModelGrads grads;
    grads.weight.resize(layers_.size());
    grads.bias.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        grads.weight[i] = Tensor(layers_[i].params.weight.shape());
        grads.bias[i].assign(layers_[i].params.bias.size(), 0.0f);
    }
    auto back = [&](std::size_t idx, const Tensor& gy) {
        return layer_backward(layers_[idx], trace.layer_input[idx], gy, grads.weight[idx], grads.bias[idx]);
    };

    const Tensor g_merged = back(tail0_, back(tail1_, grad_out));
    std::vector<Tensor> g_up(D);
    g_up[0] = g_merged;
    const std::size_t taps = static_cast<std::size_t>(config_.active_msfi_taps());
    for (std::size_t j = 0; j < taps; ++j) {
        const Tensor& act = trace.msfi_activated[j];
        const Tensor g_big = back(msfi_[j], g_merged);
        const Tensor g_act = bilinear_upsample_backward(g_big, act.h(), act.w());
        accumulate(g_up[j], leaky_relu_backward(trace.upstage[j], kLeakySlope, g_act));
    }

    Tensor g_f0;
    std::vector<Tensor> g_skip(D);
    for (std::size_t j = 0; j < D; ++j) {
        const Tensor& g = g_up[j];
        if (j == 0) {
            accumulate(g_f0, g);
        } else {
            accumulate(g_skip[j - 1], g);
        }
        const Tensor g_in = back(up_dilated_[j], back(up_transposed_[j], g));
        if (j + 1 < D) {
            accumulate(g_up[j + 1], g_in);
        } else {
            accumulate(g_skip[D - 1], g_in);
        }
    }
    for (std::size_t ii = 0; ii < D; ++ii) {
        const std::size_t i = D - 1 - ii;
        const Tensor g_in = back(down_stride_[i], back(down_dilated_[i], g_skip[i]));
        if (i == 0) {
            accumulate(g_f0, g_in);
        } else {
            accumulate(g_skip[i - 1], g_in);
        }
    }
    const Tensor g_x = back(head0_, back(head1_, g_f0));
    if (grad_input) *grad_input = g_x;
    return grads;
}

Tensor BitNetModel::forward_chan(const Tensor& rgb) const {
    if (config_.variant != Variant::Chan) throw ArgumentError("forward_chan requires the chan variant");
    const std::size_t extra = config_.use_bit_info ? 1 : 0;
    if (rgb.c() != 3 + extra) {
        throw ArgumentError("forward_chan: expected " + std::to_string(3 + extra) + " input channels, got " +
                            std::to_string(rgb.c()));
    }
    Tensor out;
    for (std::size_t c = 0; c < 3; ++c) {
        Tensor single = rgb.channels(c, 1);
        if (extra) single = concat_channels(single, rgb.channels(3, 1));
        Tensor y = forward(single);
        out = c == 0 ? std::move(y) : concat_channels(out, y);
    }
    return out;
}

std::size_t analytic_parameter_count(const BitNetConfig& config) {
    config.validate();
    const std::size_t D = static_cast<std::size_t>(config.num_stages);
    const auto hw = static_cast<std::size_t>(config.effective_head_width());
    const auto in = static_cast<std::size_t>(config.input_channels());
    const auto out = static_cast<std::size_t>(config.output_channels());
    auto conv = [](std::size_t k, std::size_t ci, std::size_t co) { return k * k * ci * co + co; };
    std::size_t total = conv(3, in, hw) + conv(3, hw, hw);
    for (std::size_t i = 0; i < D; ++i) {
        const std::size_t prev = i == 0 ? hw : static_cast<std::size_t>(config.widths[i - 1]);
        const auto wi = static_cast<std::size_t>(config.widths[i]);
        total += conv(3, prev, wi) + conv(3, wi, wi);  // stride-2, dilated
        total += conv(3, wi, wi) + conv(3, wi, prev);  // dilated, transposed back to prev
        total += conv(1, prev, hw);                    // msfi tap at the scale of prev
    }
    return total + conv(3, hw, hw) + conv(1, hw, out);
}

namespace {

std::size_t reflect_index(std::size_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::size_t period = 2 * (n - 1);
    std::size_t r = i % period;
    return r < n ? r : period - r;
}

}  // namespace

Tensor pad_to_multiple(const Tensor& x, std::size_t m, CropSpec& crop_spec) {
    if (m == 0) throw ArgumentError("pad_to_multiple: multiple must be positive");
    crop_spec = {x.h(), x.w()};
    const std::size_t ph = (x.h() + m - 1) / m * m;
    const std::size_t pw = (x.w() + m - 1) / m * m;
    if (ph == x.h() && pw == x.w()) return x;
    Tensor out({x.n(), x.c(), ph, pw});
    for (std::size_t n = 0; n < x.n(); ++n) {
        for (std::size_t c = 0; c < x.c(); ++c) {
            for (std::size_t y = 0; y < ph; ++y) {
                const std::size_t sy = reflect_index(y, x.h());
                for (std::size_t xx = 0; xx < pw; ++xx) out.at(n, c, y, xx) = x.at(n, c, sy, reflect_index(xx, x.w()));
            }
        }
    }
    return out;
}

Tensor crop(const Tensor& x, const CropSpec& spec) {
    if (spec.h > x.h() || spec.w > x.w()) throw ArgumentError("crop: target larger than tensor");
    if (spec.h == x.h() && spec.w == x.w()) return x;
    Tensor out({x.n(), x.c(), spec.h, spec.w});
    for (std::size_t n = 0; n < x.n(); ++n) {
        for (std::size_t c = 0; c < x.c(); ++c) {
            for (std::size_t y = 0; y < spec.h; ++y) {
                std::copy_n(x.plane(n, c) + y * x.w(), spec.w, out.plane(n, c) + y * spec.w);
            }
        }
    }
    return out;
}

}  // namespace bitexpand
