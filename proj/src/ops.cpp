#include "bitexpand/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bitexpand/errors.hpp"
#include "bitexpand/parallel.hpp"

namespace bitexpand {

namespace {

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw ComputationError(std::string(what) + ": non-finite input");
}

void check_conv_params(const ConvParams& p, const char* what) {
    const Shape& ws = p.weight.shape();
    if (ws.h != ws.w || ws.h == 0 || ws.h % 2 == 0) {
        throw ArgumentError(std::string(what) + ": kernel must be square with odd size, got " + ws.str());
    }
    if (p.stride < 1 || p.dilation < 1) {
        throw ArgumentError(std::string(what) + ": stride and dilation must be positive");
    }
    if (!p.bias.empty() && p.bias.size() != ws.n && p.bias.size() != ws.c) {
        throw ArgumentError(std::string(what) + ": bias length does not match weight " + ws.str());
    }
}

// Range of output indices o in [0, out) with o * stride + offset in [0, in).
struct Span1D {
    long lo, hi;  // inclusive lo, exclusive hi
};

Span1D valid_range(long out, long in, long stride, long offset) {
    long lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    long hi = in - 1 - offset < 0 ? 0 : (in - 1 - offset) / stride + 1;
    hi = std::min(hi, out);
    if (lo > hi) lo = hi;
    return {lo, hi};
}

// Geometry of a same-padded strided convolution between a "wide" grid (the
// convolution input) and a "narrow" grid (its output).
struct ConvGeometry {
    long in_h, in_w, out_h, out_w, k, stride, dilation, pad;
};

ConvGeometry geometry(std::size_t in_h, std::size_t in_w, const ConvParams& p) {
    ConvGeometry g{};
    g.in_h = static_cast<long>(in_h);
    g.in_w = static_cast<long>(in_w);
    g.out_h = static_cast<long>(conv_out_size(in_h, p));
    g.out_w = static_cast<long>(conv_out_size(in_w, p));
    g.k = static_cast<long>(p.kernel());
    g.stride = p.stride;
    g.dilation = p.dilation;
    g.pad = p.padding();
    return g;
}

// out[n, o] = sum_i W[o, i] (*) x[n, i]; W viewed as (out_ch, in_ch, k, k).
// Accumulates in double into `acc` (size out_h * out_w) for one (n, o).
void correlate_plane(const float* x, const float* w, const ConvGeometry& g, std::vector<double>& acc) {
    for (long ky = 0; ky < g.k; ++ky) {
        const long dy = ky * g.dilation - g.pad;
        const Span1D ry = valid_range(g.out_h, g.in_h, g.stride, dy);
        for (long kx = 0; kx < g.k; ++kx) {
            const double wv = w[ky * g.k + kx];
            if (wv == 0.0) continue;
            const long dx = kx * g.dilation - g.pad;
            const Span1D rx = valid_range(g.out_w, g.in_w, g.stride, dx);
            for (long oy = ry.lo; oy < ry.hi; ++oy) {
                const float* row = x + (oy * g.stride + dy) * g.in_w + dx;
                double* arow = acc.data() + oy * g.out_w;
                if (g.stride == 1) {
                    for (long ox = rx.lo; ox < rx.hi; ++ox) arow[ox] += wv * row[ox];
                } else {
                    for (long ox = rx.lo; ox < rx.hi; ++ox) arow[ox] += wv * row[ox * g.stride];
                }
            }
        }
    }
}

// Adjoint of correlate_plane: scatters narrow-grid values back onto the wide grid.
void scatter_plane(const float* narrow, const float* w, const ConvGeometry& g, std::vector<double>& acc) {
    for (long ky = 0; ky < g.k; ++ky) {
        const long dy = ky * g.dilation - g.pad;
        const Span1D ry = valid_range(g.out_h, g.in_h, g.stride, dy);
        for (long kx = 0; kx < g.k; ++kx) {
            const double wv = w[ky * g.k + kx];
            if (wv == 0.0) continue;
            const long dx = kx * g.dilation - g.pad;
            const Span1D rx = valid_range(g.out_w, g.in_w, g.stride, dx);
            for (long oy = ry.lo; oy < ry.hi; ++oy) {
                const float* nrow = narrow + oy * g.out_w;
                double* arow = acc.data() + (oy * g.stride + dy) * g.in_w + dx;
                if (g.stride == 1) {
                    for (long ox = rx.lo; ox < rx.hi; ++ox) arow[ox] += wv * nrow[ox];
                } else {
                    for (long ox = rx.lo; ox < rx.hi; ++ox) arow[ox * g.stride] += wv * nrow[ox];
                }
            }
        }
    }
}

// Narrow-grid tensor from wide-grid tensor. W is (narrow_ch, wide_ch, k, k).
Tensor correlate(const Tensor& wide, const Tensor& weight, const std::vector<float>& bias, const ConvGeometry& g) {
    const std::size_t nb = wide.n(), cw = weight.c(), cn = weight.n();
    const std::size_t kk = static_cast<std::size_t>(g.k * g.k);
    Tensor out({nb, cn, static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w)});
    parallel_for(nb * cn, [&](std::size_t job) {
        const std::size_t n = job / cn, o = job % cn;
        std::vector<double> acc(out.shape().plane(), bias.empty() ? 0.0 : static_cast<double>(bias[o]));
        for (std::size_t i = 0; i < cw; ++i) {
            correlate_plane(wide.plane(n, i), weight.data().data() + (o * cw + i) * kk, g, acc);
        }
        float* dst = out.plane(n, o);
        for (std::size_t j = 0; j < acc.size(); ++j) dst[j] = static_cast<float>(acc[j]);
    });
    return out;
}

// Wide-grid tensor from narrow-grid tensor (adjoint of correlate without bias).
Tensor scatter(const Tensor& narrow, const Tensor& weight, const std::vector<float>& bias, const ConvGeometry& g) {
    const std::size_t nb = narrow.n(), cw = weight.c(), cn = weight.n();
    const std::size_t kk = static_cast<std::size_t>(g.k * g.k);
    Tensor out({nb, cw, static_cast<std::size_t>(g.in_h), static_cast<std::size_t>(g.in_w)});
    parallel_for(nb * cw, [&](std::size_t job) {
        const std::size_t n = job / cw, i = job % cw;
        std::vector<double> acc(out.shape().plane(), bias.empty() ? 0.0 : static_cast<double>(bias[i]));
        for (std::size_t o = 0; o < cn; ++o) {
            scatter_plane(narrow.plane(n, o), weight.data().data() + (o * cw + i) * kk, g, acc);
        }
        float* dst = out.plane(n, i);
        for (std::size_t j = 0; j < acc.size(); ++j) dst[j] = static_cast<float>(acc[j]);
    });
    return out;
}

// dL/dW[o, i, ky, kx] = sum wide[n, i, tap] * narrow_grad[n, o, pos].
Tensor weight_gradient(const Tensor& wide, const Tensor& narrow_grad, const Shape& wshape, const ConvGeometry& g) {
    const std::size_t cn = wshape.n, cw = wshape.c;
    Tensor gw(wshape);
    parallel_for(cn, [&](std::size_t o) {
        for (std::size_t i = 0; i < cw; ++i) {
            for (long ky = 0; ky < g.k; ++ky) {
                const long dy = ky * g.dilation - g.pad;
                const Span1D ry = valid_range(g.out_h, g.in_h, g.stride, dy);
                for (long kx = 0; kx < g.k; ++kx) {
                    const long dx = kx * g.dilation - g.pad;
                    const Span1D rx = valid_range(g.out_w, g.in_w, g.stride, dx);
                    double acc = 0.0;
                    for (std::size_t n = 0; n < wide.n(); ++n) {
                        const float* xw = wide.plane(n, i);
                        const float* gn = narrow_grad.plane(n, o);
                        for (long oy = ry.lo; oy < ry.hi; ++oy) {
                            const float* xrow = xw + (oy * g.stride + dy) * g.in_w + dx;
                            const float* grow = gn + oy * g.out_w;
                            for (long ox = rx.lo; ox < rx.hi; ++ox) {
                                acc += static_cast<double>(grow[ox]) * xrow[ox * g.stride];
                            }
                        }
                    }
                    gw.at(o, i, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) = static_cast<float>(acc);
                }
            }
        }
    });
    return gw;
}

std::vector<float> channel_sums(const Tensor& t) {
    std::vector<float> out(t.c());
    for (std::size_t c = 0; c < t.c(); ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < t.n(); ++n) {
            const float* p = t.plane(n, c);
            for (std::size_t j = 0; j < t.shape().plane(); ++j) acc += p[j];
        }
        out[c] = static_cast<float>(acc);
    }
    return out;
}

}  // namespace

std::size_t conv_out_size(std::size_t size, const ConvParams& p) {
    const std::size_t s = static_cast<std::size_t>(p.stride);
    return size == 0 ? 0 : (size - 1) / s + 1;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    check_conv_params(p, "conv2d");
    if (x.c() != p.weight.c()) {
        throw ArgumentError("conv2d: input has " + std::to_string(x.c()) + " channels, weight expects " +
                            std::to_string(p.weight.c()));
    }
    if (p.bias.size() != p.weight.n()) throw ArgumentError("conv2d: bias length must equal c_out");
    require_finite(x, "conv2d");
    return correlate(x, p.weight, p.bias, geometry(x.h(), x.w(), p));
}

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out) {
    check_conv_params(p, "conv2d_backward");
    if (x.c() != p.weight.c()) throw ArgumentError("conv2d_backward: input channel mismatch");
    const ConvGeometry g = geometry(x.h(), x.w(), p);
    const Shape expected{x.n(), p.weight.n(), static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w)};
    if (grad_out.shape() != expected) {
        throw ArgumentError("conv2d_backward: grad_out shape " + grad_out.shape().str() + " expected " +
                            expected.str());
    }
    ConvGrads r;
    r.grad_x = scatter(grad_out, p.weight, {}, g);
    r.grad_weight = weight_gradient(x, grad_out, p.weight.shape(), g);
    r.grad_bias = channel_sums(grad_out);
    return r;
}

Tensor transposed_conv2d(const Tensor& x, const ConvParams& p) {
    check_conv_params(p, "transposed_conv2d");
    if (x.c() != p.weight.n()) {
        throw ArgumentError("transposed_conv2d: input has " + std::to_string(x.c()) + " channels, weight expects " +
                            std::to_string(p.weight.n()));
    }
    if (p.bias.size() != p.weight.c()) throw ArgumentError("transposed_conv2d: bias length must equal c_out");
    require_finite(x, "transposed_conv2d");
    const std::size_t s = static_cast<std::size_t>(p.stride);
    return scatter(x, p.weight, p.bias, geometry(x.h() * s, x.w() * s, p));
}

ConvGrads transposed_conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out) {
    check_conv_params(p, "transposed_conv2d_backward");
    if (x.c() != p.weight.n()) throw ArgumentError("transposed_conv2d_backward: input channel mismatch");
    const std::size_t s = static_cast<std::size_t>(p.stride);
    const Shape expected{x.n(), p.weight.c(), x.h() * s, x.w() * s};
    if (grad_out.shape() != expected) {
        throw ArgumentError("transposed_conv2d_backward: grad_out shape " + grad_out.shape().str() + " expected " +
                            expected.str());
    }
    const ConvGeometry g = geometry(expected.h, expected.w, p);
    ConvGrads r;
    r.grad_x = correlate(grad_out, p.weight, {}, g);
    r.grad_weight = weight_gradient(grad_out, x, p.weight.shape(), g);
    r.grad_bias = channel_sums(grad_out);
    return r;
}

Tensor leaky_relu(const Tensor& x, float slope) {
    require_finite(x, "leaky_relu");
    Tensor y(x.shape());
    auto src = x.data();
    auto dst = y.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 0.0f ? src[i] : slope * src[i];
    return y;
}

Tensor leaky_relu_backward(const Tensor& x, float slope, const Tensor& grad_out) {
    if (x.shape() != grad_out.shape()) throw ArgumentError("leaky_relu_backward: shape mismatch");
    Tensor g(x.shape());
    auto src = x.data();
    auto go = grad_out.data();
    auto dst = g.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 0.0f ? go[i] : slope * go[i];
    return g;
}

namespace {

struct Tap {
    std::size_t i0, i1;
    double f;  // weight of i1
};

std::vector<Tap> resize_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
        double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[d] = {i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0 || x.h() == 0 || x.w() == 0) {
        throw ArgumentError("bilinear_resize: zero-sized image or target");
    }
    const auto ty = resize_taps(x.h(), out_h);
    const auto tx = resize_taps(x.w(), out_w);
    Tensor y({x.n(), x.c(), out_h, out_w});
    parallel_for(x.n() * x.c(), [&](std::size_t job) {
        const float* src = x.plane(job / x.c(), job % x.c());
        float* dst = y.plane(job / x.c(), job % x.c());
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const float* r0 = src + ty[oy].i0 * x.w();
            const float* r1 = src + ty[oy].i1 * x.w();
            const double fy = ty[oy].f;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const Tap& t = tx[ox];
                const double top = (1.0 - t.f) * r0[t.i0] + t.f * r0[t.i1];
                const double bot = (1.0 - t.f) * r1[t.i0] + t.f * r1[t.i1];
                dst[oy * out_w + ox] = static_cast<float>((1.0 - fy) * top + fy * bot);
            }
        }
    });
    return y;
}

Tensor bilinear_resize_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w) {
    if (in_h == 0 || in_w == 0 || grad_out.h() == 0 || grad_out.w() == 0) {
        throw ArgumentError("bilinear_resize_backward: zero-sized image or target");
    }
    const std::size_t out_h = grad_out.h(), out_w = grad_out.w();
    const auto ty = resize_taps(in_h, out_h);
    const auto tx = resize_taps(in_w, out_w);
    Tensor gx({grad_out.n(), grad_out.c(), in_h, in_w});
    parallel_for(grad_out.n() * grad_out.c(), [&](std::size_t job) {
        const float* g = grad_out.plane(job / grad_out.c(), job % grad_out.c());
        std::vector<double> acc(in_h * in_w, 0.0);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            double* r0 = acc.data() + ty[oy].i0 * in_w;
            double* r1 = acc.data() + ty[oy].i1 * in_w;
            const double fy = ty[oy].f;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const Tap& t = tx[ox];
                const double v = g[oy * out_w + ox];
                r0[t.i0] += (1.0 - fy) * (1.0 - t.f) * v;
                r0[t.i1] += (1.0 - fy) * t.f * v;
                r1[t.i0] += fy * (1.0 - t.f) * v;
                r1[t.i1] += fy * t.f * v;
            }
        }
        float* dst = gx.plane(job / grad_out.c(), job % grad_out.c());
        for (std::size_t j = 0; j < acc.size(); ++j) dst[j] = static_cast<float>(acc[j]);
    });
    return gx;
}

Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw ArgumentError("bilinear_upsample: zero-sized target");
    if (out_h < x.h() || out_w < x.w()) throw ArgumentError("bilinear_upsample: target smaller than input");
    require_finite(x, "bilinear_upsample");
    if (out_h == x.h() && out_w == x.w()) return x;
    return bilinear_resize(x, out_h, out_w);
}

Tensor bilinear_upsample_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w) {
    if (grad_out.h() < in_h || grad_out.w() < in_w) {
        throw ArgumentError("bilinear_upsample_backward: target smaller than input");
    }
    if (grad_out.h() == in_h && grad_out.w() == in_w) return grad_out;
    return bilinear_resize_backward(grad_out, in_h, in_w);
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Tensor& acc, const Tensor& b) {
    if (acc.shape() != b.shape()) {
        throw ArgumentError("add: shape mismatch " + acc.shape().str() + " vs " + b.shape().str());
    }
    auto d = acc.data();
    auto s = b.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw ArgumentError("concat_channels: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out({a.n(), a.c() + b.c(), a.h(), a.w()});
    const std::size_t plane = a.shape().plane();
    for (std::size_t n = 0; n < a.n(); ++n) {
        std::copy_n(a.plane(n, 0), a.c() * plane, out.plane(n, 0));
        std::copy_n(b.plane(n, 0), b.c() * plane, out.plane(n, a.c()));
    }
    return out;
}

LossResult l1_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ArgumentError("l1_loss: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
    }
    const std::size_t batch = pred.n();
    const std::size_t per_sample = pred.c() * pred.h() * pred.w();
    LossResult r{0.0, Tensor(pred.shape())};
    if (batch == 0 || per_sample == 0) return r;
    const double inv = 1.0 / (static_cast<double>(batch) * static_cast<double>(per_sample));
    const float g = static_cast<float>(inv);
    auto p = pred.data();
    auto t = target.data();
    auto gd = r.grad.data();
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        total += std::abs(d);
        gd[i] = d > 0.0 ? g : (d < 0.0 ? -g : 0.0f);
    }
    r.loss = total * inv;
    if (!std::isfinite(r.loss)) throw ComputationError("l1_loss: non-finite loss");
    return r;
}

}  // namespace bitexpand
