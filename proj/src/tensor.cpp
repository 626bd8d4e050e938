#include "bitexpand/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bitexpand/errors.hpp"

namespace bitexpand {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
        throw ArgumentError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                            shape_.str());
    }
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::channels(std::size_t first, std::size_t count) const {
    if (first + count > shape_.c) {
        throw ArgumentError("channel slice out of range for " + shape_.str());
    }
    Tensor out({shape_.n, count, shape_.h, shape_.w});
    const std::size_t plane_size = shape_.plane();
    for (std::size_t n = 0; n < shape_.n; ++n) {
        std::copy_n(plane(n, first), count * plane_size, out.plane(n, 0));
    }
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ArgumentError("dot: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    double acc = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) acc += static_cast<double>(da[i]) * db[i];
    return acc;
}

}  // namespace bitexpand
