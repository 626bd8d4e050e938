#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bitexpand {

struct Shape {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const { return n * c * h * w; }
    std::size_t plane() const { return h * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense NCHW float tensor. Storage is row-major with w varying fastest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(shape); }

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    std::size_t n() const { return shape_.n; }
    std::size_t c() const { return shape_.c; }
    std::size_t h() const { return shape_.h; }
    std::size_t w() const { return shape_.w; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    float& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }

    /// Pointer to the (n, c) plane.
    float* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
    const float* plane(std::size_t n, std::size_t c) const {
        return data_.data() + (n * shape_.c + c) * shape_.plane();
    }

    void fill(float v);
    bool all_finite() const;

    /// Copy of channels [first, first + count).
    Tensor channels(std::size_t first, std::size_t count) const;

private:
    Shape shape_{};
    std::vector<float> data_;
};

/// Inner product with 64-bit accumulation.
double dot(const Tensor& a, const Tensor& b);

}  // namespace bitexpand
