// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aca/errors.hpp"

namespace aca {

#if defined(ACA_REAL_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

/// (batch, channels, height, width).
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const noexcept {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense row-major (n, c, h, w) array. Plain value type; the autodiff tape owns
/// copies of recorded values.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real(0));
    Tensor(Shape shape, std::vector<Real> values);

    static Tensor scalar(Real v) { return Tensor({1, 1, 1, 1}, v); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<Real> data() noexcept { return data_; }
    std::span<const Real> data() const noexcept { return data_; }
    Real* ptr() noexcept { return data_.data(); }
    const Real* ptr() const noexcept { return data_.data(); }

    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }

    Real& at(int n, int c, int h, int w) noexcept { return data_[offset(n, c, h, w)]; }
    Real at(int n, int c, int h, int w) const noexcept { return data_[offset(n, c, h, w)]; }

    std::size_t offset(int n, int c, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    void fill(Real v);
    /// this += other (same shape).
    void accumulate(const Tensor& other);
    bool all_finite() const noexcept;
    /// Sum in double, fixed order.
    double sum() const noexcept;

private:
    Shape shape_{};
    std::vector<Real> data_;
};

/// Throws ConfigError naming `what` when shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

} // namespace aca
