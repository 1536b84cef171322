// SPDX-License-Identifier: Apache-2.0
#include "aca/tensor.hpp"

#include <cmath>

namespace aca {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, Real fill) : shape_(shape), data_(shape.numel(), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
        throw ConfigError("negative tensor dimension " + shape.str());
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape.numel())
        throw ConfigError("tensor of shape " + shape.str() + " needs " + std::to_string(shape.numel()) +
                          " values, got " + std::to_string(data_.size()));
}

void Tensor::fill(Real v) {
    for (auto& x : data_) x = v;
}

void Tensor::accumulate(const Tensor& other) {
    require_same_shape(shape_, other.shape_, "accumulate");
    const Real* src = other.ptr();
    Real* dst = ptr();
    const std::size_t n = data_.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

bool Tensor::all_finite() const noexcept {
    for (Real x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

double Tensor::sum() const noexcept {
    double s = 0.0;
    for (Real x : data_) s += x;
    return s;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (!(a == b)) throw ConfigError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

} // namespace aca
