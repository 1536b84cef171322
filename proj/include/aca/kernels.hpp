// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "aca/tensor.hpp"

namespace aca {

/// Geometry of a grouped, dilated 2-D convolution. Kernel layout is
/// (out_channels, in_channels / groups, kernel, kernel).
struct ConvGeometry {
    int batch = 0;
    int in_channels = 0;
    int height = 0;
    int width = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int dilation = 1;
    int padding = 0;
    int groups = 1;
    int out_height = 0;
    int out_width = 0;

    int in_per_group() const noexcept { return in_channels / groups; }
    int out_per_group() const noexcept { return out_channels / groups; }
    std::size_t kernel_numel() const noexcept {
        return static_cast<std::size_t>(out_channels) * in_per_group() * kernel * kernel;
    }
};

/// Validates and fills output sizes. Output spatial size must equal
/// ceil(input / stride) ("same" convention).
ConvGeometry make_conv_geometry(const Shape& input, const Shape& kernel, int stride, int dilation, int padding,
                                int groups);

enum class PoolMode { max, average };

struct PoolGeometry {
    int batch = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    int window = 3;
    int stride = 1;
    int padding = 1;
    int out_height = 0;
    int out_width = 0;
};

PoolGeometry make_pool_geometry(const Shape& input, int window, int stride, int padding);

/// OpenMP kernels. Work is split over (batch, channel) planes; every output
/// element is accumulated in a fixed order, so results do not depend on the
/// thread count.
namespace kernels {

void conv2d_forward(const ConvGeometry& g, const Real* input, const Real* kernel, Real* output);
/// grad_input += conv2d^T(grad_output)
void conv2d_backward_input(const ConvGeometry& g, const Real* grad_output, const Real* kernel, Real* grad_input);
/// grad_kernel += correlation(grad_output, input)
void conv2d_backward_kernel(const ConvGeometry& g, const Real* grad_output, const Real* input, Real* grad_kernel);

void pool2d_forward(const PoolGeometry& g, PoolMode mode, const Real* input, Real* output);
void pool2d_backward(const PoolGeometry& g, PoolMode mode, const Real* input, const Real* grad_output,
                     Real* grad_input);

/// Per-channel mean and biased variance over (batch, h, w).
void channel_moments(const Shape& s, const Real* x, double* mean, double* var);

/// Dot product with 16 independent float lanes combined in a fixed order.
double dot(const Real* a, const Real* b, std::size_t n) noexcept;

/// Active OpenMP thread count (1 when built without OpenMP).
int max_threads() noexcept;
void set_threads(int n) noexcept;

} // namespace kernels
} // namespace aca
