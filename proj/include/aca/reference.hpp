// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "aca/kernels.hpp"

/// Serial direct-loop kernels with 64-bit accumulation. Used as test oracles
/// and as the baseline in the kernel benchmark; never on the training path.
namespace aca::reference {

void conv2d_forward(const ConvGeometry& g, const Real* input, const Real* kernel, Real* output);
/// Gather formulation: every input element sums the output positions it feeds.
void conv2d_backward_input(const ConvGeometry& g, const Real* grad_output, const Real* kernel, Real* grad_input);
void conv2d_backward_kernel(const ConvGeometry& g, const Real* grad_output, const Real* input, Real* grad_kernel);

void pool2d_forward(const PoolGeometry& g, PoolMode mode, const Real* input, Real* output);
void pool2d_backward(const PoolGeometry& g, PoolMode mode, const Real* input, const Real* grad_output,
                     Real* grad_input);

} // namespace aca::reference
