// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pcgraph/tensor.hpp"

namespace pcg {

// Convolution and pooling kernels shared by the conv2d/maxpool2x2 edges and
// the CNN builders. Images are [channels, height, width]; kernel banks are
// [filters, channels, k, k]; stride 1, valid padding.

/// out[f,i,j] = Σ_c Σ_{a,b} kernels[f,c,a,b] * image[c,i+a,j+b]
Tensor conv_forward(const Tensor& image, const Tensor& kernels);

/// Vector–Jacobian transpose of conv_forward with respect to the image: the
/// error map is zero-padded by k−1 on every side and correlated with the
/// spatially flipped kernels, summing over filters.
Tensor conv_backward_error(const Tensor& error, const Tensor& kernels);

/// Kernel gradient Σ_{i,j} error[f,i,j] * image[c,i+a,j+b]: the Hebbian
/// accumulation of post-synaptic error times pre-synaptic activity.
Tensor conv_kernel_gradient(const Tensor& error, const Tensor& image,
                            std::size_t kernel_size);

struct PoolResult {
  Tensor values;
  /// Flat source index of each output element.
  std::vector<std::size_t> argmax;
};

/// 2×2 max pooling, stride 2. Height and width must be even. Ties pick the
/// first element of the window in row-major order.
PoolResult maxpool2x2_forward(const Tensor& x);

/// Routes each upstream value to its argmax position; zeros elsewhere.
Tensor maxpool2x2_backward(const Tensor& upstream,
                           std::span<const std::size_t> argmax,
                           const Shape& input_shape);

}  // namespace pcg
