// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/conv.hpp"

#include "pcgraph/errors.hpp"

namespace pcg {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw StructuralError(std::string(what) + " must be rank " +
                          std::to_string(rank) + ", got " +
                          shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor conv_forward(const Tensor& image, const Tensor& kernels) {
  require_rank(image, 3, "conv image");
  require_rank(kernels, 4, "conv kernel bank");
  const std::size_t channels = image.shape()[0];
  const std::size_t h = image.shape()[1];
  const std::size_t w = image.shape()[2];
  const std::size_t filters = kernels.shape()[0];
  const std::size_t k = kernels.shape()[2];
  if (kernels.shape()[1] != channels || kernels.shape()[3] != k) {
    throw StructuralError("kernel bank " + shape_to_string(kernels.shape()) +
                          " does not fit image " +
                          shape_to_string(image.shape()));
  }
  if (k == 0 || k > h || k > w) {
    throw StructuralError("kernel of size " + std::to_string(k) +
                          " does not fit inside a " + std::to_string(h) + "x" +
                          std::to_string(w) + " image");
  }
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  Tensor out(Shape{filters, oh, ow});
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const double* kern = kernels.data().data() + ((f * channels + c) * k) * k;
          const double* img = image.data().data() + (c * h + i) * w + j;
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
              acc += kern[a * k + b] * img[a * w + b];
        }
        out[(f * oh + i) * ow + j] = acc;
      }
    }
  }
  return out;
}

Tensor conv_backward_error(const Tensor& error, const Tensor& kernels) {
  require_rank(error, 3, "conv error map");
  require_rank(kernels, 4, "conv kernel bank");
  const std::size_t filters = kernels.shape()[0];
  const std::size_t channels = kernels.shape()[1];
  const std::size_t k = kernels.shape()[2];
  if (error.shape()[0] != filters) {
    throw StructuralError("error map " + shape_to_string(error.shape()) +
                          " does not match kernel bank " +
                          shape_to_string(kernels.shape()));
  }
  const std::size_t eh = error.shape()[1];
  const std::size_t ew = error.shape()[2];
  const std::size_t pad = k - 1;
  const std::size_t ph = eh + 2 * pad;
  const std::size_t pw = ew + 2 * pad;

  Tensor padded(Shape{filters, ph, pw});
  for (std::size_t f = 0; f < filters; ++f)
    for (std::size_t i = 0; i < eh; ++i)
      for (std::size_t j = 0; j < ew; ++j)
        padded[(f * ph + i + pad) * pw + j + pad] = error[(f * eh + i) * ew + j];

  const std::size_t h = eh + k - 1;
  const std::size_t w = ew + k - 1;
  Tensor out(Shape{channels, h, w});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t f = 0; f < filters; ++f) {
          const double* kern = kernels.data().data() + ((f * channels + c) * k) * k;
          const double* pe = padded.data().data() + (f * ph + y) * pw + x;
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
              acc += pe[a * pw + b] * kern[(k - 1 - a) * k + (k - 1 - b)];
        }
        out[(c * h + y) * w + x] = acc;
      }
    }
  }
  return out;
}

Tensor conv_kernel_gradient(const Tensor& error, const Tensor& image,
                            std::size_t kernel_size) {
  require_rank(error, 3, "conv error map");
  require_rank(image, 3, "conv image");
  const std::size_t k = kernel_size;
  const std::size_t filters = error.shape()[0];
  const std::size_t oh = error.shape()[1];
  const std::size_t ow = error.shape()[2];
  const std::size_t channels = image.shape()[0];
  const std::size_t h = image.shape()[1];
  const std::size_t w = image.shape()[2];
  if (oh + k - 1 != h || ow + k - 1 != w) {
    throw StructuralError("error map " + shape_to_string(error.shape()) +
                          " inconsistent with image " +
                          shape_to_string(image.shape()) + " and kernel " +
                          std::to_string(k));
  }
  Tensor grad(Shape{filters, channels, k, k});
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* g = grad.data().data() + ((f * channels + c) * k) * k;
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const double e = error[(f * oh + i) * ow + j];
          const double* img = image.data().data() + (c * h + i) * w + j;
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) g[a * k + b] += e * img[a * w + b];
        }
      }
    }
  }
  return grad;
}

PoolResult maxpool2x2_forward(const Tensor& x) {
  require_rank(x, 3, "maxpool input");
  const std::size_t channels = x.shape()[0];
  const std::size_t h = x.shape()[1];
  const std::size_t w = x.shape()[2];
  if (h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0) {
    throw StructuralError("maxpool2x2 needs even nonzero height and width, got " +
                          shape_to_string(x.shape()));
  }
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  PoolResult r{Tensor(Shape{channels, oh, ow}), {}};
  r.argmax.resize(channels * oh * ow);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (c * h + 2 * i) * w + 2 * j;
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t idx = (c * h + 2 * i + a) * w + 2 * j + b;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t dst = (c * oh + i) * ow + j;
        r.values[dst] = x[best];
        r.argmax[dst] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2x2_backward(const Tensor& upstream,
                           std::span<const std::size_t> argmax,
                           const Shape& input_shape) {
  if (upstream.numel() != argmax.size()) {
    throw StructuralError("maxpool backward: upstream/argmax size mismatch");
  }
  Tensor out(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) out[argmax[i]] += upstream[i];
  return out;
}

}  // namespace pcg
