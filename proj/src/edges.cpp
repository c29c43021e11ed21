// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/edges.hpp"

#include <cmath>

#include "pcgraph/conv.hpp"
#include "pcgraph/errors.hpp"

namespace pcg {

Tensor activate(Activation act, const Tensor& pre) {
  switch (act) {
    case Activation::identity:
      return pre;
    case Activation::tanh:
      return elementwise(ElementOp::tanh, pre);
    case Activation::sigmoid:
      return elementwise(ElementOp::sigmoid, pre);
    case Activation::relu: {
      Tensor out = pre;
      for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
      return out;
    }
  }
  throw StructuralError("unknown activation");
}

Tensor activation_derivative(Activation act, const Tensor& pre) {
  Tensor d(pre.shape());
  auto x = pre.data();
  auto z = d.data();
  switch (act) {
    case Activation::identity:
      d.fill(1.0);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double t = std::tanh(x[i]);
        z[i] = 1.0 - t * t;
      }
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        z[i] = s * (1.0 - s);
      }
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] > 0.0 ? 1.0 : 0.0;
      break;
  }
  return d;
}

namespace {

void require_arity(const EdgeFunction& e, std::size_t parents,
                   std::size_t params) {
  if (e.parents.size() != parents) {
    throw StructuralError(to_string(e.kind) + " edge expects " +
                          std::to_string(e.parents.size()) + " parents, got " +
                          std::to_string(parents));
  }
  if (e.params.size() != params) {
    throw StructuralError(to_string(e.kind) + " edge expects " +
                          std::to_string(e.params.size()) +
                          " parameters, got " + std::to_string(params));
  }
}

Tensor dense_pre(std::span<const Tensor* const> parents,
                 std::span<const Tensor* const> params) {
  Tensor pre = matvec(*params[0], *parents[0]);
  for (std::size_t k = 1; k < parents.size(); ++k) {
    pre += matvec(*params[k], *parents[k]);
  }
  return pre;
}

Tensor scalar_fn_forward(const EdgeFunction& e, const Tensor& x) {
  switch (e.fn) {
    case ScalarFn::tan:
      return elementwise(ElementOp::tan, x);
    case ScalarFn::sin:
      return elementwise(ElementOp::sin, x);
    case ScalarFn::sqrt:
      return elementwise(ElementOp::sqrt, x);
    case ScalarFn::square:
      return elementwise(ElementOp::square, x);
    case ScalarFn::scale:
      return e.scale * x;
  }
  throw StructuralError("unknown scalar function");
}

Tensor scalar_fn_derivative(const EdgeFunction& e, const Tensor& x) {
  Tensor d(x.shape());
  auto v = x.data();
  auto z = d.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    switch (e.fn) {
      case ScalarFn::tan: {
        const double c = std::cos(v[i]);
        z[i] = 1.0 / (c * c);
        break;
      }
      case ScalarFn::sin:
        z[i] = std::cos(v[i]);
        break;
      case ScalarFn::sqrt:
        if (v[i] <= 0.0) {
          throw DomainError("sqrt derivative undefined at " +
                            std::to_string(v[i]));
        }
        z[i] = 0.5 / std::sqrt(v[i]);
        break;
      case ScalarFn::square:
        z[i] = 2.0 * v[i];
        break;
      case ScalarFn::scale:
        z[i] = e.scale;
        break;
    }
  }
  return d;
}

}  // namespace

Tensor edge_forward(const EdgeFunction& e, std::span<const Tensor* const> parents,
                    std::span<const Tensor* const> params) {
  require_arity(e, parents.size(), params.size());
  switch (e.kind) {
    case EdgeKind::dense:
      return activate(e.activation, dense_pre(parents, params));
    case EdgeKind::conv2d:
      return activate(e.activation, conv_forward(*parents[0], *params[0]));
    case EdgeKind::maxpool2x2:
      return maxpool2x2_forward(*parents[0]).values;
    case EdgeKind::nonlinearity:
      return activate(e.activation, *parents[0]);
    case EdgeKind::add: {
      Tensor out = *parents[0];
      for (std::size_t k = 1; k < parents.size(); ++k) out += *parents[k];
      return out;
    }
    case EdgeKind::hadamard:
      return *parents[0] * *parents[1];
    case EdgeKind::concat: {
      std::vector<double> data;
      for (const Tensor* p : parents)
        data.insert(data.end(), p->data().begin(), p->data().end());
      const std::size_t n = data.size();
      return Tensor(Shape{n}, std::move(data));
    }
    case EdgeKind::slice: {
      const Tensor& p = *parents[0];
      if (e.offset + e.length > p.numel()) {
        throw StructuralError("slice runs past the end of its parent");
      }
      auto src = p.data().subspan(e.offset, e.length);
      return Tensor(Shape{e.length}, std::vector<double>(src.begin(), src.end()));
    }
    case EdgeKind::scalar_fn:
      return scalar_fn_forward(e, *parents[0]);
  }
  throw StructuralError("unknown edge kind");
}

VjpResult vjp(const EdgeFunction& e, std::span<const Tensor* const> parents,
              std::span<const Tensor* const> params, const Tensor& upstream,
              bool want_params) {
  require_arity(e, parents.size(), params.size());
  VjpResult r;
  switch (e.kind) {
    case EdgeKind::dense: {
      const Tensor pre = dense_pre(parents, params);
      const Tensor delta =
          upstream.flatten() * activation_derivative(e.activation, pre);
      for (std::size_t k = 0; k < parents.size(); ++k) {
        r.parents.push_back(
            matvec_transposed(*params[k], delta).reshape(parents[k]->shape()));
        if (want_params) r.params.push_back(outer(delta, *parents[k]));
      }
      return r;
    }
    case EdgeKind::conv2d: {
      const Tensor& kernels = *params[0];
      const Tensor pre = conv_forward(*parents[0], kernels);
      const Tensor delta = upstream.reshape(pre.shape()) *
                           activation_derivative(e.activation, pre);
      r.parents.push_back(conv_backward_error(delta, kernels));
      if (want_params) {
        r.params.push_back(
            conv_kernel_gradient(delta, *parents[0], kernels.shape()[2]));
      }
      return r;
    }
    case EdgeKind::maxpool2x2: {
      const PoolResult pool = maxpool2x2_forward(*parents[0]);
      r.parents.push_back(
          maxpool2x2_backward(upstream, pool.argmax, parents[0]->shape()));
      return r;
    }
    case EdgeKind::nonlinearity:
      r.parents.push_back(upstream.reshape(parents[0]->shape()) *
                          activation_derivative(e.activation, *parents[0]));
      return r;
    case EdgeKind::add:
      for (const Tensor* p : parents) r.parents.push_back(upstream.reshape(p->shape()));
      return r;
    case EdgeKind::hadamard: {
      const Tensor u = upstream.reshape(parents[0]->shape());
      r.parents.push_back(u * *parents[1]);
      r.parents.push_back(u * *parents[0]);
      return r;
    }
    case EdgeKind::concat: {
      std::size_t at = 0;
      for (const Tensor* p : parents) {
        auto src = upstream.data().subspan(at, p->numel());
        r.parents.emplace_back(p->shape(),
                               std::vector<double>(src.begin(), src.end()));
        at += p->numel();
      }
      return r;
    }
    case EdgeKind::slice: {
      Tensor g(parents[0]->shape());
      for (std::size_t i = 0; i < e.length; ++i) g[e.offset + i] = upstream[i];
      r.parents.push_back(std::move(g));
      return r;
    }
    case EdgeKind::scalar_fn:
      r.parents.push_back(upstream.reshape(parents[0]->shape()) *
                          scalar_fn_derivative(e, *parents[0]));
      return r;
  }
  throw StructuralError("unsupported edge kind");
}

}  // namespace pcg
