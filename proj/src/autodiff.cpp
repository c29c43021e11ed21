// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pcgraph/edges.hpp"
#include "pcgraph/errors.hpp"

namespace pcg {

namespace {

Tensor batched_zeros(std::size_t batch, const Shape& item) {
  Shape s{batch};
  s.insert(s.end(), item.begin(), item.end());
  return Tensor(std::move(s));
}

double summed_loss(const ComputationGraph& g, const Tensor& predictions,
                   const Tensor& targets) {
  double total = 0.0;
  for (double x : sample_losses(g.loss(), predictions, targets, g.loss_block())) total += x;
  return total;
}

}  // namespace

GradientSet reverse_ad_from(const ComputationGraph& g, const ParamSet& params,
                            std::span<const Tensor> predictions,
                            const Tensor& targets) {
  require_params(g, params);
  const std::size_t n = g.size();
  if (predictions.size() != n) {
    throw StructuralError("expected one prediction per vertex");
  }
  const VertexId out = g.output_vertex();
  const std::size_t batch = predictions[out.index].extent(0);
  const Tensor seed = -output_error(g, predictions[out.index], targets);

  GradientSet grads;
  for (std::size_t i = 0; i < n; ++i) {
    grads.by_vertex.push_back(batched_zeros(batch, g.vertex(VertexId{i}).shape));
  }
  for (const ParamDecl& p : g.params()) grads.by_param.emplace_back(p.shape);

  std::vector<Tensor> sample(n);
  std::vector<Tensor> grad(n);
  std::vector<VjpResult> local(n);
  std::vector<const Tensor*> pp;
  std::vector<const Tensor*> tp;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) sample[i] = batch_item(predictions[i], b);
    for (std::size_t r = n; r-- > 0;) {
      const VertexId id{r};
      const Vertex& v = g.vertex(id);
      if (id == out) {
        grad[r] = batch_item(seed, b);
      } else {
        grad[r] = Tensor(v.shape);
        for (const ChildSlot& c : g.children(id)) {
          grad[r] += local[c.child.index].parents[c.slot];
        }
      }
      if (!grad[r].all_finite()) {
        throw NumericError("non-finite gradient at vertex '" + v.name + "'");
      }
      set_batch_item(grads.by_vertex[r], b, grad[r]);
      if (v.is_input()) continue;
      pp.clear();
      tp.clear();
      for (VertexId p : v.edge->parents) pp.push_back(&sample[p.index]);
      for (ParamId p : v.edge->params) tp.push_back(&params[p.index]);
      local[r] = vjp(*v.edge, pp, tp, grad[r], true);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Vertex& v = g.vertex(VertexId{i});
      if (v.is_input()) continue;
      for (std::size_t k = 0; k < v.edge->params.size(); ++k) {
        grads.by_param[v.edge->params[k].index] += local[i].params[k];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t k = 0; k < grads.by_param.size(); ++k) {
    for (double& x : grads.by_param[k].data()) x *= inv;
    if (!grads.by_param[k].all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + g.params()[k].name + "'");
    }
  }
  return grads;
}

GradientSet reverse_ad(const ComputationGraph& g, const ParamSet& params,
                       std::span<const Tensor> inputs, const Tensor& targets) {
  const std::vector<Tensor> predictions = forward_sweep(g, params, inputs);
  return reverse_ad_from(g, params, predictions, targets);
}

Tensor finite_diff(const ComputationGraph& g, const ParamSet& params,
                   std::span<const Tensor> inputs, const Tensor& targets, Wrt wrt,
                   double step) {
  if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
  const VertexId out = g.output_vertex();

  if (const auto* pid = std::get_if<ParamId>(&wrt)) {
    if (pid->index >= params.size()) throw StructuralError("parameter id out of range");
    ParamSet shifted = params;
    Tensor& theta = shifted[pid->index];
    Tensor result(theta.shape());
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double up = batch_loss(g, forward_sweep(g, shifted, inputs)[out.index], targets);
      theta[i] = saved - step;
      const double down = batch_loss(g, forward_sweep(g, shifted, inputs)[out.index], targets);
      theta[i] = saved;
      result[i] = (up - down) / (2.0 * step);
    }
    return result;
  }

  const VertexId vid = std::get<VertexId>(wrt);
  if (vid.index >= g.size()) throw StructuralError("vertex id out of range");
  const Tensor base = forward_sweep(g, params, inputs)[vid.index];
  Tensor result(base.shape());
  std::map<std::size_t, Tensor> overrides{{vid.index, base}};
  // Only the perturbed sample's loss changes, so differentiating the summed
  // loss yields each sample's own gradient.
  auto loss_at = [&](std::size_t i, double value) {
    overrides[vid.index][i] = value;
    std::vector<Tensor> pred;
    if (g.vertex(vid).is_input()) {
      std::vector<Tensor> shifted(inputs.begin(), inputs.end());
      const auto ids = g.inputs();
      const auto pos = std::find(ids.begin(), ids.end(), vid) - ids.begin();
      shifted[static_cast<std::size_t>(pos)] = overrides[vid.index];
      pred = forward_sweep(g, params, shifted);
    } else {
      pred = forward_sweep_with_overrides(g, params, inputs, overrides);
    }
    return summed_loss(g, pred[out.index], targets);
  };
  for (std::size_t i = 0; i < base.numel(); ++i) {
    const double up = loss_at(i, base[i] + step);
    const double down = loss_at(i, base[i] - step);
    overrides[vid.index][i] = base[i];
    result[i] = (up - down) / (2.0 * step);
  }
  return result;
}

double relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw StructuralError("relative_error: shapes " + shape_to_string(a.shape()) +
                          " and " + shape_to_string(b.shape()) + " differ");
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  return diff / std::max(max_abs(b), 1e-12);
}

}  // namespace pcg
