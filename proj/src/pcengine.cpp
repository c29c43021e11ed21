// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/pcengine.hpp"

#include <algorithm>
#include <cmath>

#include "pcgraph/edges.hpp"
#include "pcgraph/errors.hpp"

namespace pcg {

AugmentedGraph augment(const ComputationGraph& g) {
  require_valid(g);
  AugmentedGraph h;
  h.graph_ = &g;
  const VertexId out = g.output_vertex();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const VertexId id{i};
    h.roles_.push_back(g.vertex(id).is_input() ? VertexRole::input
                       : id == out             ? VertexRole::output
                                               : VertexRole::internal);
  }
  return h;
}

PrecisionSet identity_precisions(const ComputationGraph& g) {
  PrecisionSet p;
  for (const Vertex& v : g.vertices()) p.push_back(Tensor::identity(shape_numel(v.shape)));
  return p;
}

void require_valid(const InferenceSettings& s) {
  if (!(s.eta_v >= 0.0) || !std::isfinite(s.eta_v)) {
    throw DomainError("eta_v must be a finite nonnegative number");
  }
  if (s.max_iters < 1) throw DomainError("max_iters must be at least 1");
  if (!(s.tolerance >= 0.0)) throw DomainError("tolerance must be nonnegative");
}

namespace {

void require_precisions(const ComputationGraph& g, const PrecisionSet& p) {
  if (p.size() != g.size()) {
    throw StructuralError("expected one precision matrix per vertex");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t n = shape_numel(g.vertex(VertexId{i}).shape);
    if (p[i].shape() != Shape{n, n}) {
      throw StructuralError("precision for vertex '" + g.vertex(VertexId{i}).name +
                            "' must be " + std::to_string(n) + "x" + std::to_string(n));
    }
  }
}

// Σᵢ⁻¹εᵢ for one sample, or εᵢ itself when precisions are off.
Tensor weighted_error(const AugmentedState& s, std::size_t vertex, std::size_t b) {
  Tensor e = batch_item(s.errors[vertex], b);
  if (!s.precisions) return e;
  return matvec((*s.precisions)[vertex], e).reshape(e.shape());
}

std::vector<Tensor> weighted_errors(const AugmentedState& s, std::size_t b) {
  const ComputationGraph& g = s.graph();
  std::vector<Tensor> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.vertex(VertexId{i}).is_input()) w[i] = weighted_error(s, i, b);
  }
  return w;
}

// Local vjps of every edge for one sample, evaluated at the frozen values
// with upstream Σⱼ⁻¹εⱼ. Edges whose parents are all clamped inputs are only
// evaluated when `with_inputs` is set.
std::vector<VjpResult> local_vjps(const AugmentedState& s, std::size_t b,
                                  const std::vector<Tensor>& w, bool with_inputs,
                                  bool want_params) {
  const ComputationGraph& g = s.graph();
  std::vector<VjpResult> local(g.size());
  std::vector<const Tensor*> pp;
  std::vector<const Tensor*> tp;
  const auto& frozen = s.frozen[b];
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vertex& v = g.vertex(VertexId{j});
    if (v.is_input()) continue;
    if (!with_inputs && !want_params) {
      const bool any_free = std::any_of(
          v.edge->parents.begin(), v.edge->parents.end(),
          [&](VertexId p) { return !g.vertex(p).is_input(); });
      if (!any_free) continue;
    }
    pp.clear();
    tp.clear();
    for (VertexId p : v.edge->parents) pp.push_back(&frozen[p.index]);
    for (ParamId p : v.edge->params) tp.push_back(&s.params[p.index]);
    local[j] = vjp(*v.edge, pp, tp, w[j], want_params);
  }
  return local;
}

// Sum of child contributions in ascending child order.
Tensor gather_message(const ComputationGraph& g, const std::vector<VjpResult>& local,
                      std::size_t i) {
  Tensor msg(g.vertex(VertexId{i}).shape);
  for (const ChildSlot& c : g.children(VertexId{i})) {
    msg += local[c.child.index].parents[c.slot];
  }
  return msg;
}

std::vector<std::size_t> update_order(const ComputationGraph& g,
                                      std::span<const VertexId> order) {
  std::vector<std::size_t> idx;
  if (order.empty()) {
    for (std::size_t i = 0; i < g.size(); ++i) idx.push_back(i);
    return idx;
  }
  std::vector<bool> seen(g.size(), false);
  for (VertexId v : order) {
    if (v.index >= g.size() || seen[v.index]) {
      throw StructuralError("update order must list every vertex exactly once");
    }
    seen[v.index] = true;
    idx.push_back(v.index);
  }
  if (idx.size() != g.size()) {
    throw StructuralError("update order must list every vertex exactly once");
  }
  return idx;
}

}  // namespace

AugmentedState init_episode(const AugmentedGraph& handle, ParamSet params,
                            std::span<const Tensor> inputs, const Tensor& targets,
                            std::optional<PrecisionSet> precisions) {
  const ComputationGraph& g = handle.graph();
  AugmentedState s;
  s.handle = &handle;
  s.predictions = forward_sweep(g, params, inputs);
  s.params = std::move(params);
  s.batch = s.predictions.front().extent(0);
  const VertexId out = g.output_vertex();
  if (targets.shape() != s.predictions[out.index].shape()) {
    throw StructuralError("targets " + shape_to_string(targets.shape()) +
                          " do not match output batch " +
                          shape_to_string(s.predictions[out.index].shape()));
  }
  if (precisions) require_precisions(g, *precisions);
  s.precisions = std::move(precisions);
  s.targets = targets;

  s.values = s.predictions;
  s.errors.reserve(g.size());
  for (const Tensor& p : s.predictions) s.errors.emplace_back(p.shape());
  s.errors[out.index] = output_error(g, s.predictions[out.index], targets);
  // With MSE this is exactly T; otherwise the value sits where v − v̂ equals
  // the clamped error.
  s.values[out.index] = g.loss() == Loss::mse
                            ? targets
                            : s.predictions[out.index] + s.errors[out.index];

  s.frozen.assign(s.batch, std::vector<Tensor>(g.size()));
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      s.frozen[b][i] = batch_item(s.predictions[i], b);
    }
  }
  return s;
}

double free_energy(const AugmentedState& s) {
  const ComputationGraph& g = s.graph();
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.vertex(VertexId{i}).is_input()) continue;
    for (std::size_t b = 0; b < s.batch; ++b) {
      const Tensor e = batch_item(s.errors[i], b);
      total += 0.5 * dot(e, weighted_error(s, i, b));
    }
    if (s.precisions) {
      total -= 0.5 * static_cast<double>(s.batch) * log_det_spd((*s.precisions)[i]);
    }
  }
  return total;
}

std::vector<Tensor> proposed_step(const AugmentedState& s, double eta_v,
                                  std::span<const VertexId> order) {
  const ComputationGraph& g = s.graph();
  const std::vector<std::size_t> idx = update_order(g, order);
  std::vector<Tensor> delta;
  delta.reserve(g.size());
  for (const Tensor& v : s.values) delta.emplace_back(v.shape());
  for (std::size_t b = 0; b < s.batch; ++b) {
    const std::vector<Tensor> w = weighted_errors(s, b);
    const std::vector<VjpResult> local = local_vjps(s, b, w, false, false);
    for (std::size_t i : idx) {
      if (s.handle->role(VertexId{i}) != VertexRole::internal) continue;
      // −∂F/∂vᵢ = −Σᵢ⁻¹εᵢ + Σⱼ (∂v̂ⱼ/∂vᵢ)ᵀ Σⱼ⁻¹εⱼ
      Tensor d = gather_message(g, local, i);
      d -= w[i];
      set_batch_item(delta[i], b, eta_v * d);
    }
  }
  return delta;
}

namespace {

double apply_step(AugmentedState& s, const std::vector<Tensor>& delta) {
  const ComputationGraph& g = s.graph();
  double change = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (s.handle->role(VertexId{i}) != VertexRole::internal) continue;
    s.values[i] += delta[i];
    s.errors[i] = s.values[i] - s.predictions[i];
    if (!s.values[i].all_finite()) {
      throw NumericError("non-finite value at vertex '" + g.vertex(VertexId{i}).name +
                         "' in iteration " + std::to_string(s.iteration + 1));
    }
    change = std::max(change, max_abs(delta[i]));
  }
  ++s.iteration;
  return change;
}

double max_norm(const std::vector<Tensor>& ts) {
  double m = 0.0;
  for (const Tensor& t : ts) m = std::max(m, max_abs(t));
  return m;
}

}  // namespace

double inference_step(AugmentedState& s, const InferenceSettings& settings,
                      std::span<const VertexId> order) {
  require_valid(settings);
  return apply_step(s, proposed_step(s, settings.eta_v, order));
}

RelaxReport relax(AugmentedState& s, const InferenceSettings& settings,
                  const RelaxObserver& observer) {
  require_valid(settings);
  RelaxReport r;
  for (;;) {
    std::vector<Tensor> delta = proposed_step(s, settings.eta_v);
    const double proposed = max_norm(delta);
    if (!std::isfinite(proposed)) {
      throw NumericError("non-finite inference update in iteration " +
                         std::to_string(s.iteration + 1));
    }
    if (proposed <= settings.tolerance) {
      r.converged = true;
      r.final_delta = proposed;
      break;
    }
    if (r.iterations == settings.max_iters) break;
    r.final_delta = apply_step(s, delta);
    ++r.iterations;
    if (observer) observer(s, r.final_delta);
  }
  s.converged = r.converged;
  r.final_free_energy = free_energy(s);
  return r;
}

std::vector<Tensor> backward_messages(const AugmentedState& s) {
  const ComputationGraph& g = s.graph();
  std::vector<Tensor> out;
  for (const Tensor& v : s.values) out.emplace_back(v.shape());
  for (std::size_t b = 0; b < s.batch; ++b) {
    const std::vector<Tensor> w = weighted_errors(s, b);
    const std::vector<VjpResult> local = local_vjps(s, b, w, true, false);
    for (std::size_t i = 0; i < g.size(); ++i) {
      set_batch_item(out[i], b, gather_message(g, local, i));
    }
  }
  return out;
}

GradientSet current_estimate(const AugmentedState& s) {
  const ComputationGraph& g = s.graph();
  GradientSet est;
  for (const ParamDecl& p : g.params()) est.by_param.emplace_back(p.shape);
  std::vector<Tensor> input_msg(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.vertex(VertexId{i}).is_input()) input_msg[i] = Tensor(s.values[i].shape());
  }
  for (std::size_t b = 0; b < s.batch; ++b) {
    const std::vector<Tensor> w = weighted_errors(s, b);
    const std::vector<VjpResult> local = local_vjps(s, b, w, true, true);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vertex& v = g.vertex(VertexId{i});
      if (v.is_input()) {
        set_batch_item(input_msg[i], b, gather_message(g, local, i));
        continue;
      }
      for (std::size_t k = 0; k < v.edge->params.size(); ++k) {
        est.by_param[v.edge->params[k].index] += local[i].params[k];
      }
    }
  }
  const double scale = -1.0 / static_cast<double>(s.batch);
  for (Tensor& t : est.by_param) {
    for (double& x : t.data()) x *= scale;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    est.by_vertex.push_back(g.vertex(VertexId{i}).is_input() ? -input_msg[i] : -s.errors[i]);
  }
  return est;
}

GradientSet equilibrium_errors(const AugmentedState& s) {
  if (!s.converged) {
    throw StateError("equilibrium errors requested before relax reported convergence");
  }
  return current_estimate(s);
}

ParamSet weight_update(const AugmentedState& s, const WeightUpdateSettings& settings) {
  if (settings.require_converged && !s.converged) {
    throw StateError("weight update requested before relax reported convergence");
  }
  if (!(settings.clamp_lo <= settings.clamp_hi)) {
    throw DomainError("weight clamp bounds are inverted");
  }
  const GradientSet est = current_estimate(s);
  ParamSet next = s.params;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const Tensor& grad = est.by_param[k];
    for (std::size_t i = 0; i < grad.numel(); ++i) {
      next[k][i] -= settings.eta_theta * std::clamp(grad[i], settings.clamp_lo, settings.clamp_hi);
    }
    if (!next[k].all_finite()) {
      throw NumericError("non-finite update for parameter '" + s.graph().params()[k].name + "'");
    }
  }
  return next;
}

DivergenceReport divergence(const ComputationGraph& g, const GradientSet& pc,
                            const GradientSet& ad, const DivergenceOptions& options) {
  if (pc.by_vertex.size() != g.size() || ad.by_vertex.size() != g.size() ||
      pc.by_param.size() != g.params().size() || ad.by_param.size() != g.params().size()) {
    throw StructuralError("gradient sets do not match the graph");
  }
  DivergenceReport r;
  auto entry = [](std::string name, bool is_param, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
      throw StructuralError("divergence: shapes differ for '" + name + "'");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) total += std::abs(a[i] - b[i]);
    DivergenceEntry e;
    e.name = std::move(name);
    e.is_param = is_param;
    e.mean_abs = a.numel() ? total / static_cast<double>(a.numel()) : 0.0;
    e.log_mean_abs = std::log(e.mean_abs);
    e.relative = relative_error(a, b);
    return e;
  };
  const VertexId out = g.output_vertex();
  std::size_t nv = 0;
  std::size_t np = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vertex& v = g.vertex(VertexId{i});
    if (VertexId{i} == out && !options.include_output) continue;
    if (v.is_input() && !options.include_inputs) continue;
    r.entries.push_back(entry(v.name, false, pc.by_vertex[i], ad.by_vertex[i]));
    r.mean_vertex += r.entries.back().mean_abs;
    r.max_relative_vertex = std::max(r.max_relative_vertex, r.entries.back().relative);
    ++nv;
  }
  for (std::size_t k = 0; k < g.params().size(); ++k) {
    r.entries.push_back(entry(g.params()[k].name, true, pc.by_param[k], ad.by_param[k]));
    r.mean_param += r.entries.back().mean_abs;
    r.max_relative_param = std::max(r.max_relative_param, r.entries.back().relative);
    ++np;
  }
  if (nv) r.mean_vertex /= static_cast<double>(nv);
  if (np) r.mean_param /= static_cast<double>(np);
  return r;
}

}  // namespace pcg
