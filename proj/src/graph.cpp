// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/graph.hpp"

#include <algorithm>
#include <cmath>

#include "pcgraph/edges.hpp"
#include "pcgraph/errors.hpp"

namespace pcg {

namespace {

template <typename E, std::size_t N>
std::optional<E> parse_name(const std::string& s,
                            const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (s == name) return value;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string name_of(E value, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "unknown";
}

constexpr std::pair<EdgeKind, const char*> kEdgeKinds[] = {
    {EdgeKind::dense, "dense"},
    {EdgeKind::conv2d, "conv2d"},
    {EdgeKind::maxpool2x2, "maxpool2x2"},
    {EdgeKind::nonlinearity, "nonlinearity"},
    {EdgeKind::add, "add"},
    {EdgeKind::hadamard, "hadamard"},
    {EdgeKind::concat, "concat"},
    {EdgeKind::slice, "slice"},
    {EdgeKind::scalar_fn, "scalar_fn"},
};

constexpr std::pair<Activation, const char*> kActivations[] = {
    {Activation::identity, "identity"},
    {Activation::tanh, "tanh"},
    {Activation::sigmoid, "sigmoid"},
    {Activation::relu, "relu"},
};

constexpr std::pair<ScalarFn, const char*> kScalarFns[] = {
    {ScalarFn::tan, "tan"},       {ScalarFn::sin, "sin"},
    {ScalarFn::sqrt, "sqrt"},     {ScalarFn::square, "square"},
    {ScalarFn::scale, "scale"},
};

constexpr std::pair<Loss, const char*> kLosses[] = {
    {Loss::mse, "mse"},
    {Loss::cross_entropy, "cross_entropy"},
};

std::string vertex_label(const Vertex& v, std::size_t index) {
  return "vertex " + std::to_string(index) + " '" + v.name + "'";
}

}  // namespace

std::string to_string(EdgeKind kind) { return name_of(kind, kEdgeKinds); }
std::string to_string(Activation act) { return name_of(act, kActivations); }
std::string to_string(ScalarFn fn) { return name_of(fn, kScalarFns); }
std::string to_string(Loss loss) { return name_of(loss, kLosses); }

std::optional<EdgeKind> parse_edge_kind(const std::string& s) {
  return parse_name(s, kEdgeKinds);
}
std::optional<Activation> parse_activation(const std::string& s) {
  return parse_name(s, kActivations);
}
std::optional<ScalarFn> parse_scalar_fn(const std::string& s) {
  return parse_name(s, kScalarFns);
}
std::optional<Loss> parse_loss(const std::string& s) {
  return parse_name(s, kLosses);
}

ComputationGraph::ComputationGraph(std::vector<Vertex> vertices,
                                   std::vector<ParamDecl> params,
                                   std::optional<VertexId> output, Loss loss,
                                   std::size_t loss_block)
    : vertices_(std::move(vertices)),
      params_(std::move(params)),
      output_(output),
      loss_(loss),
      loss_block_(loss_block),
      children_(vertices_.size()) {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vertex& v = vertices_[i];
    if (v.is_input()) {
      inputs_.push_back(VertexId{i});
      continue;
    }
    const auto& parents = v.edge->parents;
    for (std::size_t slot = 0; slot < parents.size(); ++slot) {
      // Out-of-range parents are left for validate() to report.
      if (parents[slot].index < vertices_.size()) {
        children_[parents[slot].index].push_back({VertexId{i}, slot});
      }
    }
  }
  for (auto& list : children_) {
    std::sort(list.begin(), list.end(), [](const ChildSlot& a, const ChildSlot& b) {
      return a.child != b.child ? a.child < b.child : a.slot < b.slot;
    });
  }
}

VertexId ComputationGraph::output_vertex() const {
  if (!output_) throw StructuralError("graph has no output vertex");
  return *output_;
}

std::optional<VertexId> ComputationGraph::find_vertex(const std::string& name) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i].name == name) return VertexId{i};
  }
  return std::nullopt;
}

std::optional<ParamId> ComputationGraph::find_param(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shape inference

ShapeInference infer_shape(const EdgeFunction& edge,
                           std::span<const Shape> parent_shapes,
                           std::span<const Shape> param_shapes) {
  auto fail = [](std::string why) { return ShapeInference{std::nullopt, std::move(why)}; };
  const std::size_t np = parent_shapes.size();
  if (np == 0) return fail("edge has no parents");

  const bool takes_params = edge.parameter_linear();
  if (!takes_params && !param_shapes.empty()) {
    return fail(to_string(edge.kind) + " edge takes no parameters");
  }

  switch (edge.kind) {
    case EdgeKind::dense: {
      if (param_shapes.size() != np) {
        return fail("dense edge needs one parameter per parent (" +
                    std::to_string(np) + " parents, " +
                    std::to_string(param_shapes.size()) + " parameters)");
      }
      std::size_t out = 0;
      for (std::size_t k = 0; k < np; ++k) {
        const Shape& w = param_shapes[k];
        if (w.size() != 2) {
          return fail("dense parameter " + std::to_string(k) + " has shape " +
                      shape_to_string(w) + ", expected a matrix");
        }
        if (w[1] != shape_numel(parent_shapes[k])) {
          return fail("dense parameter " + std::to_string(k) + " has shape " +
                      shape_to_string(w) + " but parent " + std::to_string(k) +
                      " has " + std::to_string(shape_numel(parent_shapes[k])) +
                      " elements");
        }
        if (k == 0) {
          out = w[0];
        } else if (w[0] != out) {
          return fail("dense parameters disagree on output size");
        }
      }
      if (out == 0) return fail("dense edge has zero outputs");
      return {Shape{out}, {}};
    }
    case EdgeKind::conv2d: {
      if (np != 1 || param_shapes.size() != 1) {
        return fail("conv2d edge needs one parent and one kernel bank");
      }
      const Shape& x = parent_shapes[0];
      const Shape& w = param_shapes[0];
      if (x.size() != 3) return fail("conv2d parent must be [C,H,W], got " + shape_to_string(x));
      if (w.size() != 4 || w[2] != w[3]) {
        return fail("conv2d kernel bank must be [F,C,k,k], got " + shape_to_string(w));
      }
      if (w[1] != x[0]) {
        return fail("conv2d kernel bank " + shape_to_string(w) +
                    " does not match parent channels " + shape_to_string(x));
      }
      if (w[2] == 0 || w[2] > x[1] || w[2] > x[2]) {
        return fail("conv2d kernel size " + std::to_string(w[2]) +
                    " does not fit image " + shape_to_string(x));
      }
      return {Shape{w[0], x[1] - w[2] + 1, x[2] - w[2] + 1}, {}};
    }
    case EdgeKind::maxpool2x2: {
      if (np != 1) return fail("maxpool2x2 takes one parent");
      const Shape& x = parent_shapes[0];
      if (x.size() != 3 || x[1] % 2 != 0 || x[2] % 2 != 0 || x[1] == 0 || x[2] == 0) {
        return fail("maxpool2x2 needs [C,H,W] with even H and W, got " +
                    shape_to_string(x));
      }
      return {Shape{x[0], x[1] / 2, x[2] / 2}, {}};
    }
    case EdgeKind::nonlinearity:
    case EdgeKind::scalar_fn:
      if (np != 1) return fail(to_string(edge.kind) + " takes one parent");
      return {parent_shapes[0], {}};
    case EdgeKind::add:
    case EdgeKind::hadamard:
      if (edge.kind == EdgeKind::hadamard && np != 2) {
        return fail("hadamard takes two parents");
      }
      for (std::size_t k = 1; k < np; ++k) {
        if (parent_shapes[k] != parent_shapes[0]) {
          return fail(to_string(edge.kind) + " parents have shapes " +
                      shape_to_string(parent_shapes[0]) + " and " +
                      shape_to_string(parent_shapes[k]));
        }
      }
      return {parent_shapes[0], {}};
    case EdgeKind::concat: {
      std::size_t n = 0;
      for (const Shape& s : parent_shapes) n += shape_numel(s);
      return {Shape{n}, {}};
    }
    case EdgeKind::slice: {
      if (np != 1) return fail("slice takes one parent");
      const std::size_t n = shape_numel(parent_shapes[0]);
      if (edge.length == 0 || edge.offset + edge.length > n) {
        return fail("slice [" + std::to_string(edge.offset) + ", " +
                    std::to_string(edge.offset + edge.length) +
                    ") does not fit a parent of " + std::to_string(n) + " elements");
      }
      return {Shape{edge.length}, {}};
    }
  }
  return fail("unknown edge kind");
}

// ---------------------------------------------------------------------------
// Builder

VertexId GraphBuilder::input(std::string name, Shape shape) {
  vertices_.push_back(Vertex{std::move(name), std::move(shape), std::nullopt});
  return VertexId{vertices_.size() - 1};
}

ParamId GraphBuilder::param(std::string name, Shape shape) {
  params_.push_back(ParamDecl{std::move(name), std::move(shape)});
  return ParamId{params_.size() - 1};
}

VertexId GraphBuilder::add_vertex(std::string name, EdgeFunction edge) {
  std::vector<Shape> parent_shapes;
  for (VertexId p : edge.parents) {
    if (p.index >= vertices_.size()) {
      throw StructuralError("vertex '" + name + "' reads undefined vertex " +
                            std::to_string(p.index));
    }
    parent_shapes.push_back(vertices_[p.index].shape);
  }
  std::vector<Shape> param_shapes;
  for (ParamId p : edge.params) {
    if (p.index >= params_.size()) {
      throw StructuralError("vertex '" + name + "' uses undefined parameter " +
                            std::to_string(p.index));
    }
    param_shapes.push_back(params_[p.index].shape);
  }
  ShapeInference inferred = infer_shape(edge, parent_shapes, param_shapes);
  if (!inferred.shape) {
    throw StructuralError("vertex '" + name + "' (" + to_string(edge.kind) +
                          "): " + inferred.problem);
  }
  vertices_.push_back(Vertex{std::move(name), std::move(*inferred.shape), std::move(edge)});
  return VertexId{vertices_.size() - 1};
}

VertexId GraphBuilder::dense(std::string name, std::vector<VertexId> parents,
                             std::vector<ParamId> params, Activation act) {
  EdgeFunction e;
  e.kind = EdgeKind::dense;
  e.parents = std::move(parents);
  e.params = std::move(params);
  e.activation = act;
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::conv2d(std::string name, VertexId parent, ParamId kernel,
                              Activation act) {
  EdgeFunction e;
  e.kind = EdgeKind::conv2d;
  e.parents = {parent};
  e.params = {kernel};
  e.activation = act;
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::maxpool2x2(std::string name, VertexId parent) {
  EdgeFunction e;
  e.kind = EdgeKind::maxpool2x2;
  e.parents = {parent};
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::nonlinearity(std::string name, VertexId parent, Activation act) {
  EdgeFunction e;
  e.kind = EdgeKind::nonlinearity;
  e.parents = {parent};
  e.activation = act;
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::add(std::string name, std::vector<VertexId> parents) {
  EdgeFunction e;
  e.kind = EdgeKind::add;
  e.parents = std::move(parents);
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::hadamard(std::string name, VertexId a, VertexId b) {
  EdgeFunction e;
  e.kind = EdgeKind::hadamard;
  e.parents = {a, b};
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::concat(std::string name, std::vector<VertexId> parents) {
  EdgeFunction e;
  e.kind = EdgeKind::concat;
  e.parents = std::move(parents);
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::slice(std::string name, VertexId parent, std::size_t offset,
                             std::size_t length) {
  EdgeFunction e;
  e.kind = EdgeKind::slice;
  e.parents = {parent};
  e.offset = offset;
  e.length = length;
  return add_vertex(std::move(name), std::move(e));
}

VertexId GraphBuilder::scalar_fn(std::string name, VertexId parent, ScalarFn fn,
                                 double scale) {
  EdgeFunction e;
  e.kind = EdgeKind::scalar_fn;
  e.parents = {parent};
  e.fn = fn;
  e.scale = scale;
  return add_vertex(std::move(name), std::move(e));
}

ComputationGraph GraphBuilder::build(VertexId output, Loss loss, std::size_t loss_block) && {
  ComputationGraph g(std::move(vertices_), std::move(params_), output, loss, loss_block);
  require_valid(g);
  return g;
}

// ---------------------------------------------------------------------------
// Validation

std::string ValidationReport::summary() const {
  if (problems.empty()) return "ok";
  std::string out;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (i) out += "; ";
    out += problems[i];
  }
  return out;
}

namespace {

bool has_cycle(const ComputationGraph& g) {
  // 0 = unvisited, 1 = on the stack, 2 = done. Iterative DFS over parent links.
  const std::size_t n = g.size();
  std::vector<int> state(n, 0);
  for (std::size_t root = 0; root < n; ++root) {
    if (state[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const Vertex& vx = g.vertex(VertexId{v});
      const std::size_t np = vx.is_input() ? 0 : vx.edge->parents.size();
      if (next == np) {
        state[v] = 2;
        stack.pop_back();
        continue;
      }
      const std::size_t p = vx.edge->parents[next++].index;
      if (p >= n) continue;
      if (state[p] == 1) return true;
      if (state[p] == 0) {
        state[p] = 1;
        stack.push_back({p, 0});
      }
    }
  }
  return false;
}

}  // namespace

ValidationReport validate(const ComputationGraph& g) {
  ValidationReport r;
  const std::size_t n = g.size();
  if (n == 0) {
    r.problems.push_back("graph has no vertices");
    return r;
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (g.vertex(VertexId{j}).name == g.vertex(VertexId{i}).name) {
        r.problems.push_back(vertex_label(g.vertex(VertexId{i}), i) +
                             " reuses the name of vertex " + std::to_string(j));
        break;
      }
    }
  }

  const bool cyclic = has_cycle(g);
  if (cyclic) r.problems.push_back("not acyclic");

  for (std::size_t i = 0; i < n; ++i) {
    const Vertex& v = g.vertex(VertexId{i});
    const std::string label = vertex_label(v, i);
    if (shape_numel(v.shape) == 0) r.problems.push_back(label + " has an empty shape");
    if (v.is_input()) continue;
    const EdgeFunction& e = *v.edge;
    const std::string edge_label = label + " (" + to_string(e.kind) + " edge)";
    if (e.parents.empty()) {
      r.problems.push_back(edge_label + " has no parents");
      continue;
    }
    bool refs_ok = true;
    for (VertexId p : e.parents) {
      if (p.index >= n) {
        r.problems.push_back(edge_label + " reads undefined vertex " +
                             std::to_string(p.index));
        refs_ok = false;
      } else if (p.index >= i && !cyclic) {
        r.problems.push_back(edge_label + " reads vertex " + std::to_string(p.index) +
                             ", which does not precede it");
      }
    }
    for (ParamId p : e.params) {
      if (p.index >= g.params().size()) {
        r.problems.push_back(edge_label + " uses undefined parameter " +
                             std::to_string(p.index));
        refs_ok = false;
      }
    }
    if (!refs_ok) continue;

    std::vector<Shape> parent_shapes;
    for (VertexId p : e.parents) parent_shapes.push_back(g.vertex(p).shape);
    std::vector<Shape> param_shapes;
    for (ParamId p : e.params) param_shapes.push_back(g.param(p).shape);
    ShapeInference inferred = infer_shape(e, parent_shapes, param_shapes);
    if (!inferred.shape) {
      r.problems.push_back(edge_label + ": " + inferred.problem);
    } else if (*inferred.shape != v.shape) {
      r.problems.push_back(edge_label + " declares shape " + shape_to_string(v.shape) +
                           " but its edge produces " + shape_to_string(*inferred.shape));
    }
  }

  // Parent and child lists must describe the same set of links.
  std::size_t parent_links = 0;
  std::size_t child_links = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vertex& v = g.vertex(VertexId{i});
    if (!v.is_input()) {
      for (VertexId p : v.edge->parents) parent_links += p.index < n ? 1 : 0;
    }
    for (const ChildSlot& c : g.children(VertexId{i})) {
      const Vertex& child = g.vertex(c.child);
      ++child_links;
      if (child.is_input() || c.slot >= child.edge->parents.size() ||
          child.edge->parents[c.slot].index != i) {
        r.problems.push_back(vertex_label(v, i) + " lists a child that does not read it");
      }
    }
  }
  if (parent_links != child_links) {
    r.problems.push_back("parent and child adjacency disagree");
  }

  for (std::size_t k = 0; k < g.params().size(); ++k) {
    if (shape_numel(g.params()[k].shape) == 0) {
      r.problems.push_back("parameter '" + g.params()[k].name + "' has an empty shape");
    }
  }

  if (!g.output()) {
    r.problems.push_back("no output vertex designated");
  } else if (g.output()->index >= n) {
    r.problems.push_back("output vertex " + std::to_string(g.output()->index) +
                         " does not exist");
  } else {
    const VertexId out = *g.output();
    const Vertex& v = g.vertex(out);
    if (!g.children(out).empty()) {
      r.problems.push_back("output " + vertex_label(v, out.index) + " has children");
    }
    if (v.is_input()) {
      r.problems.push_back("output " + vertex_label(v, out.index) + " is an input");
    }
    if (g.loss_block() != 0 && shape_numel(v.shape) % g.loss_block() != 0) {
      r.problems.push_back("loss block " + std::to_string(g.loss_block()) +
                           " does not divide the output size");
    }
  }
  return r;
}

void require_valid(const ComputationGraph& g) {
  ValidationReport r = validate(g);
  if (!r.ok()) throw StructuralError("invalid graph: " + r.summary());
}

void require_params(const ComputationGraph& g, const ParamSet& params) {
  if (params.size() != g.params().size()) {
    throw StructuralError("graph declares " + std::to_string(g.params().size()) +
                          " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].shape() != g.params()[k].shape) {
      throw StructuralError("parameter '" + g.params()[k].name + "' has shape " +
                            shape_to_string(params[k].shape()) + ", declared " +
                            shape_to_string(g.params()[k].shape));
    }
  }
}

// ---------------------------------------------------------------------------
// Forward sweep

std::size_t batch_size_of(const ComputationGraph& g, std::span<const Tensor> inputs) {
  const auto ids = g.inputs();
  if (inputs.size() != ids.size()) {
    throw StructuralError("graph has " + std::to_string(ids.size()) +
                          " input vertices, got " + std::to_string(inputs.size()) +
                          " input tensors");
  }
  std::optional<std::size_t> batch;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Vertex& v = g.vertex(ids[k]);
    const Shape& s = inputs[k].shape();
    const bool ok = s.size() == v.shape.size() + 1 &&
                    std::equal(v.shape.begin(), v.shape.end(), s.begin() + 1);
    if (!ok) {
      throw StructuralError("input '" + v.name + "' expects batches of " +
                            shape_to_string(v.shape) + ", got " + shape_to_string(s));
    }
    if (batch && *batch != s[0]) {
      throw StructuralError("input tensors disagree on batch size");
    }
    batch = s[0];
  }
  if (!batch || *batch == 0) throw StructuralError("empty batch");
  return *batch;
}

std::vector<Tensor> forward_sweep_with_overrides(
    const ComputationGraph& g, const ParamSet& params, std::span<const Tensor> inputs,
    const std::map<std::size_t, Tensor>& overrides) {
  require_params(g, params);
  const std::size_t batch = batch_size_of(g, inputs);
  const std::size_t n = g.size();

  std::vector<Tensor> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Shape s{batch};
    const Shape& vs = g.vertex(VertexId{i}).shape;
    s.insert(s.end(), vs.begin(), vs.end());
    out[i] = Tensor(std::move(s));
  }
  for (const auto& [index, value] : overrides) {
    if (index >= n || value.shape() != out[index].shape()) {
      throw StructuralError("override for vertex " + std::to_string(index) +
                            " has the wrong shape");
    }
  }
  const auto ids = g.inputs();
  for (std::size_t k = 0; k < ids.size(); ++k) out[ids[k].index] = inputs[k];

  std::vector<Tensor> sample(n);
  std::vector<const Tensor*> pp;
  std::vector<const Tensor*> tp;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vertex& v = g.vertex(VertexId{i});
      if (auto it = overrides.find(i); it != overrides.end()) {
        sample[i] = batch_item(it->second, b);
      } else if (v.is_input()) {
        sample[i] = batch_item(out[i], b);
      } else {
        pp.clear();
        tp.clear();
        for (VertexId p : v.edge->parents) pp.push_back(&sample[p.index]);
        for (ParamId p : v.edge->params) tp.push_back(&params[p.index]);
        sample[i] = edge_forward(*v.edge, pp, tp);
        if (!sample[i].all_finite()) {
          throw NumericError("non-finite value at " + vertex_label(v, i) +
                             " in the forward sweep");
        }
      }
      set_batch_item(out[i], b, sample[i]);
    }
  }
  return out;
}

std::vector<Tensor> forward_sweep(const ComputationGraph& g, const ParamSet& params,
                                  std::span<const Tensor> inputs) {
  return forward_sweep_with_overrides(g, params, inputs, {});
}

// ---------------------------------------------------------------------------
// Losses

Tensor softmax(const Tensor& logits) {
  double m = -INFINITY;
  for (double x : logits.data()) m = std::max(m, x);
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (double& x : out.data()) x /= total;
  return out;
}

namespace {

void require_loss_shapes(const Tensor& p, const Tensor& t, std::size_t block) {
  if (p.shape() != t.shape()) {
    throw StructuralError("prediction " + shape_to_string(p.shape()) + " and target " +
                          shape_to_string(t.shape()) + " differ in shape");
  }
  if (block != 0 && p.numel() % block != 0) {
    throw StructuralError("loss block " + std::to_string(block) + " does not divide " +
                          std::to_string(p.numel()) + " output elements");
  }
}

void require_batched(const Tensor& p, const Tensor& t) {
  if (p.rank() == 0) throw StructuralError("expected a batched prediction");
  if (p.shape() != t.shape()) {
    throw StructuralError("batched prediction " + shape_to_string(p.shape()) +
                          " and target " + shape_to_string(t.shape()) + " differ in shape");
  }
}

double cross_entropy(std::span<const double> p, std::span<const double> t) {
  double m = -INFINITY;
  for (double x : p) m = std::max(m, x);
  double z = 0.0;
  for (double x : p) z += std::exp(x - m);
  const double log_z = m + std::log(z);
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) total -= t[i] * (p[i] - log_z);
  return total;
}

}  // namespace

double loss_value(Loss loss, const Tensor& prediction, const Tensor& target,
                  std::size_t block) {
  require_loss_shapes(prediction, target, block);
  if (loss == Loss::mse) {
    double total = 0.0;
    for (std::size_t i = 0; i < target.numel(); ++i) {
      const double d = target[i] - prediction[i];
      total += d * d;
    }
    return 0.5 * total;
  }
  const std::size_t n = block ? block : prediction.numel();
  double total = 0.0;
  for (std::size_t at = 0; at < prediction.numel(); at += n) {
    total += cross_entropy(prediction.data().subspan(at, n), target.data().subspan(at, n));
  }
  return total;
}

double loss_value(const ComputationGraph& g, const Tensor& prediction,
                  const Tensor& target) {
  return loss_value(g.loss(), prediction, target, g.loss_block());
}

std::vector<double> sample_losses(Loss loss, const Tensor& predictions,
                                  const Tensor& targets, std::size_t block) {
  require_batched(predictions, targets);
  std::vector<double> out;
  for (std::size_t b = 0; b < predictions.extent(0); ++b) {
    out.push_back(
        loss_value(loss, batch_item(predictions, b), batch_item(targets, b), block));
  }
  return out;
}

double batch_loss(Loss loss, const Tensor& predictions, const Tensor& targets,
                  std::size_t block) {
  const std::vector<double> per = sample_losses(loss, predictions, targets, block);
  double total = 0.0;
  for (double x : per) total += x;
  return total / static_cast<double>(per.size());
}

double batch_loss(const ComputationGraph& g, const Tensor& predictions,
                  const Tensor& targets) {
  return batch_loss(g.loss(), predictions, targets, g.loss_block());
}

Tensor output_error(Loss loss, const Tensor& predictions, const Tensor& targets,
                    std::size_t block) {
  require_batched(predictions, targets);
  if (loss == Loss::mse) return targets - predictions;
  const std::size_t batch = predictions.extent(0);
  const std::size_t per = predictions.numel() / batch;
  if (block != 0 && per % block != 0) {
    throw StructuralError("loss block " + std::to_string(block) + " does not divide " +
                          std::to_string(per) + " output elements");
  }
  const std::size_t n = block ? block : per;
  Tensor out(predictions.shape());
  for (std::size_t at = 0; at < predictions.numel(); at += n) {
    Tensor logits(Shape{n}, std::vector<double>(predictions.data().begin() + at,
                                                predictions.data().begin() + at + n));
    const Tensor p = softmax(logits);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += targets[at + i];
    // d/dŷ of −Σ T log softmax(ŷ) is softmax(ŷ)·ΣT − T.
    for (std::size_t i = 0; i < n; ++i) out[at + i] = targets[at + i] - mass * p[i];
  }
  return out;
}

Tensor output_error(const ComputationGraph& g, const Tensor& predictions,
                    const Tensor& targets) {
  return output_error(g.loss(), predictions, targets, g.loss_block());
}

}  // namespace pcg
