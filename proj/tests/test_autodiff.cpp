// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include <doctest.h>

#include <cmath>
#include <functional>

#include "pcgraph/autodiff.hpp"
#include "pcgraph/conv.hpp"
#include "pcgraph/edges.hpp"
#include "pcgraph/errors.hpp"
#include "pcgraph/graph.hpp"
#include "pcgraph/models.hpp"
#include "pcgraph/random.hpp"
#include "test_util.hpp"

using namespace pcg;
using namespace pcg::testing;

namespace {

struct Instance {
  ComputationGraph g;
  ParamSet params;
  std::vector<Tensor> inputs;
  Tensor targets;
};

Shape batched(std::size_t b, const Shape& s) {
  Shape out{b};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

// Inputs drawn from N(0,1) (or U(lo,hi)); regression or one-hot targets.
Instance instantiate(ComputationGraph g, std::uint64_t seed, double lo = 0.0, double hi = 0.0) {
  Rng rng(seed);
  Instance inst{std::move(g), {}, {}, {}};
  for (const ParamDecl& p : inst.g.params()) inst.params.push_back(rng.normal_tensor(p.shape, 0.5));
  const std::size_t b = 2;
  for (VertexId in : inst.g.inputs()) {
    const Shape s = batched(b, inst.g.vertex(in).shape);
    inst.inputs.push_back(lo < hi ? rng.uniform_tensor(s, lo, hi) : rng.normal_tensor(s, 1.0));
  }
  const Shape& out = inst.g.vertex(inst.g.output_vertex()).shape;
  if (inst.g.loss() == Loss::mse) {
    inst.targets = rng.normal_tensor(batched(b, out), 1.0);
  } else {
    inst.targets = Tensor(batched(b, out));
    const std::size_t n = shape_numel(out);
    for (std::size_t s = 0; s < b; ++s) inst.targets[s * n + rng.below(n)] = 1.0;
  }
  return inst;
}

// reverse_ad against central differences at every input and parameter.
double worst_fd_error(const Instance& inst) {
  const GradientSet ad = reverse_ad(inst.g, inst.params, inst.inputs, inst.targets);
  double worst = 0.0;
  for (VertexId in : inst.g.inputs()) {
    const Tensor fd = finite_diff(inst.g, inst.params, inst.inputs, inst.targets, in);
    worst = std::max(worst, relative_error(ad.by_vertex[in.index], fd));
  }
  for (std::size_t k = 0; k < inst.params.size(); ++k) {
    const Tensor fd = finite_diff(inst.g, inst.params, inst.inputs, inst.targets, ParamId{k});
    worst = std::max(worst, relative_error(ad.by_param[k], fd));
  }
  return worst;
}

ComputationGraph one_edge(const std::function<VertexId(GraphBuilder&)>& body, Loss loss = Loss::mse) {
  GraphBuilder b;
  const VertexId out = body(b);
  return std::move(b).build(out, loss);
}

}  // namespace

TEST_CASE("perfect prediction gives zero gradients") {
  ModelSpec spec;
  const ComputationGraph g = build_mlp(spec);
  const ParamSet p = init_params(g, 1);
  Rng rng(1);
  const std::vector<Tensor> in{rng.normal_tensor(Shape{3, 4}, 1.0)};
  const Tensor t = forward_sweep(g, p, in)[g.output_vertex().index];
  const GradientSet ad = reverse_ad(g, p, in, t);
  for (const Tensor& v : ad.by_vertex) CHECK(max_abs(v) == 0.0);
  for (const Tensor& v : ad.by_param) CHECK(max_abs(v) == 0.0);
}

TEST_CASE("linear chain gradient by hand") {
  GraphBuilder b;
  const VertexId v0 = b.input("v0", Shape{1});
  const ParamId t1 = b.param("t1", Shape{1, 1});
  const ParamId t2 = b.param("t2", Shape{1, 1});
  const VertexId v1 = b.dense("v1", {v0}, {t1}, Activation::identity);
  const VertexId v2 = b.dense("v2", {v1}, {t2}, Activation::identity);
  const ComputationGraph g = std::move(b).build(v2, Loss::mse);
  const double x = 1.5, a = 0.7, c = -1.3, target = 0.25;
  const ParamSet p{Tensor(Shape{1, 1}, {a}), Tensor(Shape{1, 1}, {c})};
  const GradientSet ad =
      reverse_ad(g, p, std::vector<Tensor>{Tensor(Shape{1, 1}, {x})}, Tensor(Shape{1, 1}, {target}));
  const double v2v = c * a * x;
  CHECK(ad.by_param[0][0] == doctest::Approx(-(target - v2v) * c * x).epsilon(1e-15));
  CHECK(ad.by_param[1][0] == doctest::Approx(-(target - v2v) * a * x).epsilon(1e-15));
}

TEST_CASE("scalar test graph gradients match the closed form and finite differences") {
  const ComputationGraph g = build_scalar_test_graph();
  const ParamSet p{Tensor(Shape{1, 1}, {2.0})};
  const std::vector<Tensor> in{Tensor(Shape{1, 1}, {5.0})};
  const Tensor t(Shape{1, 1}, {3.0});
  const GradientSet ad = reverse_ad(g, p, in, t);
  const double dv0 = ad.by_vertex[0][0];
  CHECK(dv0 == doctest::Approx(scalar_graph_dv0(5.0, 2.0, 3.0)).epsilon(1e-12));
  CHECK(ad.by_param[0][0] == doctest::Approx(scalar_graph_dtheta(5.0, 2.0, 3.0)).epsilon(1e-12));
  const Tensor fd = finite_diff(g, p, in, t, VertexId{0}, 1e-6);
  CHECK(relative_error(ad.by_vertex[0], fd) <= 1e-6);
}

TEST_CASE("finite differences of a constant output are zero") {
  const ComputationGraph g = one_edge([](GraphBuilder& b) {
    const VertexId x = b.input("x", Shape{3});
    return b.scalar_fn("y", x, ScalarFn::scale, 0.0);
  });
  const std::vector<Tensor> in{Tensor(Shape{1, 3}, {1, 2, 3})};
  CHECK(max_abs(finite_diff(g, {}, in, Tensor(Shape{1, 3}, {4, 5, 6}), VertexId{0})) == 0.0);
}

TEST_CASE("finite differences of a quadratic match the closed form") {
  const ComputationGraph g = one_edge([](GraphBuilder& b) {
    const VertexId x = b.input("v0", Shape{1});
    const ParamId th = b.param("theta", Shape{1, 1});
    return b.dense("y", {x}, {th}, Activation::identity);
  });
  const double v0 = 1.7, theta = -0.4, target = 2.0;
  const ParamSet p{Tensor(Shape{1, 1}, {theta})};
  const std::vector<Tensor> in{Tensor(Shape{1, 1}, {v0})};
  const Tensor fd = finite_diff(g, p, in, Tensor(Shape{1, 1}, {target}), ParamId{0}, 1e-4);
  // exact for a quadratic up to rounding
  CHECK(fd[0] == doctest::Approx(-(target - theta * v0) * v0).epsilon(1e-9));
}

TEST_CASE("finite difference preconditions") {
  const ComputationGraph g = build_scalar_test_graph();
  const ParamSet p{Tensor(Shape{1, 1}, {2.0})};
  const std::vector<Tensor> in{Tensor(Shape{1, 1}, {5.0})};
  const Tensor t(Shape{1, 1}, {3.0});
  CHECK_THROWS_AS(finite_diff(g, p, in, t, VertexId{0}, 0.0), DomainError);
  CHECK_THROWS_AS(finite_diff(g, p, in, t, VertexId{0}, -1.0), DomainError);
  const std::vector<Tensor> at_zero{Tensor(Shape{1, 1}, {0.0})};
  CHECK_THROWS_AS(finite_diff(g, p, at_zero, t, VertexId{0}), DomainError);
}

TEST_CASE("seeded two-layer tanh network matches finite differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelSpec spec;
    spec.layers = {5, 7, 3};
    CHECK(worst_fd_error(instantiate(build_mlp(spec), seed)) <= 1e-5);
  }
}

TEST_CASE("every edge kind matches finite differences") {
  SUBCASE("dense, two parents") {
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      const VertexId x1 = b.input("x1", Shape{4});
      const VertexId x2 = b.input("x2", Shape{3});
      const ParamId w1 = b.param("W1", Shape{5, 4});
      const ParamId w2 = b.param("W2", Shape{5, 3});
      return b.dense("y", {x1, x2}, {w1, w2}, Activation::tanh);
    }), 11)) <= 1e-5);
  }
  SUBCASE("dense sigmoid and relu") {
    for (Activation act : {Activation::sigmoid, Activation::relu}) {
      CHECK(worst_fd_error(instantiate(one_edge([act](GraphBuilder& b) {
        const VertexId x = b.input("x", Shape{6});
        const ParamId w = b.param("W", Shape{4, 6});
        return b.dense("y", {x}, {w}, act);
      }), 12)) <= 1e-5);
    }
  }
  SUBCASE("conv2d on 16x16") {
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      const VertexId x = b.input("img", Shape{2, 16, 16});
      const ParamId k = b.param("K", Shape{3, 2, 3, 3});
      return b.conv2d("c", x, k, Activation::tanh);
    }), 13)) <= 1e-5);
  }
  SUBCASE("maxpool2x2") {
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      const VertexId x = b.input("img", Shape{2, 8, 8});
      return b.maxpool2x2("p", x);
    }), 14)) <= 1e-5);
  }
  SUBCASE("nonlinearities") {
    for (Activation act : {Activation::identity, Activation::tanh, Activation::sigmoid, Activation::relu}) {
      CHECK(worst_fd_error(instantiate(one_edge([act](GraphBuilder& b) {
        return b.nonlinearity("y", b.input("x", Shape{4, 4}), act);
      }), 15)) <= 1e-5);
    }
  }
  SUBCASE("add, hadamard, concat, slice") {
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      return b.add("y", {b.input("a", Shape{5}), b.input("b", Shape{5}), b.input("c", Shape{5})});
    }), 16)) <= 1e-5);
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      return b.hadamard("y", b.input("a", Shape{3, 4}), b.input("b", Shape{3, 4}));
    }), 17)) <= 1e-5);
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      return b.concat("y", {b.input("a", Shape{3}), b.input("b", Shape{2, 2})});
    }), 18)) <= 1e-5);
    CHECK(worst_fd_error(instantiate(one_edge([](GraphBuilder& b) {
      return b.slice("y", b.input("a", Shape{9}), 2, 5);
    }), 19)) <= 1e-5);
  }
  SUBCASE("scalar functions") {
    for (ScalarFn fn : {ScalarFn::tan, ScalarFn::sin, ScalarFn::sqrt, ScalarFn::square, ScalarFn::scale}) {
      CHECK(worst_fd_error(instantiate(one_edge([fn](GraphBuilder& b) {
        return b.scalar_fn("y", b.input("x", Shape{6}), fn, -1.5);
      }), 20, 0.2, 1.2)) <= 1e-5);
    }
  }
  SUBCASE("cross-entropy head, blocked") {
    GraphBuilder b;
    const VertexId x = b.input("x", Shape{4});
    const ParamId w = b.param("W", Shape{6, 4});
    const VertexId y = b.dense("y", {x}, {w}, Activation::identity);
    Instance inst = instantiate(std::move(b).build(y, Loss::cross_entropy, 3), 21);
    // one-hot per block of 3
    Rng rng(5);
    inst.targets = Tensor(Shape{2, 6});
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t blk = 0; blk < 2; ++blk) inst.targets[s * 6 + blk * 3 + rng.below(3)] = 1.0;
    CHECK(worst_fd_error(inst) <= 1e-5);
  }
}

TEST_CASE("vjp of an identity edge passes the upstream through") {
  EdgeFunction e;
  e.kind = EdgeKind::nonlinearity;
  e.parents = {VertexId{0}};
  const Tensor x = Tensor::vector({0.3, -2.0, 1.0});
  const Tensor u = Tensor::vector({1.0, 2.0, -4.0});
  const Tensor* ps[] = {&x};
  CHECK(vjp(e, ps, {}, u).parents[0] == u);
}

TEST_CASE("vjp of a linear dense edge") {
  EdgeFunction e;
  e.kind = EdgeKind::dense;
  e.parents = {VertexId{0}};
  e.params = {ParamId{0}};
  Rng rng(4);
  const Tensor x = rng.normal_tensor(Shape{4}, 1.0);
  const Tensor w = rng.normal_tensor(Shape{3, 4}, 1.0);
  const Tensor u = rng.normal_tensor(Shape{3}, 1.0);
  const Tensor* ps[] = {&x};
  const Tensor* ws[] = {&w};
  const VjpResult r = vjp(e, ps, ws, u);
  CHECK(relative_error(r.parents[0], matmul(transpose(w), u.reshape(Shape{3, 1})).flatten()) <= 1e-15);
  CHECK(relative_error(r.params[0], outer(u, x)) == 0.0);
}

TEST_CASE("maxpool routes the upstream to the argmax positions") {
  Rng rng(9);
  const Tensor x = rng.normal_tensor(Shape{1, 4, 4}, 1.0);
  const Tensor u = rng.normal_tensor(Shape{1, 2, 2}, 1.0);
  EdgeFunction e;
  e.kind = EdgeKind::maxpool2x2;
  e.parents = {VertexId{0}};
  const Tensor* ps[] = {&x};
  const Tensor back = vjp(e, ps, {}, u).parents[0];
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < 16; ++i) nonzero += back[i] != 0.0;
  CHECK(nonzero == 4);
  // finite differences of <pool(x), u>
  Tensor fd(x.shape());
  for (std::size_t i = 0; i < 16; ++i) {
    Tensor xp = x, xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    fd[i] = (inner(maxpool2x2_forward(xp).values, u) - inner(maxpool2x2_forward(xm).values, u)) / 2e-6;
  }
  CHECK(relative_error(back, fd) <= 1e-6);
}

TEST_CASE("maxpool ties go to the first index in row-major order") {
  const Tensor x(Shape{1, 2, 2}, {1.0, 1.0, 1.0, 1.0});
  CHECK(maxpool2x2_forward(x).argmax[0] == 0);
}

TEST_CASE("gradients are linear in the loss") {
  // L over [y0, y1] is the sum of the losses on each output element.
  auto build = [](std::size_t offset, std::size_t length) {
    GraphBuilder b;
    const VertexId x = b.input("x", Shape{3});
    const ParamId w = b.param("W", Shape{2, 3});
    const VertexId h = b.dense("h", {x}, {w}, Activation::tanh);
    const VertexId y = b.slice("y", h, offset, length);
    return std::move(b).build(y, Loss::mse);
  };
  const ComputationGraph whole = build(0, 2), first = build(0, 1), second = build(1, 1);
  Rng rng(31);
  const ParamSet p{rng.normal_tensor(Shape{2, 3}, 1.0)};
  const std::vector<Tensor> in{rng.normal_tensor(Shape{2, 3}, 1.0)};
  const Tensor t = rng.normal_tensor(Shape{2, 2}, 1.0);
  Tensor t0(Shape{2, 1}), t1(Shape{2, 1});
  for (std::size_t s = 0; s < 2; ++s) {
    t0[s] = t[2 * s];
    t1[s] = t[2 * s + 1];
  }
  const GradientSet a = reverse_ad(whole, p, in, t);
  const GradientSet b0 = reverse_ad(first, p, in, t0);
  const GradientSet b1 = reverse_ad(second, p, in, t1);
  CHECK(relative_error(a.by_param[0], b0.by_param[0] + b1.by_param[0]) <= 1e-14);
  CHECK(relative_error(a.by_vertex[0], b0.by_vertex[0] + b1.by_vertex[0]) <= 1e-14);
}

TEST_CASE("a vertex with k identical children receives k times the child gradient") {
  for (std::size_t k : {1, 2, 3, 5}) {
    GraphBuilder b;
    const VertexId x = b.input("x", Shape{3});
    const ParamId w = b.param("W", Shape{3, 3});
    const VertexId h = b.dense("h", {x}, {w}, Activation::tanh);
    std::vector<VertexId> kids;
    for (std::size_t j = 0; j < k; ++j) {
      kids.push_back(b.scalar_fn("c" + std::to_string(j), h, ScalarFn::scale, 1.0));
    }
    const VertexId out = b.add("out", kids);
    const ComputationGraph g = std::move(b).build(out, Loss::mse);
    Rng rng(40);
    const ParamSet p{rng.normal_tensor(Shape{3, 3}, 1.0)};
    const std::vector<Tensor> in{rng.normal_tensor(Shape{2, 3}, 1.0)};
    const GradientSet ad = reverse_ad(g, p, in, rng.normal_tensor(Shape{2, 3}, 1.0));
    const Tensor& child = ad.by_vertex[kids[0].index];
    CHECK(relative_error(ad.by_vertex[h.index], static_cast<double>(k) * child) <= 1e-15);
  }
}

TEST_CASE("adjoint identities of the structured edges") {
  Rng rng(77);
  SUBCASE("conv") {
    const Tensor x = rng.normal_tensor(Shape{2, 9, 9}, 1.0);
    const Tensor k = rng.normal_tensor(Shape{3, 2, 4, 4}, 1.0);
    const Tensor e = rng.normal_tensor(Shape{3, 6, 6}, 1.0);
    const double lhs = inner(conv_forward(x, k), e);
    CHECK(std::abs(lhs - inner(x, conv_backward_error(e, k))) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    const double kl = inner(conv_kernel_gradient(e, x, 4), k);
    CHECK(std::abs(lhs - kl) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
  SUBCASE("pool") {
    const Tensor x = rng.normal_tensor(Shape{2, 6, 6}, 1.0);
    const Tensor e = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
    const PoolResult p = maxpool2x2_forward(x);
    const double lhs = inner(p.values, e);
    CHECK(std::abs(lhs - inner(x, maxpool2x2_backward(e, p.argmax, x.shape()))) <= 1e-10);
  }
  SUBCASE("concat") {
    EdgeFunction c;
    c.kind = EdgeKind::concat;
    c.parents = {VertexId{0}, VertexId{1}};
    const Tensor a = rng.normal_tensor(Shape{4}, 1.0);
    const Tensor b = rng.normal_tensor(Shape{2, 3}, 1.0);
    const Tensor e = rng.normal_tensor(Shape{10}, 1.0);
    const Tensor* ps[] = {&a, &b};
    const VjpResult r = vjp(c, ps, {}, e);
    const double lhs = inner(edge_forward(c, ps, {}), e);
    CHECK(std::abs(lhs - inner(a, r.parents[0]) - inner(b, r.parents[1])) <= 1e-10);
  }
  SUBCASE("hadamard") {
    EdgeFunction h;
    h.kind = EdgeKind::hadamard;
    h.parents = {VertexId{0}, VertexId{1}};
    const Tensor a = rng.normal_tensor(Shape{7}, 1.0);
    const Tensor b = rng.normal_tensor(Shape{7}, 1.0);
    const Tensor e = rng.normal_tensor(Shape{7}, 1.0);
    const Tensor* ps[] = {&a, &b};
    const VjpResult r = vjp(h, ps, {}, e);
    const double lhs = inner(edge_forward(h, ps, {}), e);
    // bilinear: linear in each factor separately
    CHECK(std::abs(lhs - inner(a, r.parents[0])) <= 1e-10);
    CHECK(std::abs(lhs - inner(b, r.parents[1])) <= 1e-10);
  }
}

TEST_CASE("relative error floor") {
  CHECK(relative_error(Tensor::vector({0.0}), Tensor::vector({0.0})) == 0.0);
  CHECK(relative_error(Tensor::vector({1e-13}), Tensor::vector({0.0})) == doctest::Approx(0.1));
  CHECK(relative_error(Tensor::vector({1.1, 2.0}), Tensor::vector({1.0, 2.0})) == doctest::Approx(0.05));
}
