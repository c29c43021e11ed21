// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pcgraph/autodiff.hpp"
#include "pcgraph/graph.hpp"
#include "pcgraph/random.hpp"
#include "pcgraph/tensor.hpp"

#ifndef PCGRAPH_FIXTURE_DIR
#define PCGRAPH_FIXTURE_DIR "tests/fixtures"
#endif

namespace pcg::testing {

inline std::string fixture(const std::string& name) {
  return std::string(PCGRAPH_FIXTURE_DIR) + "/" + name;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// v_L = tan(sqrt(theta v0)) + sin(v0^2), written out by hand.
inline double scalar_graph_value(double v0, double theta) {
  return std::tan(std::sqrt(theta * v0)) + std::sin(v0 * v0);
}

// dL/dv0 and dL/dtheta for L = 1/2 (v_L - T)^2.
inline double scalar_graph_dv0(double v0, double theta, double target) {
  const double r = std::sqrt(theta * v0);
  const double sec2 = 1.0 / (std::cos(r) * std::cos(r));
  const double dvl = sec2 * theta / (2.0 * r) + std::cos(v0 * v0) * 2.0 * v0;
  return (scalar_graph_value(v0, theta) - target) * dvl;
}

inline double scalar_graph_dtheta(double v0, double theta, double target) {
  const double r = std::sqrt(theta * v0);
  const double sec2 = 1.0 / (std::cos(r) * std::cos(r));
  return (scalar_graph_value(v0, theta) - target) * sec2 * v0 / (2.0 * r);
}

inline double inner(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

// Leading batch axis of one.
inline Tensor batch1(const Tensor& t) {
  Shape s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return t.reshape(s);
}

}  // namespace pcg::testing
