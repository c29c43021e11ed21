// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include <Eigen/Dense>
#include <cmath>

#include "pcgraph/errors.hpp"
#include "pcgraph/pcengine.hpp"

namespace pcg {

namespace {

constexpr double kMinEigenvalue = 1e-6;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_matrix(const Tensor& t) {
  if (t.rank() != 2 || t.extent(0) != t.extent(1)) {
    throw StructuralError("expected a square matrix, got " + shape_to_string(t.shape()));
  }
  const auto n = static_cast<Eigen::Index>(t.extent(0));
  return Eigen::Map<const Matrix>(t.data().data(), n, n);
}

Tensor to_tensor(const Matrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  Tensor t(Shape{n, n});
  Eigen::Map<Matrix>(t.data().data(), m.rows(), m.cols()) = m;
  return t;
}

// Σ_b ε_b ε_bᵀ with samples taken from the leading axis.
Matrix scatter(const Tensor& errors, std::size_t n) {
  const std::size_t batch = errors.rank() ? errors.extent(0) : 0;
  if (batch == 0 || errors.numel() != batch * n) {
    throw StructuralError("errors " + shape_to_string(errors.shape()) +
                          " do not match a " + std::to_string(n) + "-dimensional precision");
  }
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t b = 0; b < batch; ++b) {
    Eigen::Map<const Eigen::VectorXd> e(errors.data().data() + b * n,
                                        static_cast<Eigen::Index>(n));
    s += e * e.transpose();
  }
  return s;
}

}  // namespace

double log_det_spd(const Tensor& m) {
  Eigen::LLT<Matrix> llt(to_matrix(m));
  if (llt.info() != Eigen::Success) {
    throw NumericError("matrix is not positive definite");
  }
  const Matrix& l = llt.matrixL();
  double total = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) total += std::log(l(i, i));
  return 2.0 * total;
}

Tensor precision_gradient(const Tensor& sigma, const Tensor& errors) {
  const Matrix s = to_matrix(sigma);
  const Matrix p = s.inverse();
  const std::size_t n = sigma.extent(0);
  const double batch = static_cast<double>(errors.extent(0));
  return to_tensor(0.5 * (batch * p.transpose() -
                          p.transpose() * scatter(errors, n) * p.transpose()));
}

double precision_free_energy(const Tensor& sigma, const Tensor& errors) {
  const Matrix s = to_matrix(sigma);
  const std::size_t n = sigma.extent(0);
  const double batch = static_cast<double>(errors.extent(0));
  const Matrix p = s.inverse();
  // ½ Σ_b εᵀΣ⁻¹ε = ½ tr(Σ⁻¹ S)
  const double quad = 0.5 * (p * scatter(errors, n)).trace();
  const double log_det = std::log(std::abs(s.determinant()));
  return quad + 0.5 * batch * log_det;
}

PrecisionReport precision_update(const AugmentedState& state, double eta_sigma) {
  if (!state.precisions) throw StateError("precisions are not enabled for this episode");
  if (!state.converged) {
    throw StateError("precision update requested before relax reported convergence");
  }
  if (!(eta_sigma >= 0.0) || !std::isfinite(eta_sigma)) {
    throw DomainError("eta_sigma must be a finite nonnegative number");
  }
  const ComputationGraph& g = state.graph();
  PrecisionReport r;
  r.precisions = *state.precisions;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.vertex(VertexId{i}).is_input()) continue;
    const Matrix sigma = to_matrix((*state.precisions)[i]).inverse();
    const Tensor grad = precision_gradient(to_tensor(sigma), state.errors[i]);
    Matrix next = sigma - eta_sigma * to_matrix(grad);
    next = 0.5 * (next + next.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(next);
    if (eig.info() != Eigen::Success) {
      throw NumericError("eigendecomposition failed for vertex '" +
                         g.vertex(VertexId{i}).name + "'");
    }
    Eigen::VectorXd lambda = eig.eigenvalues();
    bool clamped = false;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (!(lambda(k) >= kMinEigenvalue)) {
        lambda(k) = kMinEigenvalue;
        clamped = true;
      }
    }
    const Matrix& q = eig.eigenvectors();
    Matrix p = q * lambda.cwiseInverse().asDiagonal() * q.transpose();
    p = 0.5 * (p + p.transpose()).eval();
    if (clamped) {
      r.projected.push_back(i);
      r.warnings.push_back("covariance of vertex '" + g.vertex(VertexId{i}).name +
                           "' was projected back to positive definite");
    }
    Tensor out = to_tensor(p);
    if (!out.all_finite()) {
      throw NumericError("non-finite precision at vertex '" + g.vertex(VertexId{i}).name + "'");
    }
    r.precisions[i] = std::move(out);
  }
  return r;
}

}  // namespace pcg
