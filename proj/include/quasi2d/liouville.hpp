// Liouville-space packing and superoperator builders.
//
// A d x d operator X is stored as the vector x[i * d + i'] = X(i, i').
// With that packing vec(A X B) = (A kron B^T) vec(X).

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "quasi2d/tensor.hpp"

namespace q2d {

inline std::vector<cplx> vectorize(const MatrixC& x) {
  if (x.rows() != x.cols()) throw std::invalid_argument("vectorize: matrix must be square");
  return {x.data(), x.data() + x.size()};  // row-major storage matches the packing
}

inline MatrixC unvectorize(std::span<const cplx> v, std::size_t d) {
  if (v.size() != d * d) throw std::invalid_argument("unvectorize: length is not d^2");
  MatrixC x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::copy(v.begin(), v.end(), x.data());
  return x;
}

/// Covector t with t . vec(X) = tr X.
inline std::vector<cplx> trace_covector(std::size_t d) {
  std::vector<cplx> t(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) t[i * d + i] = 1.0;
  return t;
}

inline std::vector<cplx> ones_covector(std::size_t n) { return std::vector<cplx>(n, 1.0); }

/// Throws unless rho is hermitian, unit-trace and positive semidefinite.
inline void check_density_matrix(const MatrixC& rho, double tol = 1e-10) {
  if (rho.rows() != rho.cols() || rho.rows() < 1) throw std::invalid_argument("density matrix must be square");
  if (std::abs(rho.trace() - cplx{1.0}) > tol) {
    throw std::invalid_argument("density matrix trace defect " + std::to_string(std::abs(rho.trace() - cplx{1.0})));
  }
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) throw std::invalid_argument("density matrix not hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixC> es(rho);
  if (es.eigenvalues().minCoeff() < -tol) throw std::invalid_argument("density matrix not positive semidefinite");
}

/// Superoperator of X -> A X B.
inline MatrixC sandwich_super(const MatrixC& a, const MatrixC& b) {
  return Eigen::kroneckerProduct(a, MatrixC(b.transpose())).eval();
}

/// X -> -i [H, X].
inline MatrixC hamiltonian_super(const MatrixC& h) {
  const MatrixC id = MatrixC::Identity(h.rows(), h.cols());
  return cplx{0.0, -1.0} * (sandwich_super(h, id) - sandwich_super(id, h));
}

/// X -> L X L^dag - {L^dag L, X} / 2.
inline MatrixC dissipator_super(const MatrixC& l) {
  const MatrixC id = MatrixC::Identity(l.rows(), l.cols());
  const MatrixC ldl = l.adjoint() * l;
  return sandwich_super(l, l.adjoint()) - 0.5 * (sandwich_super(ldl, id) + sandwich_super(id, ldl));
}

/// Reorders a superoperator on a product space with factor dimensions
/// `dims` from the packing (i_1..i_k)(i'_1..i'_k) to the per-factor packing
/// (i_1 i'_1)(i_2 i'_2)...(i_k i'_k).
inline MatrixC interleave_factors(const MatrixC& s, const std::vector<std::size_t>& dims) {
  std::size_t dh = 1;
  for (auto d : dims) dh *= d;
  if (static_cast<std::size_t>(s.rows()) != dh * dh || s.rows() != s.cols()) {
    throw std::invalid_argument("interleave_factors: superoperator size does not match factors");
  }
  const std::size_t k = dims.size();
  std::vector<Eigen::Index> map(dh * dh);
  std::vector<std::size_t> left(k), right(k);
  for (std::size_t a = 0; a < dh; ++a) {
    std::size_t x = a;
    for (std::size_t f = k; f-- > 0;) {
      left[f] = x % dims[f];
      x /= dims[f];
    }
    for (std::size_t b = 0; b < dh; ++b) {
      std::size_t y = b;
      for (std::size_t f = k; f-- > 0;) {
        right[f] = y % dims[f];
        y /= dims[f];
      }
      std::size_t target = 0;
      for (std::size_t f = 0; f < k; ++f) target = (target * dims[f] + left[f]) * dims[f] + right[f];
      map[a * dh + b] = static_cast<Eigen::Index>(target);
    }
  }
  MatrixC out(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r)
    for (Eigen::Index c = 0; c < s.cols(); ++c) out(map[static_cast<std::size_t>(r)], map[static_cast<std::size_t>(c)]) = s(r, c);
  return out;
}

/// Bosonic annihilator truncated at n_max quanta.
inline MatrixC annihilator(std::size_t n_max) {
  const auto n = static_cast<Eigen::Index>(n_max + 1);
  MatrixC b = MatrixC::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) b(k - 1, k) = std::sqrt(static_cast<double>(k));
  return b;
}

/// |row><col| on a d-dimensional space.
inline MatrixC projector(std::size_t d, std::size_t row, std::size_t col) {
  MatrixC p = MatrixC::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  p(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = 1.0;
  return p;
}

}  // namespace q2d
