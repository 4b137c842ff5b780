// SVD-based splitting of a tensor into two factors with a relative
// Schmidt-value cutoff.

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <complex>
#include <stdexcept>

#include "quasi2d/tensor.hpp"

#ifndef lapack_complex_double
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

namespace q2d {

struct TruncationPolicy {
  /// Singular values with s / s_max below this are dropped.
  double schmidt_cutoff = 1e-12;
  std::optional<std::size_t> max_bond;

  void validate() const {
    if (!(schmidt_cutoff >= 0.0 && schmidt_cutoff < 1.0)) {
      throw std::invalid_argument("TruncationPolicy: schmidt_cutoff must lie in [0, 1)");
    }
    if (max_bond && *max_bond < 1) throw std::invalid_argument("TruncationPolicy: max_bond < 1");
  }

  static TruncationPolicy exact() { return {0.0, std::nullopt}; }
};

struct SvdSplit {
  DenseTensor left;               ///< left axes..., bond
  std::vector<double> singulars;  ///< descending
  DenseTensor right;              ///< bond, right axes...
  double discarded_weight = 0.0;  ///< sum of squared dropped singular values
};

/// Number of singular values kept under `policy` from a descending spectrum.
inline std::size_t retained_count(std::span<const double> s, const TruncationPolicy& policy) {
  if (s.empty() || s.front() <= 0.0) return 1;
  const double threshold = policy.schmidt_cutoff * s.front();
  std::size_t keep = 0;
  while (keep < s.size() && s[keep] >= threshold && s[keep] > 0.0) ++keep;
  if (policy.max_bond) keep = std::min(keep, *policy.max_bond);
  return std::max<std::size_t>(keep, 1);
}

/// Thin SVD of a matrix; singular values descending. LAPACK zgesvd (QR
/// iteration) is used because divide-and-conquer drivers lose accuracy on
/// the block-sparse matrices produced by conserved quantum numbers.
inline void thin_svd(const MatrixC& m, MatrixC& u, Eigen::VectorXd& s, MatrixC& v) {
  const lapack_int rows = static_cast<lapack_int>(m.rows()), cols = static_cast<lapack_int>(m.cols());
  const lapack_int k = std::min(rows, cols);
  if (k == 0) throw std::invalid_argument("thin_svd: empty matrix");
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor> a = m, uu(rows, k), vt(k, cols);
  s.resize(k);
  std::vector<double> superb(static_cast<std::size_t>(std::max<lapack_int>(1, k - 1)));
  const lapack_int info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', rows, cols, a.data(), rows, s.data(),
                                         uu.data(), rows, vt.data(), k, superb.data());
  if (info != 0) throw std::runtime_error("thin_svd: zgesvd failed with info " + std::to_string(info));
  u = uu;
  v = vt.adjoint();
}

/// Splits `t` into left (axes in `left_axes`, then the new bond) and right
/// (bond, then the remaining axes in original order). An all-zero input gives
/// a bond of extent 1 carrying a zero singular value.
inline SvdSplit svd_split(const DenseTensor& t, const std::vector<std::size_t>& left_axes,
                          const TruncationPolicy& policy) {
  policy.validate();
  if (left_axes.empty() || left_axes.size() >= t.rank()) {
    throw TensorError("svd_split: left axes must be a nonempty proper subset");
  }
  std::vector<bool> is_left(t.rank(), false);
  for (auto a : left_axes) {
    if (a >= t.rank() || is_left[a]) throw TensorError("svd_split: bad left axis");
    is_left[a] = true;
  }
  std::vector<std::size_t> perm = left_axes;
  Shape left_shape, right_shape;
  for (auto a : left_axes) left_shape.push_back(t.extent(a));
  for (std::size_t k = 0; k < t.rank(); ++k) {
    if (!is_left[k]) {
      perm.push_back(k);
      right_shape.push_back(t.extent(k));
    }
  }
  const DenseTensor tp = t.permuted(perm);
  const MatrixC m = tp.as_matrix(left_axes.size());

  MatrixC u, v;
  Eigen::VectorXd s;
  thin_svd(m, u, s, v);

  std::vector<double> spectrum(s.data(), s.data() + s.size());
  const std::size_t keep = retained_count(spectrum, policy);

  SvdSplit out;
  for (std::size_t k = keep; k < spectrum.size(); ++k) out.discarded_weight += spectrum[k] * spectrum[k];
  out.singulars.assign(spectrum.begin(), spectrum.begin() + static_cast<std::ptrdiff_t>(keep));
  if (spectrum.empty() || spectrum.front() <= 0.0) {
    out.discarded_weight = 0.0;
    out.singulars.assign(1, 0.0);
  }

  Shape ls = left_shape;
  ls.push_back(keep);
  Shape rs{keep};
  rs.insert(rs.end(), right_shape.begin(), right_shape.end());
  const auto k = static_cast<Eigen::Index>(keep);
  MatrixC ul = u.leftCols(k);
  MatrixC vr = v.leftCols(k).adjoint();
  out.left = DenseTensor::from_matrix(ul, std::move(ls));
  out.right = DenseTensor::from_matrix(vr, std::move(rs));
  return out;
}

/// Multiplies the leading axis of `t` by diag(s).
inline void scale_leading_axis(DenseTensor& t, std::span<const double> s) {
  const std::size_t block = t.size() / t.extent(0);
  for (std::size_t a = 0; a < t.extent(0); ++a) {
    for (std::size_t b = 0; b < block; ++b) t[a * block + b] *= s[a];
  }
}

/// Multiplies the trailing axis of `t` by diag(s).
inline void scale_trailing_axis(DenseTensor& t, std::span<const double> s) {
  const std::size_t last = t.extent(t.rank() - 1);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] *= s[i % last];
}

}  // namespace q2d
