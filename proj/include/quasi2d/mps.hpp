// Matrix product states and operators with orthogonality-center
// bookkeeping.
//
// Site tensors of a state are (left bond, physical, right bond); operator
// sites are (left bond, physical out, physical in, right bond). The outer
// bonds of a chain may exceed 1, in which case they act as spectator legs
// that every operation here leaves untouched.

#pragma once

#include <optional>
#include <vector>

#include <Eigen/QR>

#include "quasi2d/svd.hpp"
#include "quasi2d/tensor.hpp"

namespace q2d {

enum class Sweep { LeftToRight, RightToLeft };

struct MatrixProductState {
  std::vector<DenseTensor> sites;
  /// Orthogonality center; sites to its left are left-orthonormal and sites
  /// to its right are right-orthonormal. Empty when no gauge is known.
  std::optional<std::size_t> center;

  std::size_t size() const noexcept { return sites.size(); }
  std::size_t phys(std::size_t i) const { return sites.at(i).extent(1); }
  std::size_t left_bond(std::size_t i) const { return sites.at(i).extent(0); }
  std::size_t right_bond(std::size_t i) const { return sites.at(i).extent(2); }

  std::size_t max_bond() const {
    std::size_t m = 1;
    for (const auto& s : sites) m = std::max({m, s.extent(0), s.extent(2)});
    return m;
  }

  void validate() const {
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (sites[i].rank() != 3) throw TensorError("MPS: site " + std::to_string(i) + " is not rank 3");
      if (i + 1 < sites.size() && sites[i].extent(2) != sites[i + 1].extent(0)) {
        throw TensorError("MPS: bond mismatch between sites " + std::to_string(i) + " and " +
                          std::to_string(i + 1));
      }
    }
    if (center && *center >= sites.size()) throw TensorError("MPS: center out of range");
  }

  /// Product state from local vectors.
  static MatrixProductState product(const std::vector<std::vector<cplx>>& locals) {
    MatrixProductState psi;
    for (const auto& v : locals) psi.sites.emplace_back(Shape{1, v.size(), 1}, v);
    psi.center.reset();
    return psi;
  }
};

struct MatrixProductOperator {
  std::vector<DenseTensor> sites;

  std::size_t size() const noexcept { return sites.size(); }

  void validate() const {
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (sites[i].rank() != 4) throw TensorError("MPO: site " + std::to_string(i) + " is not rank 4");
      if (i + 1 < sites.size() && sites[i].extent(3) != sites[i + 1].extent(0)) {
        throw TensorError("MPO: bond mismatch between sites " + std::to_string(i) + " and " +
                          std::to_string(i + 1));
      }
    }
    if (!sites.empty() && (sites.front().extent(0) != 1 || sites.back().extent(3) != 1)) {
      throw TensorError("MPO: boundary bonds must have extent 1");
    }
  }

  /// Identity operator for the given physical extents.
  static MatrixProductOperator identity(const std::vector<std::size_t>& phys) {
    MatrixProductOperator op;
    for (auto p : phys) {
      DenseTensor w(Shape{1, p, p, 1});
      for (std::size_t i = 0; i < p; ++i) w.at({0, i, i, 0}) = 1.0;
      op.sites.push_back(std::move(w));
    }
    return op;
  }
};

namespace detail {

inline void shift_center_right(MatrixProductState& psi, std::size_t i) {
  DenseTensor& a = psi.sites[i];
  const std::size_t l = a.extent(0), p = a.extent(1), r = a.extent(2);
  MatrixC m = a.as_matrix(2);
  Eigen::HouseholderQR<MatrixC> qr(m);
  const auto k = std::min<Eigen::Index>(m.rows(), m.cols());
  MatrixC q = qr.householderQ() * MatrixC::Identity(m.rows(), k);
  MatrixC rr = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  a = DenseTensor::from_matrix(q, {l, p, static_cast<std::size_t>(k)});
  DenseTensor rt = DenseTensor::from_matrix(rr, {static_cast<std::size_t>(k), r});
  psi.sites[i + 1] = contract(rt, psi.sites[i + 1], {{1, 0}});
}

inline void shift_center_left(MatrixProductState& psi, std::size_t i) {
  DenseTensor& a = psi.sites[i];
  const std::size_t l = a.extent(0), p = a.extent(1), r = a.extent(2);
  MatrixC m = a.as_matrix(1).adjoint();
  Eigen::HouseholderQR<MatrixC> qr(m);
  const auto k = std::min<Eigen::Index>(m.rows(), m.cols());
  MatrixC q = qr.householderQ() * MatrixC::Identity(m.rows(), k);
  MatrixC rr = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  MatrixC qa = q.adjoint();
  MatrixC ra = rr.adjoint();
  a = DenseTensor::from_matrix(qa, {static_cast<std::size_t>(k), p, r});
  DenseTensor rt = DenseTensor::from_matrix(ra, {l, static_cast<std::size_t>(k)});
  psi.sites[i - 1] = contract(psi.sites[i - 1], rt, {{2, 0}});
}

}  // namespace detail

/// Moves (or establishes) the orthogonality center without truncation.
inline void move_center(MatrixProductState& psi, std::size_t target) {
  if (target >= psi.size()) throw TensorError("move_center: position out of range");
  if (!psi.center) {
    for (std::size_t i = 0; i < target; ++i) detail::shift_center_right(psi, i);
    for (std::size_t i = psi.size() - 1; i > target; --i) detail::shift_center_left(psi, i);
  } else {
    for (std::size_t i = *psi.center; i < target; ++i) detail::shift_center_right(psi, i);
    for (std::size_t i = *psi.center; i > target; --i) detail::shift_center_left(psi, i);
  }
  psi.center = target;
}

/// Copy of `psi` in mixed-canonical form about `center`.
inline MatrixProductState canonicalize(MatrixProductState psi, std::size_t center) {
  psi.center.reset();
  move_center(psi, center);
  return psi;
}

/// Deviation of site i from left- (or right-) orthonormality, max-abs.
inline double orthonormality_defect(const DenseTensor& site, Sweep side) {
  const std::size_t rows_axes = side == Sweep::LeftToRight ? 2 : 1;
  MatrixC m = site.as_matrix(rows_axes);
  MatrixC g = side == Sweep::LeftToRight ? MatrixC(m.adjoint() * m) : MatrixC(m * m.adjoint());
  return (g - MatrixC::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

/// Replaces sites i, i+1 with the SVD split of `theta` (l, p_i, p_{i+1}, r).
/// The center ends on the side named by `center_to`.
inline double split_two_site(MatrixProductState& psi, std::size_t i, const DenseTensor& theta,
                             const TruncationPolicy& policy, Sweep center_to) {
  SvdSplit sp = svd_split(theta, {0, 1}, policy);
  if (center_to == Sweep::LeftToRight) {
    scale_leading_axis(sp.right, sp.singulars);
    psi.center = i + 1;
  } else {
    scale_trailing_axis(sp.left, sp.singulars);
    psi.center = i;
  }
  psi.sites[i] = std::move(sp.left);
  psi.sites[i + 1] = std::move(sp.right);
  return sp.discarded_weight;
}

/// Exchanges the physical legs of sites `site` and `site + 1`. Returns the
/// discarded weight of the split.
inline double swap_adjacent(MatrixProductState& psi, std::size_t site, const TruncationPolicy& policy,
                            Sweep center_to = Sweep::LeftToRight) {
  if (site + 1 >= psi.size()) throw TensorError("swap_adjacent: site out of range");
  if (!psi.center || (*psi.center != site && *psi.center != site + 1)) move_center(psi, site);
  DenseTensor theta = contract(psi.sites[site], psi.sites[site + 1], {{2, 0}});  // l p1 p2 r
  theta = theta.permuted({0, 2, 1, 3});
  return split_two_site(psi, site, theta, policy, center_to);
}

/// Truncating sweep over the closed range [first, last]. Sites outside the
/// range must already be orthonormal towards it (any gauge defect lives
/// inside the range). On exit the center sits at `last` for a left-to-right
/// sweep and at `first` otherwise.
inline double compress_range(MatrixProductState& psi, std::size_t first, std::size_t last,
                             const TruncationPolicy& policy, Sweep direction) {
  if (first > last || last >= psi.size()) throw TensorError("compress_range: bad range");
  double discarded = 0.0;
  if (direction == Sweep::LeftToRight) {
    for (std::size_t i = last; i > first; --i) detail::shift_center_left(psi, i);
    for (std::size_t i = first; i < last; ++i) {
      SvdSplit sp = svd_split(psi.sites[i], {0, 1}, policy);
      scale_leading_axis(sp.right, sp.singulars);
      psi.sites[i] = std::move(sp.left);
      psi.sites[i + 1] = contract(sp.right, psi.sites[i + 1], {{1, 0}});
      discarded += sp.discarded_weight;
    }
    psi.center = last;
  } else {
    for (std::size_t i = first; i < last; ++i) detail::shift_center_right(psi, i);
    for (std::size_t i = last; i > first; --i) {
      SvdSplit sp = svd_split(psi.sites[i], {0}, policy);
      scale_trailing_axis(sp.left, sp.singulars);
      psi.sites[i] = std::move(sp.right);
      psi.sites[i - 1] = contract(psi.sites[i - 1], sp.left, {{2, 0}});
      discarded += sp.discarded_weight;
    }
    psi.center = first;
  }
  return discarded;
}

/// Applies `op` to sites [first, first + op.size()) and recompresses that
/// range. Returns the discarded weight of the recompression.
inline double apply_mpo(MatrixProductState& psi, const MatrixProductOperator& op, const TruncationPolicy& policy,
                        std::size_t first = 0, Sweep direction = Sweep::LeftToRight) {
  op.validate();
  if (op.size() == 0) return 0.0;
  if (first + op.size() > psi.size()) throw TensorError("apply_mpo: length mismatch");
  const std::size_t last = first + op.size() - 1;
  if (!psi.center || *psi.center < first || *psi.center > last) move_center(psi, first);
  for (std::size_t k = 0; k < op.size(); ++k) {
    const DenseTensor& w = op.sites[k];
    DenseTensor& a = psi.sites[first + k];
    if (w.extent(2) != a.extent(1)) throw TensorError("apply_mpo: physical extent mismatch");
    const std::size_t l = a.extent(0), r = a.extent(2);
    const std::size_t wl = w.extent(0), po = w.extent(1), wr = w.extent(3);
    // (l, i, r) x (wl, o, i, wr) -> (l, r, wl, o, wr) -> (l, wl, o, r, wr)
    DenseTensor t = contract(a, w, {{1, 2}}).permuted({0, 2, 3, 1, 4});
    a = std::move(t).reshaped({l * wl, po, r * wr});
  }
  return compress_range(psi, first, last, policy, direction);
}

/// Inserts a site whose bonds are the identity on the bond currently
/// entering position `pos`. The inserted tensor is an isometry, so the
/// gauge is unchanged apart from index shifts.
inline void insert_identity_site(MatrixProductState& psi, std::size_t pos, const std::vector<cplx>& local) {
  if (pos > psi.size()) throw TensorError("insert_identity_site: position out of range");
  std::size_t chi = 1;
  if (pos < psi.size()) chi = psi.left_bond(pos);
  else if (pos > 0) chi = psi.right_bond(pos - 1);
  double nrm = 0.0;
  for (const auto& v : local) nrm += std::norm(v);
  DenseTensor s(Shape{chi, local.size(), chi});
  for (std::size_t b = 0; b < chi; ++b) {
    for (std::size_t p = 0; p < local.size(); ++p) s.at({b, p, b}) = local[p];
  }
  psi.sites.insert(psi.sites.begin() + static_cast<std::ptrdiff_t>(pos), std::move(s));
  if (psi.center) {
    if (std::abs(nrm - 1.0) > 1e-14) psi.center.reset();
    else if (*psi.center >= pos) ++*psi.center;
  }
}

/// Sums site `pos` against `covector` and absorbs the result into a neighbour.
inline void contract_out_site(MatrixProductState& psi, std::size_t pos, const std::vector<cplx>& covector) {
  if (psi.size() < 2) throw TensorError("contract_out_site: chain too short");
  if (covector.size() != psi.phys(pos)) throw TensorError("contract_out_site: covector extent mismatch");
  DenseTensor v(Shape{covector.size()}, covector);
  DenseTensor m = contract(psi.sites[pos], v, {{1, 0}});  // (l, r)
  if (pos + 1 < psi.size()) {
    psi.sites[pos + 1] = contract(m, psi.sites[pos + 1], {{1, 0}});
    if (psi.center) psi.center = (*psi.center <= pos + 1) ? std::optional<std::size_t>(pos) : std::nullopt;
  } else {
    psi.sites[pos - 1] = contract(psi.sites[pos - 1], m, {{2, 0}});
    if (psi.center) psi.center = (*psi.center >= pos - 1) ? std::optional<std::size_t>(pos - 1) : std::nullopt;
  }
  psi.sites.erase(psi.sites.begin() + static_cast<std::ptrdiff_t>(pos));
}

/// Full contraction into a dense tensor (left boundary, physical..., right boundary).
inline DenseTensor to_dense(const MatrixProductState& psi) {
  if (psi.size() == 0) throw TensorError("to_dense: empty chain");
  DenseTensor acc = psi.sites.front();
  for (std::size_t i = 1; i < psi.size(); ++i) acc = contract(acc, psi.sites[i], {{acc.rank() - 1, 0}});
  return acc;
}

/// Dense state vector, valid when both boundary bonds have extent 1.
inline VectorC to_dense_vector(const MatrixProductState& psi) {
  DenseTensor t = to_dense(psi);
  VectorC v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v[static_cast<Eigen::Index>(i)] = t[i];
  return v;
}

/// Contracts every site with its own local covector; returns the boundary
/// matrix (left bond x right bond) of the chain.
inline MatrixC contract_with_covectors(const MatrixProductState& psi,
                                       const std::vector<std::vector<cplx>>& covectors) {
  if (covectors.size() != psi.size()) throw TensorError("contract_with_covectors: length mismatch");
  MatrixC env;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const DenseTensor& a = psi.sites[i];
    if (covectors[i].size() != a.extent(1)) throw TensorError("contract_with_covectors: extent mismatch");
    const auto l = static_cast<Eigen::Index>(a.extent(0)), r = static_cast<Eigen::Index>(a.extent(2));
    MatrixC m = MatrixC::Zero(l, r);
    for (Eigen::Index x = 0; x < l; ++x) {
      for (std::size_t p = 0; p < a.extent(1); ++p) {
        const cplx c = covectors[i][p];
        if (c == cplx{}) continue;
        for (Eigen::Index y = 0; y < r; ++y) {
          m(x, y) += c * a[(static_cast<std::size_t>(x) * a.extent(1) + p) * a.extent(2) + static_cast<std::size_t>(y)];
        }
      }
    }
    env = (i == 0) ? m : MatrixC(env * m);
  }
  return env;
}

/// Physical-leg vector of site `pos` with every other site contracted against
/// its covector. Outer boundary bonds must have extent 1.
inline std::vector<cplx> site_marginal(const MatrixProductState& psi, std::size_t pos,
                                       const std::vector<std::vector<cplx>>& covectors) {
  if (pos >= psi.size()) throw TensorError("site_marginal: position out of range");
  if (covectors.size() != psi.size()) throw TensorError("site_marginal: length mismatch");
  if (psi.left_bond(0) != 1 || psi.right_bond(psi.size() - 1) != 1) {
    throw TensorError("site_marginal: open boundary bonds");
  }
  auto reduce = [&](std::size_t i) {
    const DenseTensor& a = psi.sites[i];
    if (covectors[i].size() != a.extent(1)) throw TensorError("site_marginal: extent mismatch");
    DenseTensor v(Shape{a.extent(1)}, covectors[i]);
    return contract(a, v, {{1, 0}}).as_matrix(1).eval();  // (l, r)
  };
  MatrixC left = MatrixC::Ones(1, 1), right = MatrixC::Ones(1, 1);
  for (std::size_t i = 0; i < pos; ++i) left = left * reduce(i);
  for (std::size_t i = psi.size(); i-- > pos + 1;) right = reduce(i) * right;
  const DenseTensor& a = psi.sites[pos];
  std::vector<cplx> out(a.extent(1), 0.0);
  for (std::size_t l = 0; l < a.extent(0); ++l)
    for (std::size_t p = 0; p < a.extent(1); ++p)
      for (std::size_t r = 0; r < a.extent(2); ++r)
        out[p] += left(0, static_cast<Eigen::Index>(l)) * a.at({l, p, r}) * right(static_cast<Eigen::Index>(r), 0);
  return out;
}

/// site_marginal for every site, sharing the boundary environments.
inline std::vector<std::vector<cplx>> all_site_marginals(const MatrixProductState& psi,
                                                         const std::vector<std::vector<cplx>>& covectors) {
  const std::size_t n = psi.size();
  if (covectors.size() != n) throw TensorError("all_site_marginals: length mismatch");
  if (n == 0 || psi.left_bond(0) != 1 || psi.right_bond(n - 1) != 1) {
    throw TensorError("all_site_marginals: open boundary bonds");
  }
  std::vector<MatrixC> reduced(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DenseTensor& a = psi.sites[i];
    if (covectors[i].size() != a.extent(1)) throw TensorError("all_site_marginals: extent mismatch");
    DenseTensor v(Shape{a.extent(1)}, covectors[i]);
    reduced[i] = contract(a, v, {{1, 0}}).as_matrix(1);
  }
  std::vector<MatrixC> left(n + 1), right(n + 1);
  left[0] = MatrixC::Ones(1, 1);
  for (std::size_t i = 0; i < n; ++i) left[i + 1] = left[i] * reduced[i];
  right[n] = MatrixC::Ones(1, 1);
  for (std::size_t i = n; i-- > 0;) right[i] = reduced[i] * right[i + 1];
  std::vector<std::vector<cplx>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DenseTensor& a = psi.sites[i];
    out[i].assign(a.extent(1), 0.0);
    for (std::size_t l = 0; l < a.extent(0); ++l)
      for (std::size_t p = 0; p < a.extent(1); ++p)
        for (std::size_t r = 0; r < a.extent(2); ++r)
          out[i][p] += left[i](0, static_cast<Eigen::Index>(l)) * a.at({l, p, r}) *
                       right[i + 1](static_cast<Eigen::Index>(r), 0);
  }
  return out;
}

}  // namespace q2d
