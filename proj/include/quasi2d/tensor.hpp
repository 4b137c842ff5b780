// Dense complex tensors and pairwise contraction.
//
// Storage is row-major over the declared index order, so the last index
// varies fastest. Reshapes that keep that order are metadata-only.

#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace q2d {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

using MatrixC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

class TensorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

class DenseTensor {
 public:
  /// Rank-0 tensor holding a single zero.
  DenseTensor() : data_(1, cplx{0.0, 0.0}) {}

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_volume(shape_), cplx{0.0, 0.0});
  }

  DenseTensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_volume(shape_)) {
      throw TensorError("DenseTensor: " + std::to_string(data_.size()) + " values for shape " +
                        shape_string(shape_));
    }
  }

  static DenseTensor scalar(cplx value) { return DenseTensor(Shape{}, {value}); }

  template <class Rng>
  static DenseTensor random(Shape shape, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    DenseTensor t(std::move(shape));
    for (auto& v : t.data_) v = cplx{dist(rng), dist(rng)};
    return t;
  }

  std::size_t rank() const noexcept { return shape_.size(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }
  std::vector<cplx>& storage() noexcept { return data_; }
  const std::vector<cplx>& storage() const noexcept { return data_; }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t flat_index(std::span<const std::size_t> idx) const {
    if (idx.size() != rank()) throw TensorError("flat_index: wrong number of indices");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= shape_[k]) throw TensorError("flat_index: index out of range");
      flat = flat * shape_[k] + idx[k];
    }
    return flat;
  }

  cplx& at(std::initializer_list<std::size_t> idx) {
    return data_[flat_index(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }
  const cplx& at(std::initializer_list<std::size_t> idx) const {
    return data_[flat_index(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }

  /// Same values, new shape of equal volume.
  DenseTensor reshaped(Shape shape) const& {
    DenseTensor t = *this;
    t.reshape(std::move(shape));
    return t;
  }
  DenseTensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    if (shape_volume(shape) != data_.size()) {
      throw TensorError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    shape_ = std::move(shape);
    check_extents();
  }

  /// Result index k is input index perm[k].
  DenseTensor permuted(const std::vector<std::size_t>& perm) const {
    const std::size_t r = rank();
    if (perm.size() != r) throw TensorError("permute: permutation length mismatch");
    std::vector<bool> seen(r, false);
    for (auto p : perm) {
      if (p >= r || seen[p]) throw TensorError("permute: not a permutation");
      seen[p] = true;
    }
    bool identity = true;
    for (std::size_t k = 0; k < r; ++k) identity = identity && perm[k] == k;
    if (identity) return *this;

    Shape out_shape(r);
    for (std::size_t k = 0; k < r; ++k) out_shape[k] = shape_[perm[k]];
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t k = r; k-- > 1;) in_strides[k - 1] = in_strides[k] * shape_[k];
    std::vector<std::size_t> stride(r);
    for (std::size_t k = 0; k < r; ++k) stride[k] = in_strides[perm[k]];

    DenseTensor out(out_shape);
    std::vector<std::size_t> counter(r, 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < data_.size(); ++flat) {
      out.data_[flat] = data_[src];
      for (std::size_t k = r; k-- > 0;) {
        if (++counter[k] < out_shape[k]) {
          src += stride[k];
          break;
        }
        src -= stride[k] * (out_shape[k] - 1);
        counter[k] = 0;
      }
    }
    return out;
  }

  DenseTensor conj() const {
    DenseTensor t = *this;
    for (auto& v : t.data_) v = std::conj(v);
    return t;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  DenseTensor& operator*=(cplx a) {
    for (auto& v : data_) v *= a;
    return *this;
  }
  DenseTensor& operator+=(const DenseTensor& o) {
    if (o.shape_ != shape_) throw TensorError("operator+=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  DenseTensor& operator-=(const DenseTensor& o) {
    if (o.shape_ != shape_) throw TensorError("operator-=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  friend DenseTensor operator*(cplx a, DenseTensor t) { return t *= a; }
  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }

  /// Row-major matrix view; rows span the first `row_axes` indices.
  Eigen::Map<const MatrixC> as_matrix(std::size_t row_axes) const {
    auto [rows, cols] = split_volume(row_axes);
    return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
  Eigen::Map<MatrixC> as_matrix(std::size_t row_axes) {
    auto [rows, cols] = split_volume(row_axes);
    return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }

  static DenseTensor from_matrix(const MatrixC& m, Shape shape) {
    if (static_cast<std::size_t>(m.size()) != shape_volume(shape)) {
      throw TensorError("from_matrix: volume mismatch");
    }
    return DenseTensor(std::move(shape), std::vector<cplx>(m.data(), m.data() + m.size()));
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) throw TensorError("DenseTensor: zero extent in shape " + shape_string(shape_));
    }
  }

  std::pair<std::size_t, std::size_t> split_volume(std::size_t row_axes) const {
    if (row_axes > rank()) throw TensorError("as_matrix: too many row axes");
    std::size_t rows = 1;
    for (std::size_t k = 0; k < row_axes; ++k) rows *= shape_[k];
    return {rows, data_.size() / rows};
  }

  Shape shape_;
  std::vector<cplx> data_;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Sums over each (axis of a, axis of b) pair. The result keeps the free axes
/// of `a` followed by the free axes of `b`, each in original order.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            const std::vector<IndexPair>& pairs) {
  std::vector<bool> a_used(a.rank(), false), b_used(b.rank(), false);
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw TensorError("contract: index out of range");
    if (a_used[ia] || b_used[ib]) throw TensorError("contract: index paired twice");
    if (a.extent(ia) != b.extent(ib)) {
      throw TensorError("contract: extent mismatch " + std::to_string(a.extent(ia)) + " vs " +
                        std::to_string(b.extent(ib)));
    }
    a_used[ia] = b_used[ib] = true;
  }

  std::vector<std::size_t> perm_a, perm_b;
  Shape out_shape;
  for (std::size_t k = 0; k < a.rank(); ++k) {
    if (!a_used[k]) {
      perm_a.push_back(k);
      out_shape.push_back(a.extent(k));
    }
  }
  const std::size_t a_free = perm_a.size();
  for (auto [ia, ib] : pairs) {
    perm_a.push_back(ia);
    perm_b.push_back(ib);
  }
  for (std::size_t k = 0; k < b.rank(); ++k) {
    if (!b_used[k]) {
      perm_b.push_back(k);
      out_shape.push_back(b.extent(k));
    }
  }

  const DenseTensor ap = a.permuted(perm_a);
  const DenseTensor bp = b.permuted(perm_b);
  const auto ma = ap.as_matrix(a_free);
  const auto mb = bp.as_matrix(pairs.size());
  MatrixC prod = ma * mb;
  return DenseTensor::from_matrix(prod, std::move(out_shape));
}

/// Tensor product: a's axes then b's axes.
inline DenseTensor outer(const DenseTensor& a, const DenseTensor& b) { return contract(a, b, {}); }

}  // namespace q2d
