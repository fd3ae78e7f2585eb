#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "p3lm/errors.hpp"

namespace p3lm {

// Dense row-major array. Rank is dynamic but almost everything in the model
// is rank 1 or 2; scalars are stored as shape {1}. The element type is a
// template parameter so the whole numeric stack can run in 64-bit mode for
// verification; DenseArray (float) is the storage/production instantiation.
template <typename T>
struct ArrayT {
  std::vector<std::int64_t> shape;
  std::vector<T> v;

  ArrayT() = default;
  explicit ArrayT(std::vector<std::int64_t> s, T fill = T(0)) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(count(shape)), fill);
  }

  static std::int64_t count(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (std::int64_t d : s) {
      if (d < 1) throw ShapeError("ArrayT: shape dimensions must be >= 1");
      n *= d;
    }
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  std::int64_t rows() const {
    if (rank() != 2) throw ShapeError("ArrayT::rows: want rank 2, have " + shape_str());
    return shape[0];
  }
  std::int64_t cols() const {
    if (rank() != 2) throw ShapeError("ArrayT::cols: want rank 2, have " + shape_str());
    return shape[1];
  }

  T& at(std::int64_t r, std::int64_t c) { return v[static_cast<std::size_t>(r * shape[1] + c)]; }
  const T& at(std::int64_t r, std::int64_t c) const {
    return v[static_cast<std::size_t>(r * shape[1] + c)];
  }
  T& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }

  bool same_shape(const ArrayT& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }

  template <typename U>
  ArrayT<U> cast() const {
    ArrayT<U> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using DenseArray = ArrayT<float>;

// Binary inclusion mask; 1 = visible, 0 = excluded.
using MaskMatrix = ArrayT<std::uint8_t>;

// --- raw rank-2 kernels (also used by op backward passes) ---

// out = a (m x k) * b (k x n)
template <typename T>
ArrayT<T> matmul_nn(const ArrayT<T>& a, const ArrayT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  ArrayT<T> out({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t l = 0; l < k; ++l) {
      const T aw = a.at(i, l);
      if (aw == T(0)) continue;
      const T* brow = &b.v[static_cast<std::size_t>(l * n)];
      T* orow = &out.v[static_cast<std::size_t>(i * n)];
      for (std::int64_t j = 0; j < n; ++j) orow[j] += aw * brow[j];
    }
  return out;
}

// out = a (m x k) * b^T (b is n x k)
template <typename T>
ArrayT<T> matmul_nt(const ArrayT<T>& a, const ArrayT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw ShapeError("matmul_nt: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  const std::int64_t m = a.rows(), k = a.cols(), n = b.rows();
  ArrayT<T> out({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      T s = T(0);
      const T* ar = &a.v[static_cast<std::size_t>(i * k)];
      const T* br = &b.v[static_cast<std::size_t>(j * k)];
      for (std::int64_t l = 0; l < k; ++l) s += ar[l] * br[l];
      out.at(i, j) = s;
    }
  return out;
}

// out = a^T (a is k x m) * b (k x n)
template <typename T>
ArrayT<T> matmul_tn(const ArrayT<T>& a, const ArrayT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
    throw ShapeError("matmul_tn: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  const std::int64_t k = a.rows(), m = a.cols(), n = b.cols();
  ArrayT<T> out({m, n});
  for (std::int64_t l = 0; l < k; ++l) {
    const T* ar = &a.v[static_cast<std::size_t>(l * m)];
    const T* br = &b.v[static_cast<std::size_t>(l * n)];
    for (std::int64_t i = 0; i < m; ++i) {
      const T aw = ar[i];
      if (aw == T(0)) continue;
      T* orow = &out.v[static_cast<std::size_t>(i * n)];
      for (std::int64_t j = 0; j < n; ++j) orow[j] += aw * br[j];
    }
  }
  return out;
}

template <typename T>
ArrayT<T> transpose2d(const ArrayT<T>& a) {
  const std::int64_t m = a.rows(), n = a.cols();
  ArrayT<T> out({n, m});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

template <typename T>
void add_into(ArrayT<T>& dst, const ArrayT<T>& src) {
  if (!dst.same_shape(src))
    throw ShapeError("add_into: shape mismatch " + dst.shape_str() + " vs " + src.shape_str());
  for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace p3lm
