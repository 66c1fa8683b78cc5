#pragma once

// Flat periodic 7-torus with 1..3 active axes. Fields vary only along the
// active axes; every inactive axis is a symmetry direction of zero derivative.

#include <array>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "g2/algebra.hpp"
#include "g2/parallel.hpp"

namespace g2 {

constexpr int pow7(int r) { return r == 0 ? 1 : 7 * pow7(r - 1); }

/// Dense covariant tensor of rank R, row-major over its R indices.
template <int R>
struct Tensor {
  static constexpr int kRank = R;
  static constexpr int kSize = pow7(R);
  std::array<double, kSize> c;

  Tensor() { c.fill(0.0); }
  double operator[](int i) const { return c[i]; }
  double& operator[](int i) { return c[i]; }

  Tensor& operator+=(const Tensor& o) {
    for (int i = 0; i < kSize; ++i) c[i] += o.c[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    for (int i = 0; i < kSize; ++i) c[i] -= o.c[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (auto& v : c) v *= s;
    return *this;
  }
  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }
};

/// Gamma^k_ij stored at k*49 + i*7 + j.
using Christoffel = Tensor<3>;
/// R_ijk^l stored at ((i*7 + j)*7 + k)*7 + l.
using Riemann = Tensor<4>;

template <int K>
using FormGradient = std::array<Form<K>, kDim>;

// Linear-space operations every field value type supports.
template <class V, class Enable = void>
struct FieldOps {
  static V zero() { return V{}; }
  static void axpy(V& out, double w, const V& in) { out += w * in; }
};

template <>
struct FieldOps<double> {
  static double zero() { return 0.0; }
  static void axpy(double& out, double w, double in) { out += w * in; }
};

template <class V>
struct FieldOps<V, std::enable_if_t<std::is_base_of_v<Eigen::MatrixBase<V>, V>>> {
  static V zero() { return V::Zero(); }
  static void axpy(V& out, double w, const V& in) { out.noalias() += w * in; }
};

template <class V, std::size_t N>
struct FieldOps<std::array<V, N>> {
  static std::array<V, N> zero() {
    std::array<V, N> a;
    for (auto& v : a) v = FieldOps<V>::zero();
    return a;
  }
  static void axpy(std::array<V, N>& out, double w, const std::array<V, N>& in) {
    for (std::size_t i = 0; i < N; ++i) FieldOps<V>::axpy(out[i], w, in[i]);
  }
};

struct GridAxis {
  int coord = 0;  // 0-based coordinate index in 0..6
  int n = 0;
  double length = 1.0;
  double h() const { return length / n; }
};

class Grid {
 public:
  Grid() = default;
  /// coords are 0-based coordinate indices (strictly increasing after sorting).
  Grid(std::vector<int> coords, std::vector<int> n, std::vector<double> length,
       std::array<double, kDim> inactive_period = unit_periods());

  static std::array<double, kDim> unit_periods() {
    std::array<double, kDim> p;
    p.fill(1.0);
    return p;
  }

  int dimension() const { return static_cast<int>(axes_.size()); }
  const GridAxis& axis(int slot) const { return axes_[slot]; }
  const std::vector<GridAxis>& axes() const { return axes_; }
  /// Slot of an active coordinate, or -1 when the coordinate is inactive.
  int slot_of(int coord) const { return slot_[coord]; }
  bool active(int coord) const { return slot_[coord] >= 0; }
  std::size_t size() const { return size_; }

  int index_along(std::size_t p, int slot) const {
    return static_cast<int>((p / stride_[slot]) % axes_[slot].n);
  }
  std::size_t neighbor(std::size_t p, int slot, int offset) const {
    const int n = axes_[slot].n;
    const int i = index_along(p, slot);
    int j = (i + offset) % n;
    if (j < 0) j += n;
    return p + (static_cast<std::ptrdiff_t>(j) - i) * static_cast<std::ptrdiff_t>(stride_[slot]);
  }
  std::size_t stride(int slot) const { return stride_[slot]; }
  double coordinate(std::size_t p, int slot) const { return index_along(p, slot) * axes_[slot].h(); }
  double inactive_period(int coord) const { return inactive_[coord]; }
  const std::array<double, kDim>& inactive_periods() const { return inactive_; }

  /// Coordinate measure of one grid cell, inactive periods included.
  double cell_measure() const;
  double min_spacing() const;
  double max_spacing() const;

  bool operator==(const Grid& o) const;

 private:
  std::vector<GridAxis> axes_;
  std::array<int, kDim> slot_{-1, -1, -1, -1, -1, -1, -1};
  std::vector<std::size_t> stride_;
  std::array<double, kDim> inactive_ = unit_periods();
  std::size_t size_ = 0;
};

template <class V>
class Field {
 public:
  using value_type = V;

  Field() = default;
  explicit Field(const Grid& grid) : grid_(grid), values_(grid.size(), FieldOps<V>::zero()) {}
  Field(const Grid& grid, const V& fill) : grid_(grid), values_(grid.size(), fill) {}

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  V& operator[](std::size_t p) { return values_[p]; }
  const V& operator[](std::size_t p) const { return values_[p]; }
  std::vector<V>& values() { return values_; }
  const std::vector<V>& values() const { return values_; }

 private:
  Grid grid_;
  std::vector<V> values_;
};

/// Builds a field from fn(point_index), in parallel over points.
template <class F>
auto generate(const Grid& grid, F fn) -> Field<std::decay_t<std::invoke_result_t<F, std::size_t>>> {
  using V = std::decay_t<std::invoke_result_t<F, std::size_t>>;
  Field<V> out(grid);
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) out[p] = fn(p);
  });
  return out;
}

template <class V, class F>
auto map_field(const Field<V>& f, F fn) {
  return generate(f.grid(), [&](std::size_t p) { return fn(f[p]); });
}

/// Fourth-order periodic central difference along a coordinate; zero along
/// inactive coordinates. order is 1 or 2.
template <class V>
Field<V> partial(const Field<V>& f, int coord, int order) {
  const Grid& grid = f.grid();
  Field<V> out(grid);
  const int slot = grid.slot_of(coord);
  if (slot < 0) return out;
  if (order != 1 && order != 2) throw Error(ErrorCode::InvalidArgument, "derivative order must be 1 or 2");
  const double h = grid.axis(slot).h();
  // Differences are formed before weighting so constant fields give exact zeros.
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const V& m2 = f[grid.neighbor(p, slot, -2)];
      const V& m1 = f[grid.neighbor(p, slot, -1)];
      const V& p1 = f[grid.neighbor(p, slot, 1)];
      const V& p2 = f[grid.neighbor(p, slot, 2)];
      V acc = FieldOps<V>::zero();
      if (order == 1) {
        V d1 = FieldOps<V>::zero(), d2 = FieldOps<V>::zero();
        FieldOps<V>::axpy(d1, 1.0, p1);
        FieldOps<V>::axpy(d1, -1.0, m1);
        FieldOps<V>::axpy(d2, 1.0, p2);
        FieldOps<V>::axpy(d2, -1.0, m2);
        FieldOps<V>::axpy(acc, 8.0 / (12.0 * h), d1);
        FieldOps<V>::axpy(acc, -1.0 / (12.0 * h), d2);
      } else {
        const V& c = f[p];
        V d1 = FieldOps<V>::zero(), d2 = FieldOps<V>::zero();
        FieldOps<V>::axpy(d1, 1.0, p1);
        FieldOps<V>::axpy(d1, -1.0, c);
        FieldOps<V>::axpy(d1, 1.0, m1);
        FieldOps<V>::axpy(d1, -1.0, c);
        FieldOps<V>::axpy(d2, 1.0, p2);
        FieldOps<V>::axpy(d2, -1.0, c);
        FieldOps<V>::axpy(d2, 1.0, m2);
        FieldOps<V>::axpy(d2, -1.0, c);
        FieldOps<V>::axpy(acc, 16.0 / (12.0 * h * h), d1);
        FieldOps<V>::axpy(acc, -1.0 / (12.0 * h * h), d2);
      }
      out[p] = acc;
    }
  });
  return out;
}

/// Per-point derivative along every coordinate (zeros for inactive ones).
template <class V>
Field<std::array<V, kDim>> gradient(const Field<V>& f) {
  const Grid& grid = f.grid();
  Field<std::array<V, kDim>> out(grid);
  for (int c = 0; c < kDim; ++c) {
    if (!grid.active(c)) continue;
    const Field<V> d = partial(f, c, 1);
    for (std::size_t p = 0; p < grid.size(); ++p) out[p][c] = d[p];
  }
  return out;
}

/// Second derivatives d_a d_b for every coordinate pair; pure derivatives use
/// the compact second-order stencil, mixed ones compose first derivatives.
template <class V>
Field<std::array<V, kDim * kDim>> hessian(const Field<V>& f) {
  const Grid& grid = f.grid();
  Field<std::array<V, kDim * kDim>> out(grid);
  std::array<Field<V>, kDim> first;
  for (int a = 0; a < kDim; ++a)
    if (grid.active(a)) first[a] = partial(f, a, 1);
  for (int a = 0; a < kDim; ++a) {
    if (!grid.active(a)) continue;
    for (int b = a; b < kDim; ++b) {
      if (!grid.active(b)) continue;
      const Field<V> d = (a == b) ? partial(f, a, 2) : partial(first[a], b, 1);
      for (std::size_t p = 0; p < grid.size(); ++p) {
        out[p][a * kDim + b] = d[p];
        out[p][b * kDim + a] = d[p];
      }
    }
  }
  return out;
}

}  // namespace g2
