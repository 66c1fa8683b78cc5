#pragma once

// Template definitions for manifold.hpp.

#include <memory>

namespace g2 {

namespace detail {

inline std::size_t christoffel_index(int k, int i, int j) { return k * 49 + i * 7 + j; }

/// Writes (nabla t) at one point. dt[a] is null for inactive coordinates.
template <int R>
void covariant_point(const std::array<const Tensor<R>*, kDim>& dt, const Tensor<R>& t, const Christoffel& gam,
                     Tensor<R + 1>& out) {
  constexpr int n = Tensor<R>::kSize;
  for (int a = 0; a < kDim; ++a) {
    double* row = out.c.data() + a * n;
    if (dt[a]) {
      for (int i = 0; i < n; ++i) row[i] = (*dt[a])[i];
    } else {
      for (int i = 0; i < n; ++i) row[i] = 0.0;
    }
    for (int m = 0, stride = n / 7; m < R; ++m, stride /= 7) {
      for (int i = 0; i < n; ++i) {
        const int d = (i / stride) % 7;
        const int base = i - d * stride;
        double acc = 0.0;
        for (int p = 0; p < kDim; ++p) acc += gam[p * 49 + a * 7 + d] * t[base + p * stride];
        row[i] -= acc;
      }
    }
  }
}

template <int R>
std::array<Field<Tensor<R>>, kDim> active_partials(const Field<Tensor<R>>& t) {
  std::array<Field<Tensor<R>>, kDim> d;
  for (int a = 0; a < kDim; ++a)
    if (t.grid().active(a)) d[a] = partial(t, a, 1);
  return d;
}

template <int R>
std::array<const Tensor<R>*, kDim> point_partials(const std::array<Field<Tensor<R>>, kDim>& d, const Grid& grid,
                                                  std::size_t p) {
  std::array<const Tensor<R>*, kDim> out{};
  for (int a = 0; a < kDim; ++a) out[a] = grid.active(a) ? &d[a][p] : nullptr;
  return out;
}

}  // namespace detail

template <int R>
double norm_sq(const Tensor<R>& t, const Mat7& ginv) {
  constexpr int n = Tensor<R>::kSize;
  // Raise one index at a time into a scratch buffer.
  std::vector<double> up(t.c.begin(), t.c.end()), tmp(n);
  for (int m = 0, stride = n / 7; m < R; ++m, stride /= 7) {
    for (int i = 0; i < n; ++i) {
      const int d = (i / stride) % 7;
      const int base = i - d * stride;
      double acc = 0.0;
      for (int p = 0; p < kDim; ++p) acc += ginv(d, p) * up[base + p * stride];
      tmp[i] = acc;
    }
    up.swap(tmp);
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += t[i] * up[i];
  return acc;
}

template <int R>
Field<Tensor<R + 1>> covariant_derivative(const Field<Tensor<R>>& t, const Field<Christoffel>& gamma) {
  const Grid& grid = t.grid();
  const auto d = detail::active_partials(t);
  Field<Tensor<R + 1>> out(grid);
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p)
      detail::covariant_point<R>(detail::point_partials(d, grid, p), t[p], gamma[p], out[p]);
  });
  return out;
}

template <int R>
Field<double> covariant_derivative_norm_sq(const Field<Tensor<R>>& t, const Field<Christoffel>& gamma,
                                           const Field<MetricFrame>& frames) {
  const Grid& grid = t.grid();
  const auto d = detail::active_partials(t);
  Field<double> out(grid);
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    auto buf = std::make_unique<Tensor<R + 1>>();
    for (std::size_t p = b; p < e; ++p) {
      detail::covariant_point<R>(detail::point_partials(d, grid, p), t[p], gamma[p], *buf);
      out[p] = norm_sq<R + 1>(*buf, frames[p].ginv);
    }
  });
  return out;
}

template <int K>
Field<FormGradient<K>> covariant_derivative(const Field<Form<K>>& a, const Field<Christoffel>& gamma) {
  const Grid& grid = a.grid();
  std::array<Field<Form<K>>, kDim> d;
  for (int c = 0; c < kDim; ++c)
    if (grid.active(c)) d[c] = partial(a, c, 1);
  Field<FormGradient<K>> out(grid);
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Form<K>& f = a[p];
      const Christoffel& gam = gamma[p];
      for (int c = 0; c < kDim; ++c) {
        Form<K> row = grid.active(c) ? d[c][p] : Form<K>();
        for (int n = 0; n < Form<K>::kSize; ++n) {
          auto idx = kBasis<K>.tuple[n];
          double acc = 0.0;
          for (int m = 0; m < K; ++m) {
            const int orig = idx[m];
            for (int q = 0; q < kDim; ++q) {
              const double gq = gam[detail::christoffel_index(q, c, orig)];
              if (gq == 0.0) continue;
              idx[m] = q;
              acc += gq * f.at(idx);
            }
            idx[m] = orig;
          }
          row[n] -= acc;
        }
        out[p][c] = row;
      }
    }
  });
  return out;
}

template <int K>
Field<Form<K + 1>> exterior_derivative(const Field<Form<K>>& a) {
  static_assert(K < kDim, "exterior derivative of a top form");
  const Grid& grid = a.grid();
  std::array<Field<Form<K>>, kDim> d;
  for (int c = 0; c < kDim; ++c)
    if (grid.active(c)) d[c] = partial(a, c, 1);
  Field<Form<K + 1>> out(grid);
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      Form<K + 1> r;
      for (int n = 0; n < Form<K + 1>::kSize; ++n) {
        const auto& t = kBasis<K + 1>.tuple[n];
        double acc = 0.0;
        for (int m = 0; m <= K; ++m) {
          if (!grid.active(t[m])) continue;
          const unsigned rest = kBasis<K + 1>.mask[n] & ~(1u << t[m]);
          const double v = d[t[m]][p][kBasis<K>.index[rest]];
          acc += (m % 2 == 0) ? v : -v;
        }
        r[n] = acc;
      }
      out[p] = r;
    }
  });
  return out;
}

template <int K>
Field<Form<kDim - K>> hodge_star(const Field<Form<K>>& a, const Field<MetricFrame>& frames) {
  return generate(a.grid(), [&](std::size_t p) { return hodge_star<K>(a[p], frames[p]); });
}

template <int K>
Field<Form<K - 1>> codifferential(const Field<Form<K>>& a, const Field<MetricFrame>& frames) {
  static_assert(K >= 1, "codifferential of a function");
  Field<Form<K - 1>> out = hodge_star(exterior_derivative(hodge_star(a, frames)), frames);
  if (K % 2 == 1)
    for (auto& v : out.values()) v *= -1.0;
  return out;
}

template <int K>
Field<Form<K>> hodge_laplacian(const Field<Form<K>>& a, const Field<MetricFrame>& frames) {
  Field<Form<K>> out(a.grid());
  if constexpr (K >= 1) {
    const auto t = exterior_derivative(codifferential(a, frames));
    for (std::size_t p = 0; p < out.size(); ++p) out[p] -= t[p];
  }
  if constexpr (K < kDim) {
    const auto t = codifferential(exterior_derivative(a), frames);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] -= t[p];
  }
  return out;
}

}  // namespace g2
