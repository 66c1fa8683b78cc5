#pragma once

// Pointwise G2 linear algebra on a single 7-dimensional tangent space.
//
// Forms store one component per strictly increasing index set (lexicographic
// order), so a k-form has C(7,k) independent entries. All indices are 0-based
// internally; coordinate labels 1..7 only appear at I/O boundaries.
//
// Conventions: a = sum_{I ordered} a_I e^I, wedge uses the determinant
// normalisation (e^1 ^ e^2)(e_1, e_2) = 1, and (u _| a)_{i2..ik} = u^j a_{j i2..ik}.

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

#include "g2/error.hpp"

namespace g2 {

inline constexpr int kDim = 7;

using Vec7 = Eigen::Matrix<double, kDim, 1>;
using Mat7 = Eigen::Matrix<double, kDim, kDim>;

constexpr int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Parity of the permutation sorting `idx`; 0 when an index repeats.
template <std::size_t K>
constexpr int permutation_sign(std::array<int, K> idx) {
  int sign = 1;
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i + 1; j < K; ++j) {
      if (idx[i] == idx[j]) return 0;
      if (idx[i] > idx[j]) sign = -sign;
    }
  }
  return sign;
}

/// Sign of the shuffle that sorts the concatenation of two disjoint sorted
/// index sets given as bit masks.
constexpr int shuffle_sign(unsigned first, unsigned second) {
  int inversions = 0;
  for (int j = 0; j < kDim; ++j) {
    if (second & (1u << j)) inversions += std::popcount(first & ~((2u << j) - 1u));
  }
  return (inversions % 2 == 0) ? 1 : -1;
}

/// Ordered index sets of size K in lexicographic order, with mask lookup.
template <int K>
struct FormBasis {
  static constexpr int kSize = binomial(kDim, K);
  std::array<std::array<int, K>, kSize> tuple{};
  std::array<unsigned, kSize> mask{};
  std::array<int, 128> index{};
  std::array<int, kSize> complement{};  // index of the complementary set in FormBasis<7-K>
  std::array<int, kSize> complement_sign{};  // sign of (I, I^c) as a permutation of 0..6

  constexpr FormBasis() {
    for (auto& v : index) v = -1;
    std::array<int, K> c{};
    for (int i = 0; i < K; ++i) c[i] = i;
    for (int n = 0; n < kSize; ++n) {
      tuple[n] = c;
      unsigned m = 0;
      for (int i = 0; i < K; ++i) m |= 1u << c[i];
      mask[n] = m;
      index[m] = n;
      int i = K - 1;
      while (i >= 0 && c[i] == kDim - K + i) --i;
      if (i >= 0) {
        ++c[i];
        for (int j = i + 1; j < K; ++j) c[j] = c[j - 1] + 1;
      }
    }
    // Complement masks are enumerated in the same lexicographic scheme by
    // FormBasis<7-K>; rank them by counting smaller sets of that size.
    for (int n = 0; n < kSize; ++n) {
      const unsigned comp = 0x7fu & ~mask[n];
      complement[n] = rank_of(comp);
      complement_sign[n] = shuffle_sign(mask[n], comp);
    }
  }

 private:
  static constexpr int rank_of(unsigned m) {
    // Lexicographic rank of a sorted index set among sets of equal size.
    const int k = std::popcount(m);
    int rank = 0;
    int prev = -1;
    int pos = 0;
    for (int v = 0; v < kDim; ++v) {
      if (!(m & (1u << v))) continue;
      for (int w = prev + 1; w < v; ++w) rank += binomial(kDim - 1 - w, k - 1 - pos);
      prev = v;
      ++pos;
    }
    return rank;
  }
};

template <int K>
inline constexpr FormBasis<K> kBasis{};

/// Antisymmetric covariant k-tensor stored by independent components.
template <int K>
class Form {
 public:
  static_assert(K >= 0 && K <= kDim);
  static constexpr int kRank = K;
  static constexpr int kSize = binomial(kDim, K);

  Form() { c_.fill(0.0); }

  double operator[](int i) const { return c_[i]; }
  double& operator[](int i) { return c_[i]; }

  /// Component for an arbitrary index tuple, with the antisymmetry sign applied.
  double at(const std::array<int, K>& idx) const {
    const int s = permutation_sign(idx);
    if (s == 0) return 0.0;
    return s * c_[kBasis<K>.index[mask_of(idx)]];
  }

  /// Sets the independent component so that at(idx) == value afterwards.
  void set(const std::array<int, K>& idx, double value) {
    const int s = permutation_sign(idx);
    if (s == 0) throw Error(ErrorCode::InvalidArgument, "form component with repeated index");
    c_[kBasis<K>.index[mask_of(idx)]] = s * value;
  }

  std::span<const double, kSize> components() const { return c_; }
  std::span<double, kSize> components() { return c_; }

  Form& operator+=(const Form& o) {
    for (int i = 0; i < kSize; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Form& operator-=(const Form& o) {
    for (int i = 0; i < kSize; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Form& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator*(double s, Form a) { return a *= s; }
  friend Form operator*(Form a, double s) { return a *= s; }
  friend Form operator-(Form a) { return a *= -1.0; }

  double max_abs() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  static constexpr unsigned mask_of(const std::array<int, K>& idx) {
    unsigned m = 0;
    for (int v : idx) m |= 1u << v;
    return m;
  }

 private:
  std::array<double, kSize> c_;
};

using ThreeForm = Form<3>;
using FourForm = Form<4>;

/// Model 3-form e^123 + e^145 + e^167 + e^246 - e^257 - e^347 - e^356.
ThreeForm standard_phi();

/// Standard coordinate volume form e^1234567.
inline Form<7> volume_form() {
  Form<7> v;
  v[0] = 1.0;
  return v;
}

template <int K, int L>
Form<K + L> wedge(const Form<K>& a, const Form<L>& b) {
  static_assert(K + L <= kDim, "wedge rank overflow");
  Form<K + L> out;
  for (int i = 0; i < Form<K>::kSize; ++i) {
    if (a[i] == 0.0) continue;
    const unsigned mi = kBasis<K>.mask[i];
    for (int j = 0; j < Form<L>::kSize; ++j) {
      const unsigned mj = kBasis<L>.mask[j];
      if (mi & mj) continue;
      out[kBasis<K + L>.index[mi | mj]] += shuffle_sign(mi, mj) * a[i] * b[j];
    }
  }
  return out;
}

template <int K>
Form<K - 1> interior(const Vec7& u, const Form<K>& a) {
  static_assert(K >= 1);
  Form<K - 1> out;
  for (int n = 0; n < Form<K>::kSize; ++n) {
    const auto& t = kBasis<K>.tuple[n];
    // a_{t0 t1 ..}: moving slot m to the front costs (-1)^m.
    for (int m = 0; m < K; ++m) {
      const unsigned rest = kBasis<K>.mask[n] & ~(1u << t[m]);
      const double s = (m % 2 == 0) ? 1.0 : -1.0;
      out[kBasis<K - 1>.index[rest]] += s * u[t[m]] * a[n];
    }
  }
  return out;
}

/// Symmetric 7x7 matrix; construction symmetrises and rejects large asymmetry.
class SymMat7 {
 public:
  SymMat7() : m_(Mat7::Zero()) {}
  explicit SymMat7(const Mat7& m, double tol = 1e-9);
  static SymMat7 identity() { return SymMat7(Mat7::Identity()); }
  static SymMat7 from_trusted(const Mat7& m) {
    SymMat7 s;
    s.m_ = 0.5 * (m + m.transpose());
    return s;
  }

  const Mat7& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  SymMat7& operator+=(const SymMat7& o) {
    m_ += o.m_;
    return *this;
  }
  SymMat7& operator-=(const SymMat7& o) {
    m_ -= o.m_;
    return *this;
  }
  SymMat7& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  friend SymMat7 operator+(SymMat7 a, const SymMat7& b) { return a += b; }
  friend SymMat7 operator-(SymMat7 a, const SymMat7& b) { return a -= b; }
  friend SymMat7 operator*(double s, SymMat7 a) { return a *= s; }

 private:
  Mat7 m_;
};

/// Metric with the quantities every index operation needs.
struct MetricFrame {
  Mat7 g;
  Mat7 ginv;
  double sqrt_det = 1.0;

  /// Throws MetricNotPositive if g is not positive definite.
  static MetricFrame from(const SymMat7& g);
  static MetricFrame from(const Mat7& g) { return from(SymMat7::from_trusted(g)); }
};

template <int K>
using CompoundMatrix = Eigen::Matrix<double, binomial(kDim, K), binomial(kDim, K)>;

double small_determinant(double* a, int n);

/// K-th compound matrix: entry (I, J) is the minor det(m[I, J]).
template <int K>
CompoundMatrix<K> compound(const Mat7& m) {
  CompoundMatrix<K> out;
  constexpr int n = binomial(kDim, K);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::array<double, K * K + 1> sub{};
      for (int r = 0; r < K; ++r)
        for (int c = 0; c < K; ++c) sub[r * K + c] = m(kBasis<K>.tuple[i][r], kBasis<K>.tuple[j][c]);
      out(i, j) = small_determinant(sub.data(), K);
    }
  }
  return out;
}

/// Linear map of the Hodge star on K-forms: (*a) = star_matrix<K>(frame) * a.
template <int K>
using StarMatrix = Eigen::Matrix<double, binomial(kDim, kDim - K), binomial(kDim, K)>;

template <int K>
StarMatrix<K> star_matrix(const MetricFrame& frame) {
  const CompoundMatrix<K> raise = compound<K>(frame.ginv);
  StarMatrix<K> s;
  constexpr int nj = binomial(kDim, kDim - K);
  for (int j = 0; j < nj; ++j) {
    const int i = kBasis<kDim - K>.complement[j];
    // complement_sign of J gives sign(J, J^c); we need sign(J^c, J).
    const int sgn = kBasis<kDim - K>.complement_sign[j] * (((K * (kDim - K)) % 2 == 0) ? 1 : -1);
    s.row(j) = frame.sqrt_det * sgn * raise.row(i);
  }
  return s;
}

template <int K>
Form<kDim - K> apply_star(const StarMatrix<K>& s, const Form<K>& a) {
  Form<kDim - K> out;
  for (int j = 0; j < Form<kDim - K>::kSize; ++j) {
    double acc = 0.0;
    for (int i = 0; i < Form<K>::kSize; ++i) acc += s(j, i) * a[i];
    out[j] = acc;
  }
  return out;
}

template <int K>
Form<kDim - K> hodge_star(const Form<K>& a, const MetricFrame& frame) {
  return apply_star<K>(star_matrix<K>(frame), a);
}

template <int K>
Form<kDim - K> hodge_star(const Form<K>& a, const SymMat7& g) {
  return hodge_star(a, MetricFrame::from(g));
}

/// Indices raised with g^{-1}, still one entry per ordered index set.
template <int K>
Form<K> raise_all(const Form<K>& a, const Mat7& ginv) {
  const CompoundMatrix<K> r = compound<K>(ginv);
  Form<K> out;
  for (int i = 0; i < Form<K>::kSize; ++i) {
    double acc = 0.0;
    for (int j = 0; j < Form<K>::kSize; ++j) acc += r(i, j) * a[j];
    out[i] = acc;
  }
  return out;
}

/// Full tensor norm a_{i1..ik} a^{i1..ik} (sum over all index orderings).
template <int K>
double norm_sq(const Form<K>& a, const Mat7& ginv) {
  const Form<K> up = raise_all(a, ginv);
  double acc = 0.0;
  for (int i = 0; i < Form<K>::kSize; ++i) acc += a[i] * up[i];
  double fact = 1.0;
  for (int i = 2; i <= K; ++i) fact *= i;
  return fact * acc;
}

/// B_ij = (1/6) [(e_i _| phi) ^ (e_j _| phi) ^ phi](e_1, ..., e_7).
Mat7 bilinear_b(const ThreeForm& phi);

/// Directional derivative of bilinear_b at phi along dphi.
Mat7 bilinear_b_variation(const ThreeForm& phi, const ThreeForm& dphi);

enum class G2Class { positive, degenerate, negative };

const char* g2_class_name(G2Class c);

/// Classifies phi by the definiteness of B. Indefinite B (the split orbit)
/// is not G2-inducing and reports as degenerate.
G2Class g2_check(const ThreeForm& phi);

struct InducedMetric {
  SymMat7 g;
  double volume = 0.0;  // (det g)^{1/2}
  int orientation = 1;  // -1 when B was negative definite
};

/// Metric of a positive 3-form: g = B / (det B)^{1/9}. Throws DegenerateForm.
InducedMetric induced_metric(const ThreeForm& phi);

/// Exact linearisation of induced_metric at phi along dphi.
Mat7 induced_metric_variation(const ThreeForm& phi, const ThreeForm& dphi,
                              const InducedMetric& at);

/// Applies a linear map to a form: (A.a)(v1..vk) = a(A^T v1, .., A^T vk), i.e.
/// components transform as a_{i..} -> A_i^p .. a_{p..} with A acting on covectors.
template <int K>
Form<K> transform(const Form<K>& a, const Mat7& A) {
  const CompoundMatrix<K> c = compound<K>(A);
  Form<K> out;
  for (int i = 0; i < Form<K>::kSize; ++i) {
    double acc = 0.0;
    for (int j = 0; j < Form<K>::kSize; ++j) acc += c(i, j) * a[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace g2
