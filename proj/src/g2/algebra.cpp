#include "g2/algebra.hpp"

#include <algorithm>
#include <vector>

namespace g2 {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateForm: return "DegenerateForm";
    case ErrorCode::MetricNotPositive: return "MetricNotPositive";
    case ErrorCode::AsymmetricH: return "AsymmetricH";
    case ErrorCode::NotClosed: return "NotClosed";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::InsufficientDynamicRange: return "InsufficientDynamicRange";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::TrajectoryGap: return "TrajectoryGap";
    case ErrorCode::UnresolvableRadius: return "UnresolvableRadius";
    case ErrorCode::NoAdmissibleBalls: return "NoAdmissibleBalls";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ThreeForm standard_phi() {
  ThreeForm phi;
  phi.set({0, 1, 2}, 1.0);
  phi.set({0, 3, 4}, 1.0);
  phi.set({0, 5, 6}, 1.0);
  phi.set({1, 3, 5}, 1.0);
  phi.set({1, 4, 6}, -1.0);
  phi.set({2, 3, 6}, -1.0);
  phi.set({2, 4, 5}, -1.0);
  return phi;
}

SymMat7::SymMat7(const Mat7& m, double tol) {
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!(asym <= tol * scale)) throw Error(ErrorCode::InvalidArgument, "matrix is not symmetric");
  m_ = 0.5 * (m + m.transpose());
}

MetricFrame MetricFrame::from(const SymMat7& g) {
  Eigen::LLT<Mat7> llt(g.mat());
  if (llt.info() != Eigen::Success || !g.mat().allFinite())
    throw Error(ErrorCode::MetricNotPositive, "metric is not positive definite");
  MetricFrame f;
  f.g = g.mat();
  f.ginv = llt.solve(Mat7::Identity());
  f.ginv = 0.5 * (f.ginv + f.ginv.transpose());
  const auto& L = llt.matrixL();
  double sd = 1.0;
  for (int i = 0; i < kDim; ++i) sd *= L(i, i);
  f.sqrt_det = sd;
  return f;
}

double small_determinant(double* a, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      det = -det;
    }
    const double d = a[c * n + c];
    det *= d;
    for (int r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / d;
      if (f == 0.0) continue;
      for (int k = c + 1; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
    }
  }
  return det;
}

namespace {

struct Partition {
  int p;  // 2-form index
  int q;  // 2-form index
  int r;  // 3-form index
  int sign;
};

// All ordered splits {0..6} = P u Q u R with |P| = |Q| = 2, |R| = 3.
const std::vector<Partition>& partitions() {
  static const std::vector<Partition> table = [] {
    std::vector<Partition> out;
    for (int p = 0; p < Form<2>::kSize; ++p) {
      for (int q = 0; q < Form<2>::kSize; ++q) {
        const unsigned mp = kBasis<2>.mask[p];
        const unsigned mq = kBasis<2>.mask[q];
        if (mp & mq) continue;
        const unsigned mr = 0x7fu & ~(mp | mq);
        const int s = shuffle_sign(mp, mq) * shuffle_sign(mp | mq, mr);
        out.push_back({p, q, kBasis<3>.index[mr], s});
      }
    }
    return out;
  }();
  return table;
}

using InteriorMatrix = Eigen::Matrix<double, kDim, Form<2>::kSize>;
using PairMatrix = Eigen::Matrix<double, Form<2>::kSize, Form<2>::kSize>;

InteriorMatrix interior_matrix(const ThreeForm& phi) {
  InteriorMatrix m;
  for (int i = 0; i < kDim; ++i) {
    Vec7 e = Vec7::Zero();
    e[i] = 1.0;
    const Form<2> a = interior(e, phi);
    for (int p = 0; p < Form<2>::kSize; ++p) m(i, p) = a[p];
  }
  return m;
}

PairMatrix pair_matrix(const ThreeForm& phi) {
  PairMatrix k = PairMatrix::Zero();
  for (const auto& part : partitions()) k(part.p, part.q) += part.sign * phi[part.r];
  return k;
}

}  // namespace

Mat7 bilinear_b(const ThreeForm& phi) {
  const InteriorMatrix im = interior_matrix(phi);
  const PairMatrix k = pair_matrix(phi);
  Mat7 b = (im * k * im.transpose()) / 6.0;
  return 0.5 * (b + b.transpose());
}

Mat7 bilinear_b_variation(const ThreeForm& phi, const ThreeForm& dphi) {
  const InteriorMatrix im = interior_matrix(phi);
  const InteriorMatrix dim = interior_matrix(dphi);
  const PairMatrix k = pair_matrix(phi);
  const PairMatrix dk = pair_matrix(dphi);
  Mat7 db = (dim * k * im.transpose() + im * k * dim.transpose() + im * dk * im.transpose()) / 6.0;
  return 0.5 * (db + db.transpose());
}

const char* g2_class_name(G2Class c) {
  switch (c) {
    case G2Class::positive: return "positive";
    case G2Class::degenerate: return "degenerate";
    case G2Class::negative: return "negative";
  }
  return "degenerate";
}

namespace {

G2Class classify_b(const Mat7& b) {
  if (!b.allFinite()) return G2Class::degenerate;
  const double scale = b.cwiseAbs().maxCoeff();
  if (scale == 0.0) return G2Class::degenerate;
  const double det = b.determinant();
  if (std::abs(det) < 1e-12 * std::pow(scale, kDim)) return G2Class::degenerate;
  Eigen::SelfAdjointEigenSolver<Mat7> es(b, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() > 0.0) return G2Class::positive;
  if (ev.maxCoeff() < 0.0) return G2Class::negative;
  return G2Class::degenerate;
}

}  // namespace

G2Class g2_check(const ThreeForm& phi) { return classify_b(bilinear_b(phi)); }

InducedMetric induced_metric(const ThreeForm& phi) {
  Mat7 b = bilinear_b(phi);
  const G2Class cls = classify_b(b);
  if (cls == G2Class::degenerate)
    throw Error(ErrorCode::DegenerateForm, "3-form does not induce a definite metric");
  InducedMetric out;
  if (cls == G2Class::negative) {
    b = -b;
    out.orientation = -1;
  }
  const double det = b.determinant();
  const double scale = std::pow(det, 1.0 / 9.0);
  out.g = SymMat7::from_trusted(b / scale);
  out.volume = scale;
  return out;
}

Mat7 induced_metric_variation(const ThreeForm& phi, const ThreeForm& dphi, const InducedMetric& at) {
  // g = B d^{-1/9}, d = det B  =>  dg = d^{-1/9} (dB - tr(B^{-1} dB) B / 9).
  const double sgn = at.orientation;
  const Mat7 db = sgn * bilinear_b_variation(phi, dphi);
  const double scale = at.volume;  // d^{1/9}
  const Mat7 b = at.g.mat() * scale;
  const double tr = b.ldlt().solve(db).trace();
  Mat7 dg = (db - (tr / 9.0) * b) / scale;
  return 0.5 * (dg + dg.transpose());
}

}  // namespace g2
