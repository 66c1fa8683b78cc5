#pragma once

// Tensor calculus on the periodic grid: Levi-Civita data, curvature,
// covariant and exterior derivatives, torsion of a G2 structure, norms and
// integrals.

#include <vector>

#include "g2/grid.hpp"

namespace g2 {

/// Pointwise positive-definiteness check; throws PointError(MetricNotPositive).
Field<MetricFrame> metric_frames(const Field<SymMat7>& g);

/// Gamma^k_ij from g^{-1} and the coordinate derivatives d_a g (zero for
/// inactive a).
Christoffel christoffel_symbols(const Mat7& ginv, const std::array<Mat7, kDim>& dg);

/// Levi-Civita connection only, without curvature.
Field<Christoffel> christoffel_field(const Field<SymMat7>& g, const Field<MetricFrame>& frames);

struct CurvatureBundle {
  Field<Christoffel> christoffel;
  Field<Riemann> riemann;  // R_ijk^l
  Field<SymMat7> ricci;    // R_ijk^i
  Field<double> scalar;
};

/// Levi-Civita curvature of a metric field. Second derivatives of g use the
/// compact fourth-order stencil.
CurvatureBundle levi_civita(const Field<SymMat7>& g);
CurvatureBundle levi_civita(const Field<SymMat7>& g, const Field<MetricFrame>& frames);

/// R_ijkl = R_ijk^m g_ml.
Tensor<4> lower_riemann(const Riemann& r, const Mat7& g);

/// Converts a general 2-tensor or metric field to a dense rank-2 tensor.
Tensor<2> to_tensor(const Mat7& m);

/// (nabla t)_{a b1..bR} for an all-lower tensor field.
template <int R>
Field<Tensor<R + 1>> covariant_derivative(const Field<Tensor<R>>& t, const Field<Christoffel>& gamma);

/// |nabla t|^2 per point without materialising the rank R+1 field.
template <int R>
Field<double> covariant_derivative_norm_sq(const Field<Tensor<R>>& t, const Field<Christoffel>& gamma,
                                           const Field<MetricFrame>& frames);

/// (nabla_a a)_{I} for every coordinate a; output[p][a] is a K-form.
template <int K>
Field<FormGradient<K>> covariant_derivative(const Field<Form<K>>& a, const Field<Christoffel>& gamma);

/// Pointwise G2 data induced by a 3-form field.
struct PhiGeometry {
  Field<ThreeForm> phi;
  Field<FourForm> psi;
  Field<SymMat7> g;
  Field<MetricFrame> frames;
  Field<InducedMetric> induced;
};

/// Throws PointError(DegenerateForm) at the first non-positive point.
PhiGeometry phi_geometry(const Field<ThreeForm>& phi);

struct TorsionResult {
  Field<Mat7> torsion;               // T_ab, second index lowered
  Field<Christoffel> christoffel;    // built from the exact metric variation along d phi
  Field<FormGradient<3>> grad_phi;   // nabla_a phi_bcd
};

/// Inverts nabla_a phi_bcd = T_a^e psi_ebcd by contraction with psi.
///
/// The Christoffel symbols used here come from the linearised induced metric
/// applied to the differenced 3-form, so d_a g and d_a phi are pointwise
/// consistent and nabla phi stays in the image of the psi-contraction to
/// rounding error.
TorsionResult torsion_from_phi(const PhiGeometry& geo);
Field<Mat7> torsion_from_phi(const Field<ThreeForm>& phi);

/// nabla_a phi_bcd rebuilt from torsion: T_a^e psi_ebcd.
Field<FormGradient<3>> torsion_times_psi(const Field<Mat7>& torsion, const PhiGeometry& geo);

// ---------------------------------------------------------------------------
// Exterior calculus.

template <int K>
Field<Form<K + 1>> exterior_derivative(const Field<Form<K>>& a);

template <int K>
Field<Form<kDim - K>> hodge_star(const Field<Form<K>>& a, const Field<MetricFrame>& frames);

/// d* = (-1)^K * d * on K-forms in dimension 7.
template <int K>
Field<Form<K - 1>> codifferential(const Field<Form<K>>& a, const Field<MetricFrame>& frames);

/// Analyst's sign: -(d d* + d* d), so sin(kx) maps to -k^2 sin(kx).
template <int K>
Field<Form<K>> hodge_laplacian(const Field<Form<K>>& a, const Field<MetricFrame>& frames);

/// Covariant Hessian f_ij = d_i d_j f - Gamma^k_ij d_k f.
Field<Mat7> covariant_hessian(const Field<double>& f, const Field<Christoffel>& gamma);

/// Laplace-Beltrami g^{ij}(d_i d_j f - Gamma^k_ij d_k f) on functions.
Field<double> laplace_beltrami(const Field<double>& f, const Field<MetricFrame>& frames,
                               const Field<Christoffel>& gamma);

// ---------------------------------------------------------------------------
// Norms (all indices lowered, contracted with g^{-1}) and integrals.

double norm_sq(const Mat7& t, const Mat7& ginv);
double norm_sq(const SymMat7& t, const Mat7& ginv);
template <int R>
double norm_sq(const Tensor<R>& t, const Mat7& ginv);
double riemann_norm_sq(const Riemann& r, const MetricFrame& frame);

template <int K>
double norm_sq(const FormGradient<K>& t, const Mat7& ginv) {
  // Gradient index contracted too: sum_{a,b} g^{ab} <nabla_a, nabla_b>.
  std::array<Form<K>, kDim> up;
  for (int a = 0; a < kDim; ++a) up[a] = raise_all(t[a], ginv);
  double fact = 1.0;
  for (int i = 2; i <= K; ++i) fact *= i;
  double acc = 0.0;
  for (int a = 0; a < kDim; ++a)
    for (int b = 0; b < kDim; ++b) {
      if (ginv(a, b) == 0.0) continue;
      double dot = 0.0;
      for (int i = 0; i < Form<K>::kSize; ++i) dot += t[a][i] * up[b][i];
      acc += ginv(a, b) * dot;
    }
  return fact * acc;
}

inline double norm_sq(double v, const Mat7&) { return v * v; }

inline double norm_sq(const Vec7& v, const Mat7& ginv) { return v.dot(ginv * v); }

template <class V>
Field<double> pointwise_norm_sq(const Field<V>& f, const Field<MetricFrame>& frames) {
  return generate(f.grid(), [&](std::size_t p) { return norm_sq(f[p], frames[p].ginv); });
}

/// Largest value of a real field (no reduction-order dependence).
double field_max(const Field<double>& f);
double field_max_abs(const Field<double>& f);

template <class V>
double sup_norm(const Field<V>& f, const Field<MetricFrame>& frames) {
  return std::sqrt(field_max(pointwise_norm_sq(f, frames)));
}

/// Riemannian integral: sum f sqrt(det g) times the cell measure, summed in
/// point order.
double integral(const Field<double>& f, const Field<MetricFrame>& frames);
double total_volume(const Field<MetricFrame>& frames);

}  // namespace g2

#include "g2/manifold_impl.hpp"
