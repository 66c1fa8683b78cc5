#pragma once

// Flows of G2 structures on the periodic grid: Laplacian flow of closed
// 3-forms, the modified Laplacian co-flow of 4-forms, and a generic (h, X)
// driver. Explicit RK4 with step rejection, plus the blow-up monitors.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "g2/manifold.hpp"

namespace g2 {

enum class FlowKind { laplacian, modified_coflow, generic };

const char* flow_kind_name(FlowKind kind);

struct FlowState;

/// User-supplied evolution data for the generic driver. h is taken as a
/// general matrix field so asymmetric input can be rejected.
struct GenericDriver {
  std::function<Field<Mat7>(const FlowState&)> h;
  std::function<Field<Vec7>(const FlowState&)> x;  // empty means X = 0
  bool needs_curvature = true;
};

/// h = -Ric, X = 0: the metric moves by Ricci flow and E vanishes.
GenericDriver ricci_driver();

struct FlowSpec {
  FlowKind kind = FlowKind::laplacian;
  double A = 0.0;
  double coefficient_bound = 1.0;
  double mu_q = std::numeric_limits<double>::quiet_NaN();  // NaN: coefficient_bound^2
  double cfl = 0.25;
  double forced_dt = 0.0;  // > 0 replaces the CFL rule
  GenericDriver driver;

  double mu() const { return std::isnan(mu_q) ? coefficient_bound * coefficient_bound : mu_q; }
};

/// Time-stamped G2 data with every cache needed by the right-hand sides.
struct FlowState {
  FlowKind kind = FlowKind::laplacian;
  double t = 0.0;
  double dt_last = 0.0;
  PhiGeometry geo;                        // phi, psi, g, frames
  std::optional<TorsionResult> torsion;
  std::optional<CurvatureBundle> curvature;
  std::optional<Field<Tensor<3>>> grad_torsion;  // nabla_a T_bc
  double lambda = 0.0;                     // sup (|Rm|^2 + |T|^4 + |nabla T|^2)^{1/2}
  int psi_iterations = 0;                  // worst pointwise psi -> g iteration count

  const Grid& grid() const { return geo.phi.grid(); }
  const Field<ThreeForm>& phi() const { return geo.phi; }
  const Field<FourForm>& psi() const { return geo.psi; }
  const Field<SymMat7>& g() const { return geo.g; }
  const Field<MetricFrame>& frames() const { return geo.frames; }
};

enum class StateLevel { metric, torsion, full };

/// State whose primary field is phi (Laplacian flow, generic driver).
FlowState state_from_phi(FlowKind kind, const Field<ThreeForm>& phi, double t, StateLevel level = StateLevel::full);

/// State whose primary field is psi; the metric is recovered pointwise by
/// fixed-point iteration starting from guess (identity when null).
FlowState state_from_psi(const Field<FourForm>& psi, double t, const Field<SymMat7>* guess = nullptr,
                         StateLevel level = StateLevel::full);

/// Pointwise psi -> g recovery: g_{n+1} = induced(*_{g_n} psi) with the scale
/// mode corrected each iteration. Throws NonConvergence or DegenerateForm.
SymMat7 metric_from_psi(const FourForm& psi, const SymMat7& guess, int* iterations = nullptr);

// ---------------------------------------------------------------------------
// Right-hand sides.

/// (d d* + d* d) phi with the metric induced by phi.
Field<ThreeForm> laplacian_flow_rhs(const FlowState& s);
/// (d d* + d* d) psi + 2 d((A - Tr T) phi).
Field<FourForm> modified_coflow_rhs(const FlowState& s, double A);
/// h_i^l phi_ljk + h_j^l phi_ilk + h_k^l phi_ijl + X^l psi_lijk, so that g moves by 2h.
Field<ThreeForm> generic_rhs(const FlowState& s, const Field<Mat7>& h, const Field<Vec7>& x);
/// The corresponding psi velocity h^m_i psi_mjkl + ... - X_i phi_jkl + X_j phi_ikl - X_k phi_ijl + X_l phi_ijk.
Field<FourForm> generic_psi_rhs(const FlowState& s, const Field<Mat7>& h, const Field<Vec7>& x);

/// Tr T = g^{ij} T_ij.
Field<double> torsion_trace(const FlowState& s);

/// Non-Ricci part of the metric velocity, dg/dt = -2 Ric + E.
Field<SymMat7> e_tensor(const FlowState& s, const FlowSpec& spec);
/// -2 Ric + E.
Field<SymMat7> metric_velocity(const FlowState& s, const FlowSpec& spec);

// ---------------------------------------------------------------------------
// Monitors.

struct DiagnosticsRow {
  double t = 0.0;
  double dt = 0.0;
  double sup_Rm = 0.0;
  double sup_T2 = 0.0;
  double sup_gradT = 0.0;
  double Lambda = 0.0;
  double Q = 0.0;
  double sup_Ric = 0.0;
  double sup_R = 0.0;
  double d_phi_residual = 0.0;
};

DiagnosticsRow diagnostics(const FlowState& s, const FlowSpec& spec);

std::string diagnostics_csv_header();
std::string diagnostics_csv_line(const DiagnosticsRow& r);

/// sup |d phi|_g for phi-primary flows, sup |d psi|_g for the co-flow.
double closedness_residual(const FlowState& s);

// ---------------------------------------------------------------------------
// Time stepping.

/// CFL step cfl * min h^2 / max(1, Lambda), or the forced step.
double proposed_dt(const FlowState& s, const FlowSpec& spec);

struct StepOutcome {
  FlowState state;
  int rejections = 0;
};

/// One RK4 step of at most max_dt. Halves dt on lost positivity or a Lambda
/// jump above 4x, up to 20 times, then throws StepFailure.
StepOutcome step(const FlowState& s, const FlowSpec& spec,
                 double max_dt = std::numeric_limits<double>::infinity());

/// Advances by exactly dt with no rejection logic (used for refinement studies).
FlowState rk4_step(const FlowState& s, const FlowSpec& spec, double dt);

struct RunLimits {
  double t_max = std::numeric_limits<double>::infinity();
  double lambda_max = std::numeric_limits<double>::infinity();
  long max_steps = 1000;
  int diag_every = 1;
};

struct RunCallbacks {
  /// Called for every diagnostics row with the state it describes.
  std::function<void(const FlowState&, const DiagnosticsRow&)> on_sample;
  /// Called when Lambda first reaches lambda0 * 2^m, m >= 1.
  std::function<void(const FlowState&, int m)> on_threshold;
};

struct RunResult {
  std::vector<DiagnosticsRow> rows;
  FlowState final_state;
  long steps = 0;
  long rejections = 0;
  bool singular_candidate = false;
  std::string stop_reason;
};

/// Laplacian-flow initial data must be closed: sup |d phi| <= 1e-8 (1 + sup |phi|).
RunResult run(const FlowState& initial, const FlowSpec& spec, const RunLimits& limits,
              const RunCallbacks& callbacks = {});

// ---------------------------------------------------------------------------
// Blow-up rate fit.

struct BlowupFit {
  double C_hat = 0.0;         // exp(intercept) of log Lambda = log C + exponent log(T - t)
  double exponent = 0.0;
  double T_hat = 0.0;
  double rate_constant = 0.0; // inf over the samples of Lambda (T_hat - t)
  double rms_residual = 0.0;
  std::size_t samples = 0;
};

/// Needs at least 10 samples spanning a 10x range of Lambda.
BlowupFit fit_blowup(const std::vector<double>& t, const std::vector<double>& lambda);

}  // namespace g2
