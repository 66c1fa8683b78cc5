#pragma once

// Perelman's W-functional, its infimum mu, the conjugate backwards heat
// equation along a stored flow, and the dW/dt and quasi-monotonicity checks.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "g2/flow.hpp"

namespace g2 {

inline constexpr int kEntropyDim = 7;

/// One stored time slice: the metric and the non-Ricci velocity E.
struct TrajectorySample {
  double t = 0.0;
  Field<SymMat7> g;
  Field<SymMat7> E;
};

using Trajectory = std::vector<TrajectorySample>;

TrajectorySample make_sample(const FlowState& s, const FlowSpec& spec);

/// Everything the entropy kernels read from one metric.
struct EntropyGeometry {
  double t = 0.0;
  Field<SymMat7> g;
  Field<MetricFrame> frames;
  Field<Christoffel> christoffel;
  Field<SymMat7> ricci;
  Field<double> scalar;
  Field<SymMat7> E;
  Field<double> trace_E;
  double sup_E2 = 0.0;  // sup |E|^2
};

EntropyGeometry entropy_geometry(const TrajectorySample& sample);
/// Static metric, E = 0.
EntropyGeometry entropy_geometry(const Field<SymMat7>& g, double t = 0.0);

/// int (4 pi tau)^{-n/2} e^{-f} dg - 1.
double normalization_residual(const EntropyGeometry& geo, const Field<double>& f, double tau);
/// Shifts f by a constant so the residual vanishes; returns the shift.
double normalize_probe(const EntropyGeometry& geo, Field<double>& f, double tau);

/// W(g, f, tau). Throws NotNormalized when |residual| > 1e-8.
double w_functional(const EntropyGeometry& geo, const Field<double>& f, double tau);

struct MuOptions {
  double tol = 1e-8;       // sup norm of the projected gradient
  long max_iter = 100000;
  std::optional<Field<double>> initial_f;  // default: constant probe
};

struct MuResult {
  double mu = 0.0;
  Field<double> f_star;
  long iterations = 0;
  double gradient_residual = 0.0;
  bool converged = false;
};

/// Minimises F(u) = int [4 tau |grad u|^2 + tau R u^2 - u^2 ln u^2] dg
/// - (n/2) ln(4 pi tau) - n over int u^2 dg = 1, f = -2 ln u - (n/2) ln(4 pi tau).
/// Projected gradient with Barzilai-Borwein steps and a relaxed Armijo test.
MuResult minimize_mu(const EntropyGeometry& geo, double tau, const MuOptions& opts = {});

/// Minimum over several starts: the constant probe plus random smooth ones.
MuResult minimize_mu_multistart(const EntropyGeometry& geo, double tau, int starts, std::uint64_t seed,
                                const MuOptions& opts = {});

/// The value F(u) for u = ((4 pi tau)^{-n/2} e^{-f})^{1/2}; equals W up to
/// discretisation error.
double u_functional(const EntropyGeometry& geo, const Field<double>& f, double tau);

/// d f / dt = -Delta f - R + tr E / 2 + n / (2 tau) + |grad f|^2 at time geo.t.
Field<double> heat_velocity(const EntropyGeometry& geo, const Field<double>& f, double T);

struct HeatStep {
  Field<double> f;
  double residual_before = 0.0;  // normalisation residual before the shift
  double shift = 0.0;
};

/// Heun step from geometry a (time t_a) back to geometry b (t_b <= t_a), then
/// renormalisation. A zero-length step returns f unchanged.
HeatStep backwards_heat_step(const Field<double>& f, const EntropyGeometry& a, const EntropyGeometry& b, double T);

struct HeatSolution {
  std::vector<std::size_t> index;  // trajectory indices, decreasing in t
  std::vector<Field<double>> f;
  std::vector<double> residual_before;
};

/// Solves backwards from sample `start` with data f_start down to sample
/// `stop`, visiting every stride-th sample. Throws TrajectoryGap when the
/// indices do not lie inside the trajectory.
HeatSolution solve_backwards_heat(const Trajectory& traj, std::size_t start, std::size_t stop,
                                  const Field<double>& f_start, double T, std::size_t stride = 1);

struct DwdtRow {
  double t = 0.0;
  double dW_dt_fd = 0.0;
  double dW_dt_formula = 0.0;
  double lower_bound = 0.0;
  double residual = 0.0;  // |fd - formula| / (1 + |fd|)
};

struct DwdtReport {
  std::vector<DwdtRow> rows;
  double max_residual = 0.0;
  bool bound_holds = true;  // formula and fd both above the lower bound up to slack
};

/// int {2 tau |Ric + Hess f - g/(2 tau) - E/4|^2 - (tau/8)|E|^2} (4 pi tau)^{-n/2} e^{-f} dg.
double dwdt_formula(const EntropyGeometry& geo, const Field<double>& f, double tau);

/// Runs the backwards heat equation from the last sample with f minimising W
/// there (or the constant probe) and compares centred differences of W with
/// the closed form at interior samples.
DwdtReport dwdt_identity_check(const Trajectory& traj, double T, const Field<double>& f_last,
                               std::size_t stride = 1);

struct QuasiResult {
  double tau1 = 0.0, tau2 = 0.0;
  double mu1 = 0.0, mu2 = 0.0;
  double integral_term = 0.0;
  double slack = 0.0;
  bool satisfied = false;
  bool inconclusive = false;  // a minimisation did not converge
};

/// mu(g(T - tau2), tau2) <= mu(g(T - tau1), tau1) + (1/8) int tau sup |E|^2 dtau.
/// Both times must lie in the trajectory; metrics between samples are
/// interpolated linearly.
QuasiResult quasi_monotonicity_check(const Trajectory& traj, double tau1, double tau2, double T_ref,
                                     const MuOptions& opts = {}, int starts = 1, std::uint64_t seed = 1);

/// Linear interpolation of the stored metric and E at time t.
TrajectorySample interpolate(const Trajectory& traj, double t);

std::string entropy_csv_header();
std::string entropy_csv_line(const QuasiResult& r);
std::string dwdt_csv_header();
std::string dwdt_csv_line(const DwdtRow& r);

}  // namespace g2
