#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fields.hpp"
#include "g2/entropy.hpp"
#include "g2/initial.hpp"

using namespace g2;

namespace {

double log_gauss(double tau) { return -3.5 * std::log(4.0 * std::numbers::pi * tau); }

Field<double> normalized_probe(const EntropyGeometry& geo, std::mt19937_64& rng, double tau, double amp = 0.5) {
  Field<double> f = testfields::smooth_scalar(geo.g.grid(), rng, amp);
  normalize_probe(geo, f, tau);
  return f;
}

Trajectory record_run(const FlowState& s0, const FlowSpec& spec, long steps) {
  Trajectory traj;
  RunLimits lim;
  lim.max_steps = steps;
  RunCallbacks cb;
  cb.on_sample = [&](const FlowState& st, const DiagnosticsRow&) { traj.push_back(make_sample(st, spec)); };
  run(s0, spec, lim, cb);
  return traj;
}

const Trajectory& laplacian_trajectory() {
  static const Trajectory traj = [] {
    FlowSpec spec;
    spec.kind = FlowKind::laplacian;
    const Grid grid = testfields::line_grid(0, 16);
    return record_run(state_from_phi(FlowKind::laplacian, closed_bump(grid, 0.02, {1, 0, 0}), 0.0), spec, 60);
  }();
  return traj;
}

const Trajectory& ricci_trajectory() {
  static const Trajectory traj = [] {
    FlowSpec spec;
    spec.kind = FlowKind::generic;
    spec.driver = ricci_driver();
    const Grid grid = testfields::line_grid(0, 16);
    return record_run(state_from_phi(FlowKind::generic, conformal_bump(grid, 0.05, {1, 0, 0}), 0.0), spec, 40);
  }();
  return traj;
}

}  // namespace

TEST_CASE("W on flat tori has the closed form") {
  std::array<double, kDim> periods = Grid::unit_periods();
  periods[2] = 1.5;
  periods[6] = 0.8;
  const Grid grid({0, 4}, {8, 6}, {2.0, 0.5}, periods);
  const EntropyGeometry geo = entropy_geometry(Field<SymMat7>(grid, SymMat7::identity()));
  const double V = 2.0 * 0.5 * 1.5 * 0.8;
  CHECK(total_volume(geo.frames) == doctest::Approx(V).epsilon(1e-14));
  for (double tau : {0.01, 0.1, 1.0}) {
    Field<double> f(grid, 0.0);
    normalize_probe(geo, f, tau);
    CHECK(std::abs(normalization_residual(geo, f, tau)) < 1e-12);
    CHECK(f[0] == doctest::Approx(std::log(V) + log_gauss(tau)).epsilon(1e-13));
    const double expect = std::log(V) + log_gauss(tau) - 7.0;
    CHECK(std::abs(w_functional(geo, f, tau) - expect) <= 1e-10);
    CHECK(std::abs(u_functional(geo, f, tau) - expect) <= 1e-10);
  }
  Field<double> bad(grid, 0.0);
  try {
    w_functional(geo, bad, 0.1);
    FAIL("expected NotNormalized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotNormalized);
  }
  CHECK_THROWS_AS(normalization_residual(geo, bad, 0.0), Error);
}

TEST_CASE("W matches a direct quadrature and is scale invariant") {
  std::mt19937_64 rng(21);
  const Grid grid({1, 3}, {12, 12}, {1.0, 1.0});
  const auto g = testfields::smooth_metric(grid, rng, 0.1);
  const EntropyGeometry geo = entropy_geometry(g);
  const double tau = 0.05;
  const Field<double> f = normalized_probe(geo, rng, tau);

  // Direct sum with a hand-written fourth-order gradient.
  double direct = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    Vec7 d = Vec7::Zero();
    for (int s = 0; s < 2; ++s) {
      const double h = grid.axis(s).h();
      const double fp1 = f[grid.neighbor(p, s, 1)], fm1 = f[grid.neighbor(p, s, -1)];
      const double fp2 = f[grid.neighbor(p, s, 2)], fm2 = f[grid.neighbor(p, s, -2)];
      d[grid.axis(s).coord] = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
    }
    const Mat7 gi = g[p].mat().inverse();
    const double sq = std::sqrt(g[p].mat().determinant());
    direct += (tau * (geo.scalar[p] + d.dot(gi * d)) + f[p] - 7.0) * std::exp(log_gauss(tau) - f[p]) * sq;
  }
  direct *= grid.axis(0).h() * grid.axis(1).h();
  CHECK(std::abs(w_functional(geo, f, tau) - direct) <= 1e-10);

  const double w = w_functional(geo, f, tau);
  for (double c : {0.5, 2.0, 3.0}) {
    const auto gc = map_field(g, [&](const SymMat7& m) { return SymMat7::from_trusted(c * c * m.mat()); });
    const EntropyGeometry geo_c = entropy_geometry(gc);
    CHECK(std::abs(w_functional(geo_c, f, c * c * tau) - w) <= 1e-10);
  }
}

TEST_CASE("mu on the flat torus") {
  const Grid grid = testfields::line_grid(0, 16);
  const EntropyGeometry geo = entropy_geometry(Field<SymMat7>(grid, SymMat7::identity()));
  const double tau = 0.02;
  const MuResult r = minimize_mu(geo, tau);
  CHECK(r.converged);
  CHECK(r.gradient_residual <= 1e-10);
  Field<double> c(grid, 0.0);
  normalize_probe(geo, c, tau);
  CHECK(r.mu <= w_functional(geo, c, tau) + 1e-12);
  CHECK(r.mu == doctest::Approx(log_gauss(tau) - 7.0).epsilon(1e-12));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) CHECK(r.mu <= w_functional(geo, normalized_probe(geo, rng, tau), tau));
}

TEST_CASE("mu on a bumped metric is robust to the starting probe") {
  const Grid grid = testfields::line_grid(0, 16);
  const FlowState s = state_from_phi(FlowKind::laplacian, closed_bump(grid, 0.02, {1, 0, 0}), 0.0, StateLevel::metric);
  const EntropyGeometry geo = entropy_geometry(s.g());
  const double tau = 0.02;
  const MuResult base = minimize_mu(geo, tau);
  REQUIRE(base.converged);
  CHECK(std::abs(normalization_residual(geo, base.f_star, tau)) < 1e-10);
  CHECK(std::abs(w_functional(geo, base.f_star, tau) - base.mu) < 1e-4);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    MuOptions o;
    o.initial_f = normalized_probe(geo, rng, tau, 0.4);
    const MuResult r = minimize_mu(geo, tau, o);
    CHECK(r.converged);
    CHECK(std::abs(r.mu - base.mu) <= 1e-6);
  }
  for (int i = 0; i < 20; ++i) CHECK(base.mu <= u_functional(geo, normalized_probe(geo, rng, tau), tau));
  const MuResult ms = minimize_mu_multistart(geo, tau, 3, 99);
  CHECK(ms.mu <= base.mu + 1e-12);

  // Past the point where the constant probe stops being a minimum.
  CHECK(minimize_mu(geo, 0.01).converged);

  MuOptions few;
  few.max_iter = 1;
  CHECK_FALSE(minimize_mu(geo, tau, few).converged);
}

TEST_CASE("backwards heat equation on static flat data") {
  const Grid grid = testfields::line_grid(0, 16);
  Trajectory traj;
  for (int i = 0; i <= 4; ++i) traj.push_back({0.01 * i, Field<SymMat7>(grid, SymMat7::identity()), Field<SymMat7>(grid)});
  const double T = 0.1;
  const EntropyGeometry last = entropy_geometry(traj.back());
  Field<double> f(grid, 0.0);
  normalize_probe(last, f, T - last.t);
  const HeatStep zero = backwards_heat_step(f, last, last, T);
  CHECK(zero.f.values() == f.values());
  const HeatSolution sol = solve_backwards_heat(traj, 4, 0, f, T);
  REQUIRE(sol.f.size() == 5);
  for (std::size_t k = 0; k < sol.f.size(); ++k) {
    CHECK(std::abs(sol.residual_before[k]) <= 1e-10);
    const double tau = T - traj[sol.index[k]].t;
    CHECK(sol.f[k][3] == doctest::Approx(log_gauss(tau)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(solve_backwards_heat(traj, 7, 0, f, T), Error);
  CHECK_THROWS_AS(solve_backwards_heat(traj, 1, 3, f, T), Error);
  CHECK_THROWS_AS(backwards_heat_step(f, entropy_geometry(traj[0]), last, T), Error);
}

TEST_CASE("backwards heat normalisation drift is second order") {
  const Trajectory& traj = laplacian_trajectory();
  const double T = traj.back().t + 0.02;
  const EntropyGeometry last = entropy_geometry(traj.back());
  const Field<double> f0 = minimize_mu(last, T - last.t).f_star;
  auto drift = [&](std::size_t stride) {
    const HeatSolution sol = solve_backwards_heat(traj, traj.size() - 1, 0, f0, T, stride);
    double acc = 0.0;
    for (double r : sol.residual_before) acc += r;
    return acc;
  };
  // The spatial part of the drift does not depend on the step; differences
  // between strides isolate the time-stepping error.
  const double d1 = drift(1), d2 = drift(2), d4 = drift(4);
  const double slope = std::log2(std::abs(d4 - d2) / std::abs(d2 - d1));
  MESSAGE("normalisation drift slope " << slope);
  CHECK(slope > 1.6);
  CHECK(slope < 2.6);
}

TEST_CASE("dW/dt identity along a Laplacian flow") {
  const Trajectory& traj = laplacian_trajectory();
  const double T = traj.back().t + 0.02;
  const EntropyGeometry last = entropy_geometry(traj.back());
  const MuResult m = minimize_mu(last, T - last.t);
  const DwdtReport rep = dwdt_identity_check(traj, T, m.f_star);
  CHECK(rep.rows.size() == traj.size() - 2);
  CHECK(rep.max_residual <= 5e-3);
  CHECK(rep.bound_holds);
  for (std::size_t k = 1; k < rep.rows.size(); ++k) CHECK(rep.rows[k].t > rep.rows[k - 1].t);
  CHECK(dwdt_csv_header() == "t,dW_dt_fd,dW_dt_formula,lower_bound,residual\n");
}

TEST_CASE("E = 0 flows are monotone") {
  const Trajectory& traj = ricci_trajectory();
  for (const auto& s : traj)
    for (const auto& e : s.E.values()) CHECK(e.mat().cwiseAbs().maxCoeff() < 1e-12);
  const double T = traj.back().t + 0.02;
  const EntropyGeometry last = entropy_geometry(traj.back());
  const DwdtReport rep = dwdt_identity_check(traj, T, minimize_mu(last, T - last.t).f_star);
  for (const auto& row : rep.rows) {
    CHECK(row.dW_dt_formula >= -1e-8);
    CHECK(row.lower_bound == 0.0);
  }
  const double tau1 = 0.5 * (traj.back().t - traj.front().t);
  const QuasiResult q = quasi_monotonicity_check(traj, tau1, 2.0 * tau1, traj.back().t + tau1);
  CHECK(q.integral_term == 0.0);
  CHECK(q.mu2 <= q.mu1 + q.slack);
  CHECK(q.satisfied);
  CHECK_FALSE(q.inconclusive);
}

TEST_CASE("quasi-monotonicity along a Laplacian flow") {
  const Trajectory& traj = laplacian_trajectory();
  const double tau1 = 0.5 * traj.back().t;
  const double T = traj.back().t + tau1;
  const QuasiResult same = quasi_monotonicity_check(traj, tau1, tau1, T);
  CHECK(same.mu1 == same.mu2);
  CHECK(same.integral_term == 0.0);
  CHECK(same.satisfied);
  const QuasiResult q = quasi_monotonicity_check(traj, tau1, 2.0 * tau1, T);
  CHECK(q.satisfied);
  CHECK(q.integral_term > 0.0);
  CHECK_THROWS_AS(quasi_monotonicity_check(traj, tau1, 4.0 * tau1, T), Error);
  const std::string line = entropy_csv_line(q);
  CHECK(std::count(line.begin(), line.end(), ',') == 6);
  CHECK(entropy_csv_header() == "tau1,tau2,mu1,mu2,integral_term,satisfied,slack\n");

  const TrajectorySample mid = interpolate(traj, 0.5 * (traj[3].t + traj[4].t));
  CHECK(mid.g[2](0, 0) == doctest::Approx(0.5 * (traj[3].g[2](0, 0) + traj[4].g[2](0, 0))));
}
