#include "g2/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "g2/snapshot.hpp"

namespace g2 {

namespace {

constexpr double kN = kEntropyDim;

double log_gauss_prefactor(double tau) { return -0.5 * kN * std::log(4.0 * std::numbers::pi * tau); }

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
}

Field<double> grad_sq(const Field<double>& f, const Field<MetricFrame>& frames) {
  const auto d = gradient(f);
  return generate(f.grid(), [&](std::size_t p) {
    Vec7 v;
    for (int i = 0; i < kDim; ++i) v[i] = d[p][i];
    return v.dot(frames[p].ginv * v);
  });
}

double inner(const Field<double>& a, const Field<double>& b, const Field<MetricFrame>& frames) {
  return integral(generate(a.grid(), [&](std::size_t p) { return a[p] * b[p]; }), frames);
}

double u2_log_u2(double u) {
  const double s = u * u;
  return s > 0.0 ? s * std::log(s) : 0.0;
}

// Forward third difference along a slot.
double third_difference(const Field<double>& u, std::size_t p, int slot) {
  const Grid& g = u.grid();
  return u[g.neighbor(p, slot, 3)] - 3.0 * u[g.neighbor(p, slot, 2)] + 3.0 * u[g.neighbor(p, slot, 1)] - u[p];
}

// The central stencil is blind to the grid-scale alternating mode, which the
// entropy term would otherwise exploit. The penalty h^4 |d^3 u|^2 / 15 kills
// that mode and cancels the leading error of the stencil on smooth data.
constexpr double kPenalty = 1.0 / 15.0;

// Discrete F(u) and its exact L^2(dg) gradient. Periodic central stencils are
// antisymmetric, so the adjoint of d_i is -d_i.
double f_of_u(const EntropyGeometry& geo, const Field<double>& u, double tau) {
  const Grid& grid = u.grid();
  const auto gu = grad_sq(u, geo.frames);
  const auto dens = generate(grid, [&](std::size_t p) {
    double pen = 0.0;
    for (int s = 0; s < grid.dimension(); ++s) {
      const int c = grid.axis(s).coord;
      const double h = grid.axis(s).h();
      const double d3 = third_difference(u, p, s);
      pen += geo.frames[p].ginv(c, c) * d3 * d3 / (h * h);
    }
    return 4.0 * tau * (gu[p] + kPenalty * pen) + tau * geo.scalar[p] * u[p] * u[p] - u2_log_u2(u[p]);
  });
  return integral(dens, geo.frames) + log_gauss_prefactor(tau) - kN;
}

Field<double> grad_f_of_u(const EntropyGeometry& geo, const Field<double>& u, double tau) {
  const Grid& grid = u.grid();
  const auto du = gradient(u);
  Field<double> div(grid, 0.0);
  for (int i = 0; i < kDim; ++i) {
    if (!grid.active(i)) continue;
    const auto flux = generate(grid, [&](std::size_t p) {
      double acc = 0.0;
      for (int j = 0; j < kDim; ++j) acc += geo.frames[p].ginv(i, j) * du[p][j];
      return geo.frames[p].sqrt_det * acc;
    });
    const auto d = partial(flux, i, 1);
    for (std::size_t p = 0; p < grid.size(); ++p) div[p] += d[p];
  }
  Field<double> pen(grid, 0.0);
  for (int s = 0; s < grid.dimension(); ++s) {
    const int c = grid.axis(s).coord;
    const double h = grid.axis(s).h();
    const auto w = generate(grid, [&](std::size_t p) {
      return geo.frames[p].sqrt_det * geo.frames[p].ginv(c, c) * third_difference(u, p, s) / (h * h);
    });
    for (std::size_t p = 0; p < grid.size(); ++p)
      pen[p] += w[grid.neighbor(p, s, -3)] - 3.0 * w[grid.neighbor(p, s, -2)] + 3.0 * w[grid.neighbor(p, s, -1)] - w[p];
  }
  return generate(grid, [&](std::size_t p) {
    const double v = u[p];
    const double lg = v != 0.0 ? 2.0 * v * std::log(v * v) : 0.0;
    const double sq = geo.frames[p].sqrt_det;
    return (-8.0 * tau * div[p] + 8.0 * tau * kPenalty * pen[p]) / sq + 2.0 * tau * geo.scalar[p] * v - lg - 2.0 * v;
  });
}

void normalize_u(const EntropyGeometry& geo, Field<double>& u) {
  const double n = std::sqrt(inner(u, u, geo.frames));
  for (auto& v : u.values()) v /= n;
}

Field<double> u_from_f(const EntropyGeometry& geo, const Field<double>& f, double tau) {
  const double c = log_gauss_prefactor(tau);
  (void)geo;
  return map_field(f, [&](double v) { return std::exp(0.5 * (c - v)); });
}

double sup_abs(const Field<double>& f) { return field_max_abs(f); }

}  // namespace

TrajectorySample make_sample(const FlowState& s, const FlowSpec& spec) {
  return TrajectorySample{s.t, s.g(), e_tensor(s, spec)};
}

EntropyGeometry entropy_geometry(const TrajectorySample& sample) {
  EntropyGeometry geo;
  geo.t = sample.t;
  geo.g = sample.g;
  geo.frames = metric_frames(sample.g);
  CurvatureBundle cb = levi_civita(sample.g, geo.frames);
  geo.christoffel = std::move(cb.christoffel);
  geo.ricci = std::move(cb.ricci);
  geo.scalar = std::move(cb.scalar);
  geo.E = sample.E.size() == sample.g.size() ? sample.E : Field<SymMat7>(sample.g.grid());
  geo.trace_E = generate(sample.g.grid(), [&](std::size_t p) {
    return (geo.frames[p].ginv.cwiseProduct(geo.E[p].mat())).sum();
  });
  geo.sup_E2 = field_max(pointwise_norm_sq(geo.E, geo.frames));
  return geo;
}

EntropyGeometry entropy_geometry(const Field<SymMat7>& g, double t) {
  return entropy_geometry(TrajectorySample{t, g, Field<SymMat7>(g.grid())});
}

double normalization_residual(const EntropyGeometry& geo, const Field<double>& f, double tau) {
  require_tau(tau);
  const double c = log_gauss_prefactor(tau);
  return integral(map_field(f, [&](double v) { return std::exp(c - v); }), geo.frames) - 1.0;
}

double normalize_probe(const EntropyGeometry& geo, Field<double>& f, double tau) {
  const double shift = std::log1p(normalization_residual(geo, f, tau));
  for (auto& v : f.values()) v += shift;
  return shift;
}

double w_functional(const EntropyGeometry& geo, const Field<double>& f, double tau) {
  const double res = normalization_residual(geo, f, tau);
  if (std::abs(res) > 1e-8)
    throw Error(ErrorCode::NotNormalized, "probe normalisation residual " + format_double(res));
  const double c = log_gauss_prefactor(tau);
  const auto gf = grad_sq(f, geo.frames);
  const auto dens = generate(f.grid(), [&](std::size_t p) {
    return (tau * (geo.scalar[p] + gf[p]) + f[p] - kN) * std::exp(c - f[p]);
  });
  return integral(dens, geo.frames);
}

double u_functional(const EntropyGeometry& geo, const Field<double>& f, double tau) {
  require_tau(tau);
  return f_of_u(geo, u_from_f(geo, f, tau), tau);
}

MuResult minimize_mu(const EntropyGeometry& geo, double tau, const MuOptions& opts) {
  require_tau(tau);
  const Grid& grid = geo.g.grid();
  Field<double> u = opts.initial_f ? u_from_f(geo, *opts.initial_f, tau) : Field<double>(grid, 1.0);
  normalize_u(geo, u);

  auto projected = [&](const Field<double>& uu, const Field<double>& g) {
    const double a = inner(g, uu, geo.frames);
    return generate(grid, [&](std::size_t p) { return g[p] - a * uu[p]; });
  };

  double F = f_of_u(geo, u, tau);
  Field<double> gp = projected(u, grad_f_of_u(geo, u, tau));
  const double h = grid.min_spacing();
  const double alpha0 = 1.0 / (8.0 * tau * 11.0 / (h * h) + 10.0);
  double alpha = alpha0;

  MuResult res;
  res.gradient_residual = sup_abs(gp);
  long it = 0;
  while (res.gradient_residual > opts.tol && it < opts.max_iter) {
    ++it;
    const double gg = inner(gp, gp, geo.frames);
    Field<double> cand;
    double Fc = 0.0;
    bool accepted = false;
    for (int back = 0; back < 60; ++back) {
      cand = generate(grid, [&](std::size_t p) { return u[p] - alpha * gp[p]; });
      normalize_u(geo, cand);
      Fc = f_of_u(geo, cand, tau);
      // Relaxed at the rounding level so steps keep being taken once the
      // objective has stalled in its last digits.
      if (Fc <= F - 1e-4 * alpha * gg + 1e-13 * (1.0 + std::abs(F))) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    Field<double> gp_new = projected(cand, grad_f_of_u(geo, cand, tau));
    const auto s = generate(grid, [&](std::size_t p) { return cand[p] - u[p]; });
    const auto y = generate(grid, [&](std::size_t p) { return gp_new[p] - gp[p]; });
    const double sy = inner(s, y, geo.frames);
    const double ss = inner(s, s, geo.frames);
    // Negative curvature: grow the step and let the line search cut it back.
    alpha = ss > 0.0 ? std::min(sy > 0.0 ? ss / sy : 2.0 * alpha, 1e6 * alpha0) : alpha0;
    u = std::move(cand);
    gp = std::move(gp_new);
    F = Fc;
    res.gradient_residual = sup_abs(gp);
  }
  res.iterations = it;
  res.converged = res.gradient_residual <= opts.tol;
  res.mu = F;
  const double c = log_gauss_prefactor(tau);
  res.f_star = map_field(u, [&](double v) { return c - std::log(v * v); });
  return res;
}

MuResult minimize_mu_multistart(const EntropyGeometry& geo, double tau, int starts, std::uint64_t seed,
                                const MuOptions& opts) {
  MuResult best = minimize_mu(geo, tau, opts);
  const Grid& grid = geo.g.grid();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-0.3, 0.3), phase(0.0, 2.0 * std::numbers::pi);
  for (int k = 1; k < starts; ++k) {
    std::array<double, 3> a{}, ph{};
    for (int s = 0; s < 3; ++s) {
      a[s] = amp(rng);
      ph[s] = phase(rng);
    }
    MuOptions o = opts;
    o.initial_f = generate(grid, [&](std::size_t p) {
      double v = 0.0;
      for (int s = 0; s < grid.dimension(); ++s)
        v += a[s] * std::sin(2.0 * std::numbers::pi * grid.coordinate(p, s) / grid.axis(s).length + ph[s]);
      return v;
    });
    MuResult r = minimize_mu(geo, tau, o);
    if (r.mu < best.mu || (!best.converged && r.converged)) best = std::move(r);
  }
  return best;
}

namespace {

// Velocity of f + (n/2) ln(4 pi tau), which drops the spatially constant
// n/(2 tau) term so that it is integrated exactly.
Field<double> shifted_heat_velocity(const EntropyGeometry& geo, const Field<double>& f) {
  const auto lap = laplace_beltrami(f, geo.frames, geo.christoffel);
  const auto gf = grad_sq(f, geo.frames);
  return generate(f.grid(), [&](std::size_t p) {
    return -lap[p] - geo.scalar[p] + 0.5 * geo.trace_E[p] + gf[p];
  });
}

}  // namespace

Field<double> heat_velocity(const EntropyGeometry& geo, const Field<double>& f, double T) {
  const double tau = T - geo.t;
  require_tau(tau);
  auto v = shifted_heat_velocity(geo, f);
  for (auto& x : v.values()) x += 0.5 * kN / tau;
  return v;
}

HeatStep backwards_heat_step(const Field<double>& f, const EntropyGeometry& a, const EntropyGeometry& b, double T) {
  const double dt = a.t - b.t;
  if (dt < 0.0) throw Error(ErrorCode::InvalidArgument, "backwards heat step must go back in time");
  if (dt == 0.0) return HeatStep{f, 0.0, 0.0};
  const double tau_a = T - a.t, tau_b = T - b.t;
  require_tau(tau_a);
  const double shift = -log_gauss_prefactor(tau_b) + log_gauss_prefactor(tau_a);
  const auto pa = shifted_heat_velocity(a, f);
  const auto mid = generate(f.grid(), [&](std::size_t p) { return f[p] - dt * pa[p]; });
  const auto pb = shifted_heat_velocity(b, mid);
  HeatStep out;
  out.f = generate(f.grid(), [&](std::size_t p) { return f[p] - 0.5 * dt * (pa[p] + pb[p]) - shift; });
  out.residual_before = normalization_residual(b, out.f, tau_b);
  out.shift = normalize_probe(b, out.f, tau_b);
  return out;
}

namespace {

std::vector<std::size_t> visit_order(const Trajectory& traj, std::size_t start, std::size_t stop,
                                     std::size_t stride) {
  if (traj.empty() || start >= traj.size() || stop > start)
    throw Error(ErrorCode::TrajectoryGap, "requested samples are outside the trajectory");
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t i = start;; i -= stride) {
    idx.push_back(i);
    if (i < stop + stride) break;
  }
  if (idx.back() != stop) idx.push_back(stop);
  return idx;
}

}  // namespace

HeatSolution solve_backwards_heat(const Trajectory& traj, std::size_t start, std::size_t stop,
                                  const Field<double>& f_start, double T, std::size_t stride) {
  const auto idx = visit_order(traj, start, stop, stride);
  HeatSolution sol;
  EntropyGeometry prev = entropy_geometry(traj[idx[0]]);
  sol.index.push_back(idx[0]);
  sol.f.push_back(f_start);
  sol.residual_before.push_back(0.0);
  for (std::size_t k = 1; k < idx.size(); ++k) {
    EntropyGeometry next = entropy_geometry(traj[idx[k]]);
    HeatStep st = backwards_heat_step(sol.f.back(), prev, next, T);
    sol.index.push_back(idx[k]);
    sol.f.push_back(std::move(st.f));
    sol.residual_before.push_back(st.residual_before);
    prev = std::move(next);
  }
  return sol;
}

double dwdt_formula(const EntropyGeometry& geo, const Field<double>& f, double tau) {
  require_tau(tau);
  const double c = log_gauss_prefactor(tau);
  const auto hess = covariant_hessian(f, geo.christoffel);
  const auto dens = generate(f.grid(), [&](std::size_t p) {
    const Mat7& gi = geo.frames[p].ginv;
    const Mat7 e = geo.E[p].mat();
    Mat7 a = geo.ricci[p].mat() + 0.5 * (hess[p] + hess[p].transpose()) - geo.g[p].mat() / (2.0 * tau) - 0.25 * e;
    return (2.0 * tau * norm_sq(a, gi) - tau / 8.0 * norm_sq(e, gi)) * std::exp(c - f[p]);
  });
  return integral(dens, geo.frames);
}

DwdtReport dwdt_identity_check(const Trajectory& traj, double T, const Field<double>& f_last, std::size_t stride) {
  if (traj.size() < 3) throw Error(ErrorCode::TrajectoryGap, "dW/dt check needs at least three samples");
  const auto idx = visit_order(traj, traj.size() - 1, 0, stride);
  std::vector<double> t, w, formula, bound;
  EntropyGeometry geo = entropy_geometry(traj[idx[0]]);
  Field<double> f = f_last;
  for (std::size_t k = 0;; ++k) {
    const double tau = T - geo.t;
    t.push_back(geo.t);
    w.push_back(w_functional(geo, f, tau));
    formula.push_back(dwdt_formula(geo, f, tau));
    const double mass = normalization_residual(geo, f, tau) + 1.0;
    bound.push_back(-tau / 8.0 * geo.sup_E2 * mass);
    if (k + 1 == idx.size()) break;
    EntropyGeometry next = entropy_geometry(traj[idx[k + 1]]);
    f = backwards_heat_step(f, geo, next, T).f;
    geo = std::move(next);
  }
  DwdtReport rep;
  // Samples were visited backwards in time; report in increasing t.
  for (std::size_t k = idx.size() - 2; k >= 1; --k) {
    DwdtRow row;
    row.t = t[k];
    row.dW_dt_fd = (w[k - 1] - w[k + 1]) / (t[k - 1] - t[k + 1]);
    row.dW_dt_formula = formula[k];
    row.lower_bound = bound[k];
    row.residual = std::abs(row.dW_dt_fd - row.dW_dt_formula) / (1.0 + std::abs(row.dW_dt_fd));
    const double slack = 1e-6 * (1.0 + std::abs(row.lower_bound));
    if (row.dW_dt_formula < row.lower_bound - slack || row.dW_dt_fd < row.lower_bound - slack)
      rep.bound_holds = false;
    rep.max_residual = std::max(rep.max_residual, row.residual);
    rep.rows.push_back(row);
    if (k == 1) break;
  }
  return rep;
}

TrajectorySample interpolate(const Trajectory& traj, double t) {
  if (traj.empty()) throw Error(ErrorCode::TrajectoryGap, "empty trajectory");
  const double tol = 1e-12 * std::max(1.0, std::abs(traj.back().t));
  if (t < traj.front().t - tol || t > traj.back().t + tol)
    throw Error(ErrorCode::TrajectoryGap, "time " + format_double(t) + " is outside the trajectory");
  std::size_t hi = 0;
  while (hi < traj.size() && traj[hi].t < t - tol) ++hi;
  if (hi == traj.size()) hi = traj.size() - 1;
  if (std::abs(traj[hi].t - t) <= tol || hi == 0) {
    TrajectorySample s = traj[hi];
    return s;
  }
  const TrajectorySample& a = traj[hi - 1];
  const TrajectorySample& b = traj[hi];
  const double w = (t - a.t) / (b.t - a.t);
  TrajectorySample s;
  s.t = t;
  s.g = generate(a.g.grid(), [&](std::size_t p) { return SymMat7::from_trusted((1.0 - w) * a.g[p].mat() + w * b.g[p].mat()); });
  s.E = generate(a.g.grid(), [&](std::size_t p) { return SymMat7::from_trusted((1.0 - w) * a.E[p].mat() + w * b.E[p].mat()); });
  return s;
}

QuasiResult quasi_monotonicity_check(const Trajectory& traj, double tau1, double tau2, double T_ref,
                                     const MuOptions& opts, int starts, std::uint64_t seed) {
  require_tau(tau1);
  if (tau2 < tau1) throw Error(ErrorCode::InvalidArgument, "tau2 must be at least tau1");
  const double t1 = T_ref - tau1, t2 = T_ref - tau2;
  const EntropyGeometry g1 = entropy_geometry(interpolate(traj, t1));
  const EntropyGeometry g2 = entropy_geometry(interpolate(traj, t2));

  QuasiResult r;
  r.tau1 = tau1;
  r.tau2 = tau2;
  const MuResult m1 = minimize_mu_multistart(g1, tau1, starts, seed, opts);
  const MuResult m2 = minimize_mu_multistart(g2, tau2, starts, seed, opts);
  r.mu1 = m1.mu;
  r.mu2 = m2.mu;
  r.inconclusive = !m1.converged || !m2.converged;

  // (1/8) int_{tau1}^{tau2} tau sup|E|^2 dtau by the trapezoid rule over the
  // stored samples inside the window.
  std::vector<std::pair<double, double>> nodes;  // (tau, tau sup|E|^2)
  nodes.emplace_back(tau1, tau1 * g1.sup_E2);
  for (auto it = traj.rbegin(); it != traj.rend(); ++it) {
    const double tau = T_ref - it->t;
    if (tau <= tau1 || tau >= tau2) continue;
    const auto frames = metric_frames(it->g);
    nodes.emplace_back(tau, tau * field_max(pointwise_norm_sq(it->E, frames)));
  }
  if (tau2 > tau1) nodes.emplace_back(tau2, tau2 * g2.sup_E2);
  double acc = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k)
    acc += 0.5 * (nodes[k].first - nodes[k - 1].first) * (nodes[k].second + nodes[k - 1].second);
  r.integral_term = acc / 8.0;
  const double rhs = r.mu1 + r.integral_term;
  r.slack = 1e-6 * (1.0 + std::abs(rhs));
  r.satisfied = r.mu2 <= rhs + r.slack;
  return r;
}

std::string entropy_csv_header() { return "tau1,tau2,mu1,mu2,integral_term,satisfied,slack\n"; }

std::string entropy_csv_line(const QuasiResult& r) {
  return format_double(r.tau1) + ',' + format_double(r.tau2) + ',' + format_double(r.mu1) + ',' +
         format_double(r.mu2) + ',' + format_double(r.integral_term) + ',' + (r.satisfied ? "1" : "0") + ',' +
         format_double(r.slack) + '\n';
}

std::string dwdt_csv_header() { return "t,dW_dt_fd,dW_dt_formula,lower_bound,residual\n"; }

std::string dwdt_csv_line(const DwdtRow& r) {
  return format_double(r.t) + ',' + format_double(r.dW_dt_fd) + ',' + format_double(r.dW_dt_formula) + ',' +
         format_double(r.lower_bound) + ',' + format_double(r.residual) + '\n';
}

}  // namespace g2
