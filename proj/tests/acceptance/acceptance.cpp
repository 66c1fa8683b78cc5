// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fields.hpp"
#include "g2/collapse.hpp"
#include "g2/entropy.hpp"
#include "g2/flow.hpp"
#include "g2/initial.hpp"
#include "g2/manifold.hpp"
#include "oracle.hpp"

using namespace g2;
namespace fs = std::filesystem;
using testfields::kTwoPi;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sci(double a) { return fmt("%.3g", a); }

double max_diff(const Mat7& a, const Mat7& b) { return (a - b).cwiseAbs().maxCoeff(); }

FlowSpec spec_of(FlowKind kind, double A = 0.0) {
  FlowSpec s;
  s.kind = kind;
  s.A = A;
  if (kind == FlowKind::generic) s.driver = ricci_driver();
  return s;
}

Trajectory record(const FlowState& s0, const FlowSpec& spec, long steps) {
  Trajectory traj;
  RunLimits lim;
  lim.max_steps = steps;
  RunCallbacks cb;
  cb.on_sample = [&](const FlowState& st, const DiagnosticsRow&) { traj.push_back(make_sample(st, spec)); };
  run(s0, spec, lim, cb);
  return traj;
}

Verdict algebra_identities() {
  // Oracle at the model point first.
  const oracle::Dense dphi = oracle::model_phi();
  const oracle::Dense dpsi = oracle::hodge_star(dphi, Mat7::Identity());
  double anchor = max_diff(oracle::bilinear_b(dphi), bilinear_b(standard_phi()));
  anchor = std::max(anchor, std::abs(oracle::full_norm_sq(dphi, Mat7::Identity()) - 42.0));
  anchor = std::max(anchor, max_diff(oracle::psi_contraction(dpsi, Mat7::Identity()), 24.0 * Mat7::Identity()));
  anchor = std::max(anchor, (hodge_star<3>(standard_phi(), SymMat7::identity()) - oracle::to_form<4>(dpsi)).max_abs());
  const double metric = max_diff(induced_metric(standard_phi()).g.mat(), Mat7::Identity());

  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ThreeForm phi = oracle::random_positive_phi(rng);
    const InducedMetric im = induced_metric(phi);
    const MetricFrame fr = MetricFrame::from(im.g);
    const FourForm psi = hodge_star<3>(phi, fr);
    worst = std::max(worst, std::abs(norm_sq(phi, fr.ginv) - 42.0) / 42.0);
    worst = std::max(worst, std::abs(wedge(phi, psi)[0] - 7.0 * im.volume) / (7.0 * im.volume));
    ThreeForm cut[kDim];
    for (int a = 0; a < kDim; ++a) cut[a] = interior(Vec7::Unit(a), psi);
    const Mat7 ginv = fr.ginv;
    Mat7 c;
    for (int a = 0; a < kDim; ++a)
      for (int b = 0; b < kDim; ++b) c(a, b) = 0.25 * (norm_sq(cut[a] + cut[b], ginv) - norm_sq(cut[a] - cut[b], ginv));
    worst = std::max(worst, max_diff(c, 24.0 * im.g.mat()) / im.g.mat().cwiseAbs().maxCoeff());
  }
  return {anchor <= 1e-12 && metric <= 1e-12 && worst <= 1e-10,
          "oracle anchor " + sci(anchor) + ", g(phi0)-I " + sci(metric) + " (tol 1e-12), identities " + sci(worst) +
              " (tol 1e-10)"};
}

Verdict scaling_law() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> lam(0.1, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ThreeForm phi = oracle::random_positive_phi(rng);
    const double l = lam(rng);
    const Mat7 expect = l * l * induced_metric(phi).g.mat();
    worst = std::max(worst, max_diff(induced_metric(l * l * l * phi).g.mat(), expect) / expect.cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, "relative error " + sci(worst) + " (tol 1e-10)"};
}

double warped_error(int n, double eps) {
  // g = diag(e^{2a(y)}, 1, ..): R = -2(a'' + a'^2).
  const Grid grid({1}, {n}, {1.0});
  const auto g = generate(grid, [&](std::size_t p) {
    Mat7 m = Mat7::Identity();
    m(0, 0) = std::exp(2.0 * eps * std::sin(kTwoPi * grid.coordinate(p, 0)));
    return SymMat7(m);
  });
  const CurvatureBundle cb = levi_civita(g);
  double err = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double y = grid.coordinate(p, 0);
    const double a1 = eps * kTwoPi * std::cos(kTwoPi * y);
    const double a2 = -eps * kTwoPi * kTwoPi * std::sin(kTwoPi * y);
    err = std::max(err, std::abs(cb.scalar[p] + 2.0 * (a2 + a1 * a1)));
  }
  return err;
}

Verdict curvature_convergence() {
  const double r = warped_error(32, 0.1) / warped_error(64, 0.1);
  return {r >= 12.0 && r <= 20.0, "error ratio N=32/N=64 " + fmt("%.3f", r) + " (range [12, 20])"};
}

Verdict torsion_roundtrip() {
  const Grid grid = testfields::line_grid(0, 32);
  const PhiGeometry geo = phi_geometry(conformal_bump(grid, 0.05, {1, 0, 0}));
  const TorsionResult tr = torsion_from_phi(geo);
  const auto rebuilt = torsion_times_psi(tr.torsion, geo);
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int a = 0; a < kDim; ++a) {
      num += norm_sq(tr.grad_phi[p][a] - rebuilt[p][a], geo.frames[p].ginv);
      den += norm_sq(tr.grad_phi[p][a], geo.frames[p].ginv);
    }
  const double rel = std::sqrt(num / den);
  return {den > 0.0 && rel <= 1e-6, "relative residual " + sci(rel) + " (tol 1e-6)"};
}

Verdict stationarity() {
  const Grid grid({0, 1}, {8, 8}, {1.0, 1.0});
  FlowState lap = state_from_phi(FlowKind::laplacian, flat_phi(grid), 0.0);
  FlowState co = state_from_psi(lap.psi(), 0.0);
  const double l0 = lap.lambda, c0 = co.lambda;
  double drift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    lap = step(lap, spec_of(FlowKind::laplacian)).state;
    co = step(co, spec_of(FlowKind::modified_coflow, 1.0)).state;
    drift = std::max({drift, std::abs(lap.lambda - l0), std::abs(co.lambda - c0)});
  }
  return {drift <= 1e-10, "max Lambda drift over 1000 steps " + sci(drift) + " (tol 1e-10)"};
}

Verdict generic_driver() {
  const Grid grid({0, 2}, {10, 10}, {1.0, 1.0});
  const auto phi = conformal_bump(grid, 0.05, {1, 1, 0});
  const FlowState s = state_from_phi(FlowKind::generic, phi, 0.0, StateLevel::torsion);
  std::mt19937_64 rng(303);
  const auto metric = testfields::smooth_metric(grid, rng, 0.2);
  const auto h = map_field(metric, [](const SymMat7& m) { return Mat7(m.mat() - Mat7::Identity()); });
  std::vector<testfields::SmoothScalar> xs;
  for (int i = 0; i < kDim; ++i) xs.emplace_back(grid, rng);
  const auto x = generate(grid, [&](std::size_t p) {
    Vec7 v;
    for (int i = 0; i < kDim; ++i) v[i] = xs[i](grid, p);
    return v;
  });
  const auto v = generic_rhs(s, h, x);
  const double dt = 1e-6;
  const PhiGeometry gp = phi_geometry(generate(grid, [&](std::size_t p) { return phi[p] + dt * v[p]; }));
  const PhiGeometry gm = phi_geometry(generate(grid, [&](std::size_t p) { return phi[p] - dt * v[p]; }));
  double err = 0.0, mag = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const Mat7 fd = (gp.g[p].mat() - gm.g[p].mat()) / (2.0 * dt);
    err = std::max(err, max_diff(fd, 2.0 * h[p]));
    mag = std::max(mag, 2.0 * h[p].cwiseAbs().maxCoeff());
  }
  return {err <= 1e-6 * mag, "relative error " + sci(err / mag) + " (tol 1e-6)"};
}

// Relative error between the centred difference of g along RK4 steps and the
// closed-form metric velocity.
double metric_velocity_error(const FlowState& s, const FlowSpec& spec, double dt) {
  const FlowState sp = rk4_step(s, spec, dt), sm = rk4_step(s, spec, -dt);
  const auto v = metric_velocity(s, spec);
  double err = 0.0, mag = 0.0;
  for (std::size_t p = 0; p < s.grid().size(); ++p) {
    const Mat7 fd = (sp.g()[p].mat() - sm.g()[p].mat()) / (2.0 * dt);
    err = std::max(err, max_diff(fd, v[p].mat()));
    mag = std::max(mag, fd.cwiseAbs().maxCoeff());
  }
  return err / mag;
}

Verdict velocity_closed_forms() {
  auto lap = [](int n) {
    return state_from_phi(FlowKind::laplacian, closed_bump(testfields::line_grid(0, n), 0.02, {1, 0, 0}), 0.0);
  };
  auto co = [](int n) { return state_from_psi(coclosed_bump(testfields::line_grid(0, n), 0.02, {1, 0, 0}), 0.0); };
  const FlowSpec ls = spec_of(FlowKind::laplacian), cs = spec_of(FlowKind::modified_coflow, 1.0);
  const FlowState l32 = lap(32), c32 = co(32);
  const double el = metric_velocity_error(l32, ls, 1e-5), ec = metric_velocity_error(c32, cs, 1e-5);
  const double el_coarse_dt = metric_velocity_error(l32, ls, 1e-3), ec_coarse_dt = metric_velocity_error(c32, cs, 1e-3);
  const double el_coarse_h = metric_velocity_error(lap(16), ls, 1e-5);
  const double ec_coarse_h = metric_velocity_error(co(16), cs, 1e-5);
  const bool refine = el < el_coarse_dt && ec < ec_coarse_dt && el < el_coarse_h && ec < ec_coarse_h;
  return {el <= 5e-3 && ec <= 5e-3 && refine,
          "laplacian " + sci(el) + ", co-flow " + sci(ec) + " (tol 5e-3); dt 1e-3 -> 1e-5: " + sci(el_coarse_dt) + "/" +
              sci(ec_coarse_dt) + " -> " + sci(el) + "/" + sci(ec) + "; N 16 -> 32: " + sci(el_coarse_h) + "/" +
              sci(ec_coarse_h) + " -> " + sci(el) + "/" + sci(ec)};
}

Verdict entropy_closed_form() {
  const Grid grid({0, 3}, {8, 8}, {1.5, 0.5});
  const EntropyGeometry geo = entropy_geometry(Field<SymMat7>(grid, SymMat7::identity()));
  const double V = 1.5 * 0.5;
  double worst = 0.0;
  for (double tau : {0.01, 0.1, 1.0}) {
    Field<double> f(grid, 0.0);
    normalize_probe(geo, f, tau);
    const double expect = std::log(V) - 3.5 * std::log(4.0 * std::numbers::pi * tau) - 7.0;
    worst = std::max(worst, std::abs(w_functional(geo, f, tau) - expect));
  }
  std::mt19937_64 rng(404);
  const Grid g2d({1, 3}, {12, 12}, {1.0, 1.0});
  const auto g = testfields::smooth_metric(g2d, rng, 0.1);
  const EntropyGeometry eg = entropy_geometry(g);
  const double tau = 0.05;
  Field<double> f = testfields::smooth_scalar(g2d, rng, 0.5);
  normalize_probe(eg, f, tau);
  const double w = w_functional(eg, f, tau);
  double scale = 0.0;
  for (double c : {0.5, 2.0, 3.0}) {
    const auto gc = map_field(g, [&](const SymMat7& m) { return SymMat7::from_trusted(c * c * m.mat()); });
    scale = std::max(scale, std::abs(w_functional(entropy_geometry(gc), f, c * c * tau) - w));
  }
  return {worst <= 1e-10 && scale <= 1e-10,
          "flat closed form " + sci(worst) + ", scale invariance " + sci(scale) + " (tol 1e-10)"};
}

const Trajectory& laplacian_run() {
  static const Trajectory traj = record(
      state_from_phi(FlowKind::laplacian, closed_bump(testfields::line_grid(0, 16), 0.02, {1, 0, 0}), 0.0),
      spec_of(FlowKind::laplacian), 60);
  return traj;
}

Verdict dwdt_identity() {
  const Trajectory& traj = laplacian_run();
  const double T = traj.back().t + 0.02;
  const EntropyGeometry last = entropy_geometry(traj.back());
  const DwdtReport rep = dwdt_identity_check(traj, T, minimize_mu(last, T - last.t).f_star);
  return {rep.max_residual <= 5e-3 && rep.bound_holds && !rep.rows.empty(),
          "max relative residual " + sci(rep.max_residual) + " (tol 5e-3) over " + std::to_string(rep.rows.size()) +
              " samples, lower bound " + (rep.bound_holds ? "holds" : "violated")};
}

Verdict quasi_monotonicity() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid grid = testfields::line_grid(0, 16);
  struct Case {
    const char* name;
    Trajectory traj;
  };
  std::vector<Case> cases;
  cases.push_back({"ricci",
                   record(state_from_phi(FlowKind::generic, conformal_bump(grid, 0.05, {1, 0, 0}), 0.0),
                          spec_of(FlowKind::generic), 40)});
  cases.push_back({"laplacian", laplacian_run()});
  cases.push_back({"coflow", record(state_from_psi(coclosed_bump(grid, 0.02, {1, 0, 0}), 0.0),
                                    spec_of(FlowKind::modified_coflow, 1.0), 60)});
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const double span = c.traj.back().t - c.traj.front().t;
    const double tau1 = 0.5 * span;
    const QuasiResult q = quasi_monotonicity_check(c.traj, tau1, 2.0 * tau1, c.traj.back().t + tau1);
    const double margin = q.mu1 + q.integral_term + q.slack - q.mu2;
    ok = ok && q.satisfied && !q.inconclusive;
    detail += std::string(c.name) + " margin " + sci(margin) + (q.satisfied ? " ok" : " FAIL") + "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && secs <= 1200.0;
  return {ok, detail + fmt("%.1f s (limit 1200 s)", secs)};
}

Verdict collapse_check() {
  const Grid plane({0, 1}, {64, 64}, {1.0, 1.0});
  const Field<SymMat7> flat(plane, SymMat7::identity());
  KappaOptions o;
  o.rho = 0.25;
  const KappaReport rep = kappa_check(flat, o);
  const double h = 1.0 / 64;
  double dev = 0.0;
  for (const auto& b : rep.balls)
    if (b.r >= 10.0 * h) dev = std::max(dev, std::abs(b.ratio / (std::numbers::pi * b.r * b.r / std::pow(b.r, 7)) - 1));
  const double kdev = std::abs(rep.kappa_observed / (std::numbers::pi * std::pow(o.rho, -5)) - 1.0);

  std::mt19937_64 rng(12);
  const Grid small({2, 4}, {24, 24}, {1.0, 1.0});
  const auto g = testfields::smooth_metric(small, rng, 0.15);
  KappaOptions so;
  so.rho = 0.3;
  so.center_stride = 6;
  const KappaReport base = kappa_check(g, so);
  double eq = 0.0;
  for (double c : {0.5, 2.0, 3.0}) {
    const auto gc = map_field(g, [&](const SymMat7& m) { return SymMat7::from_trusted(c * c * m.mat()); });
    KappaOptions oc = so;
    oc.rho = c * so.rho;
    eq = std::max(eq, std::abs(kappa_check(gc, oc).kappa_observed / base.kappa_observed - 1.0));
  }
  return {std::max(dev, kdev) <= 0.1 && eq <= 1e-10,
          "flat ball ratio deviation " + sci(std::max(dev, kdev)) + " (tol 0.1), scale equivariance " + sci(eq) +
              " (tol 1e-10)"};
}

Verdict blowup_fitter() {
  bool ok = true;
  std::string detail;
  for (double p : {1.0, 1.5}) {
    const double C = 2.0, T = 1.0;
    std::vector<double> t, l;
    for (int i = 0; i < 200; ++i) {
      t.push_back(0.99 * T * i / 199.0);
      l.push_back(C / std::pow(T - t.back(), p));
    }
    const BlowupFit f = fit_blowup(t, l);
    const double ec = std::abs(f.C_hat / C - 1.0), ep = std::abs(f.exponent + p), et = std::abs(f.T_hat / T - 1.0);
    ok = ok && ec <= 0.02 && ep <= 0.01 && et <= 0.001;
    detail += fmt("p=%.1f: ", p) + "C " + sci(ec) + ", p " + sci(ep) + ", T " + sci(et) + "; ";
  }
  return {ok, detail + "(tol 2%, 0.01, 0.1%)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "g2flow_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "run.cfg") << "flow = laplacian\naxes = 1\nN = 32\nL = 1\ninit = closed\nepsilon = 0.02\n"
                                     "modes = 1\nmax_steps = 20\n";
  const fs::path out = root / "out";
  auto run_cli = [&](int threads, const fs::path& keep) {
    const std::string cmd = std::string(G2FLOW_CLI) + " evolve --config " + (root / "run.cfg").string() + " --out " +
                            out.string() + " --threads " + std::to_string(threads) + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    if (!WIFEXITED(rc) || WEXITSTATUS(rc) != 0) return false;
    fs::rename(out, keep);
    return true;
  };
  if (!run_cli(1, root / "t1") || !run_cli(4, root / "t4")) return {false, "evolve failed"};
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "t1")) {
    if (!e.is_regular_file()) continue;
    const fs::path other = root / "t4" / fs::relative(e.path(), root / "t1");
    ++files;
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
  }
  std::size_t files4 = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "t4"))
    if (e.is_regular_file()) ++files4;
  return {files > 0 && differ == 0 && files4 == files,
          std::to_string(files) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"algebra identities", algebra_identities},
      {"metric scaling law", scaling_law},
      {"curvature convergence", curvature_convergence},
      {"torsion round trip", torsion_roundtrip},
      {"flat stationarity", stationarity},
      {"generic driver metric velocity", generic_driver},
      {"named flow metric velocities", velocity_closed_forms},
      {"entropy closed form", entropy_closed_form},
      {"dW/dt identity", dwdt_identity},
      {"quasi-monotonicity", quasi_monotonicity},
      {"collapse check", collapse_check},
      {"blow-up fitter", blowup_fitter},
      {"thread determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
