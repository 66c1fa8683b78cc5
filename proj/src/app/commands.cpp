#include "app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "g2/collapse.hpp"
#include "g2/initial.hpp"
#include "g2/snapshot.hpp"

namespace g2::app {

namespace fs = std::filesystem;

namespace {

std::string kv(const std::string& k, const std::string& v) { return k + " = " + v + "\n"; }
std::string kv(const std::string& k, double v) { return kv(k, format_double(v)); }

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06zu", i);
  return buf;
}

void prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg.output + ": " + ec.message());
  write_file_atomic(cfg.output + "/config.echo", cfg.text);
  write_file_atomic(cfg.output + "/config.resolved", resolved_dump(cfg));
}

void require_file(const std::string& path, const char* what) {
  if (!file_exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

Metadata state_meta(const FlowState& s, const FlowSpec& spec) {
  return {{"t", format_double(s.t)},
          {"Lambda", format_double(s.lambda)},
          {"flow_kind", flow_kind_name(spec.kind)},
          {"A", format_double(spec.A)}};
}

// Pointwise G2 identities: |phi|^2 = 42, phi ^ psi = 7 vol, psi psi = 24 g.
struct IdentityReport {
  bool positive = true;
  std::size_t first_bad = 0;
  double phi_norm = 0.0, wedge = 0.0, contraction = 0.0;
};

double inner3(const ThreeForm& a, const ThreeForm& b, const Mat7& ginv) {
  return 0.25 * (norm_sq(a + b, ginv) - norm_sq(a - b, ginv));
}

IdentityReport pointwise_identities(const Field<ThreeForm>& phi) {
  IdentityReport r;
  for (std::size_t p = 0; p < phi.size(); ++p) {
    if (g2_check(phi[p]) != G2Class::positive) {
      r.positive = false;
      r.first_bad = p;
      return r;
    }
    const InducedMetric im = induced_metric(phi[p]);
    const MetricFrame fr = MetricFrame::from(im.g);
    const FourForm psi = hodge_star(phi[p], fr);
    r.phi_norm = std::max(r.phi_norm, std::abs(norm_sq(phi[p], fr.ginv) - 42.0));
    r.wedge = std::max(r.wedge, std::abs(wedge(phi[p], psi)[0] - 7.0 * im.volume) / im.volume);
    std::array<ThreeForm, kDim> cut;
    for (int a = 0; a < kDim; ++a) cut[a] = interior(Vec7::Unit(a), psi);
    const double scale = fr.g.cwiseAbs().maxCoeff();
    for (int a = 0; a < kDim; ++a)
      for (int b = a; b < kDim; ++b) {
        const double c = inner3(cut[a], cut[b], fr.ginv);
        r.contraction = std::max(r.contraction, std::abs(c - 24.0 * fr.g(a, b)) / (24.0 * scale));
      }
  }
  return r;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "empty CSV " + path);
  t.header = split_commas(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_commas(line);
    if (cells.size() != t.header.size())
      throw Error(ErrorCode::Io, path + ":" + std::to_string(lineno) + ": wrong number of columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0')
        throw Error(ErrorCode::Io, path + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

FlowSpec flow_spec(const RunConfig& cfg) {
  FlowSpec spec;
  spec.kind = cfg.flow;
  spec.A = cfg.flow == FlowKind::modified_coflow ? cfg.A : 0.0;
  spec.cfl = cfg.cfl;
  spec.forced_dt = cfg.dt;
  if (cfg.flow == FlowKind::generic) spec.driver = ricci_driver();
  return spec;
}

FlowState initial_state(const RunConfig& cfg) {
  if (cfg.init == "snapshot") {
    require_file(cfg.snapshot, "snapshot");
    const Snapshot snap = read_snapshot(cfg.snapshot, cfg.inactive_periods());
    if (snap.kind == ValueKind::three_form) return state_from_phi(cfg.flow, from_snapshot<ThreeForm>(snap), 0.0);
    if (snap.kind == ValueKind::four_form) {
      if (cfg.flow != FlowKind::modified_coflow)
        throw ConfigError(ErrorCode::ParseError, 0, "a 4-form snapshot can only seed the co-flow");
      return state_from_psi(from_snapshot<FourForm>(snap), 0.0);
    }
    throw Error(ErrorCode::Io, "snapshot " + cfg.snapshot + " holds neither a 3-form nor a 4-form");
  }
  const Grid grid = cfg.grid();
  const auto modes = cfg.mode_array();
  if (cfg.init == "coclosed") {
    if (cfg.flow != FlowKind::modified_coflow)
      throw ConfigError(ErrorCode::ParseError, 0, "init = coclosed is only available for the co-flow");
    return state_from_psi(coclosed_bump(grid, cfg.epsilon, modes), 0.0);
  }
  Field<ThreeForm> phi = cfg.init == "conformal" ? conformal_bump(grid, cfg.epsilon, modes)
                         : cfg.init == "closed"  ? closed_bump(grid, cfg.epsilon, modes)
                                                 : flat_phi(grid);
  return state_from_phi(cfg.flow, phi, 0.0);
}

Trajectory load_trajectory(const std::string& dir, const std::array<double, kDim>& periods) {
  const std::string index = dir + "/index";
  if (!fs::is_directory(dir)) throw UsageError("trajectory directory not found: " + dir);
  require_file(index, "trajectory index");
  const Metadata meta = read_metadata(index);
  const auto it = meta.find("samples");
  if (it == meta.end()) throw Error(ErrorCode::Io, "trajectory index without a sample count: " + index);
  const long count = std::stol(it->second);
  Trajectory traj;
  for (long i = 0; i < count; ++i) {
    const std::string base = dir + "/" + sample_name(static_cast<std::size_t>(i));
    require_file(base + ".g", "trajectory sample");
    TrajectorySample s;
    const Metadata m = read_metadata(base + ".meta");
    s.t = std::stod(m.at("t"));
    s.g = from_snapshot<SymMat7>(read_snapshot(base + ".g", periods));
    s.E = from_snapshot<SymMat7>(read_snapshot(base + ".E", periods));
    traj.push_back(std::move(s));
  }
  if (traj.empty()) throw Error(ErrorCode::TrajectoryGap, "empty trajectory in " + dir);
  return traj;
}

CommandResult run_validate(const RunConfig& cfg) {
  const FlowState s = initial_state(cfg);
  prepare_output(cfg);
  CommandResult res;
  const IdentityReport id = pointwise_identities(s.phi());
  std::string out = kv("command", "validate") + kv("points", std::to_string(s.grid().size()));
  out += kv("g2_positive", id.positive ? "1" : "0");
  if (!id.positive) {
    out += kv("first_bad_point", std::to_string(id.first_bad));
    res.checks_passed = false;
  } else {
    const TorsionResult tr = torsion_from_phi(s.geo);
    const auto rebuilt = torsion_times_psi(tr.torsion, s.geo);
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < s.grid().size(); ++p) {
      FormGradient<3> diff;
      for (int a = 0; a < kDim; ++a) diff[a] = tr.grad_phi[p][a] - rebuilt[p][a];
      num += norm_sq(diff, s.frames()[p].ginv);
      den += norm_sq(tr.grad_phi[p], s.frames()[p].ginv);
    }
    const double roundtrip = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    const double dphi = sup_norm(exterior_derivative(s.phi()), s.frames());
    const double dpsi = sup_norm(exterior_derivative(s.psi()), s.frames());
    const double closed_tol = 1e-8 * (1.0 + sup_norm(s.phi(), s.frames()));
    out += kv("phi_norm_deviation", id.phi_norm) + kv("wedge_deviation", id.wedge) +
           kv("contraction_deviation", id.contraction) + kv("torsion_roundtrip", roundtrip) + kv("d_phi", dphi) +
           kv("d_psi", dpsi) + kv("Lambda", s.lambda);
    res.checks_passed = id.phi_norm <= 42e-10 && id.wedge <= 1e-10 && id.contraction <= 1e-10 && roundtrip <= 1e-6;
    if (cfg.flow == FlowKind::laplacian && dphi > closed_tol) res.checks_passed = false;
  }
  out += kv("passed", res.checks_passed ? "1" : "0");
  write_file_atomic(cfg.output + "/validate.txt", out);
  res.summary = out;
  return res;
}

CommandResult run_evolve(const RunConfig& cfg) {
  const FlowState s0 = initial_state(cfg);
  const FlowSpec spec = flow_spec(cfg);
  prepare_output(cfg);
  const std::string tdir = cfg.trajectory_dir();
  const std::string rdir = cfg.output + "/rescaled";
  for (const auto& d : {tdir, rdir}) {
    std::error_code ec;
    fs::remove_all(d, ec);
    fs::create_directories(d, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + d + ": " + ec.message());
  }

  RunLimits lim;
  lim.t_max = cfg.t_max;
  lim.lambda_max = cfg.lambda_max;
  lim.max_steps = cfg.max_steps;
  lim.diag_every = cfg.diag_every;

  std::size_t seen = 0, stored = 0;
  RunCallbacks cb;
  cb.on_sample = [&](const FlowState& st, const DiagnosticsRow&) {
    if (seen++ % static_cast<std::size_t>(cfg.trajectory_every) != 0) return;
    const std::string base = tdir + "/" + sample_name(stored++);
    write_snapshot(base + ".g", to_snapshot(st.g()));
    write_snapshot(base + ".E", to_snapshot(e_tensor(st, spec)));
    write_metadata(base + ".meta", state_meta(st, spec));
  };
  if (cfg.rescaled_snapshots) {
    cb.on_threshold = [&](const FlowState& st, int m) {
      char name[32];
      std::snprintf(name, sizeof name, "/threshold_%02d", m);
      const std::string base = rdir + name;
      const double L = st.lambda;
      write_snapshot(base + ".phi", to_snapshot(map_field(st.phi(), [&](const ThreeForm& f) {
                       return std::pow(L, 1.5) * f;
                     })));
      write_snapshot(base + ".g", to_snapshot(map_field(st.g(), [&](const SymMat7& g) {
                       return SymMat7::from_trusted(L * g.mat());
                     })));
      Metadata meta = state_meta(st, spec);
      meta["threshold"] = std::to_string(m);
      write_metadata(base + ".meta", meta);
    };
  }

  const RunResult rr = run(s0, spec, lim, cb);
  write_metadata(tdir + "/index", {{"samples", std::to_string(stored)},
                                   {"flow_kind", flow_kind_name(spec.kind)},
                                   {"A", format_double(spec.A)}});

  std::string csv = diagnostics_csv_header();
  for (const auto& row : rr.rows) csv += diagnostics_csv_line(row);
  write_file_atomic(cfg.output + "/diagnostics.csv", csv);

  const FlowState& fin = rr.final_state;
  write_snapshot(cfg.output + "/state.final.phi", to_snapshot(fin.phi()));
  if (spec.kind == FlowKind::modified_coflow) write_snapshot(cfg.output + "/state.final.psi", to_snapshot(fin.psi()));
  write_metadata(cfg.output + "/state.final.meta", state_meta(fin, spec));

  CommandResult res;
  res.singular = rr.singular_candidate;
  std::string out = kv("command", "evolve") + kv("flow", flow_kind_name(spec.kind)) +
                    kv("steps", std::to_string(rr.steps)) + kv("rejections", std::to_string(rr.rejections)) +
                    kv("stop_reason", rr.stop_reason) + kv("t_final", fin.t) + kv("Lambda_final", fin.lambda) +
                    kv("samples", std::to_string(stored)) + kv("singular_candidate", res.singular ? "1" : "0");
  const std::string marker = cfg.output + "/SINGULAR";
  if (res.singular) {
    write_file_atomic(marker, kv("t", fin.t) + kv("Lambda", fin.lambda) + kv("stop_reason", rr.stop_reason));
  } else {
    std::error_code ec;
    fs::remove(marker, ec);
  }
  write_file_atomic(cfg.output + "/evolve.txt", out);
  res.summary = out;
  return res;
}

CommandResult run_entropy(const RunConfig& cfg) {
  const Trajectory traj = load_trajectory(cfg.trajectory_dir(), cfg.inactive_periods());
  prepare_output(cfg);
  const double t0 = traj.front().t, t1 = traj.back().t;
  std::vector<double> taus = cfg.tau;
  if (taus.empty()) {
    if (!(t1 > t0)) throw Error(ErrorCode::TrajectoryGap, "trajectory spans no time; set tau explicitly");
    taus = {0.5 * (t1 - t0), t1 - t0};
  }
  const double T = std::isnan(cfg.reference_time) ? t1 + taus.front() : cfg.reference_time;

  MuOptions opts;
  opts.tol = cfg.mu_tol;
  opts.max_iter = cfg.mu_max_iter;

  CommandResult res;
  std::string out = kv("command", "entropy") + kv("reference_time", T) + kv("samples", std::to_string(traj.size()));
  std::string csv = entropy_csv_header();
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    const QuasiResult q = quasi_monotonicity_check(traj, taus[i], taus[i + 1], T, opts, cfg.mu_starts, cfg.seed);
    csv += entropy_csv_line(q);
    if (!q.satisfied || q.inconclusive) res.checks_passed = false;
    if (i == 0) out += kv("mu_" + std::to_string(i), q.mu1);
    out += kv("mu_" + std::to_string(i + 1), q.mu2);
  }
  write_file_atomic(cfg.output + "/entropy.csv", csv);

  if (cfg.dwdt) {
    if (!(T > t1)) throw Error(ErrorCode::InvalidArgument, "dW/dt needs a reference time after the last sample");
    const EntropyGeometry last = entropy_geometry(traj.back());
    const MuResult m = minimize_mu(last, T - t1, opts);
    const DwdtReport rep = dwdt_identity_check(traj, T, m.f_star);
    std::string d = dwdt_csv_header();
    for (const auto& row : rep.rows) d += dwdt_csv_line(row);
    write_file_atomic(cfg.output + "/dwdt.csv", d);
    out += kv("dwdt_max_residual", rep.max_residual) + kv("dwdt_bound_holds", rep.bound_holds ? "1" : "0");
    if (!rep.bound_holds) res.checks_passed = false;
  }
  out += kv("passed", res.checks_passed ? "1" : "0");
  write_file_atomic(cfg.output + "/entropy.txt", out);
  res.summary = out;
  return res;
}

CommandResult run_collapse(const RunConfig& cfg) {
  const Trajectory traj = load_trajectory(cfg.trajectory_dir(), cfg.inactive_periods());
  prepare_output(cfg);
  const Grid& grid = traj.front().g.grid();
  KappaOptions opts;
  opts.center_stride = cfg.center_stride;
  if (std::isnan(cfg.rho)) {
    double shortest = std::numeric_limits<double>::infinity();
    for (const auto& a : grid.axes()) shortest = std::min(shortest, a.length);
    opts.rho = 0.25 * shortest;
  } else {
    opts.rho = cfg.rho;
  }

  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < traj.size(); i += static_cast<std::size_t>(cfg.collapse_every)) picks.push_back(i);
  if (picks.back() != traj.size() - 1) picks.push_back(traj.size() - 1);

  CommandResult res;
  std::string csv = collapse_csv_header();
  std::string out = kv("command", "collapse") + kv("rho", opts.rho);
  double floor = 0.0, lowest = 0.0, last = 0.0;
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto& s = traj[picks[k]];
    const KappaReport rep = kappa_check(s.g, opts);
    for (const auto& b : rep.balls) csv += collapse_csv_line(s.t, b);
    if (k == 0) floor = lowest = rep.kappa_observed;
    lowest = std::min(lowest, rep.kappa_observed);
    last = rep.kappa_observed;
  }
  res.checks_passed = lowest >= 0.5 * floor;
  write_file_atomic(cfg.output + "/collapse.csv", csv);
  out += kv("samples_checked", std::to_string(picks.size())) + kv("kappa_initial", floor) + kv("kappa_final", last) +
         kv("kappa_min", lowest) + kv("kappa_floor_holds", res.checks_passed ? "1" : "0");
  write_file_atomic(cfg.output + "/collapse.txt", out);
  res.summary = out;
  return res;
}

CommandResult run_fit_blowup(const RunConfig& cfg) {
  const std::string path = cfg.diagnostics_path();
  require_file(path, "diagnostics CSV");
  const CsvTable table = read_csv(path);
  const int ct = table.column("t"), cl = table.column("Lambda");
  if (ct < 0 || cl < 0) throw UsageError("diagnostics CSV needs t and Lambda columns: " + path);
  prepare_output(cfg);
  std::vector<double> t, lambda;
  for (const auto& row : table.rows)
    if (row[ct] >= cfg.fit_t_min) {
      t.push_back(row[ct]);
      lambda.push_back(row[cl]);
    }
  const BlowupFit fit = fit_blowup(t, lambda);
  const std::string out = kv("command", "fit-blowup") + kv("C_hat", fit.C_hat) + kv("exponent", fit.exponent) +
                          kv("T_hat", fit.T_hat) + kv("rate_constant", fit.rate_constant) +
                          kv("rms_residual", fit.rms_residual) + kv("samples", std::to_string(fit.samples));
  write_file_atomic(cfg.output + "/blowup.txt", out);
  CommandResult res;
  res.summary = out;
  return res;
}

CommandResult run_command(const std::string& name, const RunConfig& cfg) {
  if (name == "validate") return run_validate(cfg);
  if (name == "evolve") return run_evolve(cfg);
  if (name == "entropy") return run_entropy(cfg);
  if (name == "collapse") return run_collapse(cfg);
  if (name == "fit-blowup") return run_fit_blowup(cfg);
  throw UsageError("unknown command '" + name + "'");
}

}  // namespace g2::app
