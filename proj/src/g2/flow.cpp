#include "g2/flow.hpp"

#include <algorithm>
#include <cmath>

#include "g2/snapshot.hpp"

namespace g2 {

const char* flow_kind_name(FlowKind kind) {
  switch (kind) {
    case FlowKind::laplacian: return "laplacian";
    case FlowKind::modified_coflow: return "modified_coflow";
    case FlowKind::generic: return "generic";
  }
  return "unknown";
}

GenericDriver ricci_driver() {
  GenericDriver d;
  d.h = [](const FlowState& s) {
    return map_field(s.curvature->ricci, [](const SymMat7& r) { return Mat7(-r.mat()); });
  };
  d.needs_curvature = true;
  return d;
}

namespace {

Field<Tensor<2>> as_tensor(const Field<Mat7>& m) {
  return map_field(m, [](const Mat7& v) { return to_tensor(v); });
}

double sup_abs_field(const Field<double>& f) { return field_max_abs(f); }

void complete_state(FlowState& s, StateLevel level) {
  if (level == StateLevel::metric) return;
  s.torsion = torsion_from_phi(s.geo);
  if (level == StateLevel::torsion) return;
  s.curvature = levi_civita(s.geo.g, s.geo.frames);
  s.grad_torsion = covariant_derivative<2>(as_tensor(s.torsion->torsion), s.curvature->christoffel);
  const Grid& grid = s.grid();
  const auto pointwise = generate(grid, [&](std::size_t p) {
    const Mat7& gi = s.geo.frames[p].ginv;
    const double rm2 = riemann_norm_sq(s.curvature->riemann[p], s.geo.frames[p]);
    const double t2 = norm_sq(s.torsion->torsion[p], gi);
    const double dt2 = norm_sq<3>((*s.grad_torsion)[p], gi);
    return std::sqrt(std::max(0.0, rm2 + t2 * t2 + dt2));
  });
  s.lambda = field_max(pointwise);
}

}  // namespace

FlowState state_from_phi(FlowKind kind, const Field<ThreeForm>& phi, double t, StateLevel level) {
  FlowState s;
  s.kind = kind;
  s.t = t;
  s.geo = phi_geometry(phi);
  complete_state(s, level);
  return s;
}

SymMat7 metric_from_psi(const FourForm& psi, const SymMat7& guess, int* iterations) {
  // F(g) = induced(*_g psi) has derivative -1/3 on the trace mode and 2 on the
  // traceless modes at every fixed point, so the plain iteration diverges.
  // Relaxing each mode by 1/(1 - eigenvalue) gives a Newton-like update.
  Mat7 g = guess.mat();
  for (int it = 1; it <= 50; ++it) {
    const MetricFrame fr = MetricFrame::from(g);
    const InducedMetric im = induced_metric(hodge_star<4>(psi, fr));
    if (im.orientation < 0) throw Error(ErrorCode::DegenerateForm, "4-form is negatively oriented");
    const Mat7 d = im.g.mat() - g;
    const Mat7 trace_part = ((fr.ginv.cwiseProduct(d)).sum() / kDim) * g;
    const Mat7 step_dir = 0.75 * trace_part - (d - trace_part);
    Mat7 next = g + step_dir;
    for (int k = 0; k < 30 && Eigen::LLT<Mat7>(next).info() != Eigen::Success; ++k) next = g + std::ldexp(1.0, -k - 1) * step_dir;
    const double diff = (next - g).cwiseAbs().maxCoeff();
    g = 0.5 * (next + next.transpose());
    if (diff <= 1e-13 * std::max(1.0, g.cwiseAbs().maxCoeff())) {
      if (iterations) *iterations = it;
      return SymMat7::from_trusted(g);
    }
  }
  throw Error(ErrorCode::NonConvergence, "metric recovery from psi did not converge");
}

FlowState state_from_psi(const Field<FourForm>& psi, double t, const Field<SymMat7>* guess, StateLevel level) {
  const Grid& grid = psi.grid();
  std::vector<int> iters(grid.size(), 0);
  const auto g = generate(grid, [&](std::size_t p) {
    try {
      int n = 0;
      const SymMat7 r = metric_from_psi(psi[p], guess ? (*guess)[p] : SymMat7::identity(), &n);
      iters[p] = n;
      return r;
    } catch (const Error& e) {
      throw PointError(e.code(), e.what(), p);
    }
  });
  const auto phi = generate(grid, [&](std::size_t p) { return hodge_star<4>(psi[p], MetricFrame::from(g[p])); });
  FlowState s;
  s.kind = FlowKind::modified_coflow;
  s.t = t;
  s.geo = phi_geometry(phi);
  s.geo.psi = psi;
  for (int n : iters) s.psi_iterations = std::max(s.psi_iterations, n);
  complete_state(s, level);
  return s;
}

Field<ThreeForm> laplacian_flow_rhs(const FlowState& s) {
  auto out = hodge_laplacian(s.phi(), s.frames());
  for (auto& v : out.values()) v *= -1.0;
  return out;
}

Field<double> torsion_trace(const FlowState& s) {
  return generate(s.grid(), [&](std::size_t p) {
    return (s.frames()[p].ginv.cwiseProduct(s.torsion->torsion[p])).sum();
  });
}

Field<FourForm> modified_coflow_rhs(const FlowState& s, double A) {
  auto out = hodge_laplacian(s.psi(), s.frames());
  for (auto& v : out.values()) v *= -1.0;
  const auto tr = torsion_trace(s);
  const auto weighted = generate(s.grid(), [&](std::size_t p) { return (A - tr[p]) * s.phi()[p]; });
  const auto d = exterior_derivative(weighted);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] += 2.0 * d[p];
  return out;
}

namespace {

void require_symmetric(const Field<Mat7>& h) {
  for (std::size_t p = 0; p < h.size(); ++p)
    if ((h[p] - h[p].transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw PointError(ErrorCode::AsymmetricH, "h is not symmetric", p);
}

template <int K>
Form<K> derivation(const Mat7& m, const Form<K>& a) {
  // sum over slots of m_{i_s}^l a_{.. l ..}
  Form<K> out;
  for (int n = 0; n < Form<K>::kSize; ++n) {
    auto idx = kBasis<K>.tuple[n];
    double acc = 0.0;
    for (int s = 0; s < K; ++s) {
      const int orig = idx[s];
      for (int l = 0; l < kDim; ++l) {
        const double w = m(orig, l);
        if (w == 0.0) continue;
        idx[s] = l;
        acc += w * a.at(idx);
      }
      idx[s] = orig;
    }
    out[n] = acc;
  }
  return out;
}

}  // namespace

Field<ThreeForm> generic_rhs(const FlowState& s, const Field<Mat7>& h, const Field<Vec7>& x) {
  require_symmetric(h);
  return generate(s.grid(), [&](std::size_t p) {
    const Mat7 m = h[p] * s.frames()[p].ginv;  // h_i^l
    ThreeForm out = derivation<3>(m, s.phi()[p]);
    out += interior(x[p], s.psi()[p]);
    return out;
  });
}

Field<FourForm> generic_psi_rhs(const FlowState& s, const Field<Mat7>& h, const Field<Vec7>& x) {
  require_symmetric(h);
  return generate(s.grid(), [&](std::size_t p) {
    const Mat7 m = h[p] * s.frames()[p].ginv;
    FourForm out = derivation<4>(m, s.psi()[p]);
    Form<1> xl;
    const Vec7 low = s.frames()[p].g * x[p];
    for (int i = 0; i < kDim; ++i) xl[i] = low[i];
    // -X_i phi_jkl + X_j phi_ikl - X_k phi_ijl + X_l phi_ijk = -(X^flat ^ phi)_ijkl
    out -= wedge(xl, s.phi()[p]);
    return out;
  });
}

Field<SymMat7> e_tensor(const FlowState& s, const FlowSpec& spec) {
  const Grid& grid = s.grid();
  switch (s.kind) {
    case FlowKind::laplacian:
      return generate(grid, [&](std::size_t p) {
        const Mat7& gi = s.frames()[p].ginv;
        const Mat7& t = s.torsion->torsion[p];
        const double t2 = norm_sq(t, gi);
        return SymMat7::from_trusted(-(2.0 / 3.0) * t2 * s.frames()[p].g - 4.0 * t * gi * t);
      });
    case FlowKind::modified_coflow: {
      const auto tr = torsion_trace(s);
      return generate(grid, [&](std::size_t p) {
        const Mat7& gi = s.frames()[p].ginv;
        const Mat7& t = s.torsion->torsion[p];
        const Mat7 tup = gi * t * gi;
        const ThreeForm& phi = s.phi()[p];
        // Y_{i,mn} = phi_ikl T^{km} T^{ln}
        std::array<double, 343> y{};
        for (int i = 0; i < kDim; ++i)
          for (int k = 0; k < kDim; ++k)
            for (int l = 0; l < kDim; ++l) {
              const double f = phi.at({i, k, l});
              if (f == 0.0) continue;
              for (int m = 0; m < kDim; ++m) {
                const double a = f * tup(k, m);
                if (a == 0.0) continue;
                for (int n = 0; n < kDim; ++n) y[i * 49 + m * 7 + n] += a * tup(l, n);
              }
            }
        Mat7 e = Mat7::Zero();
        for (int i = 0; i < kDim; ++i)
          for (int j = 0; j < kDim; ++j) {
            double acc = 0.0;
            for (int m = 0; m < kDim; ++m)
              for (int n = 0; n < kDim; ++n) acc += y[i * 49 + m * 7 + n] * phi.at({j, m, n});
            e(i, j) = acc;
          }
        e += (4.0 * spec.A - 2.0 * tr[p]) * 0.5 * (t + t.transpose());
        return SymMat7::from_trusted(e);
      });
    }
    case FlowKind::generic: {
      const auto h = spec.driver.h(s);
      return generate(grid, [&](std::size_t p) {
        return SymMat7::from_trusted(2.0 * h[p] + 2.0 * s.curvature->ricci[p].mat());
      });
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown flow kind");
}

Field<SymMat7> metric_velocity(const FlowState& s, const FlowSpec& spec) {
  auto e = e_tensor(s, spec);
  for (std::size_t p = 0; p < e.size(); ++p) e[p] -= 2.0 * s.curvature->ricci[p];
  return e;
}

double closedness_residual(const FlowState& s) {
  if (s.kind == FlowKind::modified_coflow) return sup_norm(exterior_derivative(s.psi()), s.frames());
  return sup_norm(exterior_derivative(s.phi()), s.frames());
}

DiagnosticsRow diagnostics(const FlowState& s, const FlowSpec& spec) {
  if (!s.curvature || !s.torsion || !s.grad_torsion)
    throw Error(ErrorCode::InvalidArgument, "diagnostics need a fully built state");
  const Grid& grid = s.grid();
  const auto& frames = s.frames();
  const auto& curv = *s.curvature;
  const auto low_rm = generate(grid, [&](std::size_t p) { return lower_riemann(curv.riemann[p], frames[p].g); });
  const auto grad_rm2 = covariant_derivative_norm_sq<4>(low_rm, curv.christoffel, frames);
  const auto grad2_t2 = covariant_derivative_norm_sq<3>(*s.grad_torsion, curv.christoffel, frames);
  const double mu = spec.mu();

  std::vector<double> rm2(grid.size()), t2(grid.size()), dt2(grid.size()), ric2(grid.size());
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Mat7& gi = frames[p].ginv;
      rm2[p] = norm_sq<4>(low_rm[p], gi);
      t2[p] = norm_sq(s.torsion->torsion[p], gi);
      dt2[p] = norm_sq<3>((*s.grad_torsion)[p], gi);
      ric2[p] = norm_sq(curv.ricci[p], gi);
    }
  });

  DiagnosticsRow r;
  r.t = s.t;
  r.dt = s.dt_last;
  double lam2 = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    r.sup_Rm = std::max(r.sup_Rm, rm2[p]);
    r.sup_T2 = std::max(r.sup_T2, t2[p]);
    r.sup_gradT = std::max(r.sup_gradT, dt2[p]);
    const double base = rm2[p] + t2[p] * t2[p] + dt2[p];
    lam2 = std::max(lam2, base);
    r.Q = std::max(r.Q, (mu + base) * (grad_rm2[p] + grad2_t2[p]));
    r.sup_Ric = std::max(r.sup_Ric, ric2[p]);
  }
  r.sup_Rm = std::sqrt(r.sup_Rm);
  r.sup_gradT = std::sqrt(r.sup_gradT);
  r.sup_Ric = std::sqrt(r.sup_Ric);
  r.Lambda = std::sqrt(lam2);
  r.sup_R = sup_abs_field(curv.scalar);
  r.d_phi_residual = closedness_residual(s);
  return r;
}

std::string diagnostics_csv_header() {
  return "t,dt,sup_Rm,sup_T2,sup_gradT,Lambda,Q,sup_Ric,sup_R,d_phi_residual\n";
}

std::string diagnostics_csv_line(const DiagnosticsRow& r) {
  const double v[] = {r.t, r.dt, r.sup_Rm, r.sup_T2, r.sup_gradT, r.Lambda, r.Q, r.sup_Ric, r.sup_R, r.d_phi_residual};
  std::string out;
  for (std::size_t i = 0; i < std::size(v); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  out += '\n';
  return out;
}

double proposed_dt(const FlowState& s, const FlowSpec& spec) {
  if (spec.forced_dt > 0.0) return spec.forced_dt;
  const double h = s.grid().min_spacing();
  return spec.cfl * h * h / std::max(1.0, s.lambda);
}

namespace {

StateLevel stage_level(const FlowSpec& spec) {
  switch (spec.kind) {
    case FlowKind::laplacian: return StateLevel::metric;
    case FlowKind::modified_coflow: return StateLevel::torsion;
    case FlowKind::generic: return spec.driver.needs_curvature ? StateLevel::full : StateLevel::torsion;
  }
  return StateLevel::full;
}

template <int K>
Field<Form<K>> axpy_field(const Field<Form<K>>& y, double w, const Field<Form<K>>& k) {
  return generate(y.grid(), [&](std::size_t p) { return y[p] + w * k[p]; });
}

Field<ThreeForm> phi_velocity(const FlowState& st, const FlowSpec& spec) {
  if (spec.kind == FlowKind::laplacian) return laplacian_flow_rhs(st);
  const auto h = spec.driver.h(st);
  const auto x = spec.driver.x ? spec.driver.x(st) : Field<Vec7>(st.grid());
  return generic_rhs(st, h, x);
}

}  // namespace

FlowState rk4_step(const FlowState& s, const FlowSpec& spec, double dt) {
  const StateLevel level = stage_level(spec);
  FlowState out;
  if (spec.kind == FlowKind::modified_coflow) {
    const auto& y = s.psi();
    auto eval = [&](const Field<FourForm>& yy, double t) {
      const FlowState st = state_from_psi(yy, t, &s.g(), level);
      return modified_coflow_rhs(st, spec.A);
    };
    const auto k1 = modified_coflow_rhs(s, spec.A);
    const auto k2 = eval(axpy_field(y, 0.5 * dt, k1), s.t + 0.5 * dt);
    const auto k3 = eval(axpy_field(y, 0.5 * dt, k2), s.t + 0.5 * dt);
    const auto k4 = eval(axpy_field(y, dt, k3), s.t + dt);
    const auto next = generate(y.grid(), [&](std::size_t p) {
      return y[p] + (dt / 6.0) * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
    });
    out = state_from_psi(next, s.t + dt, &s.g());
  } else {
    const auto& y = s.phi();
    auto eval = [&](const Field<ThreeForm>& yy, double t) {
      return phi_velocity(state_from_phi(s.kind, yy, t, level), spec);
    };
    const auto k1 = phi_velocity(s, spec);
    const auto k2 = eval(axpy_field(y, 0.5 * dt, k1), s.t + 0.5 * dt);
    const auto k3 = eval(axpy_field(y, 0.5 * dt, k2), s.t + 0.5 * dt);
    const auto k4 = eval(axpy_field(y, dt, k3), s.t + dt);
    const auto next = generate(y.grid(), [&](std::size_t p) {
      return y[p] + (dt / 6.0) * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
    });
    out = state_from_phi(s.kind, next, s.t + dt);
  }
  out.dt_last = dt;
  return out;
}

StepOutcome step(const FlowState& s, const FlowSpec& spec, double max_dt) {
  double dt = std::min(proposed_dt(s, spec), max_dt);
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  constexpr int kMaxHalvings = 20;
  for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
    try {
      FlowState next = rk4_step(s, spec, dt);
      if (std::isfinite(next.lambda) && next.lambda <= 4.0 * s.lambda + 1e-9) return {std::move(next), attempt};
    } catch (const Error& e) {
      const auto c = e.code();
      if (c != ErrorCode::DegenerateForm && c != ErrorCode::MetricNotPositive && c != ErrorCode::NonConvergence)
        throw;
    }
    dt *= 0.5;
  }
  throw Error(ErrorCode::StepFailure, "step rejected 20 times at t = " + format_double(s.t));
}

RunResult run(const FlowState& initial, const FlowSpec& spec, const RunLimits& limits, const RunCallbacks& cb) {
  if (limits.diag_every < 1) throw Error(ErrorCode::InvalidArgument, "diag_every must be at least 1");
  if (!initial.curvature) throw Error(ErrorCode::InvalidArgument, "run needs a fully built initial state");
  if (spec.kind == FlowKind::laplacian) {
    double sup_phi = 0.0;
    for (const auto& v : initial.phi().values()) sup_phi = std::max(sup_phi, v.max_abs());
    if (closedness_residual(initial) > 1e-8 * (1.0 + sup_phi))
      throw Error(ErrorCode::NotClosed, "Laplacian flow needs closed initial data");
  }

  RunResult res;
  res.final_state = initial;
  FlowState& s = res.final_state;
  auto record = [&]() {
    const DiagnosticsRow row = diagnostics(s, spec);
    res.rows.push_back(row);
    if (cb.on_sample) cb.on_sample(s, row);
  };
  const double lambda0 = initial.lambda;
  int next_m = 1;
  auto thresholds = [&]() {
    if (!(lambda0 > 0.0)) return;
    while (s.lambda >= lambda0 * std::ldexp(1.0, next_m)) {
      if (cb.on_threshold) cb.on_threshold(s, next_m);
      ++next_m;
    }
  };

  record();
  bool recorded_last = true;
  res.stop_reason = "max_steps";
  while (res.steps < limits.max_steps) {
    if (s.t >= limits.t_max * (1.0 - 1e-14)) {
      res.stop_reason = "t_max";
      break;
    }
    if (s.lambda >= limits.lambda_max) {
      res.stop_reason = "lambda_max";
      res.singular_candidate = true;
      break;
    }
    try {
      StepOutcome o = step(s, spec, limits.t_max - s.t);
      res.rejections += o.rejections;
      s = std::move(o.state);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StepFailure) throw;
      res.stop_reason = "step_failure";
      res.singular_candidate = true;
      break;
    }
    ++res.steps;
    recorded_last = false;
    if (res.steps % limits.diag_every == 0) {
      record();
      recorded_last = true;
    }
    thresholds();
  }
  if (res.steps >= limits.max_steps && res.stop_reason == "max_steps") {
    if (s.t >= limits.t_max * (1.0 - 1e-14)) res.stop_reason = "t_max";
  }
  if (!recorded_last) record();
  return res;
}

namespace {

struct LineFit {
  double intercept = 0.0, slope = 0.0, sse = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.sse += r * r;
  }
  return f;
}

}  // namespace

BlowupFit fit_blowup(const std::vector<double>& t, const std::vector<double>& lambda) {
  if (t.size() != lambda.size()) throw Error(ErrorCode::InvalidArgument, "time and Lambda series differ in length");
  if (t.size() < 10) throw Error(ErrorCode::InsufficientDynamicRange, "blow-up fit needs at least 10 samples");
  double lo = lambda.front(), hi = lambda.front();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i]))
      throw Error(ErrorCode::InsufficientDynamicRange, "Lambda samples must be positive");
    if (i && !(t[i] > t[i - 1])) throw Error(ErrorCode::InvalidArgument, "sample times must increase");
    lo = std::min(lo, lambda[i]);
    hi = std::max(hi, lambda[i]);
  }
  if (hi < 10.0 * lo) throw Error(ErrorCode::InsufficientDynamicRange, "Lambda grows by less than 10x");

  const double t_last = t.back();
  const double span = t_last - t.front();
  std::vector<double> logl(lambda.size()), x(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) logl[i] = std::log(lambda[i]);
  // Search variable s = log(T - t_last).
  auto sse = [&](double s) {
    const double T = t_last + std::exp(s);
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = std::log(T - t[i]);
    return fit_line(x, logl).sse;
  };
  const double s_lo = std::log(span * 1e-9), s_hi = std::log(span * 1e3);
  constexpr int kCoarse = 400;
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kCoarse; ++i) {
    const double v = sse(s_lo + (s_hi - s_lo) * i / kCoarse);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  double a = s_lo + (s_hi - s_lo) * std::max(0, best - 1) / kCoarse;
  double b = s_lo + (s_hi - s_lo) * std::min(kCoarse, best + 1) / kCoarse;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = sse(c), fd = sse(d);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = sse(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = sse(d);
    }
  }
  const double s_star = 0.5 * (a + b);
  BlowupFit out;
  out.T_hat = t_last + std::exp(s_star);
  for (std::size_t i = 0; i < t.size(); ++i) x[i] = std::log(out.T_hat - t[i]);
  const LineFit f = fit_line(x, logl);
  out.exponent = f.slope;
  out.C_hat = std::exp(f.intercept);
  out.rms_residual = std::sqrt(f.sse / static_cast<double>(t.size()));
  out.samples = t.size();
  out.rate_constant = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i)
    out.rate_constant = std::min(out.rate_constant, lambda[i] * (out.T_hat - t[i]));
  return out;
}

}  // namespace g2
