#include <doctest.h>

#include <random>

#include "fields.hpp"
#include "g2/manifold.hpp"

using namespace g2;
using testfields::kTwoPi;

namespace {

double warped_error(int n, double eps) {
  // g = diag(e^{2a(y)}, 1, ..) with y the second coordinate: R = -2(a'' + a'^2).
  const Grid grid({1}, {n}, {1.0});
  const double k = kTwoPi;
  const auto g = generate(grid, [&](std::size_t p) {
    const double y = grid.coordinate(p, 0);
    Mat7 m = Mat7::Identity();
    m(0, 0) = std::exp(2.0 * eps * std::sin(k * y));
    return SymMat7(m);
  });
  const CurvatureBundle cb = levi_civita(g);
  double err = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double y = grid.coordinate(p, 0);
    const double a1 = eps * k * std::cos(k * y);
    const double a2 = -eps * k * k * std::sin(k * y);
    err = std::max(err, std::abs(cb.scalar[p] + 2.0 * (a2 + a1 * a1)));
  }
  return err;
}

Field<ThreeForm> conformal_bump(const Grid& grid, double eps) {
  return generate(grid, [&](std::size_t p) {
    const double f = 1.0 + eps * std::sin(kTwoPi * grid.coordinate(p, 0) / grid.axis(0).length);
    return f * f * f * standard_phi();
  });
}

template <class V>
double sup_abs(const Field<V>& f) {
  double m = 0.0;
  for (const auto& v : f.values()) m = std::max(m, v.max_abs());
  return m;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid({0}, {3}, {1.0}), Error);
  CHECK_THROWS_AS(Grid({0, 0}, {8, 8}, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(Grid({}, {}, {}), Error);
  CHECK_THROWS_AS(Grid({0}, {8}, {-1.0}), Error);
  const Grid g({4, 1}, {8, 6}, {2.0, 3.0});
  CHECK(g.size() == 48);
  CHECK(g.axis(0).coord == 1);
  CHECK(g.axis(0).n == 6);
  CHECK(g.cell_measure() == doctest::Approx(0.5 * 0.25));
}

TEST_CASE("partial derivatives") {
  const Grid grid = testfields::line_grid(2, 32, 2.0);
  const double k = kTwoPi / 2.0;
  const auto f = generate(grid, [&](std::size_t p) { return std::sin(k * grid.coordinate(p, 0)); });
  const auto c = Field<double>(grid, 3.5);
  const auto dc = partial(c, 2, 1);
  const auto df = partial(f, 0, 1);
  for (double v : dc.values()) CHECK(v == 0.0);
  for (double v : df.values()) CHECK(v == 0.0);

  auto err = [&](int n, int order) {
    const Grid gr = testfields::line_grid(2, n, 2.0);
    const auto ff = generate(gr, [&](std::size_t p) { return std::sin(k * gr.coordinate(p, 0)); });
    const auto d = partial(ff, 2, order);
    double e = 0.0;
    for (std::size_t p = 0; p < gr.size(); ++p) {
      const double x = gr.coordinate(p, 0);
      const double exact = order == 1 ? k * std::cos(k * x) : -k * k * std::sin(k * x);
      e = std::max(e, std::abs(d[p] - exact));
    }
    return e;
  };
  for (int order : {1, 2}) {
    const double ratio = err(32, order) / err(64, order);
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
  }
  CHECK_THROWS_AS(partial(f, 2, 3), Error);
}

TEST_CASE("flat metrics have no curvature") {
  const Grid grid({0, 3}, {8, 8}, {1.0, 1.0});
  for (double c : {1.0, 2.5}) {
    const CurvatureBundle cb = levi_civita(Field<SymMat7>(grid, c * SymMat7::identity()));
    for (std::size_t p = 0; p < grid.size(); ++p) {
      for (double v : cb.christoffel[p].c) CHECK(v == 0.0);
      for (double v : cb.riemann[p].c) CHECK(v == 0.0);
      CHECK(cb.scalar[p] == 0.0);
    }
  }
}

TEST_CASE("warped metric scalar curvature converges at fourth order") {
  const double e32 = warped_error(32, 0.1);
  const double e64 = warped_error(64, 0.1);
  CHECK(e32 < 1e-3);
  CHECK(e32 / e64 > 12.0);
  CHECK(e32 / e64 < 20.0);
}

TEST_CASE("curvature symmetries on a random metric") {
  std::mt19937_64 rng(41);
  const Grid grid({0, 2}, {24, 24}, {1.0, 1.0});
  const auto g = testfields::smooth_metric(grid, rng, 0.05);
  const CurvatureBundle cb = levi_civita(g);
  double scale = 0.0, anti1 = 0.0, anti2 = 0.0, bianchi = 0.0;
  for (std::size_t p = 0; p < grid.size(); p += 7) {
    const Tensor<4> r = lower_riemann(cb.riemann[p], g[p].mat());
    auto at = [&](int i, int j, int k, int l) { return r[((i * 7 + j) * 7 + k) * 7 + l]; };
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j)
        for (int k = 0; k < 7; ++k)
          for (int l = 0; l < 7; ++l) {
            scale = std::max(scale, std::abs(at(i, j, k, l)));
            anti1 = std::max(anti1, std::abs(at(i, j, k, l) + at(j, i, k, l)));
            anti2 = std::max(anti2, std::abs(at(i, j, k, l) + at(i, j, l, k)));
            bianchi = std::max(bianchi, std::abs(at(i, j, k, l) + at(j, k, i, l) + at(k, i, j, l)));
          }
  }
  CHECK(scale > 1e-2);
  CHECK(anti1 < 1e-12 * (1.0 + scale));
  CHECK(anti2 < 1e-4 * scale);
  CHECK(bianchi < 1e-12 * (1.0 + scale));
}

TEST_CASE("metric compatibility") {
  std::mt19937_64 rng(43);
  const Grid grid = testfields::line_grid(5, 48);
  const auto g = testfields::smooth_metric(grid, rng, 0.1);
  const CurvatureBundle cb = levi_civita(g);
  const auto gt = map_field(g, [](const SymMat7& m) { return to_tensor(m.mat()); });
  const auto dg = covariant_derivative<2>(gt, cb.christoffel);
  double e = 0.0;
  for (const auto& t : dg.values())
    for (double v : t.c) e = std::max(e, std::abs(v));
  CHECK(e < 1e-4);

  const auto zero_gamma = Field<Christoffel>(grid);
  const auto c = Field<Tensor<2>>(grid, to_tensor(Mat7::Identity() * 2.0));
  const auto dc = covariant_derivative<2>(c, zero_gamma);
  for (const auto& t : dc.values())
    for (double v : t.c) CHECK(v == 0.0);
  const auto phi = Field<ThreeForm>(grid, standard_phi());
  const auto dphi = covariant_derivative<3>(phi, zero_gamma);
  for (const auto& t : dphi.values())
    for (const auto& f : t) CHECK(f.max_abs() == 0.0);

  const auto fused = covariant_derivative_norm_sq<2>(gt, cb.christoffel, metric_frames(g));
  const auto frames = metric_frames(g);
  for (std::size_t p = 0; p < grid.size(); p += 5)
    CHECK(fused[p] == doctest::Approx(norm_sq<3>(dg[p], frames[p].ginv)).epsilon(1e-10));
}

TEST_CASE("exterior derivative") {
  const Grid grid = testfields::line_grid(1, 32);
  const double k = kTwoPi;
  const auto a = generate(grid, [&](std::size_t p) {
    Form<1> f;
    f[0] = std::sin(k * grid.coordinate(p, 0));
    return f;
  });
  const auto da = exterior_derivative(a);
  double err = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    err = std::max(err, std::abs(da[p].at({1, 0}) - k * std::cos(k * grid.coordinate(p, 0))));
  CHECK(err < 1e-3);

  const auto dconst = exterior_derivative(Field<ThreeForm>(grid, standard_phi()));
  for (const auto& v : dconst.values()) CHECK(v.max_abs() == 0.0);

  std::mt19937_64 rng(47);
  const Grid g2d({0, 4}, {16, 12}, {1.0, 2.0});
  const auto b = testfields::smooth_form<2>(g2d, rng);
  CHECK(sup_abs(exterior_derivative(exterior_derivative(b))) <= 1e-12 * sup_abs(b) * 1e3);
  const auto c = testfields::smooth_form<3>(g2d, rng);
  CHECK(sup_abs(exterior_derivative(exterior_derivative(c))) <= 1e-9);
}

TEST_CASE("hodge star on fields is an involution") {
  std::mt19937_64 rng(53);
  const Grid grid({0, 6}, {8, 8}, {1.0, 1.0});
  const auto frames = metric_frames(testfields::smooth_metric(grid, rng, 0.1));
  const auto a = testfields::smooth_form<3>(grid, rng);
  const auto back = hodge_star(hodge_star(a, frames), frames);
  double e = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) e = std::max(e, (back[p] - a[p]).max_abs());
  CHECK(e <= 1e-12);
}

TEST_CASE("hodge laplacian") {
  const Grid grid = testfields::line_grid(0, 32, 1.5);
  const double k = kTwoPi / 1.5;
  const auto flat = Field<MetricFrame>(grid, MetricFrame::from(SymMat7::identity()));
  const auto f = generate(grid, [&](std::size_t p) {
    Form<0> v;
    v[0] = std::sin(k * grid.coordinate(p, 0));
    return v;
  });
  const auto lf = hodge_laplacian(f, flat);
  double err = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) err = std::max(err, std::abs(lf[p][0] + k * k * f[p][0]));
  CHECK(err < 1e-2 * k * k);

  const auto lconst = hodge_laplacian(Field<ThreeForm>(grid, standard_phi()), flat);
  for (const auto& v : lconst.values()) CHECK(v.max_abs() == 0.0);

  // Against the Christoffel form of the Laplace-Beltrami operator.
  auto lb_gap = [&](int n) {
    std::mt19937_64 r2(61);
    const Grid gr({2, 3}, {n, n}, {1.0, 1.0});
    const auto g = testfields::smooth_metric(gr, r2, 0.1);
    const auto frames = metric_frames(g);
    const auto u = testfields::smooth_scalar(gr, r2);
    const auto u0 = map_field(u, [](double v) {
      Form<0> a;
      a[0] = v;
      return a;
    });
    const auto h = hodge_laplacian(u0, frames);
    const auto lb = laplace_beltrami(u, frames, levi_civita(g, frames).christoffel);
    double e = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < gr.size(); ++p) {
      e = std::max(e, std::abs(h[p][0] - lb[p]));
      scale = std::max(scale, std::abs(lb[p]));
    }
    return e / scale;
  };
  const double g16 = lb_gap(16), g32 = lb_gap(32);
  CHECK(g32 < 5e-3);
  CHECK(g16 / g32 > 10.0);
}

TEST_CASE("norms and integrals") {
  const Grid grid({0, 1}, {4, 4}, {1.0, 1.0});
  const auto frames = Field<MetricFrame>(grid, MetricFrame::from(SymMat7::identity()));
  CHECK(sup_norm(Field<SymMat7>(grid, SymMat7::identity()), frames) == doctest::Approx(std::sqrt(7.0)));
  CHECK(sup_norm(Field<ThreeForm>(grid, standard_phi()), frames) == doctest::Approx(std::sqrt(42.0)));
  CHECK(integral(Field<double>(grid, 1.0), frames) == doctest::Approx(1.0).epsilon(1e-15));

  std::array<double, kDim> periods = Grid::unit_periods();
  periods[4] = 3.0;
  const Grid big({0, 1}, {4, 4}, {2.0, 1.0}, periods);
  const auto fr2 = Field<MetricFrame>(big, MetricFrame::from(SymMat7(4.0 * Mat7::Identity())));
  CHECK(total_volume(fr2) == doctest::Approx(6.0 * 128.0));
}

TEST_CASE("torsion of the model structure vanishes") {
  const Grid grid = testfields::line_grid(0, 16);
  const auto t = torsion_from_phi(Field<ThreeForm>(grid, standard_phi()));
  for (const auto& m : t.values()) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("torsion reconstructs the covariant derivative of phi") {
  const Grid grid = testfields::line_grid(0, 32);
  const PhiGeometry geo = phi_geometry(conformal_bump(grid, 0.05));
  const TorsionResult tr = torsion_from_phi(geo);
  const auto rebuilt = torsion_times_psi(tr.torsion, geo);
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int a = 0; a < kDim; ++a) {
      num = std::max(num, (tr.grad_phi[p][a] - rebuilt[p][a]).max_abs());
      den = std::max(den, tr.grad_phi[p][a].max_abs());
    }
  CHECK(den > 1e-2);
  CHECK(num / den <= 1e-6);
}

TEST_CASE("torsion matches a least-squares solve") {
  std::mt19937_64 rng(67);
  const Grid grid = testfields::line_grid(3, 16);
  const auto base = conformal_bump(grid, 0.08);
  const auto pert = testfields::smooth_form<3>(grid, rng, 0.02);
  Field<ThreeForm> phi(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) phi[p] = base[p] + pert[p];
  const PhiGeometry geo = phi_geometry(phi);
  const TorsionResult tr = torsion_from_phi(geo);
  for (std::size_t p = 0; p < grid.size(); p += 3) {
    // Unknowns T_a^e, equations nabla_a phi_I = T_a^e psi_{eI} for ordered I.
    Eigen::Matrix<double, 35, 7> m;
    for (int n = 0; n < 35; ++n) {
      const auto& t = kBasis<3>.tuple[n];
      for (int e = 0; e < 7; ++e) m(n, e) = geo.psi[p].at({e, t[0], t[1], t[2]});
    }
    Mat7 tup;
    for (int a = 0; a < kDim; ++a) {
      Eigen::Matrix<double, 35, 1> rhs;
      for (int n = 0; n < 35; ++n) rhs[n] = tr.grad_phi[p][a][n];
      tup.row(a) = m.colPivHouseholderQr().solve(rhs).transpose();
    }
    const Mat7 lowered = tup * geo.g[p].mat();
    CHECK((lowered - tr.torsion[p]).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("negative or degenerate forms are rejected pointwise") {
  const Grid grid = testfields::line_grid(0, 8);
  Field<ThreeForm> phi(grid, standard_phi());
  phi[5] = ThreeForm();
  try {
    phi_geometry(phi);
    FAIL("expected an error");
  } catch (const PointError& e) {
    CHECK(e.code() == ErrorCode::DegenerateForm);
    CHECK(e.point() == 5);
  }
  Field<SymMat7> g(grid, SymMat7::identity());
  g[2] = SymMat7(-1.0 * Mat7::Identity());
  CHECK_THROWS_AS(metric_frames(g), PointError);
}
