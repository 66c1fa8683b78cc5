#include "g2/manifold.hpp"

#include <algorithm>

namespace g2 {

Field<MetricFrame> metric_frames(const Field<SymMat7>& g) {
  return generate(g.grid(), [&](std::size_t p) {
    try {
      return MetricFrame::from(g[p]);
    } catch (const Error& e) {
      throw PointError(e.code(), e.what(), p);
    }
  });
}

namespace {

using Lowered = std::array<double, 343>;  // Gamma_{l,ij} at l*49 + i*7 + j

Lowered lowered_christoffel(const std::array<Mat7, kDim>& dg) {
  Lowered out;
  for (int l = 0; l < kDim; ++l)
    for (int i = 0; i < kDim; ++i)
      for (int j = 0; j < kDim; ++j) out[l * 49 + i * 7 + j] = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
  return out;
}

Christoffel raise_first(const Mat7& ginv, const Lowered& low) {
  Christoffel out;
  for (int k = 0; k < kDim; ++k)
    for (int l = 0; l < kDim; ++l) {
      const double gk = ginv(k, l);
      if (gk == 0.0) continue;
      for (int ij = 0; ij < 49; ++ij) out[k * 49 + ij] += gk * low[l * 49 + ij];
    }
  return out;
}

}  // namespace

Christoffel christoffel_symbols(const Mat7& ginv, const std::array<Mat7, kDim>& dg) {
  return raise_first(ginv, lowered_christoffel(dg));
}

Field<Christoffel> christoffel_field(const Field<SymMat7>& g, const Field<MetricFrame>& frames) {
  const auto dg = gradient(g);
  return generate(g.grid(), [&](std::size_t p) {
    std::array<Mat7, kDim> d1;
    for (int a = 0; a < kDim; ++a) d1[a] = dg[p][a].mat();
    return christoffel_symbols(frames[p].ginv, d1);
  });
}

CurvatureBundle levi_civita(const Field<SymMat7>& g) { return levi_civita(g, metric_frames(g)); }

CurvatureBundle levi_civita(const Field<SymMat7>& g, const Field<MetricFrame>& frames) {
  const Grid& grid = g.grid();
  const auto dg = gradient(g);
  const auto d2g = hessian(g);
  std::vector<int> active;
  for (int c = 0; c < kDim; ++c)
    if (grid.active(c)) active.push_back(c);

  CurvatureBundle out{Field<Christoffel>(grid), Field<Riemann>(grid), Field<SymMat7>(grid), Field<double>(grid)};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Mat7& ginv = frames[p].ginv;
      std::array<Mat7, kDim> d1;
      for (int a = 0; a < kDim; ++a) d1[a] = dg[p][a].mat();
      const Lowered low = lowered_christoffel(d1);
      const Christoffel gam = raise_first(ginv, low);

      // d_m Gamma^k_ij = (d_m g^{kl}) Gamma_{l,ij} + g^{kl} d_m Gamma_{l,ij}.
      std::array<Christoffel, kDim> dgam;
      for (int m : active) {
        const Mat7 dginv = -ginv * d1[m] * ginv;
        std::array<Mat7, kDim> d2;
        for (int a = 0; a < kDim; ++a) d2[a] = d2g[p][m * kDim + a].mat();
        const Lowered dlow = lowered_christoffel(d2);
        Christoffel r = raise_first(dginv, low);
        r += raise_first(ginv, dlow);
        dgam[m] = r;
      }

      Riemann R;
      for (int i = 0; i < kDim; ++i)
        for (int j = 0; j < kDim; ++j) {
          if (i == j) continue;
          const bool ai = grid.active(i), aj = grid.active(j);
          for (int k = 0; k < kDim; ++k)
            for (int l = 0; l < kDim; ++l) {
              double v = 0.0;
              if (ai) v += dgam[i][l * 49 + j * 7 + k];
              if (aj) v -= dgam[j][l * 49 + i * 7 + k];
              for (int q = 0; q < kDim; ++q)
                v += gam[l * 49 + i * 7 + q] * gam[q * 49 + j * 7 + k] - gam[l * 49 + j * 7 + q] * gam[q * 49 + i * 7 + k];
              R[((i * 7 + j) * 7 + k) * 7 + l] = v;
            }
        }

      Mat7 ric = Mat7::Zero();
      for (int j = 0; j < kDim; ++j)
        for (int k = 0; k < kDim; ++k) {
          double v = 0.0;
          for (int i = 0; i < kDim; ++i) v += R[((i * 7 + j) * 7 + k) * 7 + i];
          ric(j, k) = v;
        }
      const SymMat7 ricci = SymMat7::from_trusted(ric);
      out.christoffel[p] = gam;
      out.riemann[p] = R;
      out.ricci[p] = ricci;
      out.scalar[p] = (ginv.cwiseProduct(ricci.mat())).sum();
    }
  });
  return out;
}

Tensor<4> lower_riemann(const Riemann& r, const Mat7& g) {
  Tensor<4> out;
  for (int ijk = 0; ijk < 343; ++ijk)
    for (int l = 0; l < kDim; ++l) {
      double acc = 0.0;
      for (int m = 0; m < kDim; ++m) acc += r[ijk * 7 + m] * g(m, l);
      out[ijk * 7 + l] = acc;
    }
  return out;
}

Tensor<2> to_tensor(const Mat7& m) {
  Tensor<2> t;
  for (int i = 0; i < kDim; ++i)
    for (int j = 0; j < kDim; ++j) t[i * 7 + j] = m(i, j);
  return t;
}

PhiGeometry phi_geometry(const Field<ThreeForm>& phi) {
  const Grid& grid = phi.grid();
  PhiGeometry geo{phi, Field<FourForm>(grid), Field<SymMat7>(grid), Field<MetricFrame>(grid),
                  Field<InducedMetric>(grid)};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      InducedMetric im;
      try {
        im = induced_metric(phi[p]);
      } catch (const Error& err) {
        throw PointError(err.code(), err.what(), p);
      }
      if (im.orientation < 0) throw PointError(ErrorCode::DegenerateForm, "3-form is negatively oriented", p);
      geo.induced[p] = im;
      geo.g[p] = im.g;
      geo.frames[p] = MetricFrame::from(im.g);
      geo.psi[p] = hodge_star<3>(phi[p], geo.frames[p]);
    }
  });
  return geo;
}

TorsionResult torsion_from_phi(const PhiGeometry& geo) {
  const Grid& grid = geo.phi.grid();
  std::array<Field<ThreeForm>, kDim> dphi;
  for (int a = 0; a < kDim; ++a)
    if (grid.active(a)) dphi[a] = partial(geo.phi, a, 1);

  TorsionResult out{Field<Mat7>(grid), Field<Christoffel>(grid), {}};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      std::array<Mat7, kDim> dg;
      for (int a = 0; a < kDim; ++a)
        dg[a] = grid.active(a) ? induced_metric_variation(geo.phi[p], dphi[a][p], geo.induced[p]) : Mat7::Zero();
      out.christoffel[p] = christoffel_symbols(geo.frames[p].ginv, dg);
    }
  });
  out.grad_phi = covariant_derivative(geo.phi, out.christoffel);

  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const FourForm up = raise_all(geo.psi[p], geo.frames[p].ginv);
      Mat7 tup = Mat7::Zero();  // T_a^e
      for (int a = 0; a < kDim; ++a)
        for (int n = 0; n < ThreeForm::kSize; ++n) {
          const double v = out.grad_phi[p][a][n];
          if (v == 0.0) continue;
          const auto& t = kBasis<3>.tuple[n];
          for (int ee = 0; ee < kDim; ++ee) tup(a, ee) += 0.25 * v * up.at({ee, t[0], t[1], t[2]});
        }
      out.torsion[p] = tup * geo.frames[p].g;
    }
  });
  return out;
}

Field<Mat7> torsion_from_phi(const Field<ThreeForm>& phi) { return torsion_from_phi(phi_geometry(phi)).torsion; }

Field<FormGradient<3>> torsion_times_psi(const Field<Mat7>& torsion, const PhiGeometry& geo) {
  return generate(torsion.grid(), [&](std::size_t p) {
    const Mat7 tup = torsion[p] * geo.frames[p].ginv;
    FormGradient<3> out;
    for (int a = 0; a < kDim; ++a)
      for (int n = 0; n < ThreeForm::kSize; ++n) {
        const auto& t = kBasis<3>.tuple[n];
        double acc = 0.0;
        for (int ee = 0; ee < kDim; ++ee) acc += tup(a, ee) * geo.psi[p].at({ee, t[0], t[1], t[2]});
        out[a][n] = acc;
      }
    return out;
  });
}

Field<Mat7> covariant_hessian(const Field<double>& f, const Field<Christoffel>& gamma) {
  const auto d1 = gradient(f);
  const auto d2 = hessian(f);
  return generate(f.grid(), [&](std::size_t p) {
    Mat7 h;
    for (int i = 0; i < kDim; ++i)
      for (int j = 0; j < kDim; ++j) {
        double v = d2[p][i * kDim + j];
        for (int k = 0; k < kDim; ++k) v -= gamma[p][k * 49 + i * 7 + j] * d1[p][k];
        h(i, j) = v;
      }
    return h;
  });
}

Field<double> laplace_beltrami(const Field<double>& f, const Field<MetricFrame>& frames,
                               const Field<Christoffel>& gamma) {
  const auto d1 = gradient(f);
  const auto d2 = hessian(f);
  return generate(f.grid(), [&](std::size_t p) {
    double acc = 0.0;
    for (int i = 0; i < kDim; ++i)
      for (int j = 0; j < kDim; ++j) {
        const double gij = frames[p].ginv(i, j);
        if (gij == 0.0) continue;
        double v = d2[p][i * kDim + j];
        for (int k = 0; k < kDim; ++k) v -= gamma[p][k * 49 + i * 7 + j] * d1[p][k];
        acc += gij * v;
      }
    return acc;
  });
}

double norm_sq(const Mat7& t, const Mat7& ginv) { return ((ginv * t * ginv).cwiseProduct(t)).sum(); }

double norm_sq(const SymMat7& t, const Mat7& ginv) { return norm_sq(t.mat(), ginv); }

double riemann_norm_sq(const Riemann& r, const MetricFrame& frame) {
  return norm_sq<4>(lower_riemann(r, frame.g), frame.ginv);
}

double field_max(const Field<double>& f) {
  double m = f.size() ? f[0] : 0.0;
  for (double v : f.values()) m = std::max(m, v);
  return m;
}

double field_max_abs(const Field<double>& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double integral(const Field<double>& f, const Field<MetricFrame>& frames) {
  double acc = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) acc += f[p] * frames[p].sqrt_det;
  return acc * f.grid().cell_measure();
}

double total_volume(const Field<MetricFrame>& frames) {
  double acc = 0.0;
  for (const auto& fr : frames.values()) acc += fr.sqrt_det;
  return acc * frames.grid().cell_measure();
}

}  // namespace g2
