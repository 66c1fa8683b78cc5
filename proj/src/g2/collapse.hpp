#pragma once

// Graph geodesic distances, metric balls and the kappa-non-collapsing check
// relative to an upper bound of the scalar curvature.

#include <limits>
#include <string>
#include <vector>

#include "g2/manifold.hpp"

namespace g2 {

/// Smallest radius a ball may have: twice the longest metric edge along an
/// axis, 2 max_a h_a sqrt(max g_aa). Equals 2 max h on flat data.
double resolvable_radius(const Field<SymMat7>& g);

/// Dijkstra distance from grid point p. Edges join points whose slot offsets
/// lie in [-2, 2] on at most two active axes with coprime entries (16 per
/// axis pair); an edge's length is that of the straight segment under the
/// mean of its end metrics. Points farther than cutoff are left at infinity.
Field<double> geodesic_distance(const Field<SymMat7>& g, std::size_t p,
                                double cutoff = std::numeric_limits<double>::infinity());

/// Riemannian volume of the points at distance < r from p, inactive periods
/// included. Throws UnresolvableRadius when r <= resolvable_radius(g).
double ball_volume(const Field<SymMat7>& g, std::size_t p, double r);

struct BallReport {
  std::size_t center = 0;
  double r = 0.0;
  double sup_R = 0.0;
  double volume = 0.0;
  double ratio = 0.0;  // volume / r^7
  bool admissible = false;  // sup_R <= r^-2
};

struct KappaOptions {
  double rho = 0.0;
  int center_stride = 4;  // every stride-th point along each active axis
};

struct KappaReport {
  std::vector<BallReport> balls;  // by center index, then decreasing r
  BallReport worst;               // smallest ratio among admissible balls
  double kappa_observed = 0.0;
  std::size_t admissible = 0;
  std::size_t excluded = 0;
};

/// Sweeps the sampled centers over r = rho, rho/2, ... down to the
/// resolvable radius. Throws UnresolvableRadius when rho is too small and
/// NoAdmissibleBalls when every ball violates the curvature bound.
KappaReport kappa_check(const Field<SymMat7>& g, const KappaOptions& opts);
/// Same, with the scalar curvature supplied.
KappaReport kappa_check(const Field<SymMat7>& g, const Field<double>& scalar, const KappaOptions& opts);

std::string collapse_csv_header();
std::string collapse_csv_line(double t, const BallReport& b);

}  // namespace g2
