#include "g2/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "g2/parallel.hpp"
#include "g2/snapshot.hpp"

namespace g2 {

namespace {

// Membership test d < r with a relative margin, so that exact lattice ties
// stay outside under rescaling.
constexpr double kEdge = 1.0 - 1e-12;

struct Offset {
  std::vector<std::pair<int, int>> steps;  // (slot, shift)
  Vec7 delta;
};

std::vector<Offset> stencil(const Grid& grid) {
  std::vector<Offset> out;
  const int k = grid.dimension();
  auto add = [&](std::vector<std::pair<int, int>> steps) {
    Offset o;
    o.delta = Vec7::Zero();
    for (auto [s, m] : steps) o.delta[grid.axis(s).coord] = m * grid.axis(s).h();
    o.steps = std::move(steps);
    out.push_back(std::move(o));
  };
  for (int a = 0; a < k; ++a) {
    for (int m : {-1, 1}) add({{a, m}});
    for (int b = a + 1; b < k; ++b)
      for (int ma = -2; ma <= 2; ++ma)
        for (int mb = -2; mb <= 2; ++mb)
          if (ma != 0 && mb != 0 && std::gcd(ma, mb) == 1) add({{a, ma}, {b, mb}});
  }
  return out;
}

std::size_t shifted(const Grid& grid, std::size_t p, const Offset& o) {
  for (auto [s, m] : o.steps) p = grid.neighbor(p, s, m);
  return p;
}

Field<double> dijkstra(const Field<SymMat7>& g, const std::vector<Offset>& offs, std::size_t src, double cutoff) {
  const Grid& grid = g.grid();
  Field<double> dist(grid, std::numeric_limits<double>::infinity());
  std::vector<char> done(grid.size(), 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    const auto [d, p] = heap.top();
    heap.pop();
    if (done[p]) continue;
    done[p] = 1;
    for (const auto& o : offs) {
      const std::size_t q = shifted(grid, p, o);
      if (done[q]) continue;
      const Mat7 mid = 0.5 * (g[p].mat() + g[q].mat());
      const double nd = d + std::sqrt(o.delta.dot(mid * o.delta));
      if (nd > cutoff) continue;
      if (nd < dist[q]) {
        dist[q] = nd;
        heap.push({nd, q});
      }
    }
  }
  return dist;
}

std::vector<std::size_t> sample_centers(const Grid& grid, int stride) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "center stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    bool keep = true;
    for (int s = 0; s < grid.dimension() && keep; ++s) keep = grid.index_along(p, s) % stride == 0;
    if (keep) out.push_back(p);
  }
  return out;
}

}  // namespace

double resolvable_radius(const Field<SymMat7>& g) {
  const Grid& grid = g.grid();
  double out = 0.0;
  for (int s = 0; s < grid.dimension(); ++s) {
    const int c = grid.axis(s).coord;
    double gmax = 0.0;
    for (const auto& m : g.values()) gmax = std::max(gmax, m(c, c));
    out = std::max(out, grid.axis(s).h() * std::sqrt(gmax));
  }
  return 2.0 * out;
}

Field<double> geodesic_distance(const Field<SymMat7>& g, std::size_t p, double cutoff) {
  if (p >= g.size()) throw Error(ErrorCode::InvalidArgument, "center outside the grid");
  return dijkstra(g, stencil(g.grid()), p, cutoff);
}

double ball_volume(const Field<SymMat7>& g, std::size_t p, double r) {
  if (!(r > resolvable_radius(g)))
    throw Error(ErrorCode::UnresolvableRadius, "radius " + format_double(r) + " is below the grid scale");
  const auto d = geodesic_distance(g, p, r);
  const auto frames = metric_frames(g);
  double acc = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q)
    if (d[q] < kEdge * r) acc += frames[q].sqrt_det;
  return acc * g.grid().cell_measure();
}

KappaReport kappa_check(const Field<SymMat7>& g, const KappaOptions& opts) {
  return kappa_check(g, levi_civita(g).scalar, opts);
}

KappaReport kappa_check(const Field<SymMat7>& g, const Field<double>& scalar, const KappaOptions& opts) {
  const Grid& grid = g.grid();
  const double floor_r = resolvable_radius(g);
  if (!(opts.rho > floor_r))
    throw Error(ErrorCode::UnresolvableRadius, "rho " + format_double(opts.rho) + " is below the grid scale");
  std::vector<double> radii;
  for (double r = opts.rho; r > floor_r; r *= 0.5) radii.push_back(r);

  const auto frames = metric_frames(g);
  const auto offs = stencil(grid);
  const auto centers = sample_centers(grid, opts.center_stride);
  const double cell = grid.cell_measure();
  std::vector<std::vector<BallReport>> per(centers.size());
  parallel_for(centers.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto d = dijkstra(g, offs, centers[i], opts.rho);
      for (double r : radii) {
        BallReport rep;
        rep.center = centers[i];
        rep.r = r;
        rep.sup_R = -std::numeric_limits<double>::infinity();
        double vol = 0.0;
        for (std::size_t q = 0; q < grid.size(); ++q) {
          if (!(d[q] < kEdge * r)) continue;
          vol += frames[q].sqrt_det;
          rep.sup_R = std::max(rep.sup_R, scalar[q]);
        }
        rep.volume = vol * cell;
        rep.ratio = rep.volume / std::pow(r, 7);
        rep.admissible = rep.sup_R <= 1.0 / (r * r);
        per[i].push_back(rep);
      }
    }
  });

  KappaReport out;
  bool have = false;
  for (auto& v : per)
    for (auto& rep : v) {
      if (rep.admissible) {
        ++out.admissible;
        if (!have || rep.ratio < out.worst.ratio) {
          out.worst = rep;
          have = true;
        }
      } else {
        ++out.excluded;
      }
      out.balls.push_back(rep);
    }
  if (!have) throw Error(ErrorCode::NoAdmissibleBalls, "every sampled ball violates sup R <= r^-2");
  out.kappa_observed = out.worst.ratio;
  return out;
}

std::string collapse_csv_header() { return "t,center_index,r,sup_R_ball,volume,ratio,admissible\n"; }

std::string collapse_csv_line(double t, const BallReport& b) {
  return format_double(t) + ',' + std::to_string(b.center) + ',' + format_double(b.r) + ',' + format_double(b.sup_R) +
         ',' + format_double(b.volume) + ',' + format_double(b.ratio) + ',' + (b.admissible ? "1" : "0") + '\n';
}

}  // namespace g2
