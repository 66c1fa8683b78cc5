#include "g2/initial.hpp"

#include <cmath>
#include <numbers>

#include "g2/manifold.hpp"

namespace g2 {

Field<double> bump_profile(const Grid& grid, const std::array<int, 3>& modes) {
  return generate(grid, [&](std::size_t p) {
    double u = 1.0;
    bool any = false;
    for (int s = 0; s < grid.dimension(); ++s) {
      if (modes[s] == 0) continue;
      any = true;
      u *= std::sin(2.0 * std::numbers::pi * modes[s] * grid.coordinate(p, s) / grid.axis(s).length);
    }
    return any ? u : 0.0;
  });
}

Field<ThreeForm> flat_phi(const Grid& grid) { return Field<ThreeForm>(grid, standard_phi()); }

Field<ThreeForm> conformal_bump(const Grid& grid, double eps, const std::array<int, 3>& modes) {
  const auto u = bump_profile(grid, modes);
  const ThreeForm phi0 = standard_phi();
  return generate(grid, [&](std::size_t p) { return std::pow(1.0 + eps * u[p], 3) * phi0; });
}

Form<2> bump_two_form() {
  Form<2> b;
  b.set({1, 2}, 1.0);
  b.set({3, 4}, 0.5);
  b.set({5, 6}, -0.8);
  b.set({1, 5}, 0.3);
  b.set({2, 6}, 0.6);
  b.set({4, 5}, 0.4);
  b.set({0, 3}, 0.7);
  b.set({0, 6}, 0.2);
  return b;
}

ThreeForm bump_three_form() {
  ThreeForm c;
  c.set({1, 2, 3}, 1.0);
  c.set({4, 5, 6}, 0.5);
  c.set({1, 4, 5}, -0.6);
  c.set({2, 3, 6}, 0.4);
  c.set({0, 1, 6}, 0.3);
  c.set({0, 3, 5}, 0.2);
  return c;
}

Field<ThreeForm> closed_bump(const Grid& grid, double eps, const std::array<int, 3>& modes) {
  const auto u = bump_profile(grid, modes);
  const Form<2> beta = bump_two_form();
  const auto d = exterior_derivative(map_field(u, [&](double v) { return (eps * v) * beta; }));
  const ThreeForm phi0 = standard_phi();
  return map_field(d, [&](const ThreeForm& v) { return phi0 + v; });
}

Field<FourForm> coclosed_bump(const Grid& grid, double eps, const std::array<int, 3>& modes) {
  const auto u = bump_profile(grid, modes);
  const ThreeForm gamma = bump_three_form();
  const auto d = exterior_derivative(map_field(u, [&](double v) { return (eps * v) * gamma; }));
  const FourForm psi0 = hodge_star(standard_phi(), MetricFrame::from(SymMat7::identity()));
  return map_field(d, [&](const FourForm& v) { return psi0 + v; });
}

}  // namespace g2
