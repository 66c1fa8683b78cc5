#pragma once

// Initial G2 data on the periodic grid.

#include <array>

#include "g2/grid.hpp"

namespace g2 {

/// u(x) = prod over active slots of sin(2 pi m_s x_s / L_s); a zero mode
/// number leaves that slot out of the product.
Field<double> bump_profile(const Grid& grid, const std::array<int, 3>& modes);

Field<ThreeForm> flat_phi(const Grid& grid);

/// (1 + eps u)^3 phi_0. Torsion-bearing, not closed.
Field<ThreeForm> conformal_bump(const Grid& grid, double eps, const std::array<int, 3>& modes);

/// phi_0 + eps d(u beta) for a fixed constant 2-form beta. Exactly closed in
/// the discrete sense since the stencils commute.
Field<ThreeForm> closed_bump(const Grid& grid, double eps, const std::array<int, 3>& modes);

/// psi_0 + eps d(u gamma) for a fixed constant 3-form gamma.
Field<FourForm> coclosed_bump(const Grid& grid, double eps, const std::array<int, 3>& modes);

Form<2> bump_two_form();
ThreeForm bump_three_form();

}  // namespace g2
