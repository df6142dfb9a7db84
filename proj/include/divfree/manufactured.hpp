#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "divfree/fe_space.hpp"

namespace divfree {

using TimeVectorField = std::function<Vec2(const Vec2&, double)>;
using TimeMatrixField = std::function<Mat2(const Vec2&, double)>;
using TimeScalarField = std::function<double(const Vec2&, double)>;

/// Exact solution of the incompressible Euler / Navier-Stokes equations with
/// the forcing that makes it exact:
/// f = du/dt - nu Lap u + (u . grad) u + grad p.
struct ExactProblem {
  TimeVectorField velocity;
  TimeMatrixField velocity_gradient;  // (a, b) = d u_a / d x_b
  TimeScalarField pressure;
  TimeVectorField velocity_dt;
  TimeVectorField forcing;
  TimeVectorField forcing_dt;
  double nu = 0.0;
};

/// The Taylor-Green type vortex on the unit square,
///   u = cos(2 pi t) (sin(2 pi x) cos(2 pi y), -cos(2 pi x) sin(2 pi y)),
///   p = cos(2 pi t) (cos(4 pi x) + cos(4 pi y)),
/// with analytically derived forcing. Throws InputError for nu < 0.
ExactProblem taylor_green(double nu = 0.0);

/// Same problem with grad(phi) added to the forcing (and to the pressure);
/// the velocity is unchanged.
ExactProblem with_gradient_forcing(ExactProblem base, std::function<Vec2(const Vec2&)> grad_phi,
                                   std::function<double(const Vec2&)> phi);

/// Default quadrature order for error integrals: 2k+11. Raising it by two
/// changes the norms of the vortex by less than 1e-10 relative from h = 1/8.
int error_order(int degree);

/// ||u(t) - u_h||_{L2}.
double l2_error(const RTSpace& space, const CoefVec& coeffs, const ExactProblem& problem, double t,
                int quad_order = -1);
/// ||grad u(t) - grad_h u_h||_{L2}.
double h1_broken_error(const RTSpace& space, const CoefVec& coeffs, const ExactProblem& problem, double t,
                       int quad_order = -1);
/// ||div u_h||_{L2} by quadrature.
double div_norm(const RTSpace& space, const CoefVec& coeffs, int quad_order = -1);
/// ||u_h||_{L2} by quadrature.
double l2_norm(const RTSpace& space, const CoefVec& coeffs, int quad_order = -1);

/// Observed convergence rates log(e_i/e_{i+1}) / log(h_i/h_{i+1}). Pairs with
/// a non-positive or non-finite error yield std::nullopt. Throws InputError
/// unless h is strictly decreasing and the lists have equal length.
std::vector<std::optional<double>> rate_table(const std::vector<double>& h, const std::vector<double>& e);

}  // namespace divfree
