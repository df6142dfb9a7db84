#pragma once

#include <Eigen/Sparse>

#include "divfree/fe_space.hpp"

namespace divfree {

using SparseMat = Eigen::SparseMatrix<double>;

/// Parameters of the viscous form. sigma is the dimensionless SIP penalty
/// (default 10 k^2, see default_sigma); quad_order < 0 selects the default.
struct FormParams {
  double sigma = -1.0;
  double nu = 0.0;
  int quad_order = -1;
};

double default_sigma(int degree);

/// Quadrature order used for the trilinear convection integrands; the full
/// RT_k basis makes these degree 3k+2.
int convection_order(int degree);
/// Order used for mass and SIP integrals: 2k+3.
int default_order(int degree);
/// Order used for load vectors of smooth forcing: 2k+7. The extra order
/// makes (grad phi, v) vanish to roundoff on V^div, so gradient forcing
/// does not leak into the velocity through quadrature error.
int load_order(int degree);

/// Local RT mass matrix of one cell in the cell's reference orientation
/// (global DOF signs not applied).
Eigen::MatrixXd cell_mass_matrix(const RTSpace& space, int cell, int quad_order = -1);

/// Local (div phi_j, psi_i) of one cell, rows over the cell's multiplier
/// basis, columns in the reference orientation (signs not applied).
Eigen::MatrixXd cell_div_matrix(const RTSpace& v_space, const ScalarDGSpace& q_space, int cell);

/// M_ij = (phi_j, phi_i) over all RT DOFs, boundary included.
SparseMat assemble_mass(const RTSpace& space, int quad_order = -1);

/// B_ij = (div phi_j, psi_i), rows indexed by q_space.
SparseMat assemble_div(const RTSpace& v_space, const ScalarDGSpace& q_space);

/// r_i = c_h(a, w, phi_i): volume term (a . grad_h) w . v, minus the
/// central term (a.n)[[w]]{v}, plus the upwind term 1/2 |a.n| [[w]].[[v]],
/// facet terms over interior facets only. a.n on a facet is read from a's
/// edge DOFs, and facets where it changes sign are split at its roots so the
/// |a.n| terms are integrated exactly.
Eigen::VectorXd apply_convection(const RTSpace& space, const CoefVec& a, const CoefVec& w, int quad_order = -1);

/// C_ij = c_h(a, phi_j, phi_i).
SparseMat convection_matrix(const RTSpace& space, const CoefVec& a, int quad_order = -1);

/// Symmetric interior penalty form a_h over all facets (no-slip imposed
/// weakly on the boundary). Throws InputError for sigma <= 0.
SparseMat assemble_sip(const RTSpace& space, const FormParams& params = {});

/// Right-hand side that makes a_h consistent with inhomogeneous boundary
/// data g: -(g, grad v n)_{dOmega} + sigma/h_F (g, v)_{dOmega}.
Eigen::VectorXd assemble_sip_boundary_load(const RTSpace& space, const VectorField& g,
                                           const FormParams& params = {});

/// b_i = (f, phi_i), by default with a rule of order load_order(k).
Eigen::VectorXd assemble_load(const RTSpace& space, const VectorField& f, int quad_order = -1);

/// |v|^2_{a,up} = sum over interior facets of integral 1/2 |a.n_F| |[[v]]|^2.
double jump_seminorm(const RTSpace& space, const CoefVec& a, const CoefVec& v, int quad_order = -1);

/// Normal component a.n_F at facet parameter s, from the facet's DOFs.
double facet_normal_flux(const RTSpace& space, const Eigen::VectorXd& a, int facet, double s);

}  // namespace divfree
