#pragma once

#include <vector>
#include <Eigen/Core>
#include "fracmag/assembly.hpp"
#include "fracmag/nonlinear.hpp"

namespace fracmag
{

// Brute-force references used to certify the main code paths. They share domain types
// with the rest of the library but none of its quadrature or assembly code.
struct OracleConfig
{
  // Gauss-Legendre points on every smooth panel of the graded partitions (8 or 16).
  int points = 16;
  // Excised diagonal neighbourhood |x - y| < eps_factor * h.
  double eps_factor = 1e-8;
  // Finite-difference step, relative to max(1, max_i |u_i|).
  double fd_step = 1e-6;
  // Stabilization: relative change of every entry under eps halving.
  double stabilization_tol = 1e-5;
  int max_halvings = 6;
  // Uniform refinement levels of the outer x-rule per triangle (2D only).
  int outer_levels = 1;
};

struct OracleAssembly
{
  FormMatrix form;
  // Per-entry relative change under the last eps halving.
  Eigen::MatrixXd certificate;
  double eps = 0.0;
  int halvings = 0;
};

// Full form (interior and exterior parts) for meshes with at most 20 dofs.  In 2D only
// rectangles are supported.  Throws OracleInconclusive when an entry does not stabilize.
OracleAssembly DenseAssemblyReference(const Mesh &mesh, double s, const MagneticPotential &A,
                                      const OracleConfig &cfg = {});

// zeta(x) by direct numerical integration over the exterior (interval or rectangle).
double ReferenceTailWeight(const Mesh &mesh, double s, const Point &x);

// Central differences of Energy along the 2d real coordinate directions, returned as the
// complex covector g with dJ[phi] = Re(phi^H g).
Eigen::VectorXcd FdGradient(const ProblemSpec &spec, const Eigen::VectorXcd &u,
                            const OracleConfig &cfg = {});

// Central difference of Energy along one direction with absolute step `step`.
double FdDirectional(const ProblemSpec &spec, const Eigen::VectorXcd &u,
                     const Eigen::VectorXcd &phi, double step);

// Eigenvalues of K f = beta M f via an explicit Cholesky factor of M and cyclic complex
// Jacobi rotations of L^{-1} K L^{-H}.  d <= 200.
Eigen::VectorXd EigReference(const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M);

}  // namespace fracmag
