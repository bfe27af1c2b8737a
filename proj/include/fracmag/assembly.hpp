#pragma once

#include <complex>
#include <string>
#include <vector>
#include <Eigen/Core>
#include "fracmag/geometry.hpp"
#include "fracmag/potential.hpp"

namespace fracmag
{

// Fractional order s in (0, 1).
struct FractionalOrder
{
  double s;

  explicit FractionalOrder(double value);
  // Throws PreconditionViolation unless N > 2s.
  void CheckDimension(int dim) const;
};

struct KernelQuadratureConfig
{
  // Gauss points per axis for well separated element pairs (far_order^N per element).
  int far_order = 3;
  // Gauss points per axis for pairs closer than `near_distance` mesh sizes that do not
  // share a vertex.
  int near_far_order = 6;
  double near_distance = 3.5;
  // Points per angular and radial panel of the relative-coordinate rule used for element
  // pairs sharing at least one vertex.
  int near_order = 5;
  // Geometric refinement depth toward the boundary for the 2D tail integral.
  int tail_refinement = 4;
  int tail_order = 4;
  // Worker threads for the element-pair loop; 1 gives a sequential, bit-reproducible sum.
  int threads = 1;

  void Validate() const;
};

struct FormMetadata
{
  std::string kind;  // "nonlocal", "local", "oracle"
  double s = 1.0;
  std::string potential;
  bool tail_included = false;
  KernelQuadratureConfig quadrature;
  std::vector<std::string> warnings;
};

// Hermitian matrix of the discrete magnetic Dirichlet form over interior dofs, with rows as
// test functions: K(i, j) = <phi_j, phi_i> and u^H K u = ||u||^2.
struct FormMatrix
{
  Eigen::MatrixXcd K;
  FormMetadata meta;
  int size() const { return static_cast<int>(K.rows()); }
};

struct MassMatrix
{
  Eigen::MatrixXd M;
  // Row sums of the unrestricted P1 mass matrix, i.e. int phi_i.
  Eigen::VectorXd lumped;
  int size() const { return static_cast<int>(M.rows()); }
};

// c_{N,s} = s 2^{2s} Gamma((N+2s)/2) / (pi^{N/2} Gamma(1-s)).
double KernelConstant(int dim, double s);

// zeta(x) = int_{R^N \ Omega} |x - y|^{-N-2s} dy for a point of the meshed domain.
double TailWeight(const Mesh &mesh, double s, const Point &x);

// c_{N,s} int_Omega zeta phi_i phi_j dx over interior dofs.
Eigen::MatrixXd AssembleTail(const Mesh &mesh, double s, const KernelQuadratureConfig &q = {});

// (c_{N,s}/2) over Omega x Omega only; no exterior contribution.
Eigen::MatrixXcd AssembleInteriorForm(const Mesh &mesh, double s, const MagneticPotential &A,
                                      const KernelQuadratureConfig &q = {});

FormMatrix AssembleNonlocalForm(const Mesh &mesh, double s, const MagneticPotential &A,
                                const KernelQuadratureConfig &q = {}, bool include_tail = true);

// Same as AssembleNonlocalForm but reuses a precomputed tail matrix, which does not
// depend on the potential.
FormMatrix AssembleNonlocalForm(const Mesh &mesh, double s, const MagneticPotential &A,
                                const KernelQuadratureConfig &q, const Eigen::MatrixXd &tail);

MassMatrix AssembleMass(const Mesh &mesh);

// K(i, j) = int_Omega conj(grad phi_i - i A phi_i) . (grad phi_j - i A phi_j) dx, so that
// u^H K u = int |grad u - i A u|^2.
FormMatrix AssembleLocalMagneticForm(const Mesh &mesh, const MagneticPotential &A,
                                     int order = 3);

}  // namespace fracmag
