#pragma once

#include <cstdint>
#include <string>
#include <vector>
#include <Eigen/Core>
#include "fracmag/assembly.hpp"

namespace fracmag
{

// Relative gap below which neighbouring eigenvalues are reported as one cluster.
inline constexpr double kClusterTolerance = 1e-8;

struct Spectrum
{
  Eigen::VectorXd values;   // nondecreasing
  Eigen::MatrixXcd vectors; // columns, M-orthonormal, phase fixed
  // Index groups (0-based) of numerically degenerate eigenvalues.
  std::vector<std::vector<int>> clusters;
  // max |F^H M F - I| and max |F^H K F - diag(beta)| / beta_max.
  double mass_defect = 0.0;
  double stiffness_defect = 0.0;
  std::string source;

  int count() const { return static_cast<int>(values.size()); }
  int dim() const { return static_cast<int>(vectors.rows()); }
  // Cluster index holding eigenvalue `i` (0-based).
  int ClusterOf(int i) const;
};

// First m_max eigenpairs of K f = beta M f.  Throws NumericalConditioning if cond(M) > 1e12.
Spectrum SolveEigs(const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M, int m_max);
Spectrum SolveEigs(const FormMatrix &K, const MassMatrix &M, int m_max);

// Multiplies v by a unit phase so that its first largest-magnitude entry is real positive.
void FixPhase(Eigen::Ref<Eigen::VectorXcd> v);

std::vector<std::vector<int>> ClusterEigenvalues(const Eigen::VectorXd &values,
                                                 double rel_tol = kClusterTolerance);

double RayleighQuotient(const Eigen::VectorXcd &u, const Eigen::MatrixXcd &K,
                        const Eigen::MatrixXd &M);

struct SubspaceSplit
{
  Eigen::MatrixXcd H;  // d x m basis f_1..f_m
  Eigen::MatrixXcd P;  // I - F F^H M, projector onto E_{m+1}
};

// H_m + E_{m+1}; m counts eigenpairs in H_m.  Needs m < spec.count().
SubspaceSplit SplitAt(const Spectrum &spec, const Eigen::MatrixXd &M, int m);

struct CourantLevel
{
  int m = 0;             // H_m has m vectors, E_{m+1} starts at beta_{m+1}
  bool skipped = false;  // m sits inside a degenerate cluster
  double beta_next = 0.0;
  double min_rq_e = 0.0;  // min of RQ over samples of E_{m+1}
  double rq_f_next = 0.0;
  double beta_m = 0.0;
  double max_rq_h = 0.0;  // max of RQ over samples of H_m (m >= 1)
  double rq_f_m = 0.0;
  // (min_rq_e - beta_next)/beta_next and (beta_m - max_rq_h)/beta_m; negative = violation.
  double min_margin = 0.0;
  double max_margin = 0.0;
  int violations = 0;
};

struct CourantReport
{
  std::vector<CourantLevel> levels;
  int trials = 0;
  double tolerance = 1e-8;
  int violations = 0;
  double worst_min_margin = 0.0;
  double worst_max_margin = 0.0;
  bool ok() const { return violations == 0; }
};

// Samples the min characterization over E_{m+1} and the max characterization over H_m for
// every m with beta_{m+1} available (capped at max_level).
CourantReport VerifyCourant(const Spectrum &spec, const Eigen::MatrixXcd &K,
                            const Eigen::MatrixXd &M, int trials, std::uint64_t seed,
                            int max_level = 8, double tol = 1e-8);

}  // namespace fracmag
