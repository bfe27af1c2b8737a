#pragma once

#include <cstdint>
#include <string>
#include <vector>
#include <Eigen/Cholesky>
#include <Eigen/Core>
#include "fracmag/assembly.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/spectral.hpp"

namespace fracmag
{

// f(t) with f(0) = beta0 and f -> 0 at infinity; F(t) = int_0^t f.
struct Nonlinearity
{
  enum class Family
  {
    Zero,
    Rational,     // beta0 / (1 + t)
    Exponential,  // beta0 exp(-t)
    Constant,     // beta0; does not vanish at infinity, kept to exercise validation
  };

  Family family = Family::Zero;
  double beta0 = 0.0;

  static Nonlinearity Zero() { return {Family::Zero, 0.0}; }
  static Nonlinearity Rational(double b0) { return {Family::Rational, b0}; }
  static Nonlinearity Exponential(double b0) { return {Family::Exponential, b0}; }
  static Nonlinearity Constant(double b0) { return {Family::Constant, b0}; }
  // "zero", "rational", "exponential", "constant".
  static Nonlinearity FromName(const std::string &name, double b0);

  std::string Name() const;
  // All three throw InvalidArgument for t < 0.
  double f(double t) const;
  double F(double t) const;
  double df(double t) const;
};

// Discrete problem (K - beta_inf M) u - W f(|u|^2) u = 0 with W the (weighted) lumped mass.
class ProblemSpec
{
public:
  // Throws ResonanceError if beta_inf is within 1e-6 (relative) of an eigenvalue.  With an
  // empty `eigenvalues` the full spectrum of (K, M) is computed for the check.
  ProblemSpec(const Eigen::MatrixXcd &K, const MassMatrix &M, double beta_inf, Nonlinearity nl,
              const Eigen::VectorXd &eigenvalues = {}, const Eigen::VectorXd &nodal_weight = {});

  // Skips the resonance guard; only for tests that probe the resonant linear problem.
  static ProblemSpec UncheckedForTesting(const Eigen::MatrixXcd &K, const MassMatrix &M,
                                         double beta_inf, Nonlinearity nl);

  int dim() const { return static_cast<int>(K_.rows()); }
  const Eigen::MatrixXcd &K() const { return K_; }
  const Eigen::MatrixXd &M() const { return M_; }
  const Eigen::VectorXd &weights() const { return w_; }
  double beta_inf() const { return beta_inf_; }
  const Nonlinearity &nonlinearity() const { return nl_; }
  const Eigen::VectorXd &eigenvalues() const { return eigenvalues_; }

  double MassNorm(const Eigen::VectorXcd &u) const;
  double FormNorm(const Eigen::VectorXcd &u) const;
  // sqrt(g^H M^{-1} g)
  double DualNorm(const Eigen::VectorXcd &g) const;
  // min_theta ||u - e^{i theta} v||_M
  double OrbitDistance(const Eigen::VectorXcd &u, const Eigen::VectorXcd &v) const;

private:
  ProblemSpec() = default;
  void Init(const Eigen::MatrixXcd &K, const MassMatrix &M, double beta_inf, Nonlinearity nl,
            const Eigen::VectorXd &nodal_weight);

  Eigen::MatrixXcd K_;
  Eigen::MatrixXd M_;
  Eigen::LLT<Eigen::MatrixXd> M_llt_;
  Eigen::VectorXd w_;
  double beta_inf_ = 0.0;
  Nonlinearity nl_;
  Eigen::VectorXd eigenvalues_;
};

// J(u) = 1/2 u^H K u - beta_inf/2 u^H M u - 1/2 sum_i w_i F(|u_i|^2)
double Energy(const Eigen::VectorXcd &u, const ProblemSpec &spec);

// g(u) = K u - beta_inf M u - W f(|u|^2) u; dJ(u)[phi] = Re(phi^H g(u)).
Eigen::VectorXcd Gradient(const Eigen::VectorXcd &u, const ProblemSpec &spec);

double Residual(const Eigen::VectorXcd &u, const ProblemSpec &spec);

// Second derivative of J in real coordinates x = [Re u; Im u].
Eigen::MatrixXd RealHessian(const Eigen::VectorXcd &u, const ProblemSpec &spec);

struct CriticalPoint
{
  Eigen::VectorXcd u;
  double energy = 0.0;
  double residual = 0.0;
  bool trivial = true;
  std::string start;
  int iterations = 0;
  double norm_m = 0.0;
  double norm_k = 0.0;
  double rayleigh = 0.0;  // 0 for the trivial point
};

// Fills energy, residual, norms and the trivial flag of `cp` from cp.u.
void Describe(CriticalPoint &cp, const ProblemSpec &spec);

// Critical points modulo u -> e^{i theta} u.
class SolutionSet
{
public:
  explicit SolutionSet(double dedup_tol = 1e-4) : tol_(dedup_tol) {}
  // Returns false if `cp` lies on the orbit of a stored representative.
  bool Add(const CriticalPoint &cp, const ProblemSpec &spec);
  bool Contains(const Eigen::VectorXcd &u, const ProblemSpec &spec) const;

  const std::vector<CriticalPoint> &points() const { return points_; }
  int NontrivialCount() const;
  bool HasTrivial() const;
  double tolerance() const { return tol_; }

private:
  double tol_;
  std::vector<CriticalPoint> points_;
};

class NoConvergence : public Error
{
public:
  NoConvergence(const std::string &what, CriticalPoint best)
      : Error(what), best_(std::move(best))
  {
  }
  const CriticalPoint &best() const { return best_; }

private:
  CriticalPoint best_;
};

struct MinimizeOptions
{
  double tol = 1e-10;
  int max_iter = 10000;
  // Residual (relative to the starting residual) below which Newton steps are tried.
  double newton_switch = 1e-3;
};

struct MinimizeResult
{
  CriticalPoint point;
  std::vector<double> energies;  // J at every accepted iterate, starting with J(u0)
  std::vector<std::string> warnings;
};

// Preconditioned gradient descent with Armijo backtracking, finished by Newton steps that
// are only accepted when they do not increase J.  Throws NoConvergence after max_iter.
MinimizeResult Minimize(const ProblemSpec &spec, const Eigen::VectorXcd &u0,
                        const MinimizeOptions &opts = {});

struct Start
{
  Eigen::VectorXcd u;
  std::string label;
};

struct NewtonOptions
{
  double tol = 1e-10;
  int max_iter = 80;
  double dedup_tol = 1e-4;
  // Deflation m(u) = prod_j (delta(u, u_j)^{-power} + shift).
  double deflation_power = 2.0;
  double deflation_shift = 1.0;
  int max_perturbations = 3;
  // Rerun a start after it produced a new orbit, now deflated against it.
  int retries_per_start = 2;
  std::uint64_t seed = 7;
};

SolutionSet NewtonDeflated(const ProblemSpec &spec, const std::vector<Start> &starts,
                           const NewtonOptions &opts = {});

// h and k are 1-based eigenvalue indices with 1 <= h <= k <= spec.count().
std::vector<Start> MultistartFromEigenspaces(const Spectrum &spec, const Eigen::MatrixXcd &K,
                                             int h, int k, double rho, int extra_random,
                                             std::uint64_t seed);

struct LinkingDiagnostics
{
  double c0_est = 0.0;
  double cinf_est = 0.0;
  bool geometry_ok = false;
  int samples = 0;
  double rho = 0.0;
  double cinf_radius = 0.0;  // ||u||_K at which cinf_est was attained
};

LinkingDiagnostics DiagnoseLinking(const ProblemSpec &problem, const Spectrum &spec, int h, int k,
                                   double rho, int samples, std::uint64_t seed);

struct NonlinearityReport
{
  std::string family;
  double beta0 = 0.0;
  double t_max = 0.0;
  std::vector<double> eps;
  std::vector<double> a_eps;  // fitted constants for |f(t^2) t| <= eps |t| + a_eps
  bool growth_ok = true;      // excess vanishes at the top of the grid for every eps
  double f_at_max = 0.0;
  double decay_threshold = 0.0;
  bool decay_ok = true;
  double antiderivative_defect = 0.0;  // max |F - int f| / (1 + |F|)
  bool ok() const { return growth_ok && decay_ok && antiderivative_defect < 1e-10; }
};

// Requires a nonempty grid on [0, T] with T >= 1e6.
NonlinearityReport CheckNonlinearity(const Nonlinearity &nl, const std::vector<double> &t_grid);
// Same, but throws ValidationFailed carrying the report summary when a check fails.
NonlinearityReport ValidateNonlinearity(const Nonlinearity &nl, const std::vector<double> &t_grid);
// Geometric grid 0, 1e-3 .. t_max with `per_decade` points per decade.
std::vector<double> DefaultTGrid(double t_max = 1e6, int per_decade = 40);

}  // namespace fracmag
