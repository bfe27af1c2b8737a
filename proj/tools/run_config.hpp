#pragma once

#include <cstdint>
#include <string>
#include <vector>
#include "fracmag/assembly.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/geometry.hpp"
#include "fracmag/io.hpp"
#include "fracmag/potential.hpp"

namespace fracmag::cli
{

using io::Json;

// Malformed or schema-invalid configuration (exit code 2).
class ConfigError : public Error
{
public:
  using Error::Error;
};

// A value given either directly or relative to the computed spectrum.
struct SpectralValue
{
  std::string mode = "absolute";  // absolute | midpoint | scaled | below_gap
  double value = 0.0;
  int i = 0, j = 0;         // midpoint of beta_i and beta_j (1-based)
  int index = 1;            // scaled: factor * beta_index
  double factor = 1.0;
  int h = 1;                // below_gap: (beta_h - beta_inf) - margin * beta_h
  double margin = 0.1;
};

struct ProblemBlock
{
  bool present = false;
  SpectralValue beta_inf;
  std::string family = "rational";
  SpectralValue beta0;
  int h = 0, k = 0;  // 0: no linking block
  double rho = 0.1;
  std::string method = "auto";  // auto | newton | minimize
  double tol = 1e-10;
  int newton_max_iter = 80;
  int minimize_max_iter = 10000;
  int extra_random = 6;
  std::uint64_t seed = 1;
  int linking_samples = 1000;
  double dedup_tol = 1e-4;
};

struct RunConfig
{
  Domain domain;
  int resolution = 16;
  double s = 0.5;
  MagneticPotential potential;
  Json potential_json;
  int m_max = 8;
  KernelQuadratureConfig quadrature;
  bool reproducible = true;
  ProblemBlock problem;
  int courant_trials = 1000;
  std::uint64_t courant_seed = 1;
  int courant_max_level = 8;
  std::vector<double> s_list;
  int oracle_resolution = 8;
  std::string output_dir = "fracmag_out";

  int Dim() const { return domain.Dim(); }
};

// Throws ConfigError for schema problems, PreconditionViolation for N <= 2s.
RunConfig ParseConfig(const Json &j);
Json LoadJson(const std::string &path);
// Fully resolved configuration (defaults filled in) as embedded in every artifact.
Json Resolved(const RunConfig &cfg);

// s must lie in (0, 1) (ConfigError) and satisfy N > 2s (PreconditionViolation).
void CheckOrder(int dim, double s);

// Output directory, prefixed by $FRACMAG_OUTPUT_ROOT when relative; created if missing.
std::string PrepareOutputDir(const std::string &dir);

// Resolves a spectrum-relative value; `beta_inf` is needed for the below_gap mode.
double ResolveValue(const SpectralValue &v, const Eigen::VectorXd &beta, double beta_inf,
                    const std::string &what);

}  // namespace fracmag::cli
