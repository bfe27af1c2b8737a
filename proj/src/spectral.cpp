#include "fracmag/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <Eigen/Dense>
#include "fracmag/errors.hpp"

namespace fracmag
{

namespace
{

constexpr double kMaxMassCondition = 1e12;

Eigen::VectorXcd RandomComplex(int n, std::mt19937_64 &rng)
{
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i)
  {
    const double re = g(rng);
    const double im = g(rng);
    v(i) = {re, im};
  }
  return v;
}

}  // namespace

int Spectrum::ClusterOf(int i) const
{
  for (std::size_t c = 0; c < clusters.size(); ++c)
  {
    if (std::find(clusters[c].begin(), clusters[c].end(), i) != clusters[c].end())
    {
      return static_cast<int>(c);
    }
  }
  throw InvalidArgument("eigenvalue index out of range");
}

void FixPhase(Eigen::Ref<Eigen::VectorXcd> v)
{
  if (v.size() == 0)
  {
    return;
  }
  const double vmax = v.cwiseAbs().maxCoeff();
  if (vmax == 0.0)
  {
    return;
  }
  // First entry within a hair of the maximum, so that round-off cannot flip the choice
  // between symmetric coefficients.
  int idx = 0;
  for (int i = 0; i < v.size(); ++i)
  {
    if (std::abs(v(i)) >= vmax * (1.0 - 1e-9))
    {
      idx = i;
      break;
    }
  }
  v *= std::conj(v(idx)) / std::abs(v(idx));
  v(idx) = std::abs(v(idx));
}

std::vector<std::vector<int>> ClusterEigenvalues(const Eigen::VectorXd &values, double rel_tol)
{
  std::vector<std::vector<int>> out;
  for (int i = 0; i < values.size(); ++i)
  {
    if (i > 0)
    {
      const double scale = std::max(std::abs(values(i)), std::abs(values(i - 1)));
      if (values(i) - values(i - 1) <= rel_tol * scale)
      {
        out.back().push_back(i);
        continue;
      }
    }
    out.push_back({i});
  }
  return out;
}

Spectrum SolveEigs(const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M, int m_max)
{
  const Eigen::Index d = K.rows();
  if (d == 0 || K.cols() != d || M.rows() != d || M.cols() != d)
  {
    throw InvalidArgument("eigenproblem needs nonempty square K and M of equal size");
  }
  if (m_max < 1 || m_max > d)
  {
    throw InvalidArgument("m_max must lie in [1, d]");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mass(M, Eigen::EigenvaluesOnly);
  const double mmin = mass.eigenvalues().minCoeff();
  const double mmax = mass.eigenvalues().maxCoeff();
  if (!(mmin > 0.0) || mmax / mmin > kMaxMassCondition)
  {
    std::ostringstream os;
    os << "mass matrix condition number " << (mmin > 0.0 ? mmax / mmin : INFINITY)
       << " exceeds " << kMaxMassCondition;
    throw NumericalConditioning(os.str());
  }

  const Eigen::MatrixXcd Mc = M.cast<std::complex<double>>();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(K, Mc, Eigen::ComputeEigenvectors |
                                                                             Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success)
  {
    throw NumericalConditioning("generalized eigensolver failed (K or M not Hermitian PD)");
  }

  Spectrum sp;
  sp.values = ges.eigenvalues().head(m_max);
  sp.vectors = ges.eigenvectors().leftCols(m_max);
  for (int j = 0; j < m_max; ++j)
  {
    auto v = sp.vectors.col(j);
    const double n2 = (v.adjoint() * Mc * v)(0).real();
    v /= std::sqrt(n2);
    FixPhase(v);
  }
  sp.clusters = ClusterEigenvalues(sp.values);

  const Eigen::MatrixXcd G = sp.vectors.adjoint() * Mc * sp.vectors;
  const Eigen::MatrixXcd S = sp.vectors.adjoint() * K * sp.vectors;
  sp.mass_defect = (G - Eigen::MatrixXcd::Identity(m_max, m_max)).cwiseAbs().maxCoeff();
  Eigen::MatrixXcd D = S;
  D.diagonal() -= sp.values.cast<std::complex<double>>();
  sp.stiffness_defect = D.cwiseAbs().maxCoeff() / std::abs(sp.values(m_max - 1));
  return sp;
}

Spectrum SolveEigs(const FormMatrix &K, const MassMatrix &M, int m_max)
{
  Spectrum sp = SolveEigs(K.K, M.M, m_max);
  std::ostringstream os;
  os << K.meta.kind << " s=" << K.meta.s << " A=" << K.meta.potential << " d=" << K.size();
  sp.source = os.str();
  return sp;
}

double RayleighQuotient(const Eigen::VectorXcd &u, const Eigen::MatrixXcd &K,
                        const Eigen::MatrixXd &M)
{
  const double den = (u.adjoint() * (M * u))(0).real();
  if (!(den > 0.0))
  {
    throw InvalidArgument("Rayleigh quotient of the zero vector");
  }
  return (u.adjoint() * (K * u))(0).real() / den;
}

SubspaceSplit SplitAt(const Spectrum &spec, const Eigen::MatrixXd &M, int m)
{
  if (m < 0 || m >= spec.count())
  {
    throw InvalidArgument("split index must satisfy 0 <= m < number of eigenpairs");
  }
  if (M.rows() != spec.dim())
  {
    throw InvalidArgument("mass matrix does not match the spectrum dimension");
  }
  if (m > 0 && spec.ClusterOf(m - 1) == spec.ClusterOf(m))
  {
    std::ostringstream os;
    os << "split after beta_" << m << " cuts a degenerate cluster";
    throw SplitAmbiguous(os.str());
  }
  SubspaceSplit out;
  out.H = spec.vectors.leftCols(m);
  out.P = Eigen::MatrixXcd::Identity(spec.dim(), spec.dim());
  if (m > 0)
  {
    out.P -= out.H * (out.H.adjoint() * M.cast<std::complex<double>>());
  }
  return out;
}

CourantReport VerifyCourant(const Spectrum &spec, const Eigen::MatrixXcd &K,
                            const Eigen::MatrixXd &M, int trials, std::uint64_t seed,
                            int max_level, double tol)
{
  if (trials < 1)
  {
    throw InvalidArgument("verify_courant needs at least one trial");
  }
  CourantReport rep;
  rep.trials = trials;
  rep.tolerance = tol;
  rep.worst_min_margin = INFINITY;
  rep.worst_max_margin = INFINITY;
  std::mt19937_64 rng(seed);
  const int d = spec.dim();
  const int top = std::min(spec.count() - 1, max_level);
  for (int m = 0; m <= top; ++m)
  {
    CourantLevel lv;
    lv.m = m;
    lv.beta_next = spec.values(m);
    if (m > 0)
    {
      lv.beta_m = spec.values(m - 1);
    }
    if (m > 0 && spec.ClusterOf(m - 1) == spec.ClusterOf(m))
    {
      lv.skipped = true;
      rep.levels.push_back(lv);
      continue;
    }
    const SubspaceSplit split = SplitAt(spec, M, m);

    lv.min_rq_e = INFINITY;
    for (int t = 0; t < trials; ++t)
    {
      const Eigen::VectorXcd u = split.P * RandomComplex(d, rng);
      lv.min_rq_e = std::min(lv.min_rq_e, RayleighQuotient(u, K, M));
    }
    lv.rq_f_next = RayleighQuotient(spec.vectors.col(m), K, M);
    lv.min_rq_e = std::min(lv.min_rq_e, lv.rq_f_next);
    lv.min_margin = (lv.min_rq_e - lv.beta_next) / std::abs(lv.beta_next);
    if (lv.min_margin < -tol || std::abs(lv.rq_f_next - lv.beta_next) > tol * std::abs(lv.beta_next))
    {
      ++lv.violations;
    }

    if (m > 0)
    {
      lv.max_rq_h = -INFINITY;
      for (int t = 0; t < trials; ++t)
      {
        const Eigen::VectorXcd c = RandomComplex(m, rng);
        lv.max_rq_h = std::max(lv.max_rq_h, RayleighQuotient(split.H * c, K, M));
      }
      lv.rq_f_m = RayleighQuotient(spec.vectors.col(m - 1), K, M);
      lv.max_rq_h = std::max(lv.max_rq_h, lv.rq_f_m);
      lv.max_margin = (lv.beta_m - lv.max_rq_h) / std::abs(lv.beta_m);
      if (lv.max_margin < -tol || std::abs(lv.rq_f_m - lv.beta_m) > tol * std::abs(lv.beta_m))
      {
        ++lv.violations;
      }
      rep.worst_max_margin = std::min(rep.worst_max_margin, lv.max_margin);
    }
    rep.worst_min_margin = std::min(rep.worst_min_margin, lv.min_margin);
    rep.violations += lv.violations;
    rep.levels.push_back(lv);
  }
  if (std::isinf(rep.worst_min_margin)) rep.worst_min_margin = 0.0;
  if (std::isinf(rep.worst_max_margin)) rep.worst_max_margin = 0.0;
  return rep;
}

}  // namespace fracmag
