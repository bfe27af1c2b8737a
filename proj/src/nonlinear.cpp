#include "fracmag/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <Eigen/Dense>
#include "fracmag/quadrature.hpp"

namespace fracmag
{

namespace
{

using cd = std::complex<double>;

constexpr double kTrivialNorm = 1e-8;

void CheckT(double t)
{
  if (!(t >= 0.0))
  {
    throw InvalidArgument("nonlinearity evaluated at negative t");
  }
}

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

Eigen::VectorXd Stack(const Eigen::VectorXcd &z)
{
  Eigen::VectorXd x(2 * z.size());
  x << z.real(), z.imag();
  return x;
}

Eigen::VectorXcd Unstack(const Eigen::VectorXd &x)
{
  const Eigen::Index d = x.size() / 2;
  Eigen::VectorXcd z(d);
  z.real() = x.head(d);
  z.imag() = x.tail(d);
  return z;
}

// Newton correction for g(u) = 0.  Away from the origin the phase direction i u is a null
// direction of the Hessian at solutions, so the step is constrained orthogonal to it.
std::optional<Eigen::VectorXcd> NewtonStep(const ProblemSpec &spec, const Eigen::VectorXcd &u,
                                           const Eigen::VectorXcd &g)
{
  const int d = spec.dim();
  const Eigen::MatrixXd H = RealHessian(u, spec);
  const Eigen::VectorXd G = Stack(g);
  const bool border = spec.MassNorm(u) > kTrivialNorm;
  const int n = border ? 2 * d + 1 : 2 * d;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  A.topLeftCorner(2 * d, 2 * d) = H;
  rhs.head(2 * d) = -G;
  if (border)
  {
    Eigen::VectorXd t = Stack(cd(0.0, 1.0) * u);
    t /= t.norm();
    A.block(0, 2 * d, 2 * d, 1) = t;
    A.block(2 * d, 0, 1, 2 * d) = t.transpose();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  if (!(lu.rcond() > 1e-14))
  {
    return std::nullopt;
  }
  const Eigen::VectorXd x = lu.solve(rhs);
  if (!x.allFinite())
  {
    return std::nullopt;
  }
  return Unstack(x.head(2 * d));
}

// Gradient of the same discrete energy assembled in real arithmetic from the split blocks,
// used to re-verify converged points.
double IndependentResidual(const Eigen::VectorXcd &u, const ProblemSpec &spec)
{
  const Eigen::MatrixXd Kr = spec.K().real();
  const Eigen::MatrixXd Ki = spec.K().imag();
  const Eigen::VectorXd a = u.real();
  const Eigen::VectorXd b = u.imag();
  Eigen::VectorXd fw(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
  {
    fw(i) = spec.weights()(i) * spec.nonlinearity().f(a(i) * a(i) + b(i) * b(i));
  }
  const Eigen::VectorXd gr =
      Kr * a - Ki * b - spec.beta_inf() * (spec.M() * a) - fw.cwiseProduct(a);
  const Eigen::VectorXd gi =
      Ki * a + Kr * b - spec.beta_inf() * (spec.M() * b) - fw.cwiseProduct(b);
  Eigen::VectorXcd g(u.size());
  g.real() = gr;
  g.imag() = gi;
  return spec.DualNorm(g);
}

struct Deflation
{
  const std::vector<Eigen::VectorXcd> *found;
  double power;
  double shift;
  const ProblemSpec *spec;

  // m(u) and the complex vector c with grad(log m) . d = Re(c^H d).
  double Value(const Eigen::VectorXcd &u, Eigen::VectorXcd *c) const
  {
    double m = 1.0;
    if (c)
    {
      c->setZero(u.size());
    }
    const Eigen::VectorXcd Mu = spec->M() * u;
    const double uu = u.dot(Mu).real();
    for (const auto &v : *found)
    {
      const Eigen::VectorXcd Mv = spec->M() * v;
      const double vv = v.dot(Mv).real();
      const cd z = v.dot(Mu);  // v^H M u
      const double d2 = std::max(uu + vv - 2.0 * std::abs(z), 1e-300);
      const double p = std::pow(d2, -0.5 * power) + shift;
      m *= p;
      if (c)
      {
        Eigen::VectorXcd grad_d2 = 2.0 * Mu;
        if (std::abs(z) > 0.0)
        {
          grad_d2 -= 2.0 * Mv * (z / std::abs(z));
        }
        *c += (-0.5 * power * std::pow(d2, -0.5 * power - 1.0) / p) * grad_d2;
      }
    }
    return m;
  }
};

std::optional<CriticalPoint> RunNewton(const ProblemSpec &spec, const Eigen::VectorXcd &u0,
                                       const std::vector<Eigen::VectorXcd> &found,
                                       const NewtonOptions &opts, std::mt19937_64 &rng)
{
  const Deflation defl{&found, opts.deflation_power, opts.deflation_shift, &spec};
  const double blowup = 1e8 * (1.0 + spec.MassNorm(u0));
  Eigen::VectorXcd u = u0;
  int perturbations = 0;
  for (int it = 0; it < opts.max_iter; ++it)
  {
    const Eigen::VectorXcd g = Gradient(u, spec);
    const double r = spec.DualNorm(g);
    if (r <= opts.tol)
    {
      if (IndependentResidual(u, spec) > 2.0 * opts.tol)
      {
        return std::nullopt;
      }
      CriticalPoint cp;
      cp.u = u;
      cp.iterations = it;
      Describe(cp, spec);
      return cp;
    }
    auto step = NewtonStep(spec, u, g);
    if (!step)
    {
      if (++perturbations > opts.max_perturbations)
      {
        return std::nullopt;
      }
      Eigen::VectorXcd kick = RandomComplex(spec.dim(), rng);
      kick *= 1e-3 * (spec.MassNorm(u) + 1e-3) / spec.MassNorm(kick);
      u += kick;
      continue;
    }
    Eigen::VectorXcd dir = *step;
    double merit = r;
    if (!found.empty())
    {
      Eigen::VectorXcd c;
      const double m = defl.Value(u, &c);
      const double slope = c.dot(dir).real();
      // Sherman-Morrison form of the deflated Newton step.
      if (std::abs(1.0 - slope) > 1e-14)
      {
        dir /= (1.0 - slope);
      }
      merit = m * r;
    }
    double alpha = 1.0;
    Eigen::VectorXcd trial = u + dir;
    for (; alpha > 1.0 / 64.0; alpha *= 0.5)
    {
      trial = u + alpha * dir;
      double tm = Residual(trial, spec);
      if (!found.empty())
      {
        tm *= defl.Value(trial, nullptr);
      }
      if (std::isfinite(tm) && tm < (1.0 - 1e-4 * alpha) * merit)
      {
        break;
      }
    }
    u = trial;
    if (!u.allFinite() || spec.MassNorm(u) > blowup)
    {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Nonlinearity

Nonlinearity Nonlinearity::FromName(const std::string &name, double b0)
{
  if (name == "zero")
  {
    return Zero();
  }
  if (name == "rational")
  {
    return Rational(b0);
  }
  if (name == "exponential")
  {
    return Exponential(b0);
  }
  if (name == "constant")
  {
    return Constant(b0);
  }
  throw InvalidArgument("unknown nonlinearity family '" + name + "'");
}

std::string Nonlinearity::Name() const
{
  switch (family)
  {
    case Family::Zero:
      return "zero";
    case Family::Rational:
      return "rational";
    case Family::Exponential:
      return "exponential";
    case Family::Constant:
      return "constant";
  }
  return "?";
}

double Nonlinearity::f(double t) const
{
  CheckT(t);
  switch (family)
  {
    case Family::Zero:
      return 0.0;
    case Family::Rational:
      return beta0 / (1.0 + t);
    case Family::Exponential:
      return beta0 * std::exp(-t);
    case Family::Constant:
      return beta0;
  }
  return 0.0;
}

double Nonlinearity::F(double t) const
{
  CheckT(t);
  switch (family)
  {
    case Family::Zero:
      return 0.0;
    case Family::Rational:
      return beta0 * std::log1p(t);
    case Family::Exponential:
      return -beta0 * std::expm1(-t);
    case Family::Constant:
      return beta0 * t;
  }
  return 0.0;
}

double Nonlinearity::df(double t) const
{
  CheckT(t);
  switch (family)
  {
    case Family::Zero:
      return 0.0;
    case Family::Rational:
      return -beta0 / ((1.0 + t) * (1.0 + t));
    case Family::Exponential:
      return -beta0 * std::exp(-t);
    case Family::Constant:
      return 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------------------
// ProblemSpec

ProblemSpec::ProblemSpec(const Eigen::MatrixXcd &K, const MassMatrix &M, double beta_inf,
                         Nonlinearity nl, const Eigen::VectorXd &eigenvalues,
                         const Eigen::VectorXd &nodal_weight)
{
  Init(K, M, beta_inf, nl, nodal_weight);
  if (eigenvalues.size() > 0)
  {
    eigenvalues_ = eigenvalues;
  }
  else
  {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(
        K, M.M.cast<cd>(), Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    eigenvalues_ = ges.eigenvalues();
  }
  for (Eigen::Index j = 0; j < eigenvalues_.size(); ++j)
  {
    const double beta = eigenvalues_(j);
    if (std::abs(beta_inf - beta) <= 1e-6 * std::abs(beta))
    {
      std::ostringstream os;
      os.precision(12);
      os << "beta_inf = " << beta_inf << " is resonant with beta_" << j + 1 << " = " << beta;
      throw ResonanceError(os.str());
    }
  }
}

ProblemSpec ProblemSpec::UncheckedForTesting(const Eigen::MatrixXcd &K, const MassMatrix &M,
                                             double beta_inf, Nonlinearity nl)
{
  ProblemSpec p;
  p.Init(K, M, beta_inf, nl, {});
  return p;
}

void ProblemSpec::Init(const Eigen::MatrixXcd &K, const MassMatrix &M, double beta_inf,
                       Nonlinearity nl, const Eigen::VectorXd &nodal_weight)
{
  if (K.rows() != K.cols() || K.rows() != M.M.rows() || M.lumped.size() != M.M.rows())
  {
    throw InvalidArgument("K and M sizes differ");
  }
  if (K.rows() == 0)
  {
    throw InvalidArgument("empty problem (no interior dofs)");
  }
  if (!std::isfinite(beta_inf))
  {
    throw InvalidArgument("beta_inf must be finite");
  }
  K_ = K;
  M_ = M.M;
  M_llt_.compute(M_);
  if (M_llt_.info() != Eigen::Success)
  {
    throw NumericalConditioning("mass matrix is not positive definite");
  }
  w_ = M.lumped;
  if (nodal_weight.size() > 0)
  {
    if (nodal_weight.size() != w_.size())
    {
      throw InvalidArgument("nodal weight has the wrong length");
    }
    w_ = w_.cwiseProduct(nodal_weight);
  }
  beta_inf_ = beta_inf;
  nl_ = nl;
}

double ProblemSpec::MassNorm(const Eigen::VectorXcd &u) const
{
  return std::sqrt(std::max(0.0, u.dot(M_ * u).real()));
}

double ProblemSpec::FormNorm(const Eigen::VectorXcd &u) const
{
  return std::sqrt(std::max(0.0, u.dot(K_ * u).real()));
}

double ProblemSpec::DualNorm(const Eigen::VectorXcd &g) const
{
  const Eigen::VectorXd gr = g.real();
  const Eigen::VectorXd gi = g.imag();
  const double v = gr.dot(M_llt_.solve(gr)) + gi.dot(M_llt_.solve(gi));
  return std::sqrt(std::max(0.0, v));
}

double ProblemSpec::OrbitDistance(const Eigen::VectorXcd &u, const Eigen::VectorXcd &v) const
{
  const Eigen::VectorXcd Mu = M_ * u;
  const double uu = u.dot(Mu).real();
  const double vv = v.dot(M_ * v).real();
  return std::sqrt(std::max(0.0, uu + vv - 2.0 * std::abs(v.dot(Mu))));
}

// ---------------------------------------------------------------------------------------
// Energy and derivatives

double Energy(const Eigen::VectorXcd &u, const ProblemSpec &spec)
{
  const double quad = u.dot(spec.K() * u).real() - spec.beta_inf() * u.dot(spec.M() * u).real();
  double nl = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
  {
    nl += spec.weights()(i) * spec.nonlinearity().F(std::norm(u(i)));
  }
  return 0.5 * quad - 0.5 * nl;
}

Eigen::VectorXcd Gradient(const Eigen::VectorXcd &u, const ProblemSpec &spec)
{
  Eigen::VectorXcd g = spec.K() * u - spec.beta_inf() * (spec.M() * u);
  for (Eigen::Index i = 0; i < u.size(); ++i)
  {
    g(i) -= spec.weights()(i) * spec.nonlinearity().f(std::norm(u(i))) * u(i);
  }
  return g;
}

double Residual(const Eigen::VectorXcd &u, const ProblemSpec &spec)
{
  return spec.DualNorm(Gradient(u, spec));
}

Eigen::MatrixXd RealHessian(const Eigen::VectorXcd &u, const ProblemSpec &spec)
{
  const Eigen::Index d = u.size();
  const Eigen::MatrixXd Kr = spec.K().real();
  const Eigen::MatrixXd Ki = spec.K().imag();
  const Eigen::MatrixXd A = Kr - spec.beta_inf() * spec.M();
  Eigen::MatrixXd H(2 * d, 2 * d);
  H << A, -Ki, Ki, A;
  for (Eigen::Index i = 0; i < d; ++i)
  {
    const double a = u(i).real();
    const double b = u(i).imag();
    const double t = a * a + b * b;
    const double w = spec.weights()(i);
    const double f = spec.nonlinearity().f(t);
    const double fp = spec.nonlinearity().df(t);
    H(i, i) -= w * (f + 2.0 * fp * a * a);
    H(d + i, d + i) -= w * (f + 2.0 * fp * b * b);
    H(i, d + i) -= w * 2.0 * fp * a * b;
    H(d + i, i) -= w * 2.0 * fp * a * b;
  }
  return H;
}

void Describe(CriticalPoint &cp, const ProblemSpec &spec)
{
  cp.energy = Energy(cp.u, spec);
  cp.residual = Residual(cp.u, spec);
  cp.norm_m = spec.MassNorm(cp.u);
  cp.norm_k = spec.FormNorm(cp.u);
  cp.trivial = cp.norm_m < kTrivialNorm;
  cp.rayleigh = cp.trivial ? 0.0 : cp.norm_k * cp.norm_k / (cp.norm_m * cp.norm_m);
}

// ---------------------------------------------------------------------------------------
// SolutionSet

bool SolutionSet::Contains(const Eigen::VectorXcd &u, const ProblemSpec &spec) const
{
  const double nu = spec.MassNorm(u);
  for (const auto &p : points_)
  {
    const double scale = std::max({nu, p.norm_m, 1.0});
    if (spec.OrbitDistance(u, p.u) <= tol_ * scale)
    {
      return true;
    }
  }
  return false;
}

bool SolutionSet::Add(const CriticalPoint &cp, const ProblemSpec &spec)
{
  if (Contains(cp.u, spec))
  {
    return false;
  }
  points_.push_back(cp);
  return true;
}

int SolutionSet::NontrivialCount() const
{
  return static_cast<int>(
      std::count_if(points_.begin(), points_.end(), [](const auto &p) { return !p.trivial; }));
}

bool SolutionSet::HasTrivial() const
{
  return std::any_of(points_.begin(), points_.end(), [](const auto &p) { return p.trivial; });
}

// ---------------------------------------------------------------------------------------
// Solvers

MinimizeResult Minimize(const ProblemSpec &spec, const Eigen::VectorXcd &u0,
                        const MinimizeOptions &opts)
{
  if (u0.size() != spec.dim())
  {
    throw InvalidArgument("start vector has the wrong length");
  }
  MinimizeResult res;
  if (spec.eigenvalues().size() > 0 && !(spec.beta_inf() < spec.eigenvalues()(0)))
  {
    res.warnings.push_back("beta_inf >= beta_1: J need not be bounded below");
  }
  Eigen::LLT<Eigen::MatrixXcd> precond(spec.K());
  if (precond.info() != Eigen::Success)
  {
    throw NumericalConditioning("form matrix is not positive definite");
  }

  Eigen::VectorXcd u = u0;
  double J = Energy(u, spec);
  Eigen::VectorXcd g = Gradient(u, spec);
  double r = spec.DualNorm(g);
  const double r0 = std::max(r, 1e-300);
  double alpha = 1.0;
  res.energies.push_back(J);
  const auto slack = [](double e) { return 1e-13 * (1.0 + std::abs(e)); };

  for (int it = 0; it < opts.max_iter; ++it)
  {
    if (r <= opts.tol)
    {
      res.point.u = u;
      res.point.iterations = it;
      res.point.start = "minimize";
      Describe(res.point, spec);
      return res;
    }
    bool moved = false;
    if (r <= opts.newton_switch * r0 || r < 1e-6)
    {
      if (auto step = NewtonStep(spec, u, g))
      {
        const Eigen::VectorXcd trial = u + *step;
        const double Jt = Energy(trial, spec);
        const Eigen::VectorXcd gt = Gradient(trial, spec);
        const double rt = spec.DualNorm(gt);
        if (Jt <= J + slack(J) && rt < r)
        {
          u = trial;
          J = std::min(J, Jt);
          g = gt;
          r = rt;
          moved = true;
        }
      }
    }
    if (!moved)
    {
      const Eigen::VectorXcd dir = -precond.solve(g);
      const double slope = g.dot(dir).real();
      alpha = std::min(1.0, 2.0 * alpha);
      while (alpha > 1e-20)
      {
        const Eigen::VectorXcd trial = u + alpha * dir;
        const double Jt = Energy(trial, spec);
        if (Jt <= J + 1e-4 * alpha * slope)
        {
          u = trial;
          J = Jt;
          g = Gradient(u, spec);
          r = spec.DualNorm(g);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved)
      {
        break;  // no descent possible at working precision
      }
    }
    res.energies.push_back(J);
  }
  CriticalPoint best;
  best.u = u;
  best.start = "minimize";
  Describe(best, spec);
  std::ostringstream os;
  os << "minimize did not reach residual " << opts.tol << " (last " << r << ")";
  throw NoConvergence(os.str(), best);
}

SolutionSet NewtonDeflated(const ProblemSpec &spec, const std::vector<Start> &starts,
                           const NewtonOptions &opts)
{
  if (starts.empty())
  {
    throw InvalidArgument("newton_deflated needs at least one start");
  }
  SolutionSet set(opts.dedup_tol);
  std::vector<Eigen::VectorXcd> found;
  std::mt19937_64 rng(opts.seed);
  for (const auto &start : starts)
  {
    if (start.u.size() != spec.dim())
    {
      throw InvalidArgument("start vector has the wrong length");
    }
    for (int attempt = 0; attempt <= opts.retries_per_start; ++attempt)
    {
      auto cp = RunNewton(spec, start.u, found, opts, rng);
      if (!cp)
      {
        break;
      }
      cp->start = attempt == 0 ? start.label : start.label + "/retry" + std::to_string(attempt);
      if (!set.Add(*cp, spec))
      {
        break;
      }
      found.push_back(cp->trivial ? Eigen::VectorXcd::Zero(spec.dim()) : cp->u);
    }
  }
  return set;
}

std::vector<Start> MultistartFromEigenspaces(const Spectrum &spec, const Eigen::MatrixXcd &K,
                                             int h, int k, double rho, int extra_random,
                                             std::uint64_t seed)
{
  if (h < 1 || k < h || k > spec.count())
  {
    throw InvalidArgument("multistart needs 1 <= h <= k <= number of eigenpairs");
  }
  if (!(rho > 0.0) || extra_random < 0)
  {
    throw InvalidArgument("multistart needs rho > 0 and extra_random >= 0");
  }
  const auto knorm = [&](const Eigen::VectorXcd &u) { return std::sqrt(u.dot(K * u).real()); };
  const auto on_sphere = [&](Eigen::VectorXcd u, double radius) {
    return Eigen::VectorXcd(u * (radius / knorm(u)));
  };
  std::vector<Start> out;
  std::mt19937_64 rng(seed);
  for (int m = h; m <= k; ++m)
  {
    out.push_back({on_sphere(spec.vectors.col(m - 1), rho), "f" + std::to_string(m)});
  }
  for (int m = h; m <= k; ++m)
  {
    for (int n = m + 1; n <= k; ++n)
    {
      const auto fm = spec.vectors.col(m - 1);
      const auto fn = spec.vectors.col(n - 1);
      const std::string tag = std::to_string(m) + "," + std::to_string(n);
      out.push_back({on_sphere(fm + fn, rho), "f" + tag + "+"});
      out.push_back({on_sphere(fm - fn, rho), "f" + tag + "-"});
    }
  }
  const int span = k - h + 1;
  const Eigen::MatrixXcd F = spec.vectors.middleCols(h - 1, span);
  for (int j = 0; j < 4 * span; ++j)
  {
    out.push_back({on_sphere(F * RandomComplex(span, rng), rho), "span" + std::to_string(j)});
  }
  const double radii[] = {1.0, 4.0, 16.0};
  for (int j = 0; j < extra_random; ++j)
  {
    out.push_back({on_sphere(RandomComplex(spec.dim(), rng), rho * radii[j % 3]),
                   "random" + std::to_string(j)});
  }
  return out;
}

LinkingDiagnostics DiagnoseLinking(const ProblemSpec &problem, const Spectrum &spec, int h, int k,
                                   double rho, int samples, std::uint64_t seed)
{
  if (h < 1 || k < h || k > spec.count())
  {
    throw InvalidArgument("linking diagnostics need 1 <= h <= k <= number of eigenpairs");
  }
  if (!(rho > 0.0) || samples < 1)
  {
    throw InvalidArgument("linking diagnostics need rho > 0 and samples >= 1");
  }
  LinkingDiagnostics out;
  out.samples = samples;
  out.rho = rho;
  std::mt19937_64 rng(seed);
  const int d = problem.dim();
  const auto on_sphere = [&](const Eigen::VectorXcd &u, double radius) {
    return Eigen::VectorXcd(u * (radius / problem.FormNorm(u)));
  };

  // c0: S_rho within E_h.  Half of the samples are full-space vectors projected onto E_h,
  // half are combinations of the leading modes of E_h, where J tends to be smallest.
  const Eigen::MatrixXcd P = SplitAt(spec, problem.M(), h - 1).P;
  const int low = std::min(spec.count() - (h - 1), 4);
  double c0 = Energy(on_sphere(spec.vectors.col(h - 1), rho), problem);
  for (int t = 0; t < samples; ++t)
  {
    Eigen::VectorXcd u = (t % 2 == 0) ? Eigen::VectorXcd(P * RandomComplex(d, rng))
                                      : Eigen::VectorXcd(spec.vectors.middleCols(h - 1, low) *
                                                         RandomComplex(low, rng));
    c0 = std::min(c0, Energy(on_sphere(u, rho), problem));
  }

  // cinf: sup of J over H_k, searched along random directions.  Along a direction e with
  // ||e||_K = 1, J(R e) = R^2 (1 - beta_inf |e|_M^2)/2 - sum_i w_i F(R^2 |e_i|^2)/2.
  const Eigen::MatrixXcd Fk = spec.vectors.leftCols(k);
  double cinf = 0.0;
  double cinf_r = 0.0;
  const int directions = std::max(k, std::min(samples, 400));
  for (int t = 0; t < directions; ++t)
  {
    const Eigen::VectorXcd e =
        on_sphere(t < k ? Eigen::VectorXcd(Fk.col(t)) : Eigen::VectorXcd(Fk * RandomComplex(k, rng)),
                  1.0);
    const double mm = problem.MassNorm(e);
    const double quad = 1.0 - problem.beta_inf() * mm * mm;
    const Eigen::VectorXd e2 = e.cwiseAbs2();
    const auto radial = [&](double R) {
      double nl = 0.0;
      for (int i = 0; i < d; ++i)
      {
        nl += problem.weights()(i) * problem.nonlinearity().F(R * R * e2(i));
      }
      return 0.5 * R * R * quad - 0.5 * nl;
    };
    double best = 0.0, best_r = 0.0;
    const double ratio = 1.25;
    double R = rho * 1e-3;
    int since_best = 0;
    for (int j = 0; j < 400 && since_best < 30; ++j, R *= ratio)
    {
      const double v = radial(R);
      if (v > best)
      {
        best = v;
        best_r = R;
        since_best = 0;
      }
      else
      {
        ++since_best;
      }
    }
    if (best_r > 0.0)
    {
      // Golden-section polish on the bracketing grid cell pair.
      double a = best_r / ratio, b = best_r * ratio;
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = radial(x1), f2 = radial(x2);
      for (int j = 0; j < 60; ++j)
      {
        if (f1 > f2)
        {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - gr * (b - a);
          f1 = radial(x1);
        }
        else
        {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + gr * (b - a);
          f2 = radial(x2);
        }
      }
      if (std::max(f1, f2) > best)
      {
        best = std::max(f1, f2);
        best_r = f1 > f2 ? x1 : x2;
      }
    }
    if (best > cinf)
    {
      cinf = best;
      cinf_r = best_r;
    }
  }
  out.c0_est = c0;
  out.cinf_est = cinf;
  out.cinf_radius = cinf_r;
  out.geometry_ok = c0 > 0.0 && cinf > c0;
  return out;
}

// ---------------------------------------------------------------------------------------
// Validation of the growth hypotheses

std::vector<double> DefaultTGrid(double t_max, int per_decade)
{
  std::vector<double> grid{0.0};
  const double top = std::log10(t_max);
  for (int j = 0;; ++j)
  {
    const double e = -3.0 + static_cast<double>(j) / per_decade;
    if (e >= top)
    {
      break;
    }
    grid.push_back(std::pow(10.0, e));
  }
  grid.push_back(t_max);
  return grid;
}

NonlinearityReport CheckNonlinearity(const Nonlinearity &nl, const std::vector<double> &t_grid)
{
  if (t_grid.empty())
  {
    throw InvalidArgument("empty t grid");
  }
  const auto [lo, hi] = std::minmax_element(t_grid.begin(), t_grid.end());
  if (*lo < 0.0 || *hi < 1e6)
  {
    throw InvalidArgument("t grid must lie in [0, T] with T >= 1e6");
  }
  NonlinearityReport rep;
  rep.family = nl.Name();
  rep.beta0 = nl.beta0;
  rep.t_max = *hi;
  rep.eps = {1.0, 0.5, 0.1, 0.05, 0.01, 1e-3};
  for (double eps : rep.eps)
  {
    double a = 0.0;
    for (double t : t_grid)
    {
      a = std::max(a, std::abs(nl.f(t * t) * t) - eps * t);
    }
    rep.a_eps.push_back(a);
    // Bounded excess means it must be gone at the far end of the grid.
    if (std::abs(nl.f(rep.t_max * rep.t_max) * rep.t_max) - eps * rep.t_max > 0.0)
    {
      rep.growth_ok = false;
    }
  }
  rep.f_at_max = nl.f(rep.t_max);
  rep.decay_threshold = 1e-4 * std::abs(nl.beta0);
  rep.decay_ok = std::abs(rep.f_at_max) <= rep.decay_threshold;

  const auto &gl = quad::CachedGaussLegendre(20);
  for (double t : {0.1, 1.0, 10.0, 100.0})
  {
    // Panels [t 2^-(j+1), t 2^-j] plus the innermost one; f is smooth, this is exact to
    // rounding for every built-in family.
    double integral = 0.0;
    double b = t;
    for (int j = 0; j <= 12; ++j)
    {
      const double a = j == 12 ? 0.0 : 0.5 * b;
      for (std::size_t q = 0; q < gl.size(); ++q)
      {
        integral += (b - a) * gl.w[q] * nl.f(a + (b - a) * gl.x[q]);
      }
      b = a;
    }
    rep.antiderivative_defect = std::max(
        rep.antiderivative_defect, std::abs(nl.F(t) - integral) / (1.0 + std::abs(nl.F(t))));
  }
  return rep;
}

NonlinearityReport ValidateNonlinearity(const Nonlinearity &nl, const std::vector<double> &t_grid)
{
  NonlinearityReport rep = CheckNonlinearity(nl, t_grid);
  if (!rep.ok())
  {
    std::ostringstream os;
    os << "nonlinearity '" << rep.family << "' fails:";
    if (!rep.decay_ok)
    {
      os << " f(T) = " << rep.f_at_max << " does not vanish at infinity;";
    }
    if (!rep.growth_ok)
    {
      os << " |f(t^2) t| is not o(|t|);";
    }
    if (rep.antiderivative_defect >= 1e-10)
    {
      os << " F is not the antiderivative of f;";
    }
    throw ValidationFailed(os.str());
  }
  return rep;
}

}  // namespace fracmag
