#include "fracmag/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <Eigen/Dense>
#include "fracmag/errors.hpp"

namespace fracmag::quad
{

namespace
{

// Golub-Welsch for the Jacobi weight (1-x)^a (1+x)^b on [-1, 1].
Rule1D GolubWelschJacobi(int n, double a, double b)
{
  if (n < 1)
  {
    throw InvalidArgument("quadrature order must be >= 1");
  }
  if (a <= -1.0 || b <= -1.0)
  {
    throw InvalidArgument("Jacobi exponents must exceed -1");
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  const double ab = a + b;
  for (int k = 0; k < n; k++)
  {
    const double kk = k;
    // k = 0 is written separately since the general form is 0/0 when a + b = 0.
    T(k, k) = (k == 0) ? (b - a) / (ab + 2)
                       : (b * b - a * a) / ((2 * kk + ab) * (2 * kk + ab + 2));
  }
  for (int k = 1; k < n; k++)
  {
    const double kk = k;
    double beta;
    if (k == 1)
    {
      beta = 4 * (1 + a) * (1 + b) / ((2 + ab) * (2 + ab) * (3 + ab));
    }
    else
    {
      const double s = 2 * kk + ab;
      beta = 4 * kk * (kk + a) * (kk + b) * (kk + ab) / (s * s * (s + 1) * (s - 1));
    }
    T(k, k - 1) = T(k - 1, k) = std::sqrt(beta);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  const double mu0 = std::exp((ab + 1) * std::log(2.0) + std::lgamma(a + 1) +
                              std::lgamma(b + 1) - std::lgamma(ab + 2));
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int k = 0; k < n; k++)
  {
    r.x[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    r.w[k] = mu0 * v0 * v0;
  }
  return r;
}

}  // namespace

Rule1D GaussLegendre(int n)
{
  Rule1D r = GolubWelschJacobi(n, 0.0, 0.0);
  for (std::size_t k = 0; k < r.size(); k++)
  {
    r.x[k] = 0.5 * (r.x[k] + 1.0);
    r.w[k] *= 0.5;
  }
  return r;
}

Rule1D GaussJacobi01(int n, double alpha)
{
  // t = (1+x)/2, t^alpha = 2^-alpha (1+x)^alpha, dt = dx/2.
  Rule1D r = GolubWelschJacobi(n, 0.0, alpha);
  const double scale = std::pow(2.0, -alpha - 1.0);
  for (std::size_t k = 0; k < r.size(); k++)
  {
    r.x[k] = 0.5 * (r.x[k] + 1.0);
    r.w[k] *= scale;
  }
  return r;
}

RuleTri CollapsedTriangle(int n)
{
  // (u, v) in [0,1]^2 -> (u, v (1-u)), Jacobian (1-u) absorbed by a Jacobi rule in u.
  Rule1D ru = GolubWelschJacobi(n, 1.0, 0.0);
  for (std::size_t k = 0; k < ru.size(); k++)
  {
    ru.x[k] = 0.5 * (ru.x[k] + 1.0);
    ru.w[k] *= 0.25;
  }
  const Rule1D rv = GaussLegendre(n);
  RuleTri t;
  for (std::size_t i = 0; i < ru.size(); i++)
  {
    for (std::size_t j = 0; j < rv.size(); j++)
    {
      t.x.push_back({ru.x[i], rv.x[j] * (1.0 - ru.x[i])});
      t.w.push_back(ru.w[i] * rv.w[j]);
    }
  }
  return t;
}

const Rule1D &CachedGaussLegendre(int n)
{
  static std::mutex mtx;
  static std::map<int, Rule1D> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end())
  {
    it = cache.emplace(n, GaussLegendre(n)).first;
  }
  return it->second;
}

const RuleTri &CachedTriangle(int n)
{
  static std::mutex mtx;
  static std::map<int, RuleTri> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end())
  {
    it = cache.emplace(n, CollapsedTriangle(n)).first;
  }
  return it->second;
}

}  // namespace fracmag::quad
