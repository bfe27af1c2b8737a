#pragma once

#include <array>
#include <vector>

namespace fracmag::quad
{

// One-dimensional rule on [0, 1]: sum_j w[j] g(x[j]) ~ int_0^1 weight(t) g(t) dt.
struct Rule1D
{
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// Rule on the reference triangle with vertices (0,0), (1,0), (0,1); weights sum to 1/2.
struct RuleTri
{
  std::vector<std::array<double, 2>> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// Gauss-Legendre with n points, unit weight on [0, 1].
Rule1D GaussLegendre(int n);

// Gauss-Jacobi with n points for the weight t^alpha on [0, 1], alpha > -1.
Rule1D GaussJacobi01(int n, double alpha);

// Collapsed (Duffy) tensor rule with n points per axis; exact for degree 2n-1.
RuleTri CollapsedTriangle(int n);

// Cached accessors; rules are built once per (n, alpha) and shared read-only.
const Rule1D &CachedGaussLegendre(int n);
const RuleTri &CachedTriangle(int n);

}  // namespace fracmag::quad
