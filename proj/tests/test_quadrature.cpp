#include <cmath>
#include <doctest.h>
#include "fracmag/quadrature.hpp"

using namespace fracmag::quad;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly")
{
  for (int n = 1; n <= 12; ++n)
  {
    const Rule1D &r = CachedGaussLegendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k)
    {
      double sum = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j)
      {
        sum += r.w[j] * std::pow(r.x[j], k);
      }
      CHECK(sum == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }
}

TEST_CASE("Gauss-Jacobi integrates t^alpha t^k exactly")
{
  for (double alpha : {-0.8, -0.5, -0.2, 0.0, 0.6})
  {
    const Rule1D r = GaussJacobi01(6, alpha);
    for (int k = 0; k <= 11; ++k)
    {
      double sum = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j)
      {
        CHECK(r.x[j] > 0.0);
        CHECK(r.x[j] < 1.0);
        sum += r.w[j] * std::pow(r.x[j], k);
      }
      CHECK(sum == doctest::Approx(1.0 / (alpha + k + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("collapsed triangle rule integrates monomials exactly")
{
  const auto fact = [](int n) { return std::tgamma(n + 1.0); };
  for (int n = 1; n <= 6; ++n)
  {
    const RuleTri &r = CachedTriangle(n);
    for (int a = 0; a <= 2 * n - 1; ++a)
    {
      for (int b = 0; a + b <= 2 * n - 1; ++b)
      {
        double sum = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j)
        {
          sum += r.w[j] * std::pow(r.x[j][0], a) * std::pow(r.x[j][1], b);
        }
        CHECK(sum == doctest::Approx(fact(a) * fact(b) / fact(a + b + 2)).epsilon(1e-12));
      }
    }
  }
}
