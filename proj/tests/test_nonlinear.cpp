#include <cmath>
#include <numbers>
#include <doctest.h>
#include "fixtures.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/oracle.hpp"
#include "fracmag/quadrature.hpp"

using namespace fracmag;
using fixtures::RandomComplex;

namespace
{

struct Setup
{
  fixtures::Instance in;
  Spectrum sp;
};

const Setup &Demo()
{
  static const Setup s = [] {
    Setup out;
    out.in = fixtures::Interval(32, 0.4, MagneticPotential::Constant1D(1.0));
    out.sp = SolveEigs(out.in.form, out.in.mass, 6);
    return out;
  }();
  return s;
}

ProblemSpec Make(double beta_inf, Nonlinearity nl)
{
  return ProblemSpec(Demo().in.form.K, Demo().in.mass, beta_inf, nl);
}

double Beta(int m) { return Demo().sp.values(m - 1); }
Eigen::VectorXcd F(int m) { return Demo().sp.vectors.col(m - 1); }

}  // namespace

TEST_CASE("nonlinearity families")
{
  const auto r1 = Nonlinearity::Rational(1.0);
  CHECK(r1.f(0) == 1.0);
  CHECK(r1.f(1e6) < 1e-5);
  CHECK(Nonlinearity::Rational(2.0).F(1.0) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
  CHECK(Nonlinearity::Rational(2.0).F(1.0) == doctest::Approx(1.386294).epsilon(1e-6));
  const auto e = Nonlinearity::Exponential(-1.5);
  CHECK(e.f(0) == -1.5);
  CHECK(e.F(2.0) == doctest::Approx(-1.5 * (1 - std::exp(-2.0))));
  CHECK(e.df(0.5) == doctest::Approx(1.5 * std::exp(-0.5)));
  const auto z = Nonlinearity::Zero();
  for (double t : {0.0, 1.0, 1e8})
  {
    CHECK(z.f(t) == 0.0);
    CHECK(z.F(t) == 0.0);
  }
  for (const auto &nl : {r1, e, z, Nonlinearity::Constant(1.0)})
  {
    CHECK(nl.F(0.0) == 0.0);
    CHECK_THROWS_AS(nl.f(-1e-3), InvalidArgument);
    CHECK_THROWS_AS(nl.F(-1.0), InvalidArgument);
    CHECK(Nonlinearity::FromName(nl.Name(), nl.beta0).family == nl.family);
  }
  CHECK_THROWS_AS(Nonlinearity::FromName("cubic", 1.0), InvalidArgument);
}

TEST_CASE("energy basics")
{
  const int d = Demo().in.form.size();
  const ProblemSpec lin = Make(0.0, Nonlinearity::Zero());
  CHECK(Energy(Eigen::VectorXcd::Zero(d), lin) == 0.0);
  CHECK(Energy(F(1), lin) == doctest::Approx(0.5 * Beta(1)).epsilon(1e-10));

  const ProblemSpec p = Make(0.5 * (Beta(2) + Beta(3)), Nonlinearity::Rational(-2.0));
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t)
  {
    const Eigen::VectorXcd u = RandomComplex(d, rng);
    const double J = Energy(u, p);
    for (double theta : {0.3, 1.7, std::numbers::pi})
    {
      CHECK(std::abs(Energy(std::polar(1.0, theta) * u, p) - J) <= 1e-12 * std::abs(J));
    }
    CHECK(std::abs(Energy(Eigen::VectorXcd(-u), p) - J) <= 1e-12 * std::abs(J));
  }
}

TEST_CASE("lumped energy converges to a finely integrated energy")
{
  // Relative gap between the nodal (lumped) F-integral and 12-point Gauss on every cell.
  const auto gap = [](int res) {
    const auto in = fixtures::Interval(res, 0.4, MagneticPotential::Constant1D(1.0));
    const Spectrum sp = SolveEigs(in.form, in.mass, 2);
    const double beta_inf = 0.5 * (sp.values(0) + sp.values(1));
    const Nonlinearity nl = Nonlinearity::Rational(3.0);
    const ProblemSpec p(in.form.K, in.mass, beta_inf, nl);
    const Eigen::VectorXcd u = std::complex<double>(0.3, 0.4) * sp.vectors.col(0);
    std::vector<std::complex<double>> nodal(in.mesh.NumNodes(), 0.0);
    for (int k = 0; k < in.mesh.NumDofs(); ++k)
    {
      nodal[in.mesh.dofs.node_of_dof[k]] = u(k);
    }
    const auto &g = quad::CachedGaussLegendre(12);
    double Fint = 0.0;
    for (const auto &e : in.mesh.elements)
    {
      const double len = std::abs(in.mesh.nodes[e[1]].x() - in.mesh.nodes[e[0]].x());
      for (std::size_t j = 0; j < g.size(); ++j)
      {
        const std::complex<double> v = (1 - g.x[j]) * nodal[e[0]] + g.x[j] * nodal[e[1]];
        Fint += len * g.w[j] * nl.F(std::norm(v));
      }
    }
    const double quadratic =
        0.5 * u.dot(in.form.K * u).real() - 0.5 * beta_inf * u.dot(in.mass.M * u).real();
    const double fine = quadratic - 0.5 * Fint;
    return std::abs(Energy(u, p) - fine) / std::abs(fine);
  };
  const double g32 = gap(32), g64 = gap(64);
  CHECK(g32 < 5e-3);
  CHECK(g64 < 1e-3);
  CHECK(g32 / g64 > 3.0);
}

TEST_CASE("gradient consistency")
{
  const int d = Demo().in.form.size();
  const ProblemSpec p = Make(0.5 * (Beta(2) + Beta(3)), Nonlinearity::Exponential(-1.7));
  CHECK(Gradient(Eigen::VectorXcd::Zero(d), p).norm() == 0.0);
  CHECK(Residual(Eigen::VectorXcd::Zero(d), p) == 0.0);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t)
  {
    const Eigen::VectorXcd u = RandomComplex(d, rng);
    const Eigen::VectorXcd phi = RandomComplex(d, rng);
    const double fd = FdDirectional(p, u, phi, 1e-6);
    const double an = phi.dot(Gradient(u, p)).real();
    CHECK(std::abs(fd - an) <= 1e-5 * (1 + std::abs(Energy(u, p))));
    // Residual is continuous.
    const double r = Residual(u, p);
    CHECK(std::abs(Residual(Eigen::VectorXcd(u + 1e-7 * phi), p) - r) <= 1e-4 * (1 + r));
  }
}

TEST_CASE("real Hessian matches differences of the gradient")
{
  const int d = Demo().in.form.size();
  const ProblemSpec p = Make(0.5 * (Beta(2) + Beta(3)), Nonlinearity::Rational(-1.2));
  std::mt19937_64 rng(8);
  const Eigen::VectorXcd u = RandomComplex(d, rng);
  const Eigen::MatrixXd H = RealHessian(u, p);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * H.cwiseAbs().maxCoeff());
  const auto real_grad = [&](const Eigen::VectorXcd &v) {
    const Eigen::VectorXcd g = Gradient(v, p);
    Eigen::VectorXd out(2 * d);
    out << g.real(), g.imag();
    return out;
  };
  for (int t = 0; t < 5; ++t)
  {
    const Eigen::VectorXcd phi = RandomComplex(d, rng);
    Eigen::VectorXd x(2 * d);
    x << phi.real(), phi.imag();
    const double h = 1e-6;
    const Eigen::VectorXd fd = (real_grad(u + h * phi) - real_grad(u - h * phi)) / (2 * h);
    CHECK((fd - H * x).norm() <= 1e-6 * (H * x).norm());
  }
}

TEST_CASE("eigenfunctions are critical points of the resonant linear problem")
{
  const ProblemSpec p =
      ProblemSpec::UncheckedForTesting(Demo().in.form.K, Demo().in.mass, Beta(1), Nonlinearity::Zero());
  CHECK(Gradient(F(1), p).norm() < 1e-8);
  CHECK(Residual(F(1), p) < 1e-8);
}

TEST_CASE("resonance guard")
{
  CHECK_THROWS_AS(Make(Beta(2), Nonlinearity::Zero()), ResonanceError);
  CHECK_THROWS_AS(Make(Beta(3) * (1 + 1e-8), Nonlinearity::Rational(1.0)), ResonanceError);
  CHECK_NOTHROW(Make(Beta(3) * (1 + 1e-4), Nonlinearity::Rational(1.0)));
}

TEST_CASE("orbit distance is a phase-invariant pseudometric")
{
  const int d = Demo().in.form.size();
  const ProblemSpec p = Make(0.0, Nonlinearity::Zero());
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t)
  {
    const Eigen::VectorXcd u = RandomComplex(d, rng), v = RandomComplex(d, rng), w = RandomComplex(d, rng);
    CHECK(p.OrbitDistance(u, std::polar(1.0, 0.1 * t) * u) <= 1e-7 * p.MassNorm(u));
    CHECK(p.OrbitDistance(u, v) == doctest::Approx(p.OrbitDistance(v, u)).epsilon(1e-12));
    CHECK(p.OrbitDistance(u, w) <= p.OrbitDistance(u, v) + p.OrbitDistance(v, w) + 1e-12);
    // Closed form agrees with a brute-force scan over theta.
    double best = INFINITY;
    for (int k = 0; k < 20000; ++k)
    {
      best = std::min(best, p.MassNorm(u - std::polar(1.0, 2 * std::numbers::pi * k / 20000) * v));
    }
    CHECK(p.OrbitDistance(u, v) <= best + 1e-12);
    CHECK(p.OrbitDistance(u, v) >= best - 1e-6 * best);
  }
}

TEST_CASE("solution set deduplicates phase orbits")
{
  const ProblemSpec p = Make(0.0, Nonlinearity::Zero());
  SolutionSet set;
  CriticalPoint a;
  a.u = F(1);
  Describe(a, p);
  CHECK(set.Add(a, p));
  CriticalPoint b = a;
  b.u = std::polar(1.0, 2.0) * F(1);
  CHECK_FALSE(set.Add(b, p));
  b.u = -F(1);
  CHECK_FALSE(set.Add(b, p));
  b.u = F(2);
  CHECK(set.Add(b, p));
  CriticalPoint z;
  z.u = Eigen::VectorXcd::Zero(F(1).size());
  Describe(z, p);
  CHECK(z.trivial);
  CHECK(set.Add(z, p));
  CHECK(set.NontrivialCount() == 2);
  CHECK(set.HasTrivial());
}

TEST_CASE("minimization")
{
  const int d = Demo().in.form.size();
  std::mt19937_64 rng(12);
  SUBCASE("linear coercive problem converges to zero")
  {
    const ProblemSpec p = Make(0.5 * Beta(1), Nonlinearity::Zero());
    const MinimizeResult r = Minimize(p, RandomComplex(d, rng));
    CHECK(r.point.trivial);
    CHECK(r.point.residual <= 1e-10);
    CHECK(std::abs(r.point.energy) <= 1e-12);
  }
  SUBCASE("negative energy start gives a nontrivial minimizer")
  {
    const ProblemSpec p = Make(0.5 * Beta(1), Nonlinearity::Rational(2.0 * Beta(1)));
    double best = INFINITY;
    for (double rho : {0.01, 0.03, 0.1, 0.3, 1.0})
    {
      best = std::min(best, Energy(Eigen::VectorXcd(rho * F(1)), p));
    }
    REQUIRE(best < 0.0);
    const Eigen::VectorXcd u0 = 0.1 * F(1);
    const MinimizeResult r = Minimize(p, u0);
    CHECK_FALSE(r.point.trivial);
    CHECK(r.point.energy < 0.0);
    CHECK(r.point.energy <= Energy(u0, p));
    CHECK(r.point.residual <= 1e-10);
    for (std::size_t k = 1; k < r.energies.size(); ++k)
    {
      CHECK(r.energies[k] <= r.energies[k - 1]);
    }
  }
  SUBCASE("iteration cap raises with the best iterate")
  {
    const ProblemSpec p = Make(0.5 * Beta(1), Nonlinearity::Rational(2.0 * Beta(1)));
    MinimizeOptions o;
    o.max_iter = 2;
    try
    {
      Minimize(p, RandomComplex(d, rng), o);
      FAIL("expected NoConvergence");
    }
    catch (const NoConvergence &e)
    {
      CHECK(e.best().u.size() == d);
    }
  }
  SUBCASE("warns when the functional may be unbounded below")
  {
    const ProblemSpec p = Make(0.5 * (Beta(1) + Beta(2)), Nonlinearity::Rational(-1.0));
    MinimizeOptions o;
    o.max_iter = 50;
    try
    {
      const MinimizeResult r = Minimize(p, 0.01 * F(2), o);
      CHECK_FALSE(r.warnings.empty());
    }
    catch (const NoConvergence &)
    {
    }
  }
}

TEST_CASE("deflated Newton")
{
  SUBCASE("nonresonant linear problem has only the trivial solution")
  {
    const ProblemSpec p = Make(0.5 * (Beta(2) + Beta(3)), Nonlinearity::Zero());
    const auto starts = MultistartFromEigenspaces(Demo().sp, Demo().in.form.K, 1, 3, 0.1, 6, 3);
    const SolutionSet set = NewtonDeflated(p, starts);
    CHECK(set.NontrivialCount() == 0);
    CHECK(set.HasTrivial());
  }
  SUBCASE("resonant linear problem has the eigenfunction orbit")
  {
    const ProblemSpec p = ProblemSpec::UncheckedForTesting(Demo().in.form.K, Demo().in.mass, Beta(2),
                                                           Nonlinearity::Zero());
    const auto starts = MultistartFromEigenspaces(Demo().sp, Demo().in.form.K, 2, 2, 0.5, 0, 3);
    const SolutionSet set = NewtonDeflated(p, starts);
    REQUIRE(set.NontrivialCount() >= 1);
    for (const auto &cp : set.points())
    {
      if (!cp.trivial)
      {
        const Eigen::VectorXcd f2 = F(2) * cp.norm_m;
        CHECK(p.OrbitDistance(cp.u, f2) <= 1e-6 * cp.norm_m);
      }
    }
  }
  SUBCASE("gap instance: two nontrivial orbits, deterministic")
  {
    const double beta_inf = 0.5 * (Beta(2) + Beta(3));
    const double beta0 = (Beta(1) - beta_inf) - 0.1 * Beta(1);
    const ProblemSpec p = Make(beta_inf, Nonlinearity::Rational(beta0));
    const auto starts = MultistartFromEigenspaces(Demo().sp, Demo().in.form.K, 1, 2, 0.1, 6, 1);
    const SolutionSet a = NewtonDeflated(p, starts), b = NewtonDeflated(p, starts);
    CHECK(a.NontrivialCount() >= 2);
    REQUIRE(a.points().size() == b.points().size());
    for (std::size_t i = 0; i < a.points().size(); ++i)
    {
      CHECK((a.points()[i].u - b.points()[i].u).norm() == 0.0);
      CHECK(a.points()[i].residual <= 1e-9);
      // Independent recomputation of the residual.
      const Eigen::VectorXcd g = Gradient(a.points()[i].u, p);
      CHECK(p.DualNorm(g) <= 2e-10);
    }
  }
  CHECK_THROWS_AS(NewtonDeflated(Make(0.0, Nonlinearity::Zero()), {}), InvalidArgument);
}

TEST_CASE("multistart")
{
  const auto &K = Demo().in.form.K;
  const auto s11 = MultistartFromEigenspaces(Demo().sp, K, 1, 1, 0.2, 0, 5);
  REQUIRE(!s11.empty());
  CHECK(s11[0].label == "f1");
  CHECK(s11.size() == 1 + 4);
  for (const auto &st : s11)
  {
    const double kn = std::sqrt(st.u.dot(K * st.u).real());
    CHECK(std::abs(kn - 0.2) <= 0.2 * 1e-10);
    // Starts in span{f1} are phase rotations of f1.
    const Eigen::VectorXcd proj = F(1) * F(1).dot(Demo().in.mass.M * st.u);
    CHECK((proj - st.u).norm() <= 1e-10 * st.u.norm());
  }
  const auto s13 = MultistartFromEigenspaces(Demo().sp, K, 1, 3, 0.2, 5, 5);
  CHECK(s13.size() == 3 + 6 + 12 + 5);
  const auto again = MultistartFromEigenspaces(Demo().sp, K, 1, 3, 0.2, 5, 5);
  for (std::size_t i = 0; i < s13.size(); ++i)
  {
    CHECK((s13[i].u - again[i].u).norm() == 0.0);
  }
  CHECK_THROWS_AS(MultistartFromEigenspaces(Demo().sp, K, 2, 1, 0.2, 0, 5), InvalidArgument);
  CHECK_THROWS_AS(MultistartFromEigenspaces(Demo().sp, K, 1, 7, 0.2, 0, 5), InvalidArgument);
  CHECK_THROWS_AS(MultistartFromEigenspaces(Demo().sp, K, 1, 2, 0.0, 0, 5), InvalidArgument);
}

TEST_CASE("linking diagnostics")
{
  const double beta_inf = 0.5 * (Beta(2) + Beta(3));
  SUBCASE("linear problem between beta_2 and beta_3 has c0 > 0 on E_3")
  {
    const ProblemSpec p = Make(beta_inf, Nonlinearity::Zero());
    const LinkingDiagnostics dg = DiagnoseLinking(p, Demo().sp, 3, 3, 0.1, 300, 1);
    CHECK(dg.c0_est > 0.0);
  }
  SUBCASE("gap instance has linking geometry and c0 decreases with more samples")
  {
    const ProblemSpec p = Make(beta_inf, Nonlinearity::Rational((Beta(1) - beta_inf) - 0.1 * Beta(1)));
    const LinkingDiagnostics a = DiagnoseLinking(p, Demo().sp, 1, 2, 0.1, 100, 4);
    const LinkingDiagnostics b = DiagnoseLinking(p, Demo().sp, 1, 2, 0.1, 1000, 4);
    CHECK(a.geometry_ok);
    CHECK(b.c0_est <= a.c0_est);
    CHECK(b.cinf_est > b.c0_est);
  }
}

TEST_CASE("nonlinearity validation")
{
  const auto grid = DefaultTGrid();
  const NonlinearityReport r = CheckNonlinearity(Nonlinearity::Rational(1.0), grid);
  CHECK(r.ok());
  for (double a : r.a_eps)
  {
    // |t|/(1+t^2) <= 1/2 bounds every a_eps.
    CHECK(a <= 0.5 + 1e-12);
  }
  const NonlinearityReport z = CheckNonlinearity(Nonlinearity::Zero(), grid);
  CHECK(z.ok());
  for (double a : z.a_eps)
  {
    CHECK(a == 0.0);
  }
  const NonlinearityReport c = CheckNonlinearity(Nonlinearity::Constant(1.0), grid);
  CHECK_FALSE(c.decay_ok);
  CHECK_FALSE(c.ok());
  CHECK_THROWS_AS(ValidateNonlinearity(Nonlinearity::Constant(1.0), grid), ValidationFailed);
  CHECK_NOTHROW(ValidateNonlinearity(Nonlinearity::Exponential(-3.0), grid));
  CHECK_THROWS_AS(CheckNonlinearity(Nonlinearity::Rational(1.0), DefaultTGrid(1e4)), InvalidArgument);
}
