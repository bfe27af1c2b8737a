#include <cmath>
#include <doctest.h>
#include "fixtures.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/oracle.hpp"

using namespace fracmag;
using fixtures::MaxAbs;

TEST_CASE("reference eigensolver")
{
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(3, 3);
  K(0, 0) = 2.0;
  K(1, 1) = 3.0;
  K(2, 2) = 1.0;
  const Eigen::VectorXd v = EigReference(K, Eigen::MatrixXd::Identity(3, 3));
  CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(v(2) == doctest::Approx(3.0).epsilon(1e-15));

  for (const auto &in : {fixtures::Interval(24, 0.2, MagneticPotential::Constant1D(2.0)),
                         fixtures::Square(6, 0.8, MagneticPotential::Landau(1.0))})
  {
    const Eigen::VectorXd ref = EigReference(in.form.K, in.mass.M);
    const Spectrum sp = SolveEigs(in.form, in.mass, in.form.size());
    CHECK(ref.minCoeff() > 0.0);
    for (int m = 0; m < sp.count(); ++m)
    {
      CHECK(std::abs(ref(m) - sp.values(m)) <= 1e-10 * ref(m));
    }
  }
  CHECK_THROWS_AS(EigReference(Eigen::MatrixXcd::Identity(201, 201), Eigen::MatrixXd::Identity(201, 201)),
                  InvalidArgument);
}

TEST_CASE("oracle assembly symmetries")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 6);
  const auto A = MagneticPotential::Constant1D(1.5);
  const OracleAssembly a = DenseAssemblyReference(m, 0.3, A);
  const OracleAssembly b = DenseAssemblyReference(m, 0.3, A.Negated());
  const OracleAssembly z = DenseAssemblyReference(m, 0.3, MagneticPotential::Zero());
  CHECK(MaxAbs(b.form.K - a.form.K.conjugate()) <= 1e-12 * MaxAbs(a.form.K));
  CHECK(z.form.K.imag().cwiseAbs().maxCoeff() <= 1e-12 * MaxAbs(z.form.K));
  CHECK(MaxAbs(a.form.K - a.form.K.adjoint()) == 0.0);
  CHECK(a.certificate.maxCoeff() < 1e-5);
  CHECK(a.form.meta.kind == "oracle");
}

TEST_CASE("oracle guards")
{
  CHECK_THROWS_AS(DenseAssemblyReference(BuildMesh(Domain::Interval(-1, 1), 24), 0.3,
                                         MagneticPotential::Zero()),
                  InvalidArgument);
  CHECK_THROWS_AS(DenseAssemblyReference(BuildMesh(Domain::Disk(0, 0, 1), 4), 0.3,
                                         MagneticPotential::Zero()),
                  InvalidArgument);
  CHECK_THROWS_AS(DenseAssemblyReference(BuildMesh(Domain::Interval(-1, 1), 4), 0.6,
                                         MagneticPotential::Zero()),
                  PreconditionViolation);
  OracleConfig cfg;
  cfg.points = 5;
  CHECK_THROWS_AS(DenseAssemblyReference(BuildMesh(Domain::Interval(-1, 1), 4), 0.3,
                                         MagneticPotential::Zero(), cfg),
                  InvalidArgument);
}

TEST_CASE("reference tail weight in 1D")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 4);
  for (double x : {0.0, -0.6, 0.95})
  {
    const double s = 0.35;
    const double ref = (std::pow(1 + x, -2 * s) + std::pow(1 - x, -2 * s)) / (2 * s);
    CHECK(ReferenceTailWeight(m, s, Point(x, 0)) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("finite-difference gradient")
{
  const auto in = fixtures::Interval(16, 0.4, MagneticPotential::Constant1D(1.0));
  const Spectrum sp = SolveEigs(in.form, in.mass, 3);
  const double beta_inf = 0.5 * (sp.values(1) + sp.values(2));
  const ProblemSpec p(in.form.K, in.mass, beta_inf, Nonlinearity::Rational(-1.0));
  const int d = in.form.size();
  CHECK(FdGradient(p, Eigen::VectorXcd::Zero(d)).norm() <= 1e-9);

  std::mt19937_64 rng(21);
  const Eigen::VectorXcd u = fixtures::RandomComplex(d, rng);
  const Eigen::VectorXcd g = Gradient(u, p);
  CHECK((FdGradient(p, u) - g).norm() <= 1e-5 * g.norm());

  // Central differences converge at second order.
  const Eigen::VectorXcd phi = fixtures::RandomComplex(d, rng);
  const double exact = phi.dot(g).real();
  std::vector<double> err;
  for (double h = 1e-2; h > 1e-3; h *= 0.5)
  {
    err.push_back(std::abs(FdDirectional(p, u, phi, h) - exact));
  }
  for (std::size_t k = 1; k < err.size(); ++k)
  {
    const double order = std::log2(err[k - 1] / err[k]);
    CHECK(order > 1.7);
    CHECK(order < 2.3);
  }
}
