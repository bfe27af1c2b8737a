#include <cmath>
#include <numbers>
#include <doctest.h>
#include <Eigen/Eigenvalues>
#include "fixtures.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/oracle.hpp"

using namespace fracmag;
using fixtures::MaxAbs;

namespace
{

double MinEig(const Eigen::MatrixXcd &K)
{
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(K, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double MinEig(const Eigen::MatrixXd &M)
{
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace

TEST_CASE("kernel constant")
{
  CHECK(KernelConstant(1, 0.5) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
  CHECK(KernelConstant(2, 0.5) == doctest::Approx(0.5 / std::numbers::pi).epsilon(1e-14));
  // Gamma(1+s)/Gamma(1-s) = Gamma(1+s)^2 sin(pi s)/(pi s) by the reflection formula.
  const double s = 0.9;
  const double g = std::exp(std::lgamma(1.0 + s));
  const double ref = s * std::pow(4.0, s) / std::numbers::pi * g * g *
                     std::sin(std::numbers::pi * s) / (std::numbers::pi * s);
  CHECK(KernelConstant(2, s) == doctest::Approx(ref).epsilon(1e-13));
  CHECK_THROWS_AS(KernelConstant(1, 0.0), InvalidArgument);
  CHECK_THROWS_AS(KernelConstant(2, 1.0), InvalidArgument);
}

TEST_CASE("fractional order guards")
{
  CHECK_THROWS_AS(FractionalOrder(1.5), InvalidArgument);
  CHECK_THROWS_AS(FractionalOrder(0.6).CheckDimension(1), PreconditionViolation);
  CHECK_THROWS_AS(FractionalOrder(0.5).CheckDimension(1), PreconditionViolation);
  CHECK_NOTHROW(FractionalOrder(0.49).CheckDimension(1));
  CHECK_NOTHROW(FractionalOrder(0.99).CheckDimension(2));
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 8);
  CHECK_THROWS_AS(AssembleNonlocalForm(m, 0.6, MagneticPotential::Zero()), PreconditionViolation);
}

TEST_CASE("magnetic phase")
{
  const Point x(0.3, -0.7), y(-1.1, 0.4);
  CHECK(MagneticPhase(x, y, MagneticPotential::Zero(), 2) == std::complex<double>(1.0, 0.0));
  CHECK(MagneticPhase(x, x, MagneticPotential::Landau(3.0), 2) == std::complex<double>(1.0, 0.0));
  const auto p = MagneticPhase(Point(1, 0), Point(0, 0), MagneticPotential::Landau(2.0), 2);
  CHECK(std::abs(p - 1.0) < 1e-15);
  const auto q = MagneticPhase(x, y, MagneticPotential::Landau(1.7), 2);
  CHECK(std::abs(std::abs(q) - 1.0) < 1e-15);
  // (x - y) . A(mid) with A = (b/2)(-m2, m1)
  const Point mid = 0.5 * (x + y), dxy = x - y;
  const double theta = 0.85 * (-mid.y() * dxy.x() + mid.x() * dxy.y());
  CHECK(std::abs(q - std::polar(1.0, theta)) < 1e-14);
  CHECK_THROWS_AS(MagneticPotential::Landau(1.0).ValidateFor(1), InvalidArgument);
}

TEST_CASE("1D tail weight has the closed form on (-1, 1)")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 8);
  CHECK(TailWeight(m, 0.5, Point(0, 0)) == doctest::Approx(2.0).epsilon(1e-14));
  for (double s : {0.1, 0.25, 0.4})
  {
    for (double x : {-0.9, -0.3, 0.2, 0.75})
    {
      const double ref = (std::pow(1 + x, -2 * s) + std::pow(1 - x, -2 * s)) / (2 * s);
      CHECK(TailWeight(m, s, Point(x, 0)) == doctest::Approx(ref).epsilon(1e-13));
    }
  }
}

TEST_CASE("2D tail weight agrees with direct exterior integration")
{
  const Mesh m = BuildMesh(Domain::Rectangle(0, 2, 0, 1), 4);
  for (double s : {0.3, 0.7})
  {
    for (const Point &x : {Point(1.0, 0.5), Point(0.2, 0.1), Point(1.9, 0.7), Point(0.01, 0.5)})
    {
      const double a = TailWeight(m, s, x), b = ReferenceTailWeight(m, s, x);
      CAPTURE(a - b);
      // Both sides are numerical; agreement degrades to ~1e-6 within 1e-2 of the boundary.
      CHECK(std::abs(a - b) <= 1e-5 * b);
    }
  }
}

TEST_CASE("tail contribution is shared by every potential and is positive")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 8);
  const double s = 0.4;
  const Eigen::MatrixXd tail = AssembleTail(m, s);
  CHECK((tail - tail.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(MinEig(tail) > 0.0);
  for (const auto &A : {MagneticPotential::Zero(), MagneticPotential::Constant1D(2.0)})
  {
    const Eigen::MatrixXcd full = AssembleNonlocalForm(m, s, A).K;
    const Eigen::MatrixXcd inner = AssembleInteriorForm(m, s, A);
    CHECK(MaxAbs(full - inner - tail.cast<std::complex<double>>()) < 1e-14 * MaxAbs(full));
    CHECK(MinEig(full) > MinEig(inner));
    CHECK(MinEig(inner) > 0.0);
  }
}

TEST_CASE("structural invariants over a corpus of forms")
{
  struct Case
  {
    Domain domain;
    int res;
    double s;
    MagneticPotential A;
  };
  Eigen::Matrix2d B;
  B << 0.3, -0.8, 0.5, 0.1;
  const std::vector<Case> corpus{
      {Domain::Interval(-1, 1), 8, 0.25, MagneticPotential::Zero()},
      {Domain::Interval(-1, 1), 8, 0.4, MagneticPotential::Constant1D(1.0)},
      {Domain::Interval(0, 3), 12, 0.1, MagneticPotential::Constant1D(-2.5)},
      {Domain::Interval(-1, 1), 9, 0.45, MagneticPotential::Affine(Eigen::Matrix2d::Identity(), Point(0.5, 0))},
      {Domain::Rectangle(0, 1, 0, 1), 5, 0.3, MagneticPotential::Zero()},
      {Domain::Rectangle(0, 1, 0, 1), 5, 0.7, MagneticPotential::Landau(2.0)},
      {Domain::Rectangle(-1, 1, 0, 1), 6, 0.5, MagneticPotential::Constant(Point(1.0, -0.5))},
      {Domain::Rectangle(0, 1, 0, 2), 5, 0.9, MagneticPotential::Affine(B, Point(0.2, 0.0))},
      {Domain::Disk(0, 0, 1), 6, 0.4, MagneticPotential::Landau(1.0)},
  };
  for (const auto &c : corpus)
  {
    CAPTURE(c.s);
    CAPTURE(c.A.Describe());
    const Mesh m = BuildMesh(c.domain, c.res);
    const Eigen::MatrixXcd K = AssembleNonlocalForm(m, c.s, c.A).K;
    const Eigen::MatrixXcd Kn = AssembleNonlocalForm(m, c.s, c.A.Negated()).K;
    const MassMatrix M = AssembleMass(m);
    CHECK(MaxAbs(K - K.adjoint()) == 0.0);
    CHECK(MaxAbs(Kn - K.conjugate()) <= 1e-14 * MaxAbs(K));
    CHECK(MinEig(K) > 0.0);
    CHECK(MinEig(M.M) > 0.0);
    if (c.A.family() == MagneticPotential::Family::Zero)
    {
      CHECK(K.imag().cwiseAbs().maxCoeff() == 0.0);
    }
    const Eigen::MatrixXcd L = AssembleLocalMagneticForm(m, c.A).K;
    CHECK(MaxAbs(L - L.adjoint()) == 0.0);
    CHECK(MaxAbs(AssembleLocalMagneticForm(m, c.A.Negated()).K - L.conjugate()) <= 1e-14 * MaxAbs(L));
    CHECK(MinEig(L) > 0.0);
  }
}

TEST_CASE("1D assembly matches the dense oracle")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 8);
  const auto A = MagneticPotential::Zero();
  const OracleAssembly ref = DenseAssemblyReference(m, 0.4, A);
  const Eigen::MatrixXcd K = AssembleNonlocalForm(m, 0.4, A).K;
  const double scale = MaxAbs(ref.form.K);
  for (int i = 0; i < K.rows(); ++i)
  {
    for (int j = 0; j < K.cols(); ++j)
    {
      const double den = std::max(std::abs(ref.form.K(i, j)), 1e-3 * scale);
      CHECK(std::abs(K(i, j) - ref.form.K(i, j)) / den < 1e-4);
    }
  }
}

TEST_CASE("2D assembly matches the dense oracle at its coarser accuracy")
{
  const Mesh m = BuildMesh(Domain::Rectangle(0, 1, 0, 1), 3);
  const auto A = MagneticPotential::Landau(1.0);
  const OracleAssembly ref = DenseAssemblyReference(m, 0.4, A);
  const Eigen::MatrixXcd K = AssembleNonlocalForm(m, 0.4, A).K;
  CHECK(MaxAbs(K - ref.form.K) / MaxAbs(ref.form.K) < 5e-3);
}

TEST_CASE("mass matrix")
{
  const int res = 8;
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), res);
  const MassMatrix M = AssembleMass(m);
  const double h = m.h;
  for (int i = 0; i < M.size(); ++i)
  {
    CHECK(M.M(i, i) == doctest::Approx(2 * h / 3).epsilon(1e-14));
    CHECK(M.lumped(i) == doctest::Approx(h).epsilon(1e-14));
    if (i + 1 < M.size())
    {
      CHECK(M.M(i, i + 1) == doctest::Approx(h / 6).epsilon(1e-14));
    }
    if (i + 2 < M.size())
    {
      CHECK(M.M(i, i + 2) == 0.0);
    }
  }
  // Interpolant of 1: full cells inside, linear ramps on the two boundary cells.
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(M.size());
  CHECK(one.dot(M.M * one) == doctest::Approx((res - 2) * h + 2 * h / 3).epsilon(1e-12));

  const Mesh sq = BuildMesh(Domain::Rectangle(0, 1, 0, 1), 6);
  const MassMatrix M2 = AssembleMass(sq);
  CHECK((M2.M - M2.M.transpose()).cwiseAbs().maxCoeff() == 0.0);
  // Each interior hat integrates to h_x h_y (area of its patch / 3).
  CHECK(M2.lumped(0) == doctest::Approx(1.0 / 36).epsilon(1e-13));
}

TEST_CASE("local form without potential is the P1 stiffness matrix")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 10);
  const Eigen::MatrixXcd L = AssembleLocalMagneticForm(m, MagneticPotential::Zero()).K;
  for (int i = 0; i < L.rows(); ++i)
  {
    CHECK(L(i, i).real() == doctest::Approx(2 / m.h).epsilon(1e-13));
    if (i + 1 < L.rows())
    {
      CHECK(L(i, i + 1).real() == doctest::Approx(-1 / m.h).epsilon(1e-13));
    }
  }
  CHECK(L.imag().cwiseAbs().maxCoeff() == 0.0);

  const Mesh sq = BuildMesh(Domain::Rectangle(0, 1, 0, 1), 4);
  const Eigen::MatrixXcd L2 = AssembleLocalMagneticForm(sq, MagneticPotential::Zero()).K;
  // Five-point stencil for the right-triangle grid.
  CHECK(L2(4, 4).real() == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(L2(4, 1).real() == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("constant potential raises the first local eigenvalue in 1D")
{
  const Mesh m = BuildMesh(Domain::Interval(-1, 1), 24);
  const MassMatrix M = AssembleMass(m);
  const auto first = [&](const MagneticPotential &A) {
    return SolveEigs(AssembleLocalMagneticForm(m, A), M, 1).values(0);
  };
  const double b0 = first(MagneticPotential::Zero());
  CHECK(first(MagneticPotential::Constant1D(1.0)) >= b0);
  CHECK(first(MagneticPotential::Constant1D(3.0)) >= b0);
}

TEST_CASE("threaded assembly agrees with the sequential sum")
{
  const Mesh m = BuildMesh(Domain::Rectangle(0, 1, 0, 1), 6);
  KernelQuadratureConfig q;
  const auto A = MagneticPotential::Landau(1.0);
  const Eigen::MatrixXcd K1 = AssembleNonlocalForm(m, 0.6, A, q).K;
  const Eigen::MatrixXcd K1b = AssembleNonlocalForm(m, 0.6, A, q).K;
  q.threads = 4;
  const Eigen::MatrixXcd K4 = AssembleNonlocalForm(m, 0.6, A, q).K;
  CHECK(MaxAbs(K1 - K1b) == 0.0);
  CHECK(MaxAbs(K1 - K4) <= 1e-13 * MaxAbs(K1));
  CHECK(MaxAbs(K4 - K4.adjoint()) == 0.0);
}

TEST_CASE("quadrature config validation")
{
  KernelQuadratureConfig q;
  CHECK_NOTHROW(q.Validate());
  q.far_order = 0;
  CHECK_THROWS_AS(q.Validate(), InvalidArgument);
}
