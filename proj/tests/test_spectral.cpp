#include <cmath>
#include <doctest.h>
#include "fixtures.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/oracle.hpp"

using namespace fracmag;
using fixtures::MaxAbs;

namespace
{

Eigen::MatrixXcd Diag(std::initializer_list<double> v)
{
  Eigen::VectorXd d(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.cast<std::complex<double>>().asDiagonal();
}

}  // namespace

TEST_CASE("diagonal pencil")
{
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  const Spectrum sp = SolveEigs(Diag({3, 1, 2}), I, 3);
  CHECK(sp.values(0) == doctest::Approx(1.0));
  CHECK(sp.values(1) == doctest::Approx(2.0));
  CHECK(sp.values(2) == doctest::Approx(3.0));
  CHECK(std::abs(sp.vectors(1, 0) - 1.0) < 1e-14);
  CHECK(std::abs(sp.vectors(2, 1) - 1.0) < 1e-14);
  CHECK(std::abs(sp.vectors(0, 2) - 1.0) < 1e-14);
  CHECK(sp.clusters.size() == 3);
}

TEST_CASE("scaling K scales the spectrum and keeps the vectors")
{
  const auto in = fixtures::Interval(16, 0.3, MagneticPotential::Constant1D(1.0));
  const Spectrum a = SolveEigs(in.form, in.mass, 5);
  const Spectrum b = SolveEigs(Eigen::MatrixXcd(2.5 * in.form.K), in.mass.M, 5);
  for (int m = 0; m < 5; ++m)
  {
    CHECK(b.values(m) == doctest::Approx(2.5 * a.values(m)).epsilon(1e-12));
    CHECK((a.vectors.col(m) - b.vectors.col(m)).norm() < 1e-8);
  }
}

TEST_CASE("1D spectrum agrees with the reference eigensolver and self-converges")
{
  const auto coarse = fixtures::Interval(32, 0.4, MagneticPotential::Zero());
  const auto fine = fixtures::Interval(64, 0.4, MagneticPotential::Zero());
  const Spectrum sp = SolveEigs(coarse.form, coarse.mass, 8);
  const Eigen::VectorXd ref = EigReference(coarse.form.K, coarse.mass.M);
  for (int m = 0; m < 8; ++m)
  {
    CHECK(std::abs(sp.values(m) - ref(m)) <= 1e-10 * ref(m));
    CHECK(sp.values(m) > 0.0);
  }
  const double b64 = SolveEigs(fine.form, fine.mass, 1).values(0);
  CHECK(std::abs(sp.values(0) - b64) <= 0.02 * b64);
  CHECK(sp.mass_defect <= 1e-10);
  CHECK(sp.stiffness_defect <= 1e-8);
}

TEST_CASE("orthogonality of eigenvectors")
{
  const auto in = fixtures::Square(6, 0.6, MagneticPotential::Landau(2.0));
  const Spectrum sp = SolveEigs(in.form, in.mass, 8);
  const Eigen::MatrixXcd F = sp.vectors;
  const Eigen::MatrixXcd G = F.adjoint() * in.mass.M * F;
  const Eigen::MatrixXcd H = F.adjoint() * in.form.K * F;
  CHECK(MaxAbs(G - Eigen::MatrixXcd::Identity(8, 8)) <= 1e-10);
  CHECK(MaxAbs(H - Eigen::MatrixXcd(sp.values.cast<std::complex<double>>().asDiagonal())) <=
        1e-8 * sp.values(7));
  for (int m = 0; m < 8; ++m)
  {
    // Phase convention: the first largest entry is real positive.
    Eigen::Index k;
    sp.vectors.col(m).cwiseAbs().maxCoeff(&k);
    CHECK(std::abs(sp.vectors(k, m).imag()) < 1e-12);
    CHECK(sp.vectors(k, m).real() > 0.0);
  }
}

TEST_CASE("reversing the potential preserves the spectrum")
{
  const auto A = MagneticPotential::Landau(1.5);
  const auto a = fixtures::Square(5, 0.5, A);
  const auto b = fixtures::Square(5, 0.5, A.Negated());
  const Spectrum sa = SolveEigs(a.form, a.mass, 6), sb = SolveEigs(b.form, b.mass, 6);
  for (int m = 0; m < 6; ++m)
  {
    CHECK(sb.values(m) == doctest::Approx(sa.values(m)).epsilon(1e-12));
  }
}

TEST_CASE("enlarging m_max keeps the leading eigenvalues")
{
  const auto in = fixtures::Interval(20, 0.4, MagneticPotential::Constant1D(0.5));
  const Spectrum a = SolveEigs(in.form, in.mass, 3), b = SolveEigs(in.form, in.mass, 12);
  for (int m = 0; m < 3; ++m)
  {
    CHECK(std::abs(a.values(m) - b.values(m)) <= 1e-10 * a.values(m));
  }
}

TEST_CASE("ill-conditioned mass matrix is rejected")
{
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(3, 3);
  M(2, 2) = 1e-14;
  CHECK_THROWS_AS(SolveEigs(Diag({1, 2, 3}), M, 2), NumericalConditioning);
  CHECK_THROWS_AS(SolveEigs(Diag({1, 2, 3}), Eigen::MatrixXd::Identity(3, 3), 4), InvalidArgument);
}

TEST_CASE("clusters")
{
  Eigen::VectorXd v(5);
  v << 1.0, 1.0 + 1e-12, 2.0, 3.0, 3.0;
  const auto c = ClusterEigenvalues(v);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == std::vector<int>{0, 1});
  CHECK(c[1] == std::vector<int>{2});
  CHECK(c[2] == std::vector<int>{3, 4});
}

TEST_CASE("Rayleigh quotient")
{
  const auto in = fixtures::Interval(24, 0.35, MagneticPotential::Constant1D(1.0));
  const Spectrum all = SolveEigs(in.form, in.mass, in.form.size());
  const Eigen::VectorXcd f1 = all.vectors.col(0);
  CHECK(std::abs(RayleighQuotient(f1, in.form.K, in.mass.M) - all.values(0)) <= 1e-10 * all.values(0));
  CHECK(RayleighQuotient(std::complex<double>(-0.3, 2.0) * f1, in.form.K, in.mass.M) ==
        doctest::Approx(all.values(0)).epsilon(1e-12));
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t)
  {
    const double rq = RayleighQuotient(fixtures::RandomComplex(in.form.size(), rng), in.form.K, in.mass.M);
    CHECK(rq >= all.values(0) * (1 - 1e-10));
    CHECK(rq <= all.values(all.count() - 1) * (1 + 1e-10));
  }
  CHECK_THROWS_AS(RayleighQuotient(Eigen::VectorXcd::Zero(in.form.size()), in.form.K, in.mass.M),
                  InvalidArgument);
}

TEST_CASE("subspace split")
{
  const auto in = fixtures::Interval(24, 0.4, MagneticPotential::Constant1D(1.0));
  const Spectrum sp = SolveEigs(in.form, in.mass, 6);
  const int d = in.form.size();
  const SubspaceSplit s0 = SplitAt(sp, in.mass.M, 0);
  CHECK(s0.H.cols() == 0);
  CHECK(MaxAbs(s0.P - Eigen::MatrixXcd::Identity(d, d)) == 0.0);

  std::mt19937_64 rng(11);
  for (int m = 1; m < 6; ++m)
  {
    const SubspaceSplit sm = SplitAt(sp, in.mass.M, m);
    CHECK(sm.H.cols() == m);
    CHECK(MaxAbs(sm.P * sm.P - sm.P) <= 1e-10);
    CHECK((sm.P * sp.vectors.col(0)).norm() <= 1e-10);
    CHECK((sm.P * sp.vectors.col(m) - sp.vectors.col(m)).norm() <= 1e-10);
    for (int t = 0; t < 20; ++t)
    {
      const Eigen::VectorXcd u = sm.P * fixtures::RandomComplex(d, rng);
      CHECK(RayleighQuotient(u, in.form.K, in.mass.M) >= sp.values(m) * (1 - 1e-6));
    }
  }
  CHECK_THROWS_AS(SplitAt(sp, in.mass.M, 6), InvalidArgument);
}

TEST_CASE("split through a degenerate cluster is ambiguous")
{
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  const Spectrum sp = SolveEigs(Diag({1, 2, 2, 3}), I, 4);
  CHECK_NOTHROW(SplitAt(sp, I, 1));
  CHECK_THROWS_AS(SplitAt(sp, I, 2), SplitAmbiguous);
  CHECK_NOTHROW(SplitAt(sp, I, 3));
}

TEST_CASE("Courant-Fischer characterizations")
{
  SUBCASE("diagonal pencil is exact and degenerate levels are skipped")
  {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
    const Eigen::MatrixXcd K = Diag({1, 2, 2, 3});
    const Spectrum sp = SolveEigs(K, I, 4);
    const CourantReport rep = VerifyCourant(sp, K, I, 200, 3);
    CHECK(rep.ok());
    bool skipped_two = false;
    for (const auto &l : rep.levels)
    {
      if (l.m == 2) skipped_two = l.skipped;
      if (!l.skipped)
      {
        CHECK(l.rq_f_next == doctest::Approx(l.beta_next).epsilon(1e-14));
      }
    }
    CHECK(skipped_two);
  }
  SUBCASE("assembled 1D pencil")
  {
    const auto in = fixtures::Interval(32, 0.4, MagneticPotential::Constant1D(1.0));
    const Spectrum sp = SolveEigs(in.form, in.mass, 9);
    const CourantReport rep = VerifyCourant(sp, in.form.K, in.mass.M, 1000, 1);
    CHECK(rep.ok());
    CHECK(rep.levels.size() == 9);
    CHECK(rep.worst_min_margin >= -1e-8);
    CHECK(rep.worst_max_margin >= -1e-8);
  }
}
