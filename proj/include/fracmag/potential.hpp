#pragma once

#include <complex>
#include <string>
#include <Eigen/Core>
#include "fracmag/geometry.hpp"

namespace fracmag
{

// Parametric vector potential A : R^N -> R^N, in inverse length units so that
// (x - y) . A is a dimensionless phase.
class MagneticPotential
{
public:
  enum class Family
  {
    Zero,
    Constant,
    Affine,
    Landau
  };

  static MagneticPotential Zero();
  static MagneticPotential Constant(const Point &a);
  static MagneticPotential Constant1D(double a) { return Constant(Point(a, 0.0)); }
  // A(x) = B x + a.
  static MagneticPotential Affine(const Eigen::Matrix2d &B, const Point &a);
  // Symmetric gauge of a uniform field b in the plane: A(x) = (b/2) (-x2, x1).
  static MagneticPotential Landau(double b);

  Family family() const { return family_; }
  const Point &offset() const { return a_; }
  const Eigen::Matrix2d &matrix() const { return B_; }
  double field() const { return b_; }

  // Throws InvalidArgument when the family is not defined in dimension `dim`.
  void ValidateFor(int dim) const;

  // Evaluation in dimension `dim`; components beyond `dim` are zero.
  Point operator()(const Point &x, int dim) const;

  MagneticPotential Negated() const;
  MagneticPotential Plus(const Point &c) const;

  // True when the phase of a point pair depends only on x - y.
  bool TranslationInvariant() const
  {
    return family_ == Family::Zero || family_ == Family::Constant;
  }

  std::string Describe() const;

private:
  Family family_ = Family::Zero;
  Point a_ = Point::Zero();
  Eigen::Matrix2d B_ = Eigen::Matrix2d::Zero();
  double b_ = 0.0;
};

// exp(i (x - y) . A((x + y) / 2)).
std::complex<double> MagneticPhase(const Point &x, const Point &y, const MagneticPotential &A,
                                   int dim);

}  // namespace fracmag
