#include "fracmag/potential.hpp"

#include <cmath>
#include <sstream>
#include "fracmag/errors.hpp"

namespace fracmag
{

MagneticPotential MagneticPotential::Zero()
{
  return {};
}

MagneticPotential MagneticPotential::Constant(const Point &a)
{
  MagneticPotential p;
  p.family_ = Family::Constant;
  p.a_ = a;
  return p;
}

MagneticPotential MagneticPotential::Affine(const Eigen::Matrix2d &B, const Point &a)
{
  MagneticPotential p;
  p.family_ = Family::Affine;
  p.B_ = B;
  p.a_ = a;
  return p;
}

MagneticPotential MagneticPotential::Landau(double b)
{
  MagneticPotential p;
  p.family_ = Family::Landau;
  p.b_ = b;
  return p;
}

void MagneticPotential::ValidateFor(int dim) const
{
  if (family_ == Family::Landau && dim != 2)
  {
    throw InvalidArgument("landau potential is only defined for N = 2");
  }
  if (!a_.allFinite() || !B_.allFinite() || !std::isfinite(b_))
  {
    throw InvalidArgument("magnetic potential parameters must be finite");
  }
}

Point MagneticPotential::operator()(const Point &x, int dim) const
{
  Point A;
  switch (family_)
  {
    case Family::Zero:
      return Point::Zero();
    case Family::Constant:
      A = a_;
      break;
    case Family::Affine:
      A = B_ * x + a_;
      break;
    case Family::Landau:
      return Point(-0.5 * b_ * x.y(), 0.5 * b_ * x.x());
  }
  if (dim == 1)
  {
    A.y() = 0.0;
    if (family_ == Family::Affine)
    {
      A.x() = B_(0, 0) * x.x() + a_.x();
    }
  }
  return A;
}

MagneticPotential MagneticPotential::Negated() const
{
  MagneticPotential p = *this;
  p.a_ = -a_;
  p.B_ = -B_;
  p.b_ = -b_;
  return p;
}

MagneticPotential MagneticPotential::Plus(const Point &c) const
{
  switch (family_)
  {
    case Family::Zero:
      return Constant(c);
    case Family::Constant:
      return Constant(a_ + c);
    case Family::Affine:
      return Affine(B_, a_ + c);
    case Family::Landau:
    {
      Eigen::Matrix2d B;
      B << 0.0, -0.5 * b_, 0.5 * b_, 0.0;
      return Affine(B, c);
    }
  }
  return *this;
}

std::string MagneticPotential::Describe() const
{
  std::ostringstream os;
  switch (family_)
  {
    case Family::Zero:
      os << "zero";
      break;
    case Family::Constant:
      os << "constant(" << a_.x() << "," << a_.y() << ")";
      break;
    case Family::Affine:
      os << "affine(B=[" << B_(0, 0) << "," << B_(0, 1) << ";" << B_(1, 0) << "," << B_(1, 1)
         << "],a=(" << a_.x() << "," << a_.y() << "))";
      break;
    case Family::Landau:
      os << "landau(" << b_ << ")";
      break;
  }
  return os.str();
}

std::complex<double> MagneticPhase(const Point &x, const Point &y, const MagneticPotential &A,
                                   int dim)
{
  if (A.family() == MagneticPotential::Family::Zero)
  {
    return {1.0, 0.0};
  }
  const Point mid = 0.5 * (x + y);
  const Point Am = A(mid, dim);
  double theta = (x.x() - y.x()) * Am.x();
  if (dim == 2)
  {
    theta += (x.y() - y.y()) * Am.y();
  }
  return {std::cos(theta), std::sin(theta)};
}

}  // namespace fracmag
