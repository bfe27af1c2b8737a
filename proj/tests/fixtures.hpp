#pragma once

#include <complex>
#include <random>
#include <Eigen/Core>
#include "fracmag/assembly.hpp"
#include "fracmag/geometry.hpp"
#include "fracmag/nonlinear.hpp"
#include "fracmag/spectral.hpp"

namespace fixtures
{

struct Instance
{
  fracmag::Mesh mesh;
  fracmag::MassMatrix mass;
  fracmag::FormMatrix form;
};

inline Instance Interval(int res, double s, const fracmag::MagneticPotential &A)
{
  Instance in;
  in.mesh = fracmag::BuildMesh(fracmag::Domain::Interval(-1.0, 1.0), res);
  in.mass = fracmag::AssembleMass(in.mesh);
  in.form = fracmag::AssembleNonlocalForm(in.mesh, s, A);
  return in;
}

inline Instance Square(int res, double s, const fracmag::MagneticPotential &A)
{
  Instance in;
  in.mesh = fracmag::BuildMesh(fracmag::Domain::Rectangle(0.0, 1.0, 0.0, 1.0), res);
  in.mass = fracmag::AssembleMass(in.mesh);
  in.form = fracmag::AssembleNonlocalForm(in.mesh, s, A);
  return in;
}

inline Eigen::VectorXcd RandomComplex(int d, std::mt19937_64 &rng)
{
  std::normal_distribution<double> n;
  Eigen::VectorXcd u(d);
  for (int i = 0; i < d; ++i)
  {
    u(i) = {n(rng), n(rng)};
  }
  return u;
}

inline double MaxAbs(const Eigen::MatrixXcd &A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace fixtures
