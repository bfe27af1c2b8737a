#pragma once

#include <stdexcept>
#include <string>

namespace fracmag
{

// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error
{
public:
  using Error::Error;
};

class InvalidDomain : public Error
{
public:
  using Error::Error;
};

// A mathematical precondition of the model is violated (N <= 2s, resonance, ...).
class PreconditionViolation : public Error
{
public:
  using Error::Error;
};

// beta_inf lies (numerically) on the spectrum.
class ResonanceError : public PreconditionViolation
{
public:
  using PreconditionViolation::PreconditionViolation;
};

class NumericalConditioning : public Error
{
public:
  using Error::Error;
};

// Requested split H_m + E_{m+1} cuts through a degenerate eigenvalue cluster.
class SplitAmbiguous : public Error
{
public:
  using Error::Error;
};

class ValidationFailed : public Error
{
public:
  using Error::Error;
};

class OracleInconclusive : public Error
{
public:
  using Error::Error;
};

}  // namespace fracmag
