"""Fractional magnetic Laplacian: assembly, spectra and critical points."""

from ._core import (
    CriticalPoint,
    Domain,
    Error,
    InvalidArgument,
    InvalidDomain,
    KernelQuadratureConfig,
    MagneticPotential,
    Mesh,
    NoConvergence,
    Nonlinearity,
    NumericalConditioning,
    OracleInconclusive,
    PreconditionViolation,
    Problem,
    ResonanceError,
    SplitAmbiguous,
    ValidationFailed,
    assemble_local,
    assemble_mass,
    assemble_nonlocal,
    assemble_tail,
    build_mesh,
    eig_reference,
    kernel_constant,
    magnetic_phase,
    minimize,
    rayleigh_quotient,
    solve_eigs,
    solve_multistart,
    tail_weight,
)

__all__ = [name for name in dir() if not name.startswith("_")]
