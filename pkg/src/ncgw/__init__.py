"""Charged particle in a uniform magnetic field and gravity on a noncommutative plane.

Modules:
    params       parameters, derived constants, Bopp shift
    opalg        truncated-Fock operator algebra and the invariant operator
    invariant    time-dependent invariant coefficients (closed form and ODE)
    states       eigenfunctions, exact solutions, wave packets on grids
    observables  expectation values, dispersions, uncertainty product
    tdse         grid propagation of the Schroedinger equation
    checks       oracle checks and printed-formula comparisons
    cli          ``ncgw`` command
"""

from .params import DerivedConstants, ParameterError, PhysicalParams, derive_constants

__all__ = ["DerivedConstants", "ParameterError", "PhysicalParams", "derive_constants"]
__version__ = "0.1.0"
