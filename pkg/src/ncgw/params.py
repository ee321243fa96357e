"""Physical parameters, derived constants and the Bopp-shift phase-space map.

All quantities are plain floats in natural units. The noncommutative
coordinates (x', y', p_x', p_y') are expressed through canonical commutative
ones (x, y, p_x, p_y) by a constant 4x4 linear map.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

ZETA_WARN = 0.1

# index order used by every 4-vector / 4x4 table in the package
PHASE_LABELS = ("x", "y", "px", "py")


class ParameterError(ValueError):
    """Raised when a parameter set violates a physical invariant."""


class LargeZetaWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Inputs of the model.

    Attributes:
        m: particle mass.
        g: gravitational acceleration (acts along +x in the potential m*g*x).
        hbar: action quantum.
        theta: position-position noncommutativity, [x', y'] = i*theta.
        eta: momentum-momentum noncommutativity, [p_x', p_y'] = i*eta.
        tau: phase parameter of the ladder constant, B1 = |B1| exp(i*omega*tau).
        kappa: width parameter of the Gaussian weight over invariant eigenvalues.
    """

    m: float = 1.0
    g: float = 1.0
    hbar: float = 1.0
    theta: float = 0.05
    eta: float = 0.1
    tau: float = 0.0
    kappa: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ParameterError(f"{f.name} must be a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.hbar / 2)
        validate(self)

    def replace(self, **changes) -> "PhysicalParams":
        d = asdict(self)
        d.update(changes)
        return PhysicalParams(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def validate(p: PhysicalParams) -> None:
    if p.m <= 0:
        raise ParameterError("m must be positive")
    if p.hbar <= 0:
        raise ParameterError("hbar must be positive")
    if p.g < 0:
        raise ParameterError("g must be non-negative")
    if p.theta < 0:
        raise ParameterError("theta must be non-negative")
    if p.eta <= 0:
        raise ParameterError("eta must be positive (eta = 0 has no oscillator frequency)")
    if p.kappa < p.hbar / 2:
        raise ParameterError(
            f"kappa = {p.kappa:g} violates the normalizability bound kappa >= hbar/2 = {p.hbar / 2:g}"
        )


def params_from_json(text: str) -> PhysicalParams:
    """Parse a JSON object with keys m, g, hbar, theta, eta, tau, kappa."""
    data = json.loads(text)
    return params_from_mapping(data)


def params_from_mapping(data: dict) -> PhysicalParams:
    if not isinstance(data, dict):
        raise ParameterError("parameter block must be a JSON object")
    known = {f.name for f in fields(PhysicalParams)}
    unknown = set(data) - known
    if unknown:
        raise ParameterError(f"unknown parameter key(s): {', '.join(sorted(unknown))}")
    return PhysicalParams(**data)


@dataclass(frozen=True)
class DerivedConstants:
    zeta: float
    hbar_eff: float
    omega: float
    hbar_theta_eta: float
    b1_mod: float
    large_zeta: bool


def derive_constants(p: PhysicalParams) -> DerivedConstants:
    """Constants that follow from the inputs.

    ``hbar_theta_eta`` is the printed constant rate of the Lewis-Riesenfeld
    phase, m^2 g theta/2eta + m^2 g theta^2/8hbar^2 - eta/2m hbar, kept as
    printed; the exact phase rate lives in :mod:`ncgw.states`.
    """
    validate(p)
    zeta = p.theta * p.eta / (4 * p.hbar**2)
    large = zeta >= ZETA_WARN
    if large:
        warnings.warn(
            f"zeta = {zeta:g} is not small; the commutative reduction assumes zeta << 1",
            LargeZetaWarning,
            stacklevel=2,
        )
    return DerivedConstants(
        zeta=zeta,
        hbar_eff=(1 + zeta) * p.hbar,
        omega=p.eta / (p.m * p.hbar),
        hbar_theta_eta=(
            p.m**2 * p.g * p.theta / (2 * p.eta)
            + p.m**2 * p.g * p.theta**2 / (8 * p.hbar**2)
            - p.eta / (2 * p.m * p.hbar)
        ),
        b1_mod=math.sqrt(p.eta) / (p.m * p.hbar),
        large_zeta=large,
    )


def bopp_matrix(theta: float, eta: float, hbar: float) -> np.ndarray:
    """4x4 map (x, y, p_x, p_y) -> (x', y', p_x', p_y'); no validation."""
    s = theta / (2 * hbar)
    e = eta / (2 * hbar)
    return np.array(
        [
            [1.0, 0.0, 0.0, -s],
            [0.0, 1.0, s, 0.0],
            [0.0, e, 1.0, 0.0],
            [-e, 0.0, 0.0, 1.0],
        ]
    )


def bopp_map(p: PhysicalParams) -> np.ndarray:
    validate(p)
    return bopp_matrix(p.theta, p.eta, p.hbar)


def canonical_table(hbar: float) -> np.ndarray:
    """Commutator table [u_i, u_j] of the canonical variables (x, y, p_x, p_y)."""
    omega = np.zeros((4, 4), dtype=complex)
    omega[0, 2] = omega[1, 3] = 1j * hbar
    omega[2, 0] = omega[3, 1] = -1j * hbar
    return omega


def induced_commutators(bopp: np.ndarray, hbar: float) -> np.ndarray:
    """[u'_i, u'_j] for u' = M u, i.e. M Omega M^T."""
    bopp = np.asarray(bopp, dtype=float)
    if bopp.shape != (4, 4):
        raise ValueError("Bopp map must be 4x4")
    return bopp @ canonical_table(hbar) @ bopp.T


def expected_nc_table(p: PhysicalParams) -> np.ndarray:
    """Target commutator table of the noncommutative variables."""
    hbar_eff = (1 + p.theta * p.eta / (4 * p.hbar**2)) * p.hbar
    t = np.zeros((4, 4), dtype=complex)
    t[0, 1], t[1, 0] = 1j * p.theta, -1j * p.theta
    t[2, 3], t[3, 2] = 1j * p.eta, -1j * p.eta
    t[0, 2] = t[1, 3] = 1j * hbar_eff
    t[2, 0] = t[3, 1] = -1j * hbar_eff
    return t


def commutator_table_error(p: PhysicalParams) -> float:
    """Max deviation of the induced table from the NC table, relative to its scale."""
    got = induced_commutators(bopp_map(p), p.hbar)
    want = expected_nc_table(p)
    scale = max(np.abs(want).max(), 1e-300)
    return float(np.abs(got - want).max() / scale)
