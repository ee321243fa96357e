"""Coefficients of the linear Lewis-Riesenfeld invariant.

The invariant is I(t) = A p_x + B p_y + C x + D y + alpha. Invariance,
dI/dt + [I, H_c]/(i hbar) = 0, is a linear ODE system for v = (A, B, C, D, alpha):

    A'     =  k B - C/m
    B'     = -k A - D/m
    C'     =  q A + k D
    D'     =  q B - k C
    alpha' =  m g A + (m g theta / 2 hbar) D

with k = eta/(2 m hbar) and q = eta^2/(4 m hbar^2). The printed matrix has the
opposite overall sign on the first four rows; it is kept for comparison only.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .params import PhysicalParams, validate
from .report import DiscrepancyReport

COMPONENTS = ("A", "B", "C", "D", "alpha")


def rhs_matrix(p: PhysicalParams, convention: str = "oracle") -> np.ndarray:
    """5x5 generator of the coefficient ODE.

    ``convention="paper"`` returns the matrix exactly as printed (rows for
    A..D with the opposite sign of the derived system).
    """
    validate(p)
    m, g, hb, th, eta = p.m, p.g, p.hbar, p.theta, p.eta
    k = eta / (2 * m * hb)
    q = eta**2 / (4 * m * hb**2)
    if convention == "oracle":
        return np.array(
            [
                [0, k, -1 / m, 0, 0],
                [-k, 0, 0, -1 / m, 0],
                [q, 0, 0, k, 0],
                [0, q, -k, 0, 0],
                [m * g, 0, 0, m * g * th / (2 * hb), 0],
            ],
            dtype=complex,
        )
    if convention == "paper":
        return np.array(
            [
                [0, -k, 1 / m, 0, 0],
                [k, 0, 0, 1 / m, 0],
                [-q, 0, 0, -k, 0],
                [0, -q, k, 0, 0],
                [m * g, 0, 0, m * g * th / (2 * hb), 0],
            ],
            dtype=complex,
        )
    raise ValueError(f"unknown convention {convention!r}")


def ode_rhs(v, p: PhysicalParams, convention: str = "oracle") -> np.ndarray:
    return rhs_matrix(p, convention) @ np.asarray(v, dtype=complex)


@dataclass(frozen=True)
class CoeffSet:
    """Closed-form coefficients as functions of time.

    ``branch=+1`` gives A, B proportional to exp(+i omega t) (the printed
    forms, normalizable eigenfunctions); ``branch=-1`` gives exp(-i omega t).
    ``alpha_mode`` selects the derived ("oracle") or printed ("paper") alpha.
    """

    params: PhysicalParams
    B1: complex
    branch: int = 1
    alpha_mode: str = "oracle"
    provenance: str = "closed_form"
    A0: complex = 0.0
    B0: complex = 0.0
    B2: complex = field(init=False)

    def __post_init__(self):
        # general solution: A = (B1 sin wt - B2 cos wt)/w, B = (B1 cos wt + B2 sin wt)/w
        object.__setattr__(self, "B2", 1j * self.branch * self.B1)

    @property
    def omega(self) -> float:
        return self.params.eta / (self.params.m * self.params.hbar)

    def values(self, t):
        """(A, B, C, D, alpha) at time(s) t."""
        p = self.params
        w = self.omega
        e = np.exp(1j * self.branch * w * np.asarray(t, dtype=float))
        B = self.B1 / w * e
        A = -1j * self.branch * B
        C = -(p.eta / (2 * p.hbar)) * B
        D = (p.eta / (2 * p.hbar)) * A
        zeta = p.theta * p.eta / (4 * p.hbar**2)
        if self.alpha_mode == "oracle":
            pref = p.g * p.m**3 * p.hbar**2 / p.eta**2
        elif self.alpha_mode == "paper":
            pref = p.m**2 * p.hbar**2 / p.eta**2
        elif self.alpha_mode == "zero":
            pref = 0.0
        else:
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        # alpha' = m g (1 + zeta) A integrates to the same form on both branches
        alpha = -(1 + zeta) * pref * self.B1 * e
        return A, B, C, D, alpha

    def vector(self, t: float) -> np.ndarray:
        return np.array([complex(v) for v in self.values(t)])

    def general_ab(self, t):
        """A(t), B(t) from the general two-constant solution with A0, B0 included."""
        p = self.params
        w = self.omega
        s, c = np.sin(w * t), np.cos(w * t)
        A = -self.A0 / (p.m * w) + (self.B1 * s - self.B2 * c) / w
        B = self.B0 / (p.m * w) + (self.B1 * c + self.B2 * s) / w
        return A, B


def b1_constant(p: PhysicalParams, scale: float = 1.0) -> complex:
    """B1 = |B1| exp(i omega tau), |B1| = sqrt(eta)/(m hbar) (times ``scale``)."""
    w = p.eta / (p.m * p.hbar)
    return scale * math.sqrt(p.eta) / (p.m * p.hbar) * cmath.exp(1j * w * p.tau)


def closed_form_coeffs(
    p: PhysicalParams, alpha_mode: str = "oracle", branch: int = 1, b1_scale: float = 1.0
) -> CoeffSet:
    validate(p)
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    return CoeffSet(p, b1_constant(p, b1_scale), branch=branch, alpha_mode=alpha_mode)


@dataclass(frozen=True)
class CoeffTrajectory:
    times: np.ndarray
    values: np.ndarray  # shape (len(times), 5)
    step: float
    convention: str = "oracle"


def integrate_coeffs(
    v0, t_span: tuple[float, float], steps: int, p: PhysicalParams, convention: str = "oracle"
) -> CoeffTrajectory:
    """Classical RK4 on the coefficient system with fixed step.

    Requires at least 100 steps per period 2 pi/omega.
    """
    t0, t1 = map(float, t_span)
    if t1 <= t0:
        raise ValueError("t_span must be increasing")
    omega = p.eta / (p.m * p.hbar)
    periods = (t1 - t0) * omega / (2 * math.pi)
    need = math.ceil(100 * periods)
    if steps < need:
        raise ValueError(f"step too coarse: {steps} steps over {periods:.3g} periods, need at least {need}")
    M = rhs_matrix(p, convention)
    h = (t1 - t0) / steps
    out = np.empty((steps + 1, 5), dtype=complex)
    v = np.asarray(v0, dtype=complex).copy()
    out[0] = v
    for n in range(steps):
        k1 = M @ v
        k2 = M @ (v + 0.5 * h * k1)
        k3 = M @ (v + 0.5 * h * k2)
        k4 = M @ (v + h * k3)
        v = v + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n + 1] = v
    times = t0 + h * np.arange(steps + 1)
    return CoeffTrajectory(times, out, h, convention)


def max_relative_deviation(cf: CoeffSet, traj: CoeffTrajectory) -> dict[str, float]:
    ref = np.stack([np.asarray(c) for c in cf.values(traj.times)], axis=1)
    dev = {}
    for i, name in enumerate(COMPONENTS):
        scale = np.abs(ref[:, i]).max()
        if scale == 0:
            scale = 1.0
        dev[name] = float(np.abs(traj.values[:, i] - ref[:, i]).max() / scale)
    return dev


def cross_check(cf: CoeffSet, traj: CoeffTrajectory, tol: float = 1e-6) -> DiscrepancyReport:
    """Per-component max relative deviation of a trajectory from closed forms."""
    rep = DiscrepancyReport()
    dev = max_relative_deviation(cf, traj)
    ref_end = cf.vector(traj.times[-1])
    for i, name in enumerate(COMPONENTS):
        rep.add(
            quantity=f"coeff.{name}",
            time=float(traj.times[-1]),
            paper_value=complex(ref_end[i]),
            oracle_value=complex(traj.values[-1, i]),
            rel_diff=dev[name],
            verdict="match" if dev[name] <= tol else "mismatch",
            note=f"closed form ({cf.alpha_mode} alpha) vs RK4 ({traj.convention} rhs), max over trajectory",
        )
    return rep
