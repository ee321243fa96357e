"""Invariant eigenfunctions, the Lewis-Riesenfeld phase and the weighted packet.

Every state here is a complex Gaussian exp(-r.M.r/2 + b.r + c) in r = (x, y).
:class:`GaussianForm` carries that exponent; grids are sized from its exact
moments and the states are sampled on a uniform periodic grid.

Exact time-dependent solutions
------------------------------
With the derived coefficients, log psi_lambda(x, y, t) is

    -q |z|^2 + (u0 + lambda u1(t)) zbar + beta(t) z + gamma0(t) + lambda gamma1(t)

where z = x + i y, q = eta/4hbar^2, u0 = -(1+zeta) m^2 g/(2 eta),
u1 = -omega e^{-i omega t}/(2 hbar B1), and gamma1(0) = -1/(2 B1) so that each
psi_lambda starts with the same phase as the printed phase solution. The zbar part is the printed
eigenfunction; the holomorphic factor exp(beta z) (beta = -i g m (1-zeta) t/2hbar)
lies in the kernel of A d_x + B d_y = 2A d_zbar, so it keeps the invariant
eigenvalue while removing the gravitational drift residual that the printed
form leaves in the Schroedinger equation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import cumulative_trapezoid

from .invariant import CoeffSet, closed_form_coeffs
from .params import PhysicalParams, derive_constants, validate

DEFAULT_PAD = 12.0
MAX_N = 4096


class DomainError(RuntimeError):
    """The grid does not contain the state (boundary amplitude too large)."""


class NormalizationError(ValueError):
    """A Gaussian exponent has no normalizable real part."""


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Gaussian exponents


@dataclass(frozen=True)
class GaussianForm:
    """log psi = -r.M.r/2 + b.r + c with complex symmetric M."""

    M: np.ndarray
    b: np.ndarray
    c: complex = 0j

    @classmethod
    def from_z(cls, q, s, u, v, c=0j) -> "GaussianForm":
        """Build from -q|z|^2 + s zbar^2 + u zbar + v z + c."""
        M = np.array([[2 * q - 2 * s, 2j * s], [2j * s, 2 * q + 2 * s]], dtype=complex)
        b = np.array([u + v, -1j * u + 1j * v], dtype=complex)
        return cls(M, b, complex(c))

    def log(self, X, Y):
        M, b = self.M, self.b
        return -0.5 * (M[0, 0] * X * X + 2 * M[0, 1] * X * Y + M[1, 1] * Y * Y) + b[0] * X + b[1] * Y + self.c

    @property
    def R(self) -> np.ndarray:
        return self.M.real

    def normalizable(self) -> bool:
        R = self.R
        return bool(R[0, 0] > 0 and np.linalg.det(R) > 1e-14 * max(abs(R).max(), 1e-300) ** 2)

    def require_normalizable(self, what: str = "state") -> None:
        if not self.normalizable():
            raise NormalizationError(
                f"{what} is not normalizable: real part of the quadratic form has eigenvalues "
                f"{np.linalg.eigvalsh(self.R)}"
            )

    def mean(self) -> np.ndarray:
        return np.linalg.solve(self.R, self.b.real)

    def cov(self) -> np.ndarray:
        return np.linalg.inv(2 * self.R)

    def momentum_mean(self, hbar: float) -> np.ndarray:
        return hbar * (self.b - self.M @ self.mean()).imag

    def momentum_cov(self, hbar: float) -> np.ndarray:
        I = self.M.imag
        return hbar**2 * (self.R / 2 + I @ self.cov() @ I)

    def log_norm(self) -> float:
        """log of the L2 norm squared over the plane."""
        R = self.R
        br = self.b.real
        return float(
            2 * self.c.real + math.log(math.pi) - 0.5 * math.log(np.linalg.det(R)) + br @ np.linalg.solve(R, br)
        )


# ---------------------------------------------------------------------------
# grids and sampled states


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid; x_max and y_max are excluded end points."""

    n: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.n < 64 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 64, got {self.n}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty grid domain")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.n

    @property
    def spacing(self) -> tuple[float, float]:
        return self.dx, self.dy

    @property
    def area(self) -> float:
        return self.dx * self.dy

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.x_min + self.dx * np.arange(self.n),
            self.y_min + self.dy * np.arange(self.n),
        )

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """X, Y of shape (n, n), indexed [iy, ix] (x fastest)."""
        return np.meshgrid(*self.axes())

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            2 * np.pi * np.fft.fftfreq(self.n, self.dx),
            2 * np.pi * np.fft.fftfreq(self.n, self.dy),
        )

    def center_index(self) -> tuple[int, int]:
        return self.n // 2, self.n // 2

    def to_dict(self) -> dict:
        return {"n": self.n, "x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max}


def _next_pow2(k: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(k, 1))))


def auto_grid(form: GaussianForm, hbar: float, n_min: int = 256, pad: float = DEFAULT_PAD):
    """Grid covering ``pad`` standard deviations of the state, and its carrier.

    The carrier is the mean wavevector; sampling the envelope psi exp(-i k0.r)
    keeps the spectral resolution independent of how fast the packet moves.
    """
    form.require_normalizable()
    mu = form.mean()
    sig = np.sqrt(np.diag(form.cov()))
    k0 = form.momentum_mean(hbar) / hbar
    sig_k = np.sqrt(np.diag(form.momentum_cov(hbar))) / hbar
    half = pad * sig
    span = 2 * half
    # Nyquist pi/d must exceed pad * sig_k on both axes
    need = span * pad * sig_k / math.pi
    n = max(n_min, _next_pow2(need.max()))
    if n > MAX_N:
        raise DomainError(f"state needs a {n}-point grid (max {MAX_N})")
    gs = GridSpec(n, mu[0] - half[0], mu[0] + half[0], mu[1] - half[1], mu[1] + half[1])
    return gs, (float(k0[0]), float(k0[1]))


@dataclass
class WaveFunction2D:
    """Samples of psi on ``grid``; ``amplitudes`` hold the envelope.

    psi(r) = amplitudes(r) * exp(i carrier . r). amplitudes are indexed
    [iy, ix] (row-major, x fastest).
    """

    grid: GridSpec
    amplitudes: np.ndarray
    time: float = 0.0
    carrier: tuple[float, float] = (0.0, 0.0)
    label: str = ""

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.area))

    def normalized(self) -> "WaveFunction2D":
        return WaveFunction2D(self.grid, self.amplitudes / self.norm(), self.time, self.carrier, self.label)

    def full(self) -> np.ndarray:
        if self.carrier == (0.0, 0.0):
            return self.amplitudes
        X, Y = self.grid.mesh()
        return self.amplitudes * np.exp(1j * (self.carrier[0] * X + self.carrier[1] * Y))

    def boundary_ratio(self) -> float:
        a = np.abs(self.amplitudes)
        edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
        return float(edge / a.max())

    def require_contained(self, tol: float = 1e-12) -> None:
        r = self.boundary_ratio()
        if r >= tol:
            raise DomainError(f"domain too small: boundary amplitude ratio {r:.2e} >= {tol:.0e}")

    def overlap(self, other: "WaveFunction2D") -> complex:
        """<self|other> on a shared grid."""
        if self.grid != other.grid:
            raise ValueError("overlap needs identical grids")
        return complex(np.sum(np.conj(self.full()) * other.full()) * self.grid.area)


def sample(form: GaussianForm, gs: GridSpec, carrier=(0.0, 0.0), t: float = 0.0, label: str = "") -> WaveFunction2D:
    """Sample exp(form) on a grid, normalized, with no overflow for large exponents."""
    X, Y = gs.mesh()
    lg = form.log(X, Y) - 1j * (carrier[0] * X + carrier[1] * Y)
    lg = lg - lg.real.max()
    return WaveFunction2D(gs, np.exp(lg), t, tuple(map(float, carrier)), label).normalized()


def fix_phase_at_center(w: WaveFunction2D) -> WaveFunction2D:
    iy, ix = w.grid.center_index()
    full_c = w.full()[iy, ix]
    ph = full_c / abs(full_c)
    return WaveFunction2D(w.grid, w.amplitudes / ph, w.time, w.carrier, w.label)


# ---------------------------------------------------------------------------
# invariant eigenfunctions


def phi_form(lam: float, coeffs: CoeffSet, t: float) -> GaussianForm:
    """Exponent of the printed eigenfunction with Phi_0 = 1."""
    A, B, C, D, al = (complex(v) for v in coeffs.values(t))
    hb = coeffs.params.hbar
    M = np.array([[1j * C / (hb * A), 0], [0, 1j * D / (hb * B)]], dtype=complex)
    b = np.array([1j * (lam - al) / (2 * hb * A), 1j * (lam - al) / (2 * hb * B)], dtype=complex)
    return GaussianForm(M, b, 0j)


def phi_lambda(
    gs: GridSpec | None, lam: float, coeffs: CoeffSet, t: float, p: PhysicalParams | None = None, n_min: int = 256
) -> WaveFunction2D:
    """Normalized eigenfunction of I(t) for eigenvalue ``lam``, phase zero at the grid center."""
    if p is not None and p != coeffs.params:
        raise ValueError("coefficients were built for different parameters")
    form = phi_form(lam, coeffs, t)
    M = form.M
    for ch, ratio, val in (("C/A", "x^2", M[0, 0]), ("D/B", "y^2", M[1, 1])):
        if val.real <= 0:
            raise NormalizationError(
                f"eigenfunction not normalizable: {ratio} exponent coefficient from {ch} has real part "
                f"{-val.real / 2:.3g} >= 0"
            )
    carrier = (0.0, 0.0)
    if gs is None:
        gs, carrier = auto_grid(form, coeffs.params.hbar, n_min)
    return fix_phase_at_center(sample(form, gs, carrier, t, f"phi[{lam:g}]"))


def _spectral_d(a: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    shape = [1, 1]
    shape[axis] = -1
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(a, axis=axis), axis=axis)


def apply_momentum(w: WaveFunction2D, hbar: float) -> tuple[np.ndarray, np.ndarray]:
    """Envelope samples of p_x psi and p_y psi (same carrier as w)."""
    kx, ky = w.grid.wavenumbers()
    a = w.amplitudes
    px = -1j * hbar * _spectral_d(a, kx, 1) + hbar * w.carrier[0] * a
    py = -1j * hbar * _spectral_d(a, ky, 0) + hbar * w.carrier[1] * a
    return px, py


def apply_invariant_grid(
    w: WaveFunction2D, coeffs: CoeffSet, t: float, p: PhysicalParams | None = None, tol: float = 1e-12
) -> WaveFunction2D:
    """I(t) psi with p = -i hbar grad taken spectrally."""
    w.require_contained(tol)
    hb = coeffs.params.hbar
    A, B, C, D, al = (complex(v) for v in coeffs.values(t))
    px, py = apply_momentum(w, hb)
    X, Y = w.grid.mesh()
    out = A * px + B * py + (C * X + D * Y + al) * w.amplitudes
    return WaveFunction2D(w.grid, out, w.time, w.carrier, "I psi")


def apply_linear(w: WaveFunction2D, A, B, C, D, al, hbar: float) -> WaveFunction2D:
    """A p_x + B p_y + C x + D y + al applied to w (raw coefficients)."""
    px, py = apply_momentum(w, hbar)
    X, Y = w.grid.mesh()
    return WaveFunction2D(w.grid, A * px + B * py + (C * X + D * Y + al) * w.amplitudes, w.time, w.carrier)


def eigen_residual(w: WaveFunction2D, lam: float, coeffs: CoeffSet, t: float) -> float:
    iw = apply_invariant_grid(w, coeffs, t)
    return float(np.linalg.norm(iw.amplitudes - lam * w.amplitudes) / np.linalg.norm(w.amplitudes))


# ---------------------------------------------------------------------------
# exact solutions and the phase


@dataclass(frozen=True)
class ExactPieces:
    q: float
    u0: complex
    u1: complex
    beta: complex
    gamma0: complex
    gamma1: complex


def exact_pieces(p: PhysicalParams, t: float, B1: complex | None = None) -> ExactPieces:
    """Coefficients of log psi_lambda for the exact solution (see module docstring)."""
    c = derive_constants(p)
    m, g, hb, th, eta, w, zeta = p.m, p.g, p.hbar, p.theta, p.eta, c.omega, c.zeta
    if B1 is None:
        B1 = closed_form_coeffs(p).B1
    e = np.exp(-1j * w * t)
    k0 = -eta / (2 * m) + (1 + zeta) * g**2 * m**3 * th / (4 * eta)
    gamma0 = 1j * k0 * t / hb - g**2 * m**2 * (1 - zeta) ** 2 * t**2 / (4 * eta)
    # lambda-dependent phase at t = 0 taken from the printed phase solution
    gamma1 = g / (2 * B1 * eta * hb) * (-1j * eta * (1 - zeta) * t * e + hb * m * (1 + zeta) * (1 - e)) - 1 / (2 * B1)
    return ExactPieces(
        q=eta / (4 * hb**2),
        u0=-(1 + zeta) * m**2 * g / (2 * eta),
        u1=-w * e / (2 * hb * B1),
        beta=-1j * g * m * (1 - zeta) * t / (2 * hb),
        gamma0=complex(gamma0),
        gamma1=complex(gamma1),
    )


def exact_rate(p: PhysicalParams, t, lam: float, B1: complex | None = None):
    """hbar * d(nu)/dt along the exact solution (nu = -i gamma)."""
    c = derive_constants(p)
    m, g, hb, th, eta, w, zeta = p.m, p.g, p.hbar, p.theta, p.eta, c.omega, c.zeta
    if B1 is None:
        B1 = closed_form_coeffs(p).B1
    t = np.asarray(t, dtype=float)
    k0 = -eta / (2 * m) + (1 + zeta) * g**2 * m**3 * th / (4 * eta)
    # d/dt of gamma0 and gamma1 times -i hbar
    dg0 = 1j * k0 / hb - g**2 * m**2 * (1 - zeta) ** 2 * t / (2 * eta)
    e = np.exp(-1j * w * t)
    dg1 = g / (2 * B1 * eta * hb) * (
        -1j * eta * (1 - zeta) * e - w * eta * (1 - zeta) * t * e + 1j * w * hb * m * (1 + zeta) * e
    )
    return -1j * hb * (dg0 + lam * dg1)


def lr_form(lam: float, t: float, p: PhysicalParams, drift_corrected: bool = True) -> GaussianForm:
    """Exponent of the exact solution psi_lambda(t) (unnormalized, Phi_0 = 1)."""
    e = exact_pieces(p, t)
    beta = e.beta if drift_corrected else 0.0
    return GaussianForm.from_z(e.q, 0.0, e.u0 + lam * e.u1, beta, e.gamma0 + lam * e.gamma1)


def lr_solution(gs: GridSpec, lam: float, t: float, p: PhysicalParams, drift_corrected: bool = True) -> WaveFunction2D:
    """psi_lambda(t) on ``gs``, scaled by the analytic norm at t = 0 (phase kept)."""
    form = lr_form(lam, t, p, drift_corrected)
    ref = lr_form(lam, 0.0, p, drift_corrected).log_norm()
    X, Y = gs.mesh()
    amp = np.exp(form.log(X, Y) - ref / 2)
    return WaveFunction2D(gs, amp, t, (0.0, 0.0), f"psi[{lam:g}]")


@dataclass
class PhaseTrace:
    """nu_lambda(t) - nu_lambda(t0) by several routes (complex valued)."""

    lam: float
    times: np.ndarray
    printed_equation: np.ndarray
    printed_closed_form: np.ndarray
    exact: np.ndarray
    exact_quadrature: np.ndarray


def printed_nu_rate(lam: float, coeffs: CoeffSet, t):
    """Right side of the printed phase equation divided by hbar, with Phi_0 constant."""
    p = coeffs.params
    hb, m = p.hbar, p.m
    A, B, C, D, al = coeffs.values(t)
    rate = (
        -(1j * hb / (2 * m)) * (C / A + D / B)
        + (m * p.g * p.theta / (2 * hb)) * (lam - al) / B
        - (lam - al) ** 2 / (8 * m) * (1 / A**2 + 1 / B**2)
    )
    return rate / hb


def printed_nu(lam: float, t, p: PhysicalParams, B1: complex):
    """Printed closed-form phase with ln nu_1 = 0 and Phi_0 = 1."""
    c = derive_constants(p)
    return c.hbar_theta_eta * np.asarray(t) + 0.5j / B1 * lam * np.exp(-1j * c.omega * np.asarray(t))


def nu_phase(lam: float, t_span, coeffs: CoeffSet, p: PhysicalParams | None = None, samples: int = 20001) -> PhaseTrace:
    p = coeffs.params if p is None else p
    t = np.linspace(float(t_span[0]), float(t_span[1]), int(samples))
    printed_eq = cumulative_trapezoid(printed_nu_rate(lam, coeffs, t), t, initial=0.0)
    closed = printed_nu(lam, t, p, coeffs.B1)
    closed = closed - closed[0]
    g0 = exact_pieces(p, t[0], coeffs.B1)
    g_all = np.array([complex(v) for v in _exact_gamma(p, t, lam, coeffs.B1)])
    exact = -1j * (g_all - (g0.gamma0 + lam * g0.gamma1))
    quad = cumulative_trapezoid(exact_rate(p, t, lam, coeffs.B1) / p.hbar, t, initial=0.0)
    return PhaseTrace(lam, t, printed_eq, closed, exact, quad)


def _exact_gamma(p: PhysicalParams, t, lam, B1):
    for s in np.atleast_1d(t):
        e = exact_pieces(p, float(s), B1)
        yield e.gamma0 + lam * e.gamma1


# ---------------------------------------------------------------------------
# weighted packet


def weight(lam, kappa: float, hbar: float):
    return np.exp(-kappa * np.asarray(lam) ** 2 / (2 * hbar))


def packet_form(t: float, p: PhysicalParams, kappa: float | None = None) -> GaussianForm:
    """Exponent of the lambda-integrated packet (completed square; used for sizing)."""
    kappa = p.kappa if kappa is None else kappa
    e = exact_pieces(p, t)
    h = p.hbar / (2 * kappa)
    return GaussianForm.from_z(
        e.q,
        h * e.u1**2,
        e.u0 + 2 * h * e.u1 * e.gamma1,
        e.beta,
        e.gamma0 + h * e.gamma1**2 + 0.5 * math.log(2 * math.pi * p.hbar / kappa),
    )


def printed_packet_form(t: float, p: PhysicalParams, kappa: float | None = None) -> GaussianForm:
    """The printed closed form of the packet, with nu_0 dropped."""
    kappa = p.kappa if kappa is None else kappa
    c = derive_constants(p)
    B1 = closed_form_coeffs(p).B1
    hb, w = p.hbar, c.omega
    e2 = np.exp(-2j * w * t)
    s = w**2 * e2 / (8 * hb * B1**2 * kappa)
    u = -(1 + c.zeta) / (2 * hb * w) - 2j * hb * w * e2 / (8 * hb * B1**2 * kappa)
    const = (1j * hb) ** 2 * e2 / (8 * hb * B1**2 * kappa) + 1j * c.hbar_theta_eta * t
    return GaussianForm.from_z(p.eta / (4 * hb**2), s, u, 0.0, const)


def quadrature_center(t: float, p: PhysicalParams, kappa: float) -> np.ndarray:
    """Point where the lambda integrand is least oscillatory: the packet mean.

    Falls back to the mean of psi_0 when the packet is not normalizable.
    """
    form = packet_form(t, p, kappa)
    if not form.normalizable():
        form = lr_form(0.0, t, p)
    return form.mean()


def _packet_log_and_sum(X, Y, t, p, kappa, nodes, center=None):
    """log-prefactor and Gauss-Hermite sum of the lambda integral at each point.

    lambda = s sqrt(2 hbar/kappa) turns the weight into exp(-s^2 + b s). The
    nodes are shifted to s0 = (Re b + i Im b_c)/2, with b_c the value of b at
    ``center``; the integrand is entire in s, so the shift is exact and only
    the residual factor exp(i (Im b - Im b_c) u) is left to the quadrature.
    """
    e = exact_pieces(p, t)
    zb = X - 1j * Y
    z = X + 1j * Y
    base = -e.q * (X * X + Y * Y) + e.u0 * zb + e.beta * z + e.gamma0
    scale = math.sqrt(2 * p.hbar / kappa)
    bs = scale * (e.u1 * zb + e.gamma1)
    if center is None:
        center = quadrature_center(t, p, kappa)
    im_c = (scale * (e.u1 * (center[0] - 1j * center[1]) + e.gamma1)).imag
    s0 = (bs.real + 1j * im_c) / 2
    logpre = base + bs * s0 - s0 * s0 + math.log(scale)
    u, wts = hermgauss(nodes)
    phi = bs.imag - im_c
    acc = np.zeros(X.shape, dtype=complex)
    for uj, wj in zip(u, wts):
        acc += wj * np.exp(1j * phi * uj)
    return logpre, acc


def psi_packet(
    gs: GridSpec | None,
    t: float,
    p: PhysicalParams,
    mode: str = "lambda_quadrature",
    nodes: int = 64,
    check_convergence: bool = True,
    kappa: float | None = None,
    n_min: int = 256,
    pad: float = DEFAULT_PAD,
) -> WaveFunction2D:
    """Normalized packet Psi(x, y, t).

    ``closed_form`` samples the printed expression; ``lambda_quadrature``
    integrates exact solutions psi_lambda against the Gaussian weight with
    Gauss-Hermite nodes (the reference route).
    """
    validate(p)
    kappa = p.kappa if kappa is None else kappa
    if nodes < 64:
        raise ValueError("use at least 64 quadrature nodes")
    if mode == "closed_form":
        form = printed_packet_form(t, p, kappa)
        carrier = (0.0, 0.0)
        if gs is None:
            gs, carrier = auto_grid(form, p.hbar, n_min, pad)
        return sample(form, gs, carrier, t, "Psi closed form")
    if mode != "lambda_quadrature":
        raise ValueError(f"unknown mode {mode!r}")
    carrier = (0.0, 0.0)
    if gs is None:
        gs, carrier = auto_grid(packet_form(t, p, kappa), p.hbar, n_min, pad)
    X, Y = gs.mesh()
    logpre, acc = _packet_log_and_sum(X, Y, t, p, kappa, nodes)
    logpre = logpre - 1j * (carrier[0] * X + carrier[1] * Y)
    logpre = logpre - logpre.real.max()
    w = WaveFunction2D(gs, np.exp(logpre) * acc, t, carrier, "Psi quadrature").normalized()
    if check_convergence:
        _, acc2 = _packet_log_and_sum(X, Y, t, p, kappa, 2 * nodes)
        w2 = WaveFunction2D(gs, np.exp(logpre) * acc2, t, carrier).normalized()
        diff = np.linalg.norm(w.amplitudes - w2.amplitudes) * math.sqrt(gs.area)
        if diff > 1e-8:
            raise QuadratureError(f"lambda quadrature not converged: node doubling changed Psi by {diff:.2e}")
    return w


def packet_log_norm(t: float, p: PhysicalParams, kappa: float, center, half_width: float, spacing: float, nodes: int = 64) -> float:
    """log of the grid norm of the unnormalized packet on a square window.

    The window is centered on ``center`` with the given half width and fixed
    spacing, so windows of different sizes share sample points and absolute
    scale.
    """
    k = int(round(half_width / spacing))
    ax = spacing * np.arange(-k, k)
    X, Y = np.meshgrid(center[0] + ax, center[1] + ax)
    logpre, acc = _packet_log_and_sum(X, Y, t, p, kappa, nodes)
    val = 2 * logpre.real + np.log(np.abs(acc) ** 2 + 1e-320)
    top = val.max()
    return float(top + np.log(np.sum(np.exp(val - top)) * spacing**2))


@dataclass
class NormScan:
    """Grid norms of the packet on growing square windows."""

    kappa: float
    half_widths: np.ndarray
    log_norms: np.ndarray
    tol: float

    @property
    def changes(self) -> np.ndarray:
        return np.diff(self.log_norms)

    @property
    def converged(self) -> bool:
        """Last doubling of the window changes the norm by less than ``tol`` (relative)."""
        return bool(abs(self.changes[-1]) < self.tol)

    @property
    def diverging(self) -> bool:
        """Each doubling keeps adding at least a factor 1 + tol to the norm."""
        return bool(np.all(self.changes > self.tol))


def kappa_norm_scan(
    p: PhysicalParams,
    kappa: float,
    t: float = 0.0,
    base_half_width: float | None = None,
    doublings: int = 4,
    points: int = 64,
    tol: float = 1e-8,
    nodes: int = 64,
) -> NormScan:
    """Unnormalized grid norm of Psi on windows of half width w0 * 2^j.

    The spacing is fixed by the smallest window, so all windows sample the
    same lattice and share the absolute scale. ``kappa`` may violate the
    parameter bound; the packet is built from psi_lambda directly.
    """
    center = lr_form(0.0, t, p).mean()
    if base_half_width is None:
        base_half_width = 8.0 * math.sqrt(2 * p.hbar**2 / p.eta)
    spacing = 2 * base_half_width / points
    hw = base_half_width * 2.0 ** np.arange(doublings + 1)
    logs = np.array([packet_log_norm(t, p, kappa, center, h, spacing, nodes) for h in hw])
    return NormScan(kappa, hw, logs, tol)


def density(w: WaveFunction2D) -> np.ndarray:
    return np.abs(w.amplitudes) ** 2


def integrate_density(w: WaveFunction2D) -> float:
    """2D trapezoid rule of |psi|^2 on the periodic grid."""
    return float(np.sum(density(w)) * w.grid.area)


# ---------------------------------------------------------------------------
# binary dumps


def write_dump(w: WaveFunction2D, path) -> tuple[Path, Path]:
    """Write psi as little-endian float64 (Re, Im) pairs plus a JSON sidecar."""
    path = Path(path)
    data = np.ascontiguousarray(w.full(), dtype="<c16")
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data.tobytes(order="C"))
    tmp.replace(path)
    meta = dict(w.grid.to_dict(), time=w.time)
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(meta, sort_keys=True))
    return path, side


def read_dump(path) -> WaveFunction2D:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    n = meta["n"]
    gs = GridSpec(n, meta["x_min"], meta["x_max"], meta["y_min"], meta["y_max"])
    amp = np.frombuffer(path.read_bytes(), dtype="<c16").reshape(n, n).astype(complex)
    return WaveFunction2D(gs, amp, meta["time"])
