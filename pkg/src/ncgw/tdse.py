"""Grid propagation of the commutative-frame Hamiltonian.

H_c = (p_x^2 + p_y^2)/2m + (eta/2m hbar)(y p_x - x p_y) + m g (x - theta p_y/2hbar)
      + (eta^2/8m hbar^2)(x^2 + y^2)

Two independent schemes:

* ``split_operator_4way``: Strang splitting into four exactly solvable parts,
  each diagonal in position, momentum, or a mixed (k_x, y) / (x, k_y) basis.
* ``crank_nicolson``: 5-point finite differences with a sparse LU solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .invariant import CoeffSet, closed_form_coeffs
from .params import PhysicalParams, derive_constants
from .states import (
    DomainError,
    GaussianForm,
    GridSpec,
    WaveFunction2D,
    apply_invariant_grid,
    apply_momentum,
    exact_pieces,
    lr_form,
    lr_solution,
    phi_form,
)

SCHEMES = ("split_operator_4way", "crank_nicolson")


class InstabilityError(RuntimeError):
    """Norm drift beyond tolerance during propagation."""


class LRSolutionError(RuntimeError):
    """Propagated state departs from the analytic Lewis-Riesenfeld solution."""


@dataclass(frozen=True)
class HamiltonianTerms:
    """Raw coefficients of H_c; unlike PhysicalParams, eta = 0 is allowed."""

    m: float
    g: float
    hbar: float
    theta: float
    eta: float

    @classmethod
    def from_params(cls, p: PhysicalParams) -> "HamiltonianTerms":
        return cls(p.m, p.g, p.hbar, p.theta, p.eta)


def _terms(p) -> HamiltonianTerms:
    return p if isinstance(p, HamiltonianTerms) else HamiltonianTerms.from_params(p)


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    n_steps: int
    scheme: str = "split_operator_4way"
    boundary_pad: float = 0.2
    check_every: int = 10
    boundary_tol: float = 1e-10
    norm_tol: float = 1e-8
    order: int = 2

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError("order must be 2 (Strang) or 4 (Yoshida composition)")
        if self.order == 4 and self.scheme != "split_operator_4way":
            raise ValueError("order 4 is only available for split_operator_4way")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not (self.dt > 0 and self.n_steps >= 1):
            raise ValueError("dt must be positive and n_steps >= 1")
        if self.boundary_pad < 0.2:
            raise ValueError("boundary_pad must be >= 0.2")

    @classmethod
    def default(
        cls,
        p: PhysicalParams,
        t_end: float | None = None,
        scheme: str = "split_operator_4way",
        per_period: int = 1000,
        order: int = 2,
    ):
        """dt = 2 pi/(per_period omega); n_steps covers t_end (one period if None)."""
        period = 2 * math.pi / derive_constants(p).omega
        t_end = period if t_end is None else t_end
        n = max(1, math.ceil(round(t_end / period * per_period, 9)))
        return cls(dt=t_end / n, n_steps=n, scheme=scheme, order=order)


def stability_number(cfg: PropagatorConfig, p) -> float:
    """dt times the oscillator frequency eta/(m hbar) of H_c; must stay below 0.1.

    Both schemes are unconditionally stable; this bounds the splitting and
    time-discretization error per oscillation.
    """
    h = _terms(p)
    return cfg.dt * h.eta / (h.m * h.hbar)


# ---------------------------------------------------------------------------
# Hamiltonian on the grid


def apply_hamiltonian(w: WaveFunction2D, p) -> np.ndarray:
    """H_c psi (envelope samples), derivatives taken spectrally."""
    h = _terms(p)
    kx, ky = w.grid.wavenumbers()
    a = w.amplitudes
    px, py = apply_momentum(w, h.hbar)
    pxx, _ = apply_momentum(WaveFunction2D(w.grid, px, w.time, w.carrier), h.hbar)
    _, pyy = apply_momentum(WaveFunction2D(w.grid, py, w.time, w.carrier), h.hbar)
    X, Y = w.grid.mesh()
    k = h.eta / (2 * h.m * h.hbar)
    return (
        (pxx + pyy) / (2 * h.m)
        + k * (Y * px - X * py)
        + h.m * h.g * (X * a - h.theta / (2 * h.hbar) * py)
        + h.eta**2 / (8 * h.m * h.hbar**2) * (X**2 + Y**2) * a
    )


def energy(w: WaveFunction2D, p) -> complex:
    hw = apply_hamiltonian(w, p)
    return complex(np.vdot(w.amplitudes, hw) / np.vdot(w.amplitudes, w.amplitudes))


def invariant_expectation(w: WaveFunction2D, coeffs: CoeffSet, t: float) -> complex:
    iw = apply_invariant_grid(w, coeffs, t, tol=1.0)
    return complex(np.vdot(w.amplitudes, iw.amplitudes) / np.vdot(w.amplitudes, w.amplitudes))


# ---------------------------------------------------------------------------
# propagators


class SplitOperator:
    """Strang splitting V/2 Y/2 X/2 T X/2 Y/2 V/2.

    T = p^2/2m (2D FFT), V = m g x + eta^2 r^2/8m hbar^2 (position),
    Y = (eta/2m hbar) y p_x (FFT along x), X = -(eta/2m hbar) x p_y
    - (m g theta/2hbar) p_y (FFT along y).
    """

    def __init__(self, gs: GridSpec, p, dt: float):
        h = _terms(p)
        self.grid, self.dt, self.terms = gs, dt, h
        hb, m = h.hbar, h.m
        X, Y = gs.mesh()
        kx, ky = gs.wavenumbers()
        KX, KY = np.meshgrid(kx, ky)
        k = h.eta / (2 * m * hb)
        v = m * h.g * X + h.eta**2 / (8 * m * hb**2) * (X**2 + Y**2)
        self.half_v = np.exp(-0.5j * dt * v / hb)
        self.full_t = np.exp(-1j * dt * hb * (KX**2 + KY**2) / (2 * m))
        # mixed representations: Y[iy] * kx[ix] and (x[ix], ky[iy])
        self.half_y = np.exp(-0.5j * dt * k * Y * KX)
        self.half_x = np.exp(-0.5j * dt * (-k * X * KY - m * h.g * h.theta / (2 * hb) * KY))

    def step(self, a: np.ndarray) -> np.ndarray:
        a = self.half_v * a
        a = np.fft.ifft(self.half_y * np.fft.fft(a, axis=1), axis=1)
        a = np.fft.ifft(self.half_x * np.fft.fft(a, axis=0), axis=0)
        a = np.fft.ifft2(self.full_t * np.fft.fft2(a))
        a = np.fft.ifft(self.half_x * np.fft.fft(a, axis=0), axis=0)
        a = np.fft.ifft(self.half_y * np.fft.fft(a, axis=1), axis=1)
        return self.half_v * a


class YoshidaSplit:
    """Fourth-order triple-jump composition of three Strang steps."""

    def __init__(self, gs: GridSpec, p, dt: float):
        c = 2 ** (1 / 3)
        w1 = 1 / (2 - c)
        w0 = -c * w1
        self.outer = SplitOperator(gs, p, w1 * dt)
        self.inner = SplitOperator(gs, p, w0 * dt)

    def step(self, a: np.ndarray) -> np.ndarray:
        return self.outer.step(self.inner.step(self.outer.step(a)))


def fd_hamiltonian(gs: GridSpec, p) -> sp.csc_matrix:
    """Sparse H_c with second-order central differences and zero outside the box."""
    h = _terms(p)
    n = gs.n
    hb, m = h.hbar, h.m
    x, y = gs.axes()
    eye = sp.identity(n, format="csr")

    def d1(d):
        return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * d)

    def d2(d):
        return sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / d**2

    # flattening of [iy, ix] arrays: index iy * n + ix, so x acts on the second factor
    Dx, Dy = sp.kron(eye, d1(gs.dx)), sp.kron(d1(gs.dy), eye)
    Dxx, Dyy = sp.kron(eye, d2(gs.dx)), sp.kron(d2(gs.dy), eye)
    X = sp.diags(np.tile(x, n))
    Y = sp.diags(np.repeat(y, n))
    px, py = -1j * hb * Dx, -1j * hb * Dy
    k = h.eta / (2 * m * hb)
    H = (
        -(hb**2) / (2 * m) * (Dxx + Dyy)
        + k * (Y @ px - X @ py)
        + m * h.g * (X - h.theta / (2 * hb) * py)
        + h.eta**2 / (8 * m * hb**2) * (X @ X + Y @ Y)
    )
    return sp.csc_matrix(H)


class CrankNicolson:
    """(1 + i dt H/2hbar) psi' = (1 - i dt H/2hbar) psi with one sparse LU factorization.

    The system matrix is complex symmetric but not Hermitian positive
    definite, so a direct factorization replaces an iterative solve.
    """

    def __init__(self, gs: GridSpec, p, dt: float):
        h = _terms(p)
        self.grid, self.dt = gs, dt
        H = fd_hamiltonian(gs, h)
        eye = sp.identity(gs.n**2, format="csc")
        self.lhs = splu(sp.csc_matrix(eye + 0.5j * dt / h.hbar * H))
        self.rhs = sp.csr_matrix(eye - 0.5j * dt / h.hbar * H)

    def step(self, a: np.ndarray) -> np.ndarray:
        n = self.grid.n
        return self.lhs.solve(self.rhs @ a.ravel()).reshape(n, n)


def make_stepper(cfg: PropagatorConfig, gs: GridSpec, p):
    if cfg.scheme == "split_operator_4way":
        return SplitOperator(gs, p, cfg.dt) if cfg.order == 2 else YoshidaSplit(gs, p, cfg.dt)
    return CrankNicolson(gs, p, cfg.dt)


@dataclass
class PropagationLog:
    norm_drift: float = 0.0
    max_boundary: float = 0.0
    steps: int = 0
    snapshots: list = field(default_factory=list)


def propagate(w: WaveFunction2D, p, cfg: PropagatorConfig, callback=None, log: PropagationLog | None = None) -> WaveFunction2D:
    """Evolve ``w`` by cfg.n_steps steps of size cfg.dt.

    Boundary amplitude and norm are checked every ``cfg.check_every`` steps.
    ``callback(step, wavefunction)`` is called at those checkpoints.

    Raises:
        DomainError: boundary amplitude exceeds cfg.boundary_tol of the peak.
        InstabilityError: norm drift exceeds cfg.norm_tol per 1000 steps.
    """
    gs = w.grid
    s = stability_number(cfg, p)
    if s >= 0.1:
        raise ValueError(f"dt * omega = {s:.3g} must be below 0.1")
    stepper = make_stepper(cfg, gs, p)
    a = w.full().astype(complex)
    n0 = math.sqrt(np.sum(np.abs(a) ** 2) * gs.area)
    log = PropagationLog() if log is None else log
    t = w.time
    for i in range(1, cfg.n_steps + 1):
        a = stepper.step(a)
        t = w.time + i * cfg.dt
        if i % cfg.check_every == 0 or i == cfg.n_steps:
            cur = WaveFunction2D(gs, a, t)
            ratio = cur.boundary_ratio()
            log.max_boundary = max(log.max_boundary, ratio)
            if ratio >= cfg.boundary_tol:
                raise DomainError(f"boundary amplitude ratio {ratio:.2e} at step {i} (t = {t:.6g})")
            nrm = math.sqrt(np.sum(np.abs(a) ** 2) * gs.area)
            drift = abs(nrm / n0 - 1)
            log.norm_drift = max(log.norm_drift, drift)
            if drift > cfg.norm_tol * max(1.0, i / 1000):
                raise InstabilityError(f"norm drift {drift:.2e} after {i} steps")
            if callback is not None:
                callback(i, cur)
    log.steps += cfg.n_steps
    return WaveFunction2D(gs, a, t, (0.0, 0.0), w.label)


# ---------------------------------------------------------------------------
# grids that contain a moving state


def trajectory_grid(forms, hbar: float, pad: float = 12.0, boundary_pad: float = 0.2, n_min: int = 128) -> GridSpec:
    """Square-cell grid containing every Gaussian in ``forms`` with margin."""
    lo = np.full(2, np.inf)
    hi = np.full(2, -np.inf)
    kmax = 0.0
    for f in forms:
        mu = f.mean()
        sig = np.sqrt(np.diag(f.cov()))
        lo = np.minimum(lo, mu - pad * sig)
        hi = np.maximum(hi, mu + pad * sig)
        km = np.abs(f.momentum_mean(hbar) / hbar) + pad * np.sqrt(np.diag(f.momentum_cov(hbar))) / hbar
        kmax = max(kmax, float(km.max()))
    span = (hi - lo).max() * (1 + 2 * boundary_pad)
    mid = (hi + lo) / 2
    n = n_min
    while math.pi * n / span < kmax:
        n *= 2
    return GridSpec(n, mid[0] - span / 2, mid[0] + span / 2, mid[1] - span / 2, mid[1] + span / 2)


def lr_grid(lam: float, t_end: float, p: PhysicalParams, boundary_pad: float = 0.2, n_min: int = 128, samples: int = 65) -> GridSpec:
    forms = [lr_form(lam, t, p) for t in np.linspace(0.0, t_end, samples)]
    return trajectory_grid(forms, p.hbar, boundary_pad=boundary_pad, n_min=n_min)


# ---------------------------------------------------------------------------
# certification of the Lewis-Riesenfeld solutions


@dataclass
class FidelityReport:
    lam: float
    t_end: float
    fidelity: float
    phase_error: float
    numeric_phase_increment: float
    exact_phase_increment: float
    printed_phase_increment: float
    printed_profile_fidelity: float
    norm_drift: float
    grid_n: int
    steps: int
    threshold: float
    ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _profile(form: GaussianForm) -> GaussianForm:
    return GaussianForm(form.M, form.b, 0j)


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def verify_lr_solution(
    lam: float,
    t_end: float,
    p: PhysicalParams,
    cfg: PropagatorConfig | None = None,
    gs: GridSpec | None = None,
    threshold: float = 1e-5,
    raise_on_fail: bool = False,
) -> FidelityReport:
    """Propagate psi_lambda(0) to t_end and compare with the analytic psi_lambda(t_end).

    The global phase is read against the phase-free spatial profile; its
    increment is compared with Re(nu(t_end) - nu(0)) of the exact solution
    and of the printed closed-form phase.
    """
    cfg = PropagatorConfig.default(p, t_end) if cfg is None else cfg
    if abs(cfg.dt * cfg.n_steps - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("cfg.dt * cfg.n_steps must equal t_end")
    gs = lr_grid(lam, t_end, p, cfg.boundary_pad) if gs is None else gs
    psi0 = lr_solution(gs, lam, 0.0, p)
    log = PropagationLog()
    num = propagate(psi0, p, cfg, log=log)
    exact = lr_solution(gs, lam, t_end, p)
    ov = exact.overlap(num) / (exact.norm() * num.norm())
    fid = abs(ov)

    def profile_phase(w, t):
        prof = WaveFunction2D(gs, np.exp(_profile(lr_form(lam, t, p)).log(*gs.mesh())), t)
        return math.atan2(prof.overlap(w).imag, prof.overlap(w).real)

    num_inc = profile_phase(num, t_end) - profile_phase(psi0, 0.0)
    e0, e1 = exact_pieces(p, 0.0), exact_pieces(p, t_end)
    exact_inc = ((e1.gamma0 + lam * e1.gamma1) - (e0.gamma0 + lam * e0.gamma1)).imag
    c = derive_constants(p)
    cf = closed_form_coeffs(p)
    printed = lambda s: c.hbar_theta_eta * s + 0.5j / cf.B1 * lam * np.exp(-1j * c.omega * s)
    printed_inc = complex(printed(t_end) - printed(0.0)).real
    # printed eigenfunction at t_end (no drift factor), phase-free
    pw = WaveFunction2D(gs, np.exp(phi_form(lam, cf, t_end).log(*gs.mesh())), t_end)
    pfid = abs(pw.overlap(num)) / (pw.norm() * num.norm())
    ok = fid >= 1 - threshold
    rep = FidelityReport(
        lam,
        t_end,
        float(fid),
        float(abs(_wrap(math.atan2(ov.imag, ov.real)))),
        float(num_inc),
        float(exact_inc),
        float(printed_inc),
        float(pfid),
        log.norm_drift,
        gs.n,
        cfg.n_steps,
        threshold,
        bool(ok),
    )
    if raise_on_fail and not ok:
        raise LRSolutionError(f"fidelity {fid:.8f} below 1 - {threshold:g}")
    return rep


def random_gaussian_mixture(gs: GridSpec, rng: np.random.Generator, k: int = 3, width: float | None = None) -> WaveFunction2D:
    """Normalized sum of k random complex Gaussians placed well inside ``gs``."""
    X, Y = gs.mesh()
    lx, ly = gs.x_max - gs.x_min, gs.y_max - gs.y_min
    cx, cy = (gs.x_min + gs.x_max) / 2, (gs.y_min + gs.y_max) / 2
    width = min(lx, ly) / 40 if width is None else width
    a = np.zeros(X.shape, dtype=complex)
    for _ in range(k):
        x0 = cx + rng.uniform(-0.08, 0.08) * lx
        y0 = cy + rng.uniform(-0.08, 0.08) * ly
        s = width * rng.uniform(0.8, 1.25)
        kx, ky = rng.normal(0, 0.5 / s, 2)
        amp = rng.normal() + 1j * rng.normal()
        a += amp * np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / (4 * s * s) + 1j * (kx * X + ky * Y))
    return WaveFunction2D(gs, a, 0.0, label="random mixture").normalized()


@dataclass
class InvariantDrift:
    times: np.ndarray
    values: np.ndarray
    drift: float
    energy_drift: float
    norm_drift: float


def invariant_drift(w: WaveFunction2D, p: PhysicalParams, cfg: PropagatorConfig, coeffs: CoeffSet | None = None) -> InvariantDrift:
    """Track <I(t)> and <H_c> along a propagation."""
    coeffs = closed_form_coeffs(p) if coeffs is None else coeffs
    times, vals, ens = [w.time], [invariant_expectation(w, coeffs, w.time)], [energy(w, p)]

    def cb(i, cur):
        times.append(cur.time)
        vals.append(invariant_expectation(cur, coeffs, cur.time))
        ens.append(energy(cur, p))

    log = PropagationLog()
    propagate(w, p, cfg, callback=cb, log=log)
    vals_a, ens_a = np.array(vals), np.array(ens)
    return InvariantDrift(
        np.array(times),
        vals_a,
        float(np.abs(vals_a - vals_a[0]).max() / abs(vals_a[0])),
        float(np.abs(ens_a - ens_a[0]).max() / abs(ens_a[0])),
        log.norm_drift,
    )
