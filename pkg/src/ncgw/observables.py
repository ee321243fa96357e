"""Expectation values and uncertainty products, printed formulas vs grid quadrature.

The printed route evaluates the closed-form auxiliary constants and moment
formulas as written (complex values are kept, not coerced). The oracle route
measures moments of a sampled wavefunction: positions by quadrature on the
grid, momenta spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .params import PhysicalParams, derive_constants, validate
from .report import DiscrepancyReport
from .states import WaveFunction2D, packet_form, psi_packet

MOMENT_KEYS = ("x", "y", "px", "py")
SECOND_KEYS = ("x2", "y2", "px2", "py2", "xy")


class DegenerateError(ValueError):
    """Printed auxiliary constants describe a degenerate Gaussian."""


@dataclass(frozen=True)
class AuxConstants:
    t: float
    a: complex
    b: complex
    c: complex
    d: complex
    h: complex
    k: complex
    beta0: float
    beta1: float
    gamma0: float
    gamma1: float
    delta0: float
    delta1: float
    nu0_mod: float

    @property
    def a0(self) -> float:
        return self.a.real

    @property
    def b0(self) -> float:
        return self.b.real

    @property
    def c0(self) -> float:
        return self.c.real

    @property
    def d0(self) -> float:
        return self.d.real

    @property
    def h0(self) -> float:
        return self.h.real

    @property
    def k0(self) -> float:
        return self.k.real


def raw_aux(t: float, p: PhysicalParams) -> dict[str, complex]:
    """The printed a, b, c, d, h, k without any degeneracy check."""
    c = derive_constants(p)
    hb, m, eta, w, tau = p.hbar, p.m, p.eta, c.omega, p.tau
    e_tau = np.exp(-2j * w * tau)
    e_t = np.exp(-2j * w * (t + tau))
    return {
        "a": eta / (4 * hb**2) * (1 - e_tau),
        "b": eta / (4 * hb**2) * (1 + e_tau),
        "c": m / (2 * eta) * (1 + c.zeta) + 0.5j * m * e_t,
        "d": -0.5j * m / eta * (1 + c.zeta) + m / 2 * e_t,
        "h": 0.5j * eta / hb**2 * e_t,
        "k": m**2 * hb**2 / (4 * eta) * e_t - 1j * c.hbar_theta_eta * t,
    }


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _degenerate(value: float, scale: float) -> bool:
    return value <= 1e-12 * scale


def aux_constants(t: float, p: PhysicalParams) -> AuxConstants:
    """Printed auxiliary constants at time t.

    Raises:
        DegenerateError: if a0, b0, beta0 or beta1 is not positive (relative
            tolerance 1e-12 of eta/4hbar^2).
    """
    validate(p)
    r = raw_aux(t, p)
    a0, b0, c0, d0, h0, k0 = (complex(r[n]).real for n in "abcdhk")
    scale = p.eta / (4 * p.hbar**2)
    if _degenerate(a0, scale):
        raise DegenerateError(f"a0 = {a0:.3g} must be positive (2 omega tau = 0 mod 2 pi)")
    if _degenerate(b0, scale):
        raise DegenerateError(f"b0 = {b0:.3g} must be positive (2 omega tau = pi mod 2 pi)")
    beta0 = b0 - h0**2 / (4 * a0)
    beta1 = a0 - h0**2 / (4 * b0)
    if _degenerate(beta0, scale):
        raise DegenerateError(f"beta0 = {beta0:.3g} must be positive at t = {t:g}")
    if _degenerate(beta1, scale):
        raise DegenerateError(f"beta1 = {beta1:.3g} must be positive at t = {t:g}")
    gamma0 = (d0 - c0 * h0) / (2 * beta0)
    gamma1 = (c0 - d0 * h0) / (2 * beta1)
    delta0 = (k0 - c0**2 / (4 * a0)) - (d0 - c0 * h0) ** 2 / (4 * beta0)
    delta1 = (k0 - d0**2 / (4 * b0)) - (c0 - d0 * h0) ** 2 / (4 * beta1)
    nu0 = (a0 * beta0 / 4) ** 0.25 * _exp(delta0) / math.pi
    return AuxConstants(
        t, *(complex(r[n]) for n in "abcdhk"), beta0, beta1, gamma0, gamma1, delta0, delta1, nu0
    )


@dataclass
class ExpectationReport:
    source: str
    time: float
    tau: float
    means: dict[str, complex]
    seconds: dict[str, complex]
    dx: complex
    dpx: complex
    product: complex
    extras: dict[str, complex] = field(default_factory=dict)

    def row(self) -> list:
        vals = [self.means[k] for k in MOMENT_KEYS] + [self.seconds[k] for k in SECOND_KEYS]
        vals += [self.dx, self.dpx, self.product]
        return vals


def paper_expectations(t: float, p: PhysicalParams) -> ExpectationReport:
    """All printed moment formulas evaluated as written (complex where they are)."""
    ac = aux_constants(t, p)
    hb = p.hbar
    a0, b0, c0, d0, h0 = ac.a0, ac.b0, ac.c0, ac.d0, ac.h0
    # |nu0~|^2 e^{-2 delta} combined in log form; both factors overflow on their own
    log_nt2 = math.log(4 / math.pi) + 0.5 * math.log(a0 * ac.beta0 / 4) + 2 * ac.delta0
    e0 = math.exp(log_nt2 - 2 * ac.delta0)
    e1 = _exp(log_nt2 - 2 * ac.delta1)
    x = math.pi / (4 * a0 * math.sqrt(a0 * ac.beta0)) * (h0 * ac.gamma0 - c0) * e0
    y = math.pi / (4 * b0 * math.sqrt(b0 * ac.beta1)) * (h0 * ac.gamma1 - d0) * e1
    x2 = (
        math.pi / (8 * a0 * math.sqrt(a0 * ac.beta0))
        * (1 + h0**2 / (4 * a0 * ac.beta0) + (c0 - h0 * ac.gamma0) ** 2 / a0)
        * e0
    )
    y2 = (
        math.pi / (8 * b0 * math.sqrt(b0 * ac.beta1))
        * (1 + h0**2 / (4 * b0 * ac.beta1) + (d0 - h0 * ac.gamma1) ** 2 / b0)
        * e1
    )
    xy = math.pi / (4 * a0 * math.sqrt(a0 * ac.beta0)) * (c0 * ac.gamma0 - h0 * ac.gamma0**2 - h0 / (4 * ac.beta0)) * e0
    a, b, c, d, h = ac.a, ac.b, ac.c, ac.d, ac.h
    px = -(hb / 1j) * (c + 2 * a * x + h * y)
    py = -(hb / 1j) * (d + 2 * b * y + h * x)
    px2 = hb**2 * ((2 * a - c**2) - 4 * a * c * x - 2 * c * h * y - 4 * a**2 * x2 - h**2 * y2 - 4 * a * h * xy)
    py2 = hb**2 * ((2 * b - d**2) - 4 * b * d * y - 2 * d * h * x - 4 * b**2 * y2 - h**2 * x2 - 4 * b * h * xy)
    var_x = (1 / (4 * a0)) * (1 + h0**2 / (4 * a0 * ac.beta0))
    var_px = 2 * hb**2 * a
    f = f_paper(t, p)
    product = hb / 2 * math.sqrt(f) if f > 0 and math.isfinite(f) else math.nan
    return ExpectationReport(
        "paper",
        t,
        p.tau,
        {"x": x, "y": y, "px": px, "py": py},
        {"x2": x2, "y2": y2, "px2": px2, "py2": py2, "xy": xy},
        dx=math.sqrt(var_x),
        dpx=complex(np.sqrt(complex(var_px))),
        product=product,
        extras={"var_x": var_x, "var_px": complex(var_px), "cov_xy": 0.0, "f": f},
    )


def f_paper(t, p: PhysicalParams):
    """The printed f_tau(t); inf where the denominator vanishes."""
    w = p.eta / (p.m * p.hbar)
    wt = w * p.tau
    with np.errstate(divide="ignore", invalid="ignore"):
        den = 1 - np.sin(2 * w * (np.asarray(t) + p.tau)) ** 2 / np.sin(2 * wt) ** 2
        out = 2 / np.sin(wt) / den
    out = np.where(np.abs(den) < 1e-12, np.inf, out)
    return float(out) if np.ndim(out) == 0 else out


def printed_minimum_candidates(p: PhysicalParams) -> dict[str, float]:
    """The two printed minimum values of f: inline 2 csc(w tau) and the boxed one."""
    wt = p.eta / (p.m * p.hbar) * p.tau
    return {
        "2csc(wt)": 2 / math.sin(wt),
        "2csc(wt)csc^2(2wt)": 2 / math.sin(wt) / math.sin(2 * wt) ** 2,
    }


def oracle_expectations(w: WaveFunction2D, hbar: float, tau: float = 0.0, tol: float = 1e-12) -> ExpectationReport:
    """Moments of a sampled state: positions by quadrature, momenta spectrally."""
    w.require_contained(tol)
    a = w.amplitudes
    gs = w.grid
    X, Y = gs.mesh()
    rho = np.abs(a) ** 2
    norm = rho.sum()
    rho = rho / norm
    mx = float(np.sum(rho * X))
    my = float(np.sum(rho * Y))
    vx = float(np.sum(rho * (X - mx) ** 2))
    vy = float(np.sum(rho * (Y - my) ** 2))
    cxy = float(np.sum(rho * (X - mx) * (Y - my)))
    ak = np.fft.fft2(a)
    rk = np.abs(ak) ** 2
    rk = rk / rk.sum()
    kx, ky = gs.wavenumbers()
    KX, KY = np.meshgrid(kx, ky)
    # envelope wavenumbers; carrier added after centering
    mkx = float(np.sum(rk * KX))
    mky = float(np.sum(rk * KY))
    vkx = float(np.sum(rk * (KX - mkx) ** 2))
    vky = float(np.sum(rk * (KY - mky) ** 2))
    mpx = hbar * (mkx + w.carrier[0])
    mpy = hbar * (mky + w.carrier[1])
    vpx, vpy = hbar**2 * vkx, hbar**2 * vky
    dx, dpx = math.sqrt(vx), math.sqrt(vpx)
    return ExpectationReport(
        "oracle",
        w.time,
        tau,
        {"x": mx, "y": my, "px": mpx, "py": mpy},
        {"x2": vx + mx**2, "y2": vy + my**2, "px2": vpx + mpx**2, "py2": vpy + mpy**2, "xy": cxy + mx * my},
        dx=dx,
        dpx=dpx,
        product=dx * dpx,
        extras={"var_x": vx, "var_px": vpx, "cov_xy": cxy, "var_y": vy, "var_py": vpy},
    )


def gaussian_expectations(t: float, p: PhysicalParams) -> ExpectationReport:
    """Exact moments of the lambda-integrated packet from its Gaussian exponent."""
    form = packet_form(t, p)
    form.require_normalizable("packet")
    mu, cov = form.mean(), form.cov()
    pm, pc = form.momentum_mean(p.hbar), form.momentum_cov(p.hbar)
    dx, dpx = math.sqrt(cov[0, 0]), math.sqrt(pc[0, 0])
    return ExpectationReport(
        "gaussian",
        t,
        p.tau,
        {"x": mu[0], "y": mu[1], "px": pm[0], "py": pm[1]},
        {
            "x2": cov[0, 0] + mu[0] ** 2,
            "y2": cov[1, 1] + mu[1] ** 2,
            "px2": pc[0, 0] + pm[0] ** 2,
            "py2": pc[1, 1] + pm[1] ** 2,
            "xy": cov[0, 1] + mu[0] * mu[1],
        },
        dx=dx,
        dpx=dpx,
        product=dx * dpx,
        extras={"var_x": cov[0, 0], "var_px": pc[0, 0], "cov_xy": cov[0, 1]},
    )


def oracle_product(t: float, p: PhysicalParams, method: str = "quadrature", n_min: int = 128) -> float:
    if method == "gaussian":
        return float(gaussian_expectations(t, p).product)
    if method == "quadrature":
        w = psi_packet(None, t, p, check_convergence=False, n_min=n_min)
        return float(oracle_expectations(w, p.hbar, p.tau).product)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class UncertaintyTrace:
    times: np.ndarray
    product_oracle: np.ndarray
    product_paper: np.ndarray
    f_paper: np.ndarray
    flags: list[str]
    minima: list[tuple[float, float]]
    paper_minima: list[tuple[float, float]]
    period: float

    def spacings(self) -> np.ndarray:
        return np.diff([m[0] for m in self.minima])


def _paper_flag(f: float) -> str:
    if not math.isfinite(f):
        return "paper-divergent"
    if f <= 0:
        return "paper-negative"
    return ""


def uncertainty_scan(
    t_span,
    samples: int,
    p: PhysicalParams,
    mode: str = "both",
    method: str = "quadrature",
    n_min: int = 128,
    refine: bool = True,
) -> UncertaintyTrace:
    """Sample Delta x Delta p_x over t_span and locate its local minima.

    Minima of the oracle trace are found by a three-point test on the samples
    and refined by bounded Brent search (golden section with parabolic steps) to 1e-8 of the period
    pi/2omega. Paper-mode minima are located the same way over the printed
    product where f is positive and finite.
    """
    validate(p)
    omega = p.eta / (p.m * p.hbar)
    period = math.pi / (2 * omega)
    t0, t1 = map(float, t_span)
    if samples < 2 or (samples - 1) < 16 * (t1 - t0) / period:
        raise ValueError(f"need at least 16 samples per period pi/2omega = {period:g}")
    times = np.linspace(t0, t1, samples)
    f = np.asarray(f_paper(times, p), dtype=float)
    flags = [_paper_flag(v) for v in f]
    with np.errstate(invalid="ignore"):
        prod_paper = np.where(f > 0, p.hbar / 2 * np.sqrt(np.where(np.isfinite(f), f, np.nan)), np.nan)
    prod_oracle = np.full(samples, np.nan)
    if mode in ("both", "oracle"):
        prod_oracle = np.array([oracle_product(t, p, method, n_min) for t in times])
    minima = []
    if mode in ("both", "oracle"):
        minima = _find_minima(times, prod_oracle, lambda s: oracle_product(s, p, method, n_min), period, refine)
    paper_min = []
    if mode in ("both", "paper"):
        ok = np.isfinite(prod_paper)

        def fp(s):
            v = f_paper(s, p)
            return p.hbar / 2 * math.sqrt(v) if v > 0 and math.isfinite(v) else math.inf

        paper_min = _find_minima(times, np.where(ok, prod_paper, np.inf), fp, period, refine)
    return UncertaintyTrace(times, prod_oracle, prod_paper, f, flags, minima, paper_min, period)


def _find_minima(times, vals, fun, period, refine):
    out = []
    for i in range(1, len(times) - 1):
        if not np.isfinite(vals[i]):
            continue
        if vals[i] < vals[i - 1] and vals[i] <= vals[i + 1]:
            if not refine:
                out.append((float(times[i]), float(vals[i])))
                continue
            res = minimize_scalar(
                fun,
                bounds=(times[i - 1], times[i + 1]),
                method="bounded",
                options={"xatol": 1e-8 * period, "maxiter": 500},
            )
            out.append((float(res.x), float(res.fun)))
    return out


def oracle_minimum_value(p: PhysicalParams) -> float:
    """Closed-form minimum of Delta x Delta p_x for the packet: (hbar/2)/sqrt(1 - r^2), r = hbar/2kappa."""
    r = p.hbar / (2 * p.kappa)
    return p.hbar / 2 / math.sqrt(1 - r * r)


QUANTITIES = ("x", "y", "px", "py", "x2", "y2", "px2", "py2", "xy")


def discrepancy_report(p: PhysicalParams, t_samples, n_min: int = 128, tol: float = 1e-6) -> DiscrepancyReport:
    """Printed moments vs oracle quadrature at each sample time."""
    rep = DiscrepancyReport()
    for t in t_samples:
        t = float(t)
        w = psi_packet(None, t, p, n_min=n_min)
        orc = oracle_expectations(w, p.hbar, p.tau)
        try:
            pap = paper_expectations(t, p)
        except DegenerateError as exc:
            for q in QUANTITIES:
                src = orc.means if q in orc.means else orc.seconds
                rep.add(f"expect.{q}", None, src[q], verdict="paper-degenerate", rel_diff=math.nan, time=t, note=str(exc))
            continue
        for q in QUANTITIES:
            pv = pap.means[q] if q in pap.means else pap.seconds[q]
            ov = orc.means[q] if q in orc.means else orc.seconds[q]
            rep.add(f"expect.{q}", complex(pv), ov, time=t, tol=tol)
        rep.add(
            "dispersion.var_x",
            pap.extras["var_x"],
            orc.extras["var_x"],
            time=t,
            tol=tol,
            note="printed (1/4a0)(1 + h0^2/4a0 beta0)",
        )
        vpx = complex(pap.extras["var_px"])
        rep.add(
            "dispersion.var_px",
            vpx,
            orc.extras["var_px"],
            time=t,
            tol=tol,
            note=f"printed 2 hbar^2 a is complex (Im = {vpx.imag:.3g}); a variance must be real",
        )
        rep.add(
            "correlation.cov_xy",
            0.0,
            orc.extras["cov_xy"],
            verdict="match" if abs(orc.extras["cov_xy"]) <= tol * orc.dx**2 else "mismatch",
            rel_diff=abs(orc.extras["cov_xy"]) / (orc.dx * math.sqrt(orc.extras["var_y"])),
            time=t,
            note="printed claim <xy> = <x><y>; rel_diff is the oracle correlation coefficient",
        )
        if math.isfinite(pap.product):
            rep.add("uncertainty.product", pap.product, orc.product, time=t, tol=tol)
        else:
            rep.add(
                "uncertainty.product",
                None,
                orc.product,
                verdict="paper-degenerate",
                rel_diff=math.nan,
                time=t,
                note=f"printed f = {pap.extras['f']!r}",
            )
    return rep
