import math

import numpy as np
import pytest

from ncgw import invariant as inv
from ncgw import observables as obs
from ncgw import states as st
from ncgw.params import PhysicalParams
from ncgw.tdse import apply_hamiltonian


def test_phi_quadratic_exponent_is_real_gaussian(r0):
    f = st.phi_form(0.0, inv.closed_form_coeffs(r0), 1.7)
    # log Phi = -M_xx x^2/2 - ...; M_xx/2 = eta/4hbar^2
    assert f.M[0, 0] / 2 == pytest.approx(0.1 / 4, abs=1e-15)
    assert f.M[1, 1] / 2 == pytest.approx(0.1 / 4, abs=1e-15)
    assert f.M[0, 1] == 0


def test_phi_lambda_ratio_is_plane_wave(r0):
    cf = inv.closed_form_coeffs(r0)
    t = 2.0
    A, B, *_ = cf.values(t)
    f1, f2 = st.phi_form(-1.0, cf, t), st.phi_form(2.5, cf, t)
    X, Y = np.array([0.3, -4.0]), np.array([1.1, 2.0])
    ratio = f2.log(X, Y) - f1.log(X, Y)
    want = 1j * 3.5 * (X / A + Y / B) / (2 * r0.hbar)
    assert np.allclose(ratio, want, atol=1e-13)


def test_non_normalizable_branch_names_ratio(r0):
    with pytest.raises(st.NormalizationError, match="C/A"):
        st.phi_lambda(None, 0.0, inv.closed_form_coeffs(r0, branch=-1), 0.0)


@pytest.mark.parametrize("lam", [-2.0, 0.0, 3.0])
def test_eigen_residual(r0, lam):
    cf = inv.closed_form_coeffs(r0)
    for t in (0.0, 21.0):
        w = st.phi_lambda(None, lam, cf, t, n_min=256)
        assert w.grid.n >= 256
        assert st.eigen_residual(w, lam, cf, t) < 1e-6


def test_invariant_on_constant_and_plane_wave(r0):
    gs = st.GridSpec(64, 0.0, 2 * math.pi, 0.0, 2 * math.pi)
    const = st.WaveFunction2D(gs, np.ones((64, 64), complex))

    class Fixed:
        params = r0

        def __init__(self, v):
            self.v = v

        def values(self, t):
            return self.v

    out = st.apply_invariant_grid(const, Fixed((0, 0, 0, 0, 2.5)), 0.0, tol=math.inf)
    assert np.allclose(out.amplitudes, 2.5)
    X, _ = gs.mesh()
    wave = st.WaveFunction2D(gs, np.exp(3j * X))
    out = st.apply_invariant_grid(wave, Fixed((1, 0, 0, 0, 0)), 0.0, tol=math.inf)
    assert np.allclose(out.amplitudes, 3.0 * r0.hbar * wave.amplitudes, atol=1e-10)


def test_invariant_grid_requires_containment(r0):
    gs = st.GridSpec(64, -1.0, 1.0, -1.0, 1.0)
    w = st.WaveFunction2D(gs, np.ones((64, 64), complex))
    with pytest.raises(st.DomainError):
        st.apply_invariant_grid(w, inv.closed_form_coeffs(r0), 0.0)


def test_c_over_a_plus_d_over_b_constant(r0):
    cf = inv.closed_form_coeffs(r0)
    vals = []
    for t in np.linspace(0, 60, 7):
        A, B, C, D, _ = cf.values(t)
        vals.append(C / A + D / B)
    assert np.allclose(vals, vals[0], atol=1e-14)


def test_phase_routes_agree(r0):
    cf = inv.closed_form_coeffs(r0)
    period = 2 * math.pi / 0.1
    tr = st.nu_phase(0.0, (0.0, period), cf, samples=4001)
    # printed closed form against its own equation
    assert abs(tr.printed_closed_form[-1] - tr.printed_equation[-1]) < 1e-6 * abs(tr.printed_closed_form[-1])
    # exact phase against quadrature of its rate
    assert np.abs(tr.exact - tr.exact_quadrature).max() < 1e-6


def test_phase_time_resolution(r0):
    cf = inv.closed_form_coeffs(r0)
    period = 2 * math.pi / 0.1
    ends = {}
    for lam in (0.0, 1.0):
        for n in (20001, 40001):
            ends[lam, n] = st.nu_phase(lam, (0.0, period), cf, samples=n).exact_quadrature[-1]
    assert abs(ends[0.0, 20001] - ends[0.0, 40001]) < 1e-8
    # the lambda term grows like t, so its trapezoid error is judged relative to the phase
    assert abs(ends[1.0, 20001] - ends[1.0, 40001]) < 1e-10 * abs(ends[1.0, 40001])


def test_exact_solution_solves_schroedinger_equation(r1):
    # i hbar d psi/dt = H psi, with d/dt by central differences of the analytic form
    lam, t, h = 0.7, 1.3, 1e-4
    form = st.lr_form(lam, t, r1)
    gs, _ = st.auto_grid(form, r1.hbar, n_min=128)
    X, Y = gs.mesh()
    psi = lambda s: np.exp(st.lr_form(lam, s, r1).log(X, Y))
    w = st.WaveFunction2D(gs, psi(t), t)
    dpsi = (psi(t + h) - psi(t - h)) / (2 * h)
    lhs = 1j * r1.hbar * dpsi
    rhs = apply_hamiltonian(w, r1)
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-7


def test_printed_eigenfunction_not_a_solution_with_gravity(r1):
    lam, t, h = 0.0, 1.3, 1e-4
    form = st.lr_form(lam, t, r1, drift_corrected=False)
    gs, _ = st.auto_grid(form, r1.hbar, n_min=128)
    X, Y = gs.mesh()
    psi = lambda s: np.exp(st.lr_form(lam, s, r1, drift_corrected=False).log(X, Y))
    w = st.WaveFunction2D(gs, psi(t), t)
    lhs = 1j * r1.hbar * (psi(t + h) - psi(t - h)) / (2 * h)
    rhs = apply_hamiltonian(w, r1)
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) > 1e-3


def test_weight_function():
    assert st.weight(0.0, 0.5, 1.0) == 1.0
    lam = np.linspace(-3, 3, 13)
    assert np.array_equal(st.weight(lam, 0.7, 1.0), st.weight(-lam, 0.7, 1.0))


def test_packet_quadrature_node_doubling(r0_run):
    w = st.psi_packet(None, 0.0, r0_run, nodes=64, check_convergence=False)
    w2 = st.psi_packet(w.grid, 0.0, r0_run, nodes=128, check_convergence=False)
    assert np.linalg.norm(w.full() - w2.full()) * math.sqrt(w.grid.area) < 1e-10


def test_packet_matches_completed_square(r0_run):
    w = st.psi_packet(None, 5.0, r0_run)
    ref = st.sample(st.packet_form(5.0, r0_run), w.grid, w.carrier)
    assert abs(abs(ref.overlap(w)) - 1) < 1e-10


def test_printed_packet_differs(r0_run):
    q = st.psi_packet(None, 0.0, r0_run)
    c = st.psi_packet(q.grid, 0.0, r0_run, mode="closed_form")
    assert abs(c.overlap(q)) < 0.5


def test_quadrature_needs_enough_nodes(r0_run):
    with pytest.raises(ValueError):
        st.psi_packet(None, 0.0, r0_run, nodes=32)


def test_density(r0_run):
    w = st.psi_packet(None, 0.0, r0_run)
    rho = st.density(w)
    assert (rho >= 0).all()
    assert st.integrate_density(w) == pytest.approx(1.0, abs=1e-10)
    grid = obs.oracle_expectations(w, r0_run.hbar)
    gauss = obs.gaussian_expectations(0.0, r0_run)
    for k in ("x2", "y2", "xy"):
        assert grid.seconds[k] == pytest.approx(gauss.seconds[k], rel=1e-9)


def test_auto_grid_padding(r0_run):
    w = st.psi_packet(None, 0.0, r0_run)
    assert w.boundary_ratio() < 1e-12
    w.require_contained()


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        st.GridSpec(100, 0, 1, 0, 1)
    with pytest.raises(ValueError):
        st.GridSpec(32, 0, 1, 0, 1)


def test_dump_roundtrip(tmp_path, r0_run):
    w = st.psi_packet(None, 1.0, r0_run, n_min=64)
    path, side = st.write_dump(w, tmp_path / "psi.bin")
    assert path.stat().st_size == 16 * w.grid.n**2
    back = st.read_dump(path)
    assert back.grid == w.grid and back.time == 1.0
    assert np.array_equal(back.amplitudes, w.full())


def test_kappa_below_bound_diverges(r0_run):
    scan = st.kappa_norm_scan(r0_run, 0.4, doublings=2)
    assert scan.diverging


def test_kappa_above_bound_converges(r0_run):
    scan = st.kappa_norm_scan(r0_run, 1.0)
    assert scan.converged
