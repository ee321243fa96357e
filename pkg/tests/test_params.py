import math
import warnings

import numpy as np
import pytest

from ncgw.params import (
    LargeZetaWarning,
    ParameterError,
    PhysicalParams,
    bopp_map,
    bopp_matrix,
    commutator_table_error,
    derive_constants,
    induced_commutators,
    params_from_json,
)


def test_reference_constants(r0, golden):
    c = derive_constants(r0)
    assert c.zeta == pytest.approx(golden["r0.zeta"], rel=1e-14)
    assert c.hbar_eff == pytest.approx(golden["r0.hbar_eff"], rel=1e-14)
    assert c.omega == pytest.approx(golden["r0.omega"], rel=1e-14)
    assert c.b1_mod == pytest.approx(golden["r0.b1_mod"], rel=1e-14)
    assert not c.large_zeta


def test_eta_must_be_positive():
    with pytest.raises(ParameterError, match="eta must be positive"):
        PhysicalParams(theta=0.0, eta=0.0)


def test_kappa_bound_rejected():
    with pytest.raises(ParameterError, match="kappa"):
        PhysicalParams(kappa=0.4)


def test_kappa_defaults_to_half_hbar():
    assert PhysicalParams(hbar=2.0).kappa == 1.0


def test_hbar_eff_doubles_when_theta_eta_is_4hbar2():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LargeZetaWarning)
        c = derive_constants(PhysicalParams(theta=4.0, eta=1.0))
    assert c.hbar_eff == pytest.approx(2.0, rel=1e-15)
    assert c.large_zeta


def test_large_zeta_warns():
    with pytest.warns(LargeZetaWarning):
        derive_constants(PhysicalParams(theta=1.0, eta=0.5))


def test_derive_constants_is_deterministic(r0):
    assert derive_constants(r0) == derive_constants(PhysicalParams(**r0.to_dict()))


def test_bopp_identity_in_commutative_limit():
    assert np.array_equal(bopp_matrix(0.0, 0.0, 1.0), np.eye(4))


def test_bopp_entry_x_py(r0):
    assert bopp_map(r0)[0, 3] == pytest.approx(-0.025, abs=1e-15)


@pytest.mark.parametrize("theta,eta", [(0.05, 0.1), (0.3, 2.0), (1.0, 0.01)])
def test_bopp_determinant(theta, eta):
    # the map splits into (x, p_y) and (y, p_x) blocks, each with determinant 1 - zeta
    zeta = theta * eta / 4
    assert np.linalg.det(bopp_matrix(theta, eta, 1.0)) == pytest.approx((1 - zeta) ** 2, rel=1e-13)


def test_bopp_singular_when_zeta_is_one():
    assert abs(np.linalg.det(bopp_matrix(4.0, 1.0, 1.0))) < 1e-15


def test_induced_commutators_reference(r0):
    t = induced_commutators(bopp_map(r0), r0.hbar)
    assert t[0, 1] == pytest.approx(0.05j, abs=1e-15)
    assert t[2, 3] == pytest.approx(0.1j, abs=1e-15)
    assert t[0, 2] == pytest.approx(1.00125j, abs=1e-15)
    assert t[0, 3] == 0
    assert commutator_table_error(r0) < 1e-12


def test_params_from_json_rejects_unknown_keys():
    with pytest.raises(ParameterError, match="unknown"):
        params_from_json('{"m": 1, "mass": 2}')


def test_params_from_json_roundtrip(r0_run):
    import json

    assert params_from_json(json.dumps(r0_run.to_dict())) == r0_run


def test_printed_phase_constant_verbatim(r0):
    c = derive_constants(r0)
    want = r0.m**2 * r0.g * r0.theta / (2 * r0.eta) + r0.m**2 * r0.g * r0.theta**2 / 8 - r0.eta / 2
    assert c.hbar_theta_eta == pytest.approx(want, rel=1e-14)
    assert math.isfinite(c.hbar_theta_eta)
