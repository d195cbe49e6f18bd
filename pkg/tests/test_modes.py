import math

import numpy as np
import pytest
from scipy.integrate import quad

from wavetrans.errors import DegenerateCutoff, OutOfDomain
from wavetrans.modes import (
    WaveguideConfig,
    cutoff_ratio,
    eigenfunction,
    mode_basis,
    num_propagating,
    reference_config,
)


@pytest.fixture
def cfg():
    return reference_config()


def test_counts_at_reference_frequencies(cfg):
    assert [num_propagating(f * cfg.omega_o, cfg) for f in (0.5, 1, 2, 3)] == [20, 40, 81, 121]


def test_wavenumbers_match_direct_formula(cfg):
    b = mode_basis(cfg.omega_o, cfg)
    k = cfg.omega_o / cfg.c_o
    j = np.arange(1, b.N + 1)
    np.testing.assert_allclose(b.beta, np.sqrt(k**2 - (math.pi * j / cfg.X) ** 2), rtol=1e-15)
    assert np.all(np.diff(b.beta) < 0) and b.beta[-1] > 0


def test_group_slowness_is_frequency_derivative(cfg):
    w = cfg.omega_o
    dw = w * 1e-6
    b = mode_basis(w, cfg)
    bp = mode_basis(w + dw, cfg).beta
    bm = mode_basis(w - dw, cfg).beta
    np.testing.assert_allclose(b.beta_prime, (bp - bm) / (2 * dw), rtol=1e-6)
    assert np.all(b.beta_prime >= 1 / cfg.c_o)


def test_eigenfunctions_orthonormal(cfg):
    for j, q in [(1, 1), (3, 3), (40, 40), (1, 2), (7, 30)]:
        val = quad(lambda x: eigenfunction(j, x, cfg) * eigenfunction(q, x, cfg), 0, cfg.X, limit=400)[0]
        assert val == pytest.approx(1.0 if j == q else 0.0, abs=1e-10)


def test_basis_arrays_are_read_only(cfg):
    b = mode_basis(cfg.omega_o, cfg)
    with pytest.raises(ValueError):
        b.beta[0] = 1.0


def test_degenerate_cutoff_rejected(cfg):
    # omega chosen so that omega X / (pi c) is exactly 40
    omega = 40 * math.pi * cfg.c_o / cfg.X
    with pytest.raises(DegenerateCutoff):
        num_propagating(omega, cfg)
    assert cutoff_ratio(cfg.omega_o, cfg) == pytest.approx(40.6)


def test_below_first_cutoff(cfg):
    with pytest.raises(OutOfDomain):
        num_propagating(0.5 * math.pi * cfg.c_o / cfg.X, cfg)


def test_eigenfunction_domain(cfg):
    with pytest.raises(OutOfDomain):
        eigenfunction(1, -0.1, cfg)
    with pytest.raises(OutOfDomain):
        eigenfunction(0, 1.0, cfg)
    assert eigenfunction(2, 0.0, cfg) == 0.0


@pytest.mark.parametrize(
    "field,value",
    [("c_o", -1.0), ("X", 0.0), ("ell", 0.0), ("eps", 1.5), ("alpha", 2.5), ("eps_T", -1.0)],
)
def test_config_validation(field, value):
    base = dict(c_o=1500.0, omega_o=2 * math.pi * 1000, X=30.45, ell=1.5)
    base[field] = value
    with pytest.raises(ValueError):
        WaveguideConfig(**base)


def test_config_rejects_degenerate_centre_frequency():
    with pytest.raises(DegenerateCutoff):
        WaveguideConfig(c_o=1500.0, omega_o=40 * math.pi * 1500 / 30.0, X=30.0, ell=1.0)


def test_reference_config_kinds():
    assert reference_config(kind="boundary").eps_c == 0
    assert reference_config(kind="medium").eps_T == 0
    assert reference_config().wavelength == pytest.approx(1.5)
