import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import reference_model
from wavetrans.errors import DimensionMismatch, GridTooCoarse, OutOfDomain
from wavetrans.scattering import aperture_coupling
from wavetrans.source import (
    Delta,
    GaussianAt,
    GaussianWidth,
    PointAt,
    SeparableSource,
    TabulatedOn,
    forward_crosscorr,
    forward_crosscorr_perturbative,
    forward_data_vector,
    forward_data_vector_matrix,
    h_grid_for,
    integrate_traces,
    source_spectrum,
    spectrum_from_arrays,
    xi_coefficients,
    zeta_transform_sq,
)


@pytest.fixture(scope="module")
def boundary():
    return reference_model("boundary", 1)


def _gauss(x, x_o, s):
    return math.exp(-0.5 * ((x - x_o) / s) ** 2) / (s * math.sqrt(2 * math.pi))


def test_gaussian_coefficients_against_quadrature():
    X = 30.45
    xi = GaussianAt(0.4 * X, 1.2)
    coef = xi_coefficients(xi, X, 40)
    for l in (1, 2, 13, 40):
        ref = quad(lambda x: _gauss(x, xi.x_o, xi.sigma) * math.sqrt(2 / X) * math.sin(math.pi * l * x / X), 0, X, limit=200)[0]
        assert coef[l - 1] == pytest.approx(ref, abs=1e-13)


def test_gaussian_coefficients_stay_finite_at_high_order():
    X = 30.45
    coef = xi_coefficients(GaussianAt(X / 4, X / 30), X, 600)
    assert np.all(np.isfinite(coef))
    l = 300
    ref = quad(lambda x: _gauss(x, X / 4, X / 30) * math.sqrt(2 / X) * math.sin(math.pi * l * x / X), 0, X, limit=800)[0]
    assert coef[l - 1] == pytest.approx(ref, abs=1e-12)
    # the profile is cut at x = 0 (about 5 sigma out), so the tail decays only algebraically
    assert np.abs(coef[-50:]).max() < 1e-12


def test_point_coefficients_are_mode_values(boundary):
    _, basis, _ = boundary
    x = 0.37 * basis.X
    coef = xi_coefficients(PointAt(x), basis.X, basis.N)
    np.testing.assert_allclose(coef, [basis.phi(l, x) for l in range(1, basis.N + 1)], atol=1e-15)


def test_tabulated_matches_gaussian():
    X = 30.45
    xi = GaussianAt(15.0, 1.0)
    grid = np.linspace(0, X, 4001)
    tab = TabulatedOn(grid, np.array([_gauss(x, 15.0, 1.0) for x in grid]))
    np.testing.assert_allclose(xi_coefficients(tab, X, 20), xi_coefficients(xi, X, 20), atol=1e-10)


def test_range_transforms():
    beta = np.linspace(0, 4, 9)
    np.testing.assert_array_equal(zeta_transform_sq(Delta(), beta), 1.0)
    s = 0.7
    np.testing.assert_allclose(zeta_transform_sq(GaussianWidth(s), beta), np.exp(-(beta * s) ** 2))
    # a Gaussian density with std sd has |zeta_hat|^2 = exp(-beta^2 sd^2)
    sd = 0.5
    z = np.linspace(-6, 6, 6001)
    tab = TabulatedOn(z, np.exp(-0.5 * (z / sd) ** 2) / (sd * math.sqrt(2 * math.pi)))
    np.testing.assert_allclose(zeta_transform_sq(tab, beta), np.exp(-((beta * sd) ** 2)), atol=1e-10)


def test_source_validation():
    with pytest.raises(OutOfDomain):
        SeparableSource(PointAt(-1.0)).validate(10.0)
    with pytest.raises(OutOfDomain):
        SeparableSource(GaussianAt(1.0, 0.5)).validate(10.0)
    with pytest.raises(ValueError):
        SeparableSource(PointAt(1.0), GaussianWidth(0.0)).validate(10.0)


def test_sum_and_matrix_forms_agree(boundary):
    _, basis, model = boundary
    sp = source_spectrum(SeparableSource(GaussianAt(10.0, 1.0), GaussianWidth(0.3)), basis)
    ap = aperture_coupling((0.4 * basis.X, basis.X), basis)
    for Z in (0.0, 0.3 * model.L_eq, 3 * model.L_eq):
        a = forward_data_vector(sp, model, ap, Z, basis)
        b = forward_data_vector_matrix(sp, model, ap, Z, basis)
        np.testing.assert_allclose(a, b, rtol=1e-11)


def test_equipartition_limit(boundary):
    _, basis, model = boundary
    sp = source_spectrum(SeparableSource(PointAt(7.3)), basis)
    ap = aperture_coupling((0.0, basis.X), basis)
    M = forward_data_vector(sp, model, ap, 60 * model.L_eq, basis)
    theta = np.mean(sp.xi_hat / basis.beta)
    np.testing.assert_allclose(M * basis.beta, theta, rtol=1e-8)


def test_dimension_mismatch(boundary):
    _, basis, model = boundary
    sp = spectrum_from_arrays(np.ones(5), np.ones(5))
    with pytest.raises(DimensionMismatch):
        forward_data_vector(sp, model, aperture_coupling((0, basis.X), basis), 1.0, basis)
    with pytest.raises(DimensionMismatch):
        spectrum_from_arrays(np.ones(3), np.ones(4))


def test_traces_integrate_to_data_vector(boundary):
    cfg, basis, model = boundary
    sp = source_spectrum(SeparableSource(PointAt(9.0)), basis)
    ap = aperture_coupling((0.0, basis.X), basis)
    Z = model.L_eq
    H = cfg.omega_o / 10
    tau, C = forward_crosscorr(sp, model, ap, Z, H, basis)
    M = forward_data_vector(sp, model, ap, Z, basis)
    np.testing.assert_allclose(integrate_traces(tau, C), M, rtol=1e-6)


def test_perturbative_traces_conserve_total(boundary):
    cfg, basis, model = boundary
    sp = source_spectrum(SeparableSource(PointAt(9.0)), basis)
    ap = aperture_coupling((0.0, basis.X), basis)
    Z = 2 * model.L_eq
    H = cfg.omega_o / 10
    tau, C = forward_crosscorr_perturbative(sp, model, ap, Z, H, basis)
    M = forward_data_vector(sp, model, ap, Z, basis)
    np.testing.assert_allclose(integrate_traces(tau, C), M, rtol=1e-6)


def test_grid_too_coarse(boundary):
    _, basis, _ = boundary
    tau = np.linspace(0, 1, 5)
    with pytest.raises(GridTooCoarse):
        h_grid_for(basis, 1.0, 8.0, tau, dh=1.01)
    h = h_grid_for(basis, 1.0, 8.0, tau, dh=1.0)
    assert h[0] == -h[-1] and h[-1] >= 48
