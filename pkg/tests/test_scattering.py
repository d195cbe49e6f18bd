import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import reference_model
from wavetrans.errors import (
    EmptyAperture,
    InvalidCorrelationLength,
    NegativeSpectrum,
    OutOfDomain,
)
from wavetrans.modes import mode_basis, reference_config
from wavetrans.scattering import (
    ScatteringSpectra,
    TabulatedSpectrum1D,
    aperture_coupling,
    assemble_gamma,
    block_index,
    gamma_c_boundary_gaussian,
    gamma_c_medium_gaussian,
    gamma_general,
    gaussian_boundary_spectrum,
    gaussian_medium_spectrum,
    mean_free_paths,
    model_from_gamma_c,
    spectral_decomposition,
    top_aperture_formula,
)


@pytest.fixture(scope="module")
def basis():
    cfg = reference_config()
    return mode_basis(cfg.omega_o, cfg)


def test_boundary_closed_form_matches_general_formula(basis):
    ell = 1.5
    spectra = ScatteringSpectra(ell, R_T=gaussian_boundary_spectrum, eps_B=0.0, eps_T=1.0)
    general = gamma_general(basis, spectra)
    closed = gamma_c_boundary_gaussian(basis, ell)
    np.testing.assert_allclose(general, closed, rtol=1e-12, atol=0)


def test_medium_closed_form_is_four_times_general_formula(basis):
    # The closed form writes the lateral argument with k_o/N where the general
    # one has pi/X; these agree only up to N ~ k_o X / pi, so compare on the
    # matrix scale rather than entrywise.
    ell = 1.5
    general = gamma_general(basis, ScatteringSpectra(ell, R_nu=gaussian_medium_spectrum))
    closed = gamma_c_medium_gaussian(basis, ell)
    assert np.abs(4 * general - closed).max() / closed.max() < 1e-3
    big = closed > 1e-2 * closed.max()
    assert np.abs(closed[big] / general[big] / 4 - 1).max() < 0.05


def test_tabulated_spectrum_reproduces_analytic(basis):
    kappa = np.linspace(0, 40, 40001)
    tab = TabulatedSpectrum1D(kappa, gaussian_boundary_spectrum(kappa))
    a = gamma_general(basis, ScatteringSpectra(1.5, R_T=tab, eps_B=0.0))
    b = gamma_general(basis, ScatteringSpectra(1.5, R_T=gaussian_boundary_spectrum, eps_B=0.0))
    # linear interpolation error ~ dk^2 f''/8
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-12 * b.max())


def test_negative_spectrum_rejected(basis):
    with pytest.raises(NegativeSpectrum):
        TabulatedSpectrum1D([0.0, 1.0], [1.0, -0.1])
    with pytest.raises(NegativeSpectrum):
        gamma_general(basis, ScatteringSpectra(1.5, R_T=lambda k: -np.ones_like(k)))


def test_invalid_correlation_length(basis):
    with pytest.raises(InvalidCorrelationLength):
        gamma_c_medium_gaussian(basis, 0.0)
    with pytest.warns(UserWarning):
        gamma_c_boundary_gaussian(basis, basis.X / 2)


def test_assemble_gamma_conserves_energy():
    rng = np.random.default_rng(0)
    off = rng.random((6, 6))
    off = off + off.T
    G = assemble_gamma(off)
    assert np.abs(G.sum(axis=1)).max() < 1e-14
    np.testing.assert_array_equal(G - np.diag(np.diag(G)), off - np.diag(np.diag(off)))


def test_mean_free_path_definition():
    gc = np.array([[1.0, 0.5], [0.5, 3.0]])
    np.testing.assert_allclose(mean_free_paths(gc), [2 / 1.5, 2 / 3.5])


def test_spectral_decomposition_conventions():
    G = assemble_gamma(np.array([[0, 1.0, 0.2], [1.0, 0, 0.5], [0.2, 0.5, 0]]))
    sp = spectral_decomposition(G)
    assert sp.eigenvalues[0] == 0.0
    assert np.all(np.diff(sp.eigenvalues) < 0)
    np.testing.assert_allclose(sp.U.T @ sp.U, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(sp.U @ np.diag(sp.eigenvalues) @ sp.U.T, G, atol=1e-14)
    for r in range(3):
        col = sp.U[:, r]
        assert col[np.argmax(np.abs(col))] > 0


def test_scaling_gamma_scales_eigenvalues():
    b, m = reference_model("medium", 1)[1:]
    m2 = model_from_gamma_c(m.omega, 3.0 * m.gamma_c)
    np.testing.assert_allclose(m2.eigenvalues, 3 * m.eigenvalues, rtol=1e-10, atol=1e-10)
    assert m2.L_eq == pytest.approx(m.L_eq / 3, rel=1e-12)


def test_medium_coupling_stronger_than_boundary():
    # medium scattering equilibrates modes far faster than the boundary model at equal ell
    assert reference_model("medium", 1)[2].L_eq < reference_model("boundary", 1)[2].L_eq / 10


def test_block_index_grows_with_correlation_length():
    js = [block_index(reference_model("medium", e)[2].U) for e in (1, 3, 5)]
    assert js[0] < js[1] < js[2]
    for e, j in zip((1, 3, 5), js):
        U = reference_model("medium", e)[2].U
        assert np.abs(U[:3, j:]).max() < 0.05
        assert np.abs(U[:3, j - 1 :]).max() >= 0.05


def test_full_aperture_is_identity(basis):
    ap = aperture_coupling((0.0, basis.X), basis)
    np.testing.assert_array_equal(ap.Q, np.eye(basis.N))
    assert ap.diag_dominant and ap.qsq_diag_dominant


def test_partial_aperture_against_quadrature(basis):
    lo, hi = 0.3 * basis.X, 0.95 * basis.X
    ap = aperture_coupling((lo, hi), basis)
    for j, q in [(1, 1), (2, 5), (10, 11), (40, 3)]:
        val = quad(lambda x: basis.phi(j, x) * basis.phi(q, x), lo, hi, limit=400)[0]
        assert ap.Q[j - 1, q - 1] == pytest.approx(val, abs=1e-12)


def test_top_aperture_formula_squares_agree(basis):
    A = 0.6 * basis.X
    ap = aperture_coupling((basis.X - A, basis.X), basis)
    lit = top_aperture_formula(A, basis)
    np.testing.assert_allclose(lit**2, ap.Qsq, atol=1e-14)
    np.testing.assert_allclose(np.diag(lit), np.diag(ap.Q), atol=1e-14)


def test_aperture_errors(basis):
    with pytest.raises(EmptyAperture):
        aperture_coupling((2.0, 2.0), basis)
    with pytest.raises(OutOfDomain):
        aperture_coupling((-1.0, 2.0), basis)
