import math

import numpy as np
import pytest

from conftest import reference_model
from wavetrans.errors import (
    AtBoundary,
    CutoffTooAggressive,
    IllConditionedAperture,
    NoPeaks,
    TooFewModes,
)
from wavetrans.modes import mode_basis, reference_config
from wavetrans.nnls import kkt_residuals
from wavetrans.scattering import aperture_coupling
from wavetrans.source import (
    GaussianAt,
    GaussianWidth,
    PointAt,
    SeparableSource,
    forward_crosscorr_perturbative,
    forward_data_vector,
    source_spectrum,
)
from wavetrans.inversion import (
    PeakTimeModel,
    Quality,
    autocorrelation_xi,
    autocorrelation_zeta,
    band_frequencies,
    band_matrix,
    band_theta,
    error_bounds,
    estimate_range,
    gaussian_autocorrelation,
    invert_crossrange,
    invert_range_profile,
    measure_peaks,
    numerical_rank,
    peak_time,
    theta_from_data,
    wideband_objective,
    wideband_solve,
)


@pytest.fixture(scope="module")
def boundary():
    return reference_model("boundary", 1)


@pytest.fixture(scope="module")
def medium():
    return reference_model("medium", 1)


def _full(basis):
    return aperture_coupling((0, basis.X), basis)


# -- peaks and range ---------------------------------------------------------------


def test_peak_time_exact_for_parabola():
    tau = np.linspace(0, 1, 11)
    assert peak_time(tau, -((tau - 0.437) ** 2)) == pytest.approx(0.437, abs=1e-14)


def test_peak_time_ties_go_early():
    tau = np.arange(6.0)
    # the first of two equal samples is the anchor; the parabola through it
    # and its neighbours then lands midway
    assert peak_time(tau, np.array([0, 1, 3, 3, 1, 0.0])) == 2.5
    assert peak_time(tau, np.array([0, 3, 1, 3, 0, 0.0])) == pytest.approx(1.1)
    assert peak_time(tau, np.array([5, 1, 0, 0, 1, 2.0])) == 0.0


def test_measure_peaks_excludes_weak_and_flat():
    tau = np.linspace(-5, 5, 401)
    strong = np.exp(-tau**2)
    C = np.column_stack([strong, 1e-3 * strong, np.ones_like(tau)])
    pk = measure_peaks(tau, C)
    np.testing.assert_array_equal(pk.used, [True, False, False])
    with pytest.raises(NoPeaks):
        measure_peaks(tau, np.zeros((401, 2)))


def _range_problem(boundary, spectrum, Z):
    _, basis, model = boundary
    ap = _full(basis)
    H = 1.0 / (Z * np.ptp(basis.beta_prime))
    tau, C = forward_crosscorr_perturbative(spectrum, model, ap, Z, H, basis, tau=None)
    return basis, model, ap, H, tau, C


@pytest.mark.parametrize("xs", [0.2, 0.55])
def test_range_round_trip(boundary, xs):
    _, basis, model = boundary
    Z = 2 * model.L_eq
    sp = source_spectrum(SeparableSource(PointAt(xs * basis.X)), basis)
    basis, model, ap, H, tau, C = _range_problem(boundary, sp, Z)
    grid = Z * np.linspace(0.8, 1.2, 41)
    est = estimate_range(tau, C, PeakTimeModel(model, basis, ap, H), grid)
    assert abs(est.Z_hat - Z) <= grid[1] - grid[0]


def test_range_far_beyond_equipartition(boundary):
    _, basis, model = boundary
    Z = 8 * model.L_eq
    sp = source_spectrum(SeparableSource(PointAt(7.0)), basis)
    basis, model, ap, H, tau, C = _range_problem(boundary, sp, Z)
    grid = Z * np.linspace(0.8, 1.2, 21)
    est = estimate_range(tau, C, PeakTimeModel(model, basis, ap, H), grid)
    assert abs(est.Z_hat - Z) <= grid[1] - grid[0]


def test_range_misfit_scale_invariant(boundary):
    _, basis, model = boundary
    Z = 2 * model.L_eq
    sp = source_spectrum(SeparableSource(PointAt(7.0)), basis)
    basis, model, ap, H, tau, C = _range_problem(boundary, sp, Z)
    grid = Z * np.linspace(0.9, 1.1, 11)
    pm = PeakTimeModel(model, basis, ap, H)
    a = estimate_range(tau, C, pm, grid)
    b = estimate_range(tau, 1e3 * C, pm, grid)
    assert a.Z_hat == b.Z_hat
    np.testing.assert_allclose(b.misfit, 1e3 * a.misfit, rtol=1e-9)


def test_range_minimum_on_edge(boundary):
    _, basis, model = boundary
    Z = 2 * model.L_eq
    sp = source_spectrum(SeparableSource(PointAt(7.0)), basis)
    basis, model, ap, H, tau, C = _range_problem(boundary, sp, Z)
    with pytest.raises(AtBoundary):
        estimate_range(tau, C, PeakTimeModel(model, basis, ap, H), Z * np.linspace(1.2, 1.5, 7))


# -- case 1 ------------------------------------------------------------------------


def test_range_profile_round_trip_with_aperture(medium):
    cfg, basis, model = medium
    ap = aperture_coupling((0.1 * basis.X, basis.X), basis)
    assert ap.qsq_diag_dominant
    sp = source_spectrum(SeparableSource(GaussianAt(12.0, 1.0), GaussianWidth(0.4)), basis)
    Z = 0.5 * model.L_eq
    est = invert_range_profile(forward_data_vector(sp, model, ap, Z, basis), sp.xi_hat, model, ap, Z, basis)
    assert not est.withheld.any()
    np.testing.assert_allclose(est.zeta_sq, sp.zeta_hat, rtol=1e-8)


def test_range_profile_is_homogeneous(medium):
    _, basis, model = medium
    ap = _full(basis)
    sp = source_spectrum(SeparableSource(PointAt(9.0), GaussianWidth(0.4)), basis)
    M = forward_data_vector(sp, model, ap, 1.0, basis)
    a = invert_range_profile(M, sp.xi_hat, model, ap, 1.0, basis).zeta_sq
    b = invert_range_profile(3 * M, sp.xi_hat, model, ap, 1.0, basis).zeta_sq
    np.testing.assert_allclose(b, 3 * a, rtol=1e-12)


def test_eta_positive_at_large_range(medium):
    _, basis, model = medium
    ap = _full(basis)
    sp = source_spectrum(SeparableSource(PointAt(9.0)), basis)
    M = forward_data_vector(sp, model, ap, 20 * model.L_eq, basis)
    est = invert_range_profile(M, sp.xi_hat, model, ap, 20 * model.L_eq, basis)
    assert np.all(est.eta > 0)


def test_small_aperture_rejected(medium):
    _, basis, model = medium
    ap = aperture_coupling((0.7 * basis.X, basis.X), basis)
    with pytest.raises(IllConditionedAperture):
        invert_range_profile(np.ones(basis.N), np.ones(basis.N), model, ap, 1.0, basis)


# -- case 2 ------------------------------------------------------------------------


def test_cutoff_amplification_cap(medium):
    _, basis, model = medium
    ap = _full(basis)
    M = forward_data_vector(source_spectrum(SeparableSource(PointAt(9.0)), basis), model, ap, model.L_eq, basis)
    with pytest.raises(CutoffTooAggressive):
        invert_crossrange(M, model, ap, model.L_eq, basis.N, basis)


def test_error_bounds_shrink_with_cutoff(medium):
    U = medium[2].U
    prev = np.full(U.shape[0], np.inf)
    for J in (1, 5, 20, 39, 40):
        b = error_bounds(U, J)
        assert np.all((b >= 0) & (b <= 1 + 1e-12))
        assert np.all(b <= prev + 1e-15)
        prev = b
    np.testing.assert_array_equal(error_bounds(U, U.shape[1]), 0.0)


def test_crossrange_quality_regimes(medium):
    _, basis, model = medium
    X = basis.X
    ap = _full(basis)
    sp = source_spectrum(SeparableSource(GaussianAt(X / 4, X / 30)), basis)
    Z = model.L_eq / 40
    good = invert_crossrange(forward_data_vector(sp, model, ap, Z, basis), model, ap, Z, 30, basis)
    assert good.quality is Quality.GOOD
    assert good.amplification <= 10
    Z = model.L_eq / 10
    poor = invert_crossrange(forward_data_vector(sp, model, ap, Z, basis), model, ap, Z, 7, basis)
    assert poor.quality is Quality.POOR


def test_xi_autocorrelation_properties():
    X = 30.45
    xi_sq = np.linspace(1, 0.1, 40) ** 2
    ac = autocorrelation_xi(xi_sq, 40, X, x=np.array([0.0, 3.0, X - 3.0, X]))
    assert ac.R[0] == pytest.approx(2 * xi_sq.sum())
    # R(X - x) = R(x) when only even-indexed terms are kept; check the general reflection instead
    j = np.arange(1, 41)
    np.testing.assert_allclose(ac.R[2], 2 * np.sum(xi_sq * (-1) ** j * np.cos(np.pi * j * 3.0 / X)))


def test_xi_autocorrelation_matches_three_gaussians():
    X = 30.45
    x_o, s = X / 4, X / 30
    n = 400
    coef = source_spectrum(SeparableSource(GaussianAt(x_o, s)), _basis_with(n, X)).xi_hat
    x = np.linspace(0, X, 401)
    ac = autocorrelation_xi(coef, n, X, x=x)
    ref = gaussian_autocorrelation(x, x_o, s)
    assert np.abs(ac.R - ref).max() < 1e-9 * np.abs(ref).max()
    assert ac.candidates[0] == pytest.approx(x_o, rel=0.02)


def _basis_with(n, X):
    # bare sine basis of n modes on [0, X]; only X and N matter for xi coefficients
    cfg = reference_config()
    b = mode_basis(cfg.omega_o, cfg)
    return type(b)(b.omega, b.k, n, np.ones(n), np.ones(n), X, b.c_o)


def test_mirror_source_gives_same_autocorrelation():
    X = 30.45
    a = source_spectrum(SeparableSource(GaussianAt(8.0, 1.0)), _basis_with(60, X)).xi_hat
    b = source_spectrum(SeparableSource(GaussianAt(X - 8.0, 1.0)), _basis_with(60, X)).xi_hat
    np.testing.assert_allclose(autocorrelation_xi(a, 60, X).R, autocorrelation_xi(b, 60, X).R, atol=1e-13)


def test_zeta_autocorrelation(medium):
    _, basis, _ = medium
    z = np.linspace(-3, 3, 6001)
    # exp(-beta^2 s^2) transforms to a Gaussian of std sqrt(2) s.  The sampled
    # band (0, k) only resolves that when s is neither too small (truncation
    # at k) nor too large (coarse beta near 0).
    for s in (0.375, 0.5):
        R = autocorrelation_zeta(np.exp(-(basis.beta * s) ** 2), basis, z)
        np.testing.assert_allclose(R, R[::-1], rtol=0, atol=1e-13 * R.max())
        half = z[3000:][np.argmax(R[3000:] < R[3000] / 2)]
        assert half == pytest.approx(math.sqrt(2 * math.log(2)) * math.sqrt(2) * s, rel=0.1)
    small = mode_basis(0.15 * reference_config().omega_o, reference_config())
    with pytest.raises(TooFewModes):
        autocorrelation_zeta(np.ones(small.N), small, z)


# -- wideband ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def band2():
    cfg = reference_config(1, "medium")
    om = band_frequencies(cfg, 1.0, 3.0)
    Bm, bases = band_matrix(cfg, om)
    xi_sq = source_spectrum(SeparableSource(PointAt(cfg.X / math.pi)), bases[-1]).xi_hat
    return cfg, om, Bm, bases, xi_sq


def test_band_sampling(band2):
    cfg, om, Bm, bases, _ = band2
    assert Bm.shape == (100, 121)
    assert om[0] == pytest.approx(cfg.omega_o, rel=2e-5)
    assert np.all(np.diff(om) > 0)
    r = np.array([b.k * b.X / math.pi for b in bases])
    assert np.all(np.abs(r - np.round(r)) >= 1e-5)


def test_wideband_solution_is_nnls_optimum(band2):
    cfg, om, Bm, bases, xi_sq = band2
    ws = wideband_solve(om, band_theta(xi_sq, bases), cfg)
    assert np.all(ws.gamma_sol >= 0)
    on, off = kkt_residuals(ws.Bmat, ws.rhs, ws.gamma_sol)
    scale = np.abs(ws.Bmat.T @ ws.rhs).max()
    assert on < 1e-8 * scale and off > -1e-8 * scale
    np.testing.assert_allclose(ws.objective, wideband_objective(ws.gamma_sol, cfg.X, ws.x))


def test_theta_from_equipartitioned_data(band2):
    cfg, _, _, bases, xi_sq = band2
    _, basis, model = reference_model("medium", 1)
    ap = _full(basis)
    sp = source_spectrum(SeparableSource(PointAt(cfg.X / math.pi)), basis)
    M = forward_data_vector(sp, model, ap, 100 * model.L_eq, basis)
    assert theta_from_data(M, basis, ap) == pytest.approx(band_theta(sp.xi_hat, [basis])[0], rel=1e-8)


def test_rank_depends_on_threshold(band2):
    # the singular values of the band-2 matrix straddle the threshold; the
    # plain eps * max(shape) rule counts one more
    _, _, Bm, _, _ = band2
    assert numerical_rank(Bm) == 91
    assert np.linalg.matrix_rank(Bm) == 92
