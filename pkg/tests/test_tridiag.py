import numpy as np
import pytest

from wavetrans.scattering import assemble_gamma
from wavetrans.tridiag import (
    build_upsilon,
    idealized_upsilon,
    interlacing_holds,
    structure_sweep,
    tridiagonal_from_offdiag,
    upsilon_for,
    verify_structure,
)


def test_two_mode_closed_form():
    g12, k_o = 0.3, 4.0
    gamma = assemble_gamma(np.array([[0.0, g12], [g12, 0.0]]))
    m = build_upsilon(gamma, k_o)
    np.testing.assert_allclose(m.eigenvalues, [0.0, -2 * g12 / k_o], atol=1e-15)
    np.testing.assert_allclose(np.abs(m.V[:, 0]), [2**-0.5, 2**-0.5])


def test_zero_row_sums_and_constant_null_vector():
    m = tridiagonal_from_offdiag(np.linspace(1, 5, 9))
    np.testing.assert_allclose(m.upsilon.sum(axis=1), 0, atol=1e-13)
    assert abs(m.eigenvalues[0]) < 1e-12
    np.testing.assert_allclose(m.V[:, 0], np.full(10, 10**-0.5), atol=1e-12)


def test_only_neighbour_couplings_kept():
    rng = np.random.default_rng(3)
    off = rng.random((6, 6))
    gamma = assemble_gamma(off + off.T)
    m = build_upsilon(gamma, 2.0)
    np.testing.assert_allclose(m.offdiag, np.diag(gamma, 1) / 2.0)
    assert np.count_nonzero(np.triu(m.upsilon, 2)) == 0


def test_scaling_scales_spectrum():
    off = np.array([1.0, 2.0, 0.5, 3.0])
    a, b = tridiagonal_from_offdiag(off), tridiagonal_from_offdiag(7 * off)
    np.testing.assert_allclose(b.eigenvalues, 7 * a.eigenvalues, atol=1e-12)


def test_regime_warning():
    gamma = assemble_gamma(np.ones((8, 8)))
    with pytest.warns(RuntimeWarning):
        build_upsilon(gamma, 1.0, ell=0.1)


def test_interlacing():
    for n in (5, 12, 30):
        assert interlacing_holds(idealized_upsilon(n))
        assert interlacing_holds(upsilon_for(n, n))


def test_diagonal_profiles():
    # idealized: |Upsilon_NN| / |Upsilon_11| grows like N.  Scattering-derived:
    # the diagonal peaks near 0.7 N at a bounded multiple of |Upsilon_11| and
    # the last entries collapse, which is why its norm does not grow like N^2.
    for n in (10, 20, 40, 80):
        ideal = np.abs(idealized_upsilon(n).diag)
        assert ideal[-1] / ideal[0] == pytest.approx(n - 1)
        d = np.abs(upsilon_for(n, n).diag)
        assert 2 < d.max() / d[0] < 3
        assert 0.6 < (d.argmax() + 1) / n < 0.85
    assert np.abs(upsilon_for(80, 80).diag[-1]) < 1e-5 * np.abs(upsilon_for(80, 80).diag).max()


def test_single_model_report():
    rep = verify_structure(upsilon_for(20, 20))
    assert rep.orthonormal_nonpositive and rep.simple_null_space and rep.interlacing
    with pytest.raises(ValueError):
        verify_structure(upsilon_for(20, 20), J=11)


def test_idealized_profile_satisfies_every_property():
    sw = structure_sweep(builder=idealized_upsilon)
    assert sw.all_ok
    assert sw.norm_slope == pytest.approx(2.0, abs=0.05)
    # the tail mass of the largest eigenvector is far below 1e-4 at N = 80
    last = sw.reports[-1]
    assert last.tail_masses[np.argmin(last.deltas)] < 1e-4


def test_scattering_derived_structural_properties():
    # structure holds for the scattering-derived matrix; the N^2 scaling does
    # not (its couplings carry a factor decaying exponentially in N)
    sw = structure_sweep(kl_factor=1.0)
    assert sw.orthonormal_ok and sw.null_ok
    assert sw.norm_slope < 1.5
