"""Mode-coupling matrices, their spectra, mean free paths and aperture overlaps."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    EigensolveFailure,
    EmptyAperture,
    EquipartitionUndefined,
    InvalidCorrelationLength,
    NegativeSpectrum,
    OutOfDomain,
    ZeroScattering,
)
from .modes import FluctuationKind, ModeBasis, WaveguideConfig, mode_basis

DEGENERACY_RTOL = 1e-10
# Gaussian couplings are positive but can fall below the double range; round those up.
_UNDERFLOW = float(np.nextafter(0.0, 1.0))


def _check_ell(ell: float, X: float) -> None:
    if not ell > 0:
        raise InvalidCorrelationLength(f"correlation length must be positive, got {ell!r}")
    if ell > X / 4:
        warnings.warn(
            f"correlation length {ell:g} exceeds X/4 = {X / 4:g}; the l << X approximation is poor",
            stacklevel=3,
        )


def _medium_gaussian_full(basis: ModeBasis, ell: float, k_o: Optional[float]) -> np.ndarray:
    k_o = basis.k if k_o is None else k_o
    n = basis.N
    j = np.arange(1, n + 1, dtype=float)
    b = basis.beta
    dbeta = b[:, None] - b[None, :]
    kl2 = (k_o * ell) ** 2
    lateral = np.exp(-kl2 * (j[:, None] - j[None, :]) ** 2 / (2 * n**2)) + np.exp(
        -kl2 * (j[:, None] + j[None, :]) ** 2 / (2 * n**2)
    )
    g = (math.pi / basis.X) * ell**2 * k_o**4 / np.outer(b, b)
    g = g * np.exp(-0.5 * ell**2 * dbeta**2) * lateral
    return np.maximum(0.5 * (g + g.T), _UNDERFLOW)


def _boundary_gaussian_full(basis: ModeBasis, ell: float) -> np.ndarray:
    j = np.arange(1, basis.N + 1, dtype=float)
    b = basis.beta
    dbeta = b[:, None] - b[None, :]
    jq2 = np.outer(j, j) ** 2
    g = math.pi**4 * math.sqrt(2 * math.pi) * ell * jq2 / (np.outer(b, b) * basis.X**4)
    g = g * np.exp(-0.5 * ell**2 * dbeta**2)
    return np.maximum(0.5 * (g + g.T), _UNDERFLOW)


def gamma_offdiag_medium_gaussian(basis: ModeBasis, ell: float, k_o: Optional[float] = None) -> np.ndarray:
    """Off-diagonal couplings for a Gaussian-correlated random medium (l << X form).

    Returns an N x N array with zero diagonal.  ``k_o`` defaults to the
    basis wavenumber.
    """
    _check_ell(ell, basis.X)
    g = _medium_gaussian_full(basis, ell, k_o)
    np.fill_diagonal(g, 0.0)
    return g


def gamma_offdiag_boundary_gaussian(basis: ModeBasis, ell: float) -> np.ndarray:
    """Off-diagonal couplings for a Gaussian-correlated random top boundary."""
    _check_ell(ell, basis.X)
    g = _boundary_gaussian_full(basis, ell)
    np.fill_diagonal(g, 0.0)
    return g


def gamma_c_medium_gaussian(basis: ModeBasis, ell: float, k_o: Optional[float] = None) -> np.ndarray:
    """Gamma^(c) for the Gaussian medium model, the closed form also used on the diagonal."""
    _check_ell(ell, basis.X)
    return _medium_gaussian_full(basis, ell, k_o)


def gamma_c_boundary_gaussian(basis: ModeBasis, ell: float) -> np.ndarray:
    _check_ell(ell, basis.X)
    return _boundary_gaussian_full(basis, ell)


# -- general spectra ---------------------------------------------------------


@dataclass(frozen=True)
class TabulatedSpectrum1D:
    """Nonnegative even spectrum sampled on kappa >= 0; linear interpolation, zero beyond the table."""

    kappa: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if kappa.ndim != 1 or kappa.shape != values.shape:
            raise ValueError("kappa and values must be 1-D arrays of equal length")
        if np.any(np.diff(kappa) <= 0):
            raise ValueError("kappa samples must be strictly increasing")
        if np.any(values < 0):
            raise NegativeSpectrum("spectral table contains negative values")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "values", values)

    def __call__(self, kappa):
        return np.interp(np.abs(kappa), self.kappa, self.values, right=0.0)


@dataclass(frozen=True)
class TabulatedSpectrum2D:
    """Nonnegative spectrum R(p, kappa), even in each argument, on a tensor grid of p, kappa >= 0."""

    p: np.ndarray
    kappa: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        kappa = np.asarray(self.kappa, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (p.size, kappa.size):
            raise ValueError("values must have shape (len(p), len(kappa))")
        if np.any(values < 0):
            raise NegativeSpectrum("spectral table contains negative values")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "values", values)
        interp = RegularGridInterpolator((p, kappa), values, bounds_error=False, fill_value=0.0)
        object.__setattr__(self, "_interp", interp)

    def __call__(self, p, kappa):
        p, kappa = np.broadcast_arrays(np.abs(p), np.abs(kappa))
        pts = np.stack([p.ravel(), kappa.ravel()], axis=-1)
        return self._interp(pts).reshape(p.shape)


@dataclass(frozen=True)
class ScatteringSpectra:
    """Spectral data entering the general coupling formula.

    Each spectrum is the Fourier transform of an autocorrelation in its
    dimensionless argument(s).  ``R_nu`` is a function of (p, kappa) for a
    medium stationary in both directions; ``R_nu_jq`` may instead give the
    projected spectrum directly as a function of (j, q, kappa).  Missing
    entries contribute nothing.
    """

    ell: float
    R_B: Optional[Callable] = None
    R_T: Optional[Callable] = None
    R_nu: Optional[Callable] = None
    R_nu_jq: Optional[Callable] = None
    eps_c: float = 1.0
    eps_B: float = 1.0
    eps_T: float = 1.0


def projected_medium_spectrum(R_nu: Callable, ell: float, X: float) -> Callable:
    """R_nu_jq(kappa) for a medium stationary in cross-range, valid for l << X."""

    def R_jq(j, q, kappa):
        a = math.pi * ell / X
        return (ell / (2 * X)) * (R_nu(a * (j - q), kappa) + R_nu(a * (j + q), kappa))

    return R_jq


def gamma_general(basis: ModeBasis, spectra: ScatteringSpectra) -> np.ndarray:
    """Gamma^(c) for all (j, q), diagonal included, from arbitrary spectra."""
    ell = spectra.ell
    _check_ell(ell, basis.X)
    n = basis.N
    j = np.arange(1, n + 1, dtype=float)
    J, Q = np.meshgrid(j, j, indexing="ij")
    b = basis.beta
    bb = np.outer(b, b)
    kappa = ell * (b[:, None] - b[None, :])
    out = np.zeros((n, n))

    def _nonneg(v, name):
        v = np.asarray(v, dtype=float)
        if np.any(v < 0):
            raise NegativeSpectrum(f"{name} returned negative values")
        return v

    boundary = np.zeros((n, n))
    if spectra.R_B is not None:
        boundary += spectra.eps_B**2 * _nonneg(spectra.R_B(kappa), "R_B")
    if spectra.R_T is not None:
        boundary += spectra.eps_T**2 * _nonneg(spectra.R_T(kappa), "R_T")
    out += math.pi**4 * ell * (J * Q) ** 2 / (bb * basis.X**4) * boundary

    R_jq = spectra.R_nu_jq
    if R_jq is None and spectra.R_nu is not None:
        R_jq = projected_medium_spectrum(spectra.R_nu, ell, basis.X)
    if R_jq is not None:
        med = _nonneg(R_jq(J, Q, kappa), "R_nu_jq")
        out += spectra.eps_c**2 * basis.k**4 * ell / (4 * bb) * med
    return 0.5 * (out + out.T)


def gaussian_medium_spectrum(p, kappa):
    """Fourier transform of exp(-(s1^2 + s2^2)/2)."""
    return 2 * math.pi * np.exp(-0.5 * (np.asarray(p) ** 2 + np.asarray(kappa) ** 2))


def gaussian_boundary_spectrum(kappa):
    """Fourier transform of exp(-s^2/2)."""
    return math.sqrt(2 * math.pi) * np.exp(-0.5 * np.asarray(kappa) ** 2)


# -- assembly and spectrum ---------------------------------------------------


def assemble_gamma(offdiag: np.ndarray) -> np.ndarray:
    """Return Gamma with the conservative diagonal Gamma_jj = -sum_{q != j} Gamma_jq."""
    g = np.array(offdiag, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("off-diagonal couplings must form a square matrix")
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(g, -g.sum(axis=1))
    return g


def mean_free_paths(gamma_c: np.ndarray, allow_infinite: bool = False) -> np.ndarray:
    """S_j = 2 / sum_q Gamma^(c)_jq (diagonal term included)."""
    gc = np.asarray(gamma_c, dtype=float)
    if np.any(gc < 0):
        raise ValueError("Gamma^(c) must be entrywise nonnegative")
    rows = gc.sum(axis=1)
    zero = rows == 0
    if np.any(zero) and not allow_infinite:
        raise ZeroScattering(f"modes {list(np.nonzero(zero)[0] + 1)} do not scatter")
    with np.errstate(divide="ignore"):
        return np.where(zero, np.inf, 2.0 / np.where(zero, 1.0, rows))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    U: np.ndarray
    near_degenerate: bool
    min_gap: float


def spectral_decomposition(gamma: np.ndarray) -> Spectrum:
    """Eigenpairs of symmetric Gamma sorted by decreasing eigenvalue.

    Each eigenvector is signed so that its largest-magnitude entry is
    positive.  The leading eigenvalue is set to exactly 0 when it is zero to
    rounding.
    """
    g = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(g)):
        raise EigensolveFailure("Gamma has non-finite entries")
    try:
        lam, U = np.linalg.eigh(g)
    except np.linalg.LinAlgError as exc:
        raise EigensolveFailure(str(exc)) from exc
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    U = U[:, order]
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    scale = np.linalg.norm(g, 2) if g.size else 0.0
    if lam.size and abs(lam[0]) <= 1e-12 * max(scale, 1e-300):
        lam[0] = 0.0
    gaps = -np.diff(lam)
    min_gap = float(gaps.min()) if gaps.size else math.inf
    near = bool(gaps.size and min_gap < DEGENERACY_RTOL * scale)
    lam.flags.writeable = False
    U.flags.writeable = False
    return Spectrum(lam, U, near, min_gap)


def equipartition_distance(eigenvalues) -> float:
    lam = np.asarray(getattr(eigenvalues, "eigenvalues", eigenvalues))
    if lam.size < 2 or lam[1] == 0:
        raise EquipartitionUndefined("second eigenvalue is zero")
    return 1.0 / abs(lam[1])


@dataclass(frozen=True)
class ScatteringModel:
    """Coupling matrix Gamma with spectrum, mean free paths and L_eq."""

    omega: float
    gamma: np.ndarray
    gamma_c: np.ndarray
    eigenvalues: np.ndarray
    U: np.ndarray
    mean_free_paths: np.ndarray
    L_eq: float
    near_degenerate: bool = False
    min_gap: float = field(default=math.inf, repr=False)

    @property
    def N(self) -> int:
        return self.gamma.shape[0]


def model_from_gamma_c(omega: float, gamma_c: np.ndarray) -> ScatteringModel:
    gc = np.array(gamma_c, dtype=float)
    gamma = assemble_gamma(gc)
    spec = spectral_decomposition(gamma)
    try:
        leq = equipartition_distance(spec.eigenvalues)
    except EquipartitionUndefined:
        leq = math.inf
    gamma.flags.writeable = False
    gc.flags.writeable = False
    mfp = mean_free_paths(gc, allow_infinite=True)
    mfp.flags.writeable = False
    return ScatteringModel(
        omega=float(omega),
        gamma=gamma,
        gamma_c=gc,
        eigenvalues=spec.eigenvalues,
        U=spec.U,
        mean_free_paths=mfp,
        L_eq=leq,
        near_degenerate=spec.near_degenerate,
        min_gap=spec.min_gap,
    )


def gaussian_gamma_c(config: WaveguideConfig, basis: ModeBasis, ell: Optional[float] = None) -> np.ndarray:
    """Gamma^(c) of the Gaussian fluctuation models selected by ``config``."""
    ell = config.ell if ell is None else ell
    kind = config.fluctuation_kind
    gc = np.zeros((basis.N, basis.N))
    if kind in (FluctuationKind.MEDIUM, FluctuationKind.BOTH):
        gc += config.eps_c**2 * gamma_c_medium_gaussian(basis, ell, config.k_o)
    if kind in (FluctuationKind.BOUNDARY, FluctuationKind.BOTH):
        w = config.eps_T**2 + config.eps_B**2
        gc += w * gamma_c_boundary_gaussian(basis, ell)
    return gc


def build_model(config: WaveguideConfig, omega: Optional[float] = None) -> tuple[ModeBasis, ScatteringModel]:
    """Mode basis and Gaussian scattering model at ``omega`` (default omega_o)."""
    omega = config.omega_o if omega is None else omega
    basis = mode_basis(omega, config)
    return basis, model_from_gamma_c(omega, gaussian_gamma_c(config, basis))


def block_index(U: np.ndarray, rows: int = 3, threshold: float = 0.05) -> int:
    """Smallest j* with max_{j <= rows, r > j*} |U[j, r]| < threshold (1-based)."""
    A = np.abs(np.asarray(U))[:rows]
    n = A.shape[1]
    # tail[r] = max over 0-based columns >= r; j* (1-based) constrains columns >= j*
    tail = np.maximum.accumulate(A.max(axis=0)[::-1])[::-1]
    for jstar in range(n):
        if tail[jstar] < threshold:
            return jstar
    return n


# -- aperture ----------------------------------------------------------------


@dataclass(frozen=True)
class ApertureCoupling:
    aperture: tuple
    Q: np.ndarray
    Qsq: np.ndarray
    diag_dominant: bool
    qsq_diag_dominant: bool


def _diag_dominant(A: np.ndarray) -> bool:
    d = np.abs(np.diag(A))
    off = np.abs(A).sum(axis=1) - d
    return bool(np.all(off < d))


def aperture_coupling(aperture, basis) -> ApertureCoupling:
    """Q_jq = integral over the aperture of phi_j phi_q, in closed form."""
    a_lo, a_hi = (float(v) for v in aperture)
    X = basis.X
    n = basis.N
    if a_hi <= a_lo:
        raise EmptyAperture(f"aperture [{a_lo}, {a_hi}] is empty")
    if a_lo < 0 or a_hi > X:
        raise OutOfDomain(f"aperture must lie inside [0, {X}]")
    if a_lo == 0 and a_hi == X:
        Q = np.eye(n)
    else:
        j = np.arange(1, n + 1, dtype=float)
        dm = j[:, None] - j[None, :]
        sm = j[:, None] + j[None, :]

        def F(m, x):
            safe = np.where(m == 0, 1.0, m)
            return np.where(m == 0, x, X * np.sin(math.pi * safe * x / X) / (math.pi * safe))

        Q = (F(dm, a_hi) - F(dm, a_lo) - F(sm, a_hi) + F(sm, a_lo)) / X
        Q = 0.5 * (Q + Q.T)
    Qsq = Q**2
    Q.flags.writeable = False
    Qsq.flags.writeable = False
    return ApertureCoupling((a_lo, a_hi), Q, Qsq, _diag_dominant(Q), _diag_dominant(Qsq))


def top_aperture_formula(A: float, basis) -> np.ndarray:
    """Entrywise delta/sinc expression for the top aperture [X - A, X].

    The off-diagonal sign convention follows the published expression, which
    is the negative of the direct integral; squared entries agree exactly.
    """
    X = basis.X
    j = np.arange(1, basis.N + 1, dtype=float)
    J, Q = np.meshgrid(j, j, indexing="ij")
    frac = 1 - A / X

    def sinc(v):
        return np.sinc(v / math.pi)

    off = sinc(math.pi * (J + Q) * frac) - sinc(math.pi * (J - Q) * frac)
    diag = 1 - sinc(2 * math.pi * J * frac)
    return np.eye(basis.N) - frac * np.where(J == Q, diag, off)
