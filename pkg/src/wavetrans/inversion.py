"""Inversions: source range, range profile, cross-range profile, wideband location."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from .errors import (
    AtBoundary,
    CutoffTooAggressive,
    DimensionMismatch,
    IllConditionedAperture,
    NoPeaks,
    TooFewModes,
)
from .modes import ModeBasis, WaveguideConfig, cutoff_ratio, mode_basis
from .nnls import NNLSResult, nnls
from .scattering import ApertureCoupling, ScatteringModel
from .source import SourceSpectrum, forward_crosscorr, forward_crosscorr_perturbative, spectrum_from_arrays
from .transport import propagator

PROMINENCE_MIN = 0.05
ENERGY_MIN = 0.01
DEFAULT_AMPLIFICATION_CAP = 10.0
QUALITY_PROMINENCE = 0.1
QUALITY_BOUND = 0.1
RANK_RTOL = 2.0**-46


# -- peak times and range -----------------------------------------------------------


def peak_time(tau: np.ndarray, trace: np.ndarray) -> float:
    """Peak location by a parabola through the discrete maximum and its neighbours.

    ``argmax`` returns the first maximum, so ties resolve toward earlier tau.
    """
    i = int(np.argmax(trace))
    if i == 0 or i == trace.size - 1:
        return float(tau[i])
    y0, y1, y2 = trace[i - 1], trace[i], trace[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom >= 0:
        return float(tau[i])
    off = 0.5 * (y0 - y2) / denom
    return float(tau[i] + off * (tau[i + 1] - tau[i]))


def _has_peak(trace: np.ndarray) -> bool:
    top = trace.max()
    if not top > 0:
        return False
    padded = np.concatenate([[trace.min()], trace, [trace.min()]])
    peaks, props = find_peaks(padded, prominence=PROMINENCE_MIN * top)
    return peaks.size > 0


@dataclass(frozen=True)
class MeasuredPeaks:
    times: np.ndarray
    weights: np.ndarray
    used: np.ndarray  # boolean mask over modes


def measure_peaks(tau, C, weights=None) -> MeasuredPeaks:
    """Peak times of each trace (columns of C); weak or peakless modes are excluded."""
    tau = np.asarray(tau, dtype=float)
    C = np.asarray(C, dtype=float)
    n = C.shape[1]
    energy = trapezoid(C, tau, axis=0)
    used = energy >= ENERGY_MIN * energy.max() if energy.max() > 0 else np.zeros(n, bool)
    times = np.full(n, np.nan)
    for j in range(n):
        if used[j] and _has_peak(C[:, j]):
            times[j] = peak_time(tau, C[:, j])
        else:
            used[j] = False
    if not used.any():
        raise NoPeaks("no trace has an identifiable peak")
    w = C.max(axis=0) if weights is None else np.asarray(weights, dtype=float)
    return MeasuredPeaks(times, np.where(used, w, 0.0), used)


@dataclass
class PeakTimeModel:
    """Model peak times tau_j(Z) from the perturbative pulse superposition.

    The source enters only through pulse weights; by default every mode is
    excited equally.  With ``exact=True`` the traces come from the full
    kernel instead, which removes the first-order bias at a higher cost.
    """

    model: ScatteringModel
    basis: ModeBasis
    aperture: ApertureCoupling
    H: float
    spectrum: Optional[SourceSpectrum] = None
    n_tau: int = 2048
    exact: bool = False

    def __post_init__(self):
        if self.spectrum is None:
            n = self.basis.N
            self.spectrum = spectrum_from_arrays(np.ones(n), np.ones(n))

    def __call__(self, Z: float) -> np.ndarray:
        b = self.basis
        tau = np.linspace(
            Z * b.beta_prime.min() - 6 / self.H, Z * b.beta_prime.max() + 6 / self.H, self.n_tau
        )
        fwd = forward_crosscorr if self.exact else forward_crosscorr_perturbative
        _, C = fwd(self.spectrum, self.model, self.aperture, Z, self.H, b, tau=tau)
        return np.array([peak_time(tau, C[:, j]) for j in range(b.N)])


@dataclass(frozen=True)
class RangeEstimate:
    Z_hat: float
    Z_grid: np.ndarray
    misfit: np.ndarray
    used_modes: np.ndarray
    ell_hat: Optional[float] = None
    ell_grid: Optional[np.ndarray] = None
    misfit_2d: Optional[np.ndarray] = None


def _misfit(peaks: MeasuredPeaks, model_times: np.ndarray) -> float:
    u = peaks.used
    return float(np.sum(peaks.weights[u] * (peaks.times[u] - model_times[u]) ** 2))


def estimate_range(
    tau,
    C,
    model_peaks: Callable[[float], np.ndarray],
    Z_grid: Sequence[float],
    weights=None,
) -> RangeEstimate:
    """Grid search for the range minimizing the weighted peak-time misfit."""
    peaks = measure_peaks(tau, C, weights)
    Z_grid = np.asarray(Z_grid, dtype=float)
    misfit = np.array([_misfit(peaks, model_peaks(Z)) for Z in Z_grid])
    i = int(np.argmin(misfit))
    if i == 0 or i == Z_grid.size - 1:
        raise AtBoundary(f"misfit minimum at the search-grid edge Z = {Z_grid[i]:g}")
    return RangeEstimate(float(Z_grid[i]), Z_grid, misfit, peaks.used)


def estimate_range_and_ell(
    tau,
    C,
    peak_model_for_ell: Callable[[float], Callable[[float], np.ndarray]],
    Z_grid: Sequence[float],
    ell_grid: Sequence[float],
    weights=None,
) -> RangeEstimate:
    """Joint grid scan over (Z, ell).  The returned ell is only as good as the assumed spectrum family."""
    peaks = measure_peaks(tau, C, weights)
    Z_grid = np.asarray(Z_grid, dtype=float)
    ell_grid = np.asarray(ell_grid, dtype=float)
    mis = np.empty((ell_grid.size, Z_grid.size))
    for a, ell in enumerate(ell_grid):
        pm = peak_model_for_ell(ell)
        mis[a] = [_misfit(peaks, pm(Z)) for Z in Z_grid]
    a, i = np.unravel_index(int(np.argmin(mis)), mis.shape)
    if i == 0 or i == Z_grid.size - 1:
        raise AtBoundary(f"misfit minimum at the search-grid edge Z = {Z_grid[i]:g}")
    return RangeEstimate(float(Z_grid[i]), Z_grid, mis[a], peaks.used, float(ell_grid[a]), ell_grid, mis)


# -- case 1: range profile ----------------------------------------------------------


def _solve_qsq(aperture: ApertureCoupling, M: np.ndarray) -> np.ndarray:
    if not aperture.qsq_diag_dominant:
        raise IllConditionedAperture("squared coupling matrix is not strictly diagonally dominant")
    return np.linalg.solve(aperture.Qsq, M)


@dataclass(frozen=True)
class RangeProfileEstimate:
    zeta_sq: np.ndarray  # NaN where withheld
    eta: np.ndarray
    withheld: np.ndarray


def invert_range_profile(
    M,
    xi_sq,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    basis: ModeBasis,
    eta_rtol: float = 1e-12,
) -> RangeProfileEstimate:
    """|zeta_hat(beta_j)|^2 = beta_j (Qsq^-1 M)_j / eta_j with eta = exp(Gamma Z) B^-1 |xi|^2."""
    M = np.asarray(M, dtype=float)
    xi_sq = np.asarray(xi_sq, dtype=float)
    if M.shape != (basis.N,) or xi_sq.shape != (basis.N,):
        raise DimensionMismatch("M and xi data must have length N")
    eta = propagator(model, Z) @ (xi_sq / basis.beta)
    y = _solve_qsq(aperture, M)
    withheld = np.abs(eta) <= eta_rtol * np.abs(eta).max()
    est = np.full(basis.N, np.nan)
    ok = ~withheld
    est[ok] = basis.beta[ok] * y[ok] / eta[ok]
    return RangeProfileEstimate(est, eta, withheld)


# -- case 2: cross-range profile ------------------------------------------------------


class Quality(str, enum.Enum):
    GOOD = "good"
    POOR = "poor"


@dataclass(frozen=True)
class Autocorrelation:
    x: np.ndarray
    R: np.ndarray
    x_m: Optional[float]
    candidates: Optional[tuple]
    prominence: float  # normalized by the range of R; 0 if no interior minimum


def autocorrelation_xi(xi_sq, J: int, X: float, x=None) -> Autocorrelation:
    """R(x) = 2 sum_{j<=J} |xi_j|^2 cos(pi j x / X) and its deepest interior minimum."""
    xi_sq = np.asarray(xi_sq, dtype=float)
    if J < 1:
        raise ValueError("J must be at least 1")
    J = min(J, xi_sq.size)
    x = np.linspace(0.0, X, 512) if x is None else np.asarray(x, dtype=float)
    j = np.arange(1, J + 1)
    R = 2 * np.cos(np.pi * np.outer(x, j) / X) @ xi_sq[:J]
    span = R.max() - R.min()
    peaks, props = find_peaks(-R, prominence=0.0)
    if peaks.size == 0 or span <= 0:
        return Autocorrelation(x, R, None, None, 0.0)
    k = int(np.argmin(R[peaks]))
    i = int(peaks[k])
    x_m = float(x[i])
    y0, y1, y2 = R[i - 1], R[i], R[i + 1]
    d = y0 - 2 * y1 + y2
    if d > 0:
        x_m = float(x[i] + 0.5 * (y0 - y2) / d * (x[i + 1] - x[i]))
    prom = float(props["prominences"][k] / span)
    return Autocorrelation(x, R, x_m, (x_m / 2, X - x_m / 2), prom)


def gaussian_autocorrelation(x, x_o: float, sigma: float):
    """Three-Gaussian closed form for a Gaussian profile well inside the waveguide."""
    s = math.sqrt(2) * sigma

    def n(v):
        return np.exp(-0.5 * (v / s) ** 2) / (math.sqrt(2 * math.pi) * s)

    x = np.asarray(x, dtype=float)
    return 2 * n(x) - n(x - 2 * x_o) - n(x + 2 * x_o)


@dataclass(frozen=True)
class CrossRangeEstimate:
    J: int
    xi_sq_hat: np.ndarray
    X_J: np.ndarray
    error_bound: np.ndarray
    clipped: bool
    amplification: float
    autocorrelation: Autocorrelation
    weighted_bound: float
    quality: Quality

    @property
    def candidates(self):
        return self.autocorrelation.candidates


def error_bounds(U: np.ndarray, J: int) -> np.ndarray:
    """sqrt(sum_{q > J} u_jq^2) for each row j."""
    return np.sqrt(np.sum(np.asarray(U)[:, J:] ** 2, axis=1))


def invert_crossrange(
    M,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    J: int,
    basis: ModeBasis,
    amplification_cap: float = DEFAULT_AMPLIFICATION_CAP,
    x=None,
) -> CrossRangeEstimate:
    """Spectral cut-off estimate of |xi_j|^2 for a source point-like in range."""
    M = np.asarray(M, dtype=float)
    n = basis.N
    if M.shape != (n,):
        raise DimensionMismatch("M must have length N")
    if not 1 <= J <= n:
        raise ValueError(f"J must lie in 1..{n}")
    lam = model.eigenvalues
    amp = math.exp(abs(lam[J - 1]) * Z)
    if amp > amplification_cap:
        raise CutoffTooAggressive(
            f"exp(|Lambda_J| Z) = {amp:.3g} exceeds the cap {amplification_cap:g}; lower J"
        )
    y = basis.beta * _solve_qsq(aperture, M)
    U = model.U[:, :J]
    X_J = U @ (np.exp(np.abs(lam[:J]) * Z) * (U.T @ y))
    est = basis.beta * X_J
    clipped = bool(np.any(est < 0))
    est = np.clip(est, 0.0, None)
    bound = error_bounds(model.U, J)
    ac = autocorrelation_xi(est, J, basis.X, x)
    total = est.sum()
    wbound = float(np.dot(est / total, bound)) if total > 0 else 1.0
    good = ac.prominence >= QUALITY_PROMINENCE and wbound <= QUALITY_BOUND
    return CrossRangeEstimate(
        J, est, X_J, bound, clipped, amp, ac, wbound, Quality.GOOD if good else Quality.POOR
    )


def unregularized_X(M, model: ScatteringModel, aperture: ApertureCoupling, Z: float, basis: ModeBasis) -> np.ndarray:
    """X = exp(-Gamma Z) B Qsq^-1 M with every spectral term kept."""
    y = basis.beta * _solve_qsq(aperture, np.asarray(M, dtype=float))
    U = model.U
    return U @ (np.exp(np.abs(model.eigenvalues) * Z) * (U.T @ y))


# -- range autocorrelation ------------------------------------------------------------


def autocorrelation_zeta(zeta_sq, basis: ModeBasis, z) -> np.ndarray:
    """R(z) = (1/pi) int_0^k |zeta_hat(beta)|^2 cos(beta z) d beta by trapezoid over the beta_j.

    The samples are extended as constants to beta = 0 and beta = k.
    """
    if basis.N < 8:
        raise TooFewModes(f"need at least 8 modes to sample (0, k), have {basis.N}")
    zeta_sq = np.asarray(zeta_sq, dtype=float)
    order = np.argsort(basis.beta)
    beta = np.concatenate([[0.0], basis.beta[order], [basis.k]])
    vals = zeta_sq[order]
    vals = np.concatenate([[vals[0]], vals, [vals[-1]]])
    z = np.asarray(z, dtype=float)
    integrand = vals[None, :] * np.cos(np.outer(np.abs(z), beta))
    w = np.zeros_like(beta)
    db = np.diff(beta)
    w[:-1] += 0.5 * db
    w[1:] += 0.5 * db
    return (integrand @ w) / math.pi


# -- wideband -------------------------------------------------------------------------


def band_frequencies(config: WaveguideConfig, lo: float, hi: float, step: float = 0.02) -> np.ndarray:
    """round((hi - lo)/step) sub-band frequencies spanning [lo, hi] omega_o.

    Frequencies that put a mode at cutoff are nudged upward by 1e-5 relative.
    """
    m = int(round((hi - lo) / step))
    om = np.linspace(lo, hi, m) * config.omega_o
    for i, w in enumerate(om):
        r = cutoff_ratio(w, config)
        if abs(r - round(r)) < 1e-3:
            om[i] = w * (1 + 1e-5)
    return om


def band_matrix(config: WaveguideConfig, omegas) -> tuple[np.ndarray, list[ModeBasis]]:
    """B with rows (1/beta_1(w_j), ..., 1/beta_{N_j}(w_j), 0, ..., 0)."""
    omegas = np.asarray(omegas, dtype=float)
    if np.any(np.diff(omegas) <= 0):
        raise ValueError("band frequencies must be strictly increasing")
    bases = [mode_basis(w, config) for w in omegas]
    n_max = bases[-1].N
    Bm = np.zeros((omegas.size, n_max))
    for i, b in enumerate(bases):
        Bm[i, : b.N] = 1.0 / b.beta
    return Bm, bases


def numerical_rank(A, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above max(shape) * sigma_max * rtol."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(np.shape(A)) * s[0] * rtol))


def band_theta(xi_sq, bases: Sequence[ModeBasis]) -> np.ndarray:
    """theta_j = (1/N_j) sum_{q <= N_j} |xi_q|^2 / beta_q(w_j)."""
    xi_sq = np.asarray(xi_sq, dtype=float)
    return np.array([np.sum(xi_sq[: b.N] / b.beta) / b.N for b in bases])


def theta_from_data(M, basis: ModeBasis, aperture: ApertureCoupling) -> float:
    """Equipartition estimate of theta from one band's data for a range point-like source."""
    y = _solve_qsq(aperture, np.asarray(M, dtype=float))
    return float(np.mean(basis.beta * y))


@dataclass(frozen=True)
class WidebandSystem:
    omegas: np.ndarray
    theta: np.ndarray
    Bmat: np.ndarray
    rank: int
    rhs: np.ndarray
    gamma_sol: np.ndarray
    nnls: NNLSResult
    x: np.ndarray
    objective: np.ndarray
    minima: np.ndarray  # x locations of local minima sorted by objective value
    minima_values: np.ndarray
    ambiguous: bool

    @property
    def shape(self):
        return self.Bmat.shape


def wideband_objective(gamma, X: float, x) -> np.ndarray:
    """Obj(x) = || (phi_j(x)^2)_j - gamma ||_2."""
    gamma = np.asarray(gamma, dtype=float)
    j = np.arange(1, gamma.size + 1)
    phi2 = (2.0 / X) * np.sin(np.pi * np.outer(np.asarray(x, dtype=float), j) / X) ** 2
    return np.linalg.norm(phi2 - gamma[None, :], axis=1)


def wideband_solve(
    omegas,
    theta,
    config: WaveguideConfig,
    x=None,
    rank_rtol: float = RANK_RTOL,
    ambiguity_rtol: float = 0.05,
) -> WidebandSystem:
    """Nonnegative least squares for the cross-range data of a point-like source over many bands."""
    omegas = np.asarray(omegas, dtype=float)
    theta = np.asarray(theta, dtype=float)
    Bm, bases = band_matrix(config, omegas)
    if theta.shape != (omegas.size,):
        raise DimensionMismatch("one theta value per band is required")
    rhs = np.array([b.N for b in bases]) * theta
    res = nnls(Bm, rhs, max_iter=10 * Bm.shape[1])
    x = np.linspace(0.0, config.X, 512) if x is None else np.asarray(x, dtype=float)
    obj = wideband_objective(res.x, config.X, x)
    idx, _ = find_peaks(-obj)
    order = np.argsort(obj[idx], kind="stable")
    idx = idx[order]
    mins = x[idx]
    vals = obj[idx]
    ambiguous = bool(vals.size > 2 and np.sum(vals <= (1 + ambiguity_rtol) * vals[0]) > 2)
    return WidebandSystem(
        omegas, theta, Bm, numerical_rank(Bm, rank_rtol), rhs, res.x, res, x, obj, mins, vals, ambiguous
    )


DEFAULT_BANDS = {"b1": (1.0, 2.0), "b2": (1.0, 3.0), "b3": (0.5, 3.0)}

