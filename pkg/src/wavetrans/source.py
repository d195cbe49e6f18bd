"""Separable sources and the forward maps to mode energies and cross-correlation traces.

All forward quantities are reported without the pulse prefactor
||f||^2 / (4B); every inversion is invariant to it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.special import wofz

from .errors import DegenerateSpectrum, DimensionMismatch, GridTooCoarse, OutOfDomain, UnsupportedProfile
from .modes import ModeBasis
from .scattering import ApertureCoupling, ScatteringModel
from .transport import kernel_hat, propagator, transport_speeds

H_EXTENT = 6.0  # h-integral truncated at |h| <= H_EXTENT * H
MAX_DH_FRACTION = 1.0 / 8.0


# -- profiles ------------------------------------------------------------------


@dataclass(frozen=True)
class PointAt:
    x: float


@dataclass(frozen=True)
class GaussianAt:
    """Normalized Gaussian density centred at x_o with standard deviation sigma."""

    x_o: float
    sigma: float


@dataclass(frozen=True)
class TabulatedOn:
    """Samples of a profile on a grid (cross-range on [0, X], or range)."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 3:
            raise ValueError("tabulated profile needs matching 1-D grid and values (>= 3 samples)")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Delta:
    pass


@dataclass(frozen=True)
class GaussianWidth:
    s: float


CrossRangeProfile = Union[PointAt, GaussianAt, TabulatedOn]
RangeProfile = Union[Delta, GaussianWidth, TabulatedOn]


@dataclass(frozen=True)
class SeparableSource:
    xi: CrossRangeProfile
    zeta: RangeProfile = Delta()

    def validate(self, X: float) -> None:
        xi = self.xi
        if isinstance(xi, PointAt):
            if not 0 <= xi.x <= X:
                raise OutOfDomain(f"point source at {xi.x} lies outside [0, {X}]")
        elif isinstance(xi, GaussianAt):
            if not xi.sigma > 0:
                raise ValueError("Gaussian width must be positive")
            if not 3 * xi.sigma < min(xi.x_o, X - xi.x_o):
                raise OutOfDomain("Gaussian profile must have 3 sigma inside (0, X)")
        elif isinstance(xi, TabulatedOn):
            if xi.grid[0] < 0 or xi.grid[-1] > X:
                raise OutOfDomain("tabulated cross-range profile must lie in [0, X]")
        else:
            raise UnsupportedProfile(f"unsupported cross-range profile {type(xi).__name__}")
        if isinstance(self.zeta, GaussianWidth) and not self.zeta.s > 0:
            raise ValueError("range width must be positive")
        if not isinstance(self.zeta, (Delta, GaussianWidth, TabulatedOn)):
            raise UnsupportedProfile(f"unsupported range profile {type(self.zeta).__name__}")


def xi_coefficients(xi: CrossRangeProfile, X: float, n: int) -> np.ndarray:
    """Sine coefficients xi_l = int_0^X xi(x) phi_l(x) dx for l = 1..n."""
    l = np.arange(1, n + 1, dtype=float)
    a = math.pi * l / X
    if isinstance(xi, PointAt):
        return math.sqrt(2 / X) * np.sin(a * xi.x)
    if isinstance(xi, GaussianAt):
        # int_0^X N(x; x_o, sigma) e^{i a x} dx, exact on the finite interval.
        # With z = u - i v the erf difference grows like e^{v^2} while the
        # Gaussian factor decays like e^{-v^2}; writing erf through the
        # Faddeeva function w keeps both bounded for large a.
        s2 = xi.sigma * math.sqrt(2)
        v = a * xi.sigma / math.sqrt(2)
        u1 = (X - xi.x_o) / s2
        u0 = -xi.x_o / s2
        t1 = np.exp(-(u1**2) + 2j * u1 * v) * wofz(v + 1j * u1)
        t0 = np.exp(-(u0**2) + 2j * u0 * v) * wofz(-v - 1j * u0)
        val = np.exp(1j * a * xi.x_o) * 0.5 * (2 * np.exp(-(v**2)) - t1 - t0)
        return math.sqrt(2 / X) * val.imag
    if isinstance(xi, TabulatedOn):
        phi = math.sqrt(2 / X) * np.sin(np.outer(a, xi.grid))
        return simpson(phi * xi.values, x=xi.grid, axis=1)
    raise UnsupportedProfile(f"unsupported cross-range profile {type(xi).__name__}")


def zeta_transform_sq(zeta: RangeProfile, beta) -> np.ndarray:
    """|zeta_hat(beta)|^2 with zeta_hat(beta) = int zeta(z) e^{-i beta z} dz."""
    beta = np.asarray(beta, dtype=float)
    if isinstance(zeta, Delta):
        return np.ones_like(beta)
    if isinstance(zeta, GaussianWidth):
        return np.exp(-((beta * zeta.s) ** 2))
    if isinstance(zeta, TabulatedOn):
        ph = np.exp(-1j * np.multiply.outer(beta, zeta.grid))
        val = simpson(ph * zeta.values, x=zeta.grid, axis=-1)
        return np.abs(val) ** 2
    raise UnsupportedProfile(f"unsupported range profile {type(zeta).__name__}")


@dataclass(frozen=True)
class SourceSpectrum:
    """Squared Fourier data of a separable source at one mode basis.

    ``rho_hat[l-1, q-1] = |xi_l|^2 |zeta_hat(beta_q)|^2``.
    """

    xi_coef: np.ndarray
    xi_hat: np.ndarray
    zeta_hat: np.ndarray
    rho_hat: np.ndarray
    source: Optional[SeparableSource] = None

    @property
    def N(self) -> int:
        return self.xi_hat.size


def source_spectrum(source: SeparableSource, basis: ModeBasis) -> SourceSpectrum:
    source.validate(basis.X)
    coef = xi_coefficients(source.xi, basis.X, basis.N)
    xi_sq = coef**2
    z_sq = zeta_transform_sq(source.zeta, basis.beta)
    return SourceSpectrum(coef, xi_sq, z_sq, np.outer(xi_sq, z_sq), source)


def spectrum_from_arrays(xi_sq, zeta_sq) -> SourceSpectrum:
    """SourceSpectrum from given |xi_l|^2 and |zeta_hat(beta_q)|^2 vectors."""
    xi_sq = np.asarray(xi_sq, dtype=float)
    zeta_sq = np.asarray(zeta_sq, dtype=float)
    if xi_sq.shape != zeta_sq.shape:
        raise DimensionMismatch("xi and zeta data must have the same length")
    return SourceSpectrum(np.sqrt(np.clip(xi_sq, 0, None)), xi_sq, zeta_sq, np.outer(xi_sq, zeta_sq))


# -- data vector ---------------------------------------------------------------


class Provenance(str, enum.Enum):
    MODEL = "model"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class EnergyDataset:
    M: np.ndarray
    Z: float
    provenance: Provenance = Provenance.MODEL
    tau: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None  # shape (len(tau), N)


def _check_dims(spectrum: SourceSpectrum, model: ScatteringModel, aperture: ApertureCoupling, basis: ModeBasis):
    n = basis.N
    if model.N != n or spectrum.rho_hat.shape != (n, n) or aperture.Qsq.shape != (n, n):
        raise DimensionMismatch(
            f"sizes differ: basis N={n}, model N={model.N}, spectrum {spectrum.rho_hat.shape}, "
            f"aperture {aperture.Qsq.shape}"
        )


def weight_tensor(spectrum: SourceSpectrum, aperture: ApertureCoupling, basis: ModeBasis) -> np.ndarray:
    """A[j, q, l] = Q_jq^2 |rho_l(beta_q)|^2 / (beta_l beta_q)."""
    b = basis.beta
    rho_ql = spectrum.rho_hat.T / np.outer(b, b)  # [q, l]
    return aperture.Qsq[:, :, None] * rho_ql[None, :, :]


def forward_data_vector(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    basis: ModeBasis,
) -> np.ndarray:
    """M_j = sum_{q,l} Q_jq^2 |rho_l(beta_q)|^2 / (beta_l beta_q) [exp(Gamma Z)]_ql."""
    _check_dims(spectrum, model, aperture, basis)
    if Z < 0:
        raise ValueError("Z must be nonnegative")
    P = propagator(model, Z)
    return np.einsum("jql,ql->j", weight_tensor(spectrum, aperture, basis), P)


def forward_data_vector_matrix(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    basis: ModeBasis,
) -> np.ndarray:
    """Matrix form: Qsq diag(|zeta|^2) B^-1 sum_r e^{Lambda_r Z} u_r u_r^T B^-1 |xi|^2.

    Needs a separable spectrum (rho_hat of rank one).
    """
    _check_dims(spectrum, model, aperture, basis)
    binv = 1.0 / basis.beta
    y = binv * spectrum.xi_hat
    acc = np.zeros(basis.N)
    for r in range(model.N):
        u = model.U[:, r]
        acc += math.exp(model.eigenvalues[r] * Z) * u * (u @ y)
    return aperture.Qsq @ (spectrum.zeta_hat * binv * acc)


# -- traces --------------------------------------------------------------------


def psi(t):
    """Window bump psi(t) = exp(-t^2/2)/sqrt(2 pi); its transform is exp(-u^2/2)."""
    return np.exp(-0.5 * np.asarray(t) ** 2) / math.sqrt(2 * math.pi)


def psi_hat(u):
    return np.exp(-0.5 * np.asarray(u) ** 2)


def default_tau_grid(basis: ModeBasis, Z: float, H: float, n: int = 512) -> np.ndarray:
    lo = Z * basis.beta_prime.min() - H_EXTENT / H
    hi = Z * basis.beta_prime.max() + H_EXTENT / H
    return np.linspace(lo, hi, n)


def h_grid_for(basis: ModeBasis, Z: float, H: float, tau: np.ndarray, dh: Optional[float] = None) -> np.ndarray:
    """Symmetric trapezoid grid on [-6H, 6H] fine enough that the implied period avoids aliasing."""
    if dh is not None:
        if dh > MAX_DH_FRACTION * H:
            raise GridTooCoarse(f"h spacing {dh:g} exceeds H/8 = {H / 8:g}")
    else:
        lo = min(tau.min(), Z * basis.beta_prime.min() - H_EXTENT / H)
        hi = max(tau.max(), Z * basis.beta_prime.max() + H_EXTENT / H)
        dh = min(MAX_DH_FRACTION * H, 2 * math.pi / (1.2 * (hi - lo)))
    m = int(math.ceil(H_EXTENT * H / dh))
    return dh * np.arange(-m, m + 1)


def forward_crosscorr(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    H: float,
    basis: ModeBasis,
    tau: Optional[np.ndarray] = None,
    dh: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Expected cross-correlation traces C_j(tau); returns (tau, C) with C of shape (len(tau), N)."""
    _check_dims(spectrum, model, aperture, basis)
    if not H > 0:
        raise ValueError("H must be positive")
    tau = default_tau_grid(basis, Z, H) if tau is None else np.asarray(tau, dtype=float)
    h = h_grid_for(basis, Z, H, tau, dh)
    A = weight_tensor(spectrum, aperture, basis)
    # only h >= 0 is needed: the integrand at -h is the conjugate of that at h
    hp = h[h >= 0]
    G = np.empty((hp.size, basis.N), dtype=complex)
    for i, hv in enumerate(hp):
        G[i] = np.einsum("jql,ql->j", A, kernel_hat(model, basis, hv, Z))
    w = np.full(hp.size, 2.0)
    w[0] = 1.0  # h = 0 counted once
    w[-1] = 1.0  # trapezoid end point
    w *= (h[1] - h[0]) * psi_hat(hp / H) / (2 * math.pi)
    phase = np.exp(-1j * np.outer(tau, hp))
    C = np.real(phase @ (w[:, None] * G))
    return tau, C


def perturbative_weights(
    spectrum: SourceSpectrum, model: ScatteringModel, aperture: ApertureCoupling, basis: ModeBasis
) -> np.ndarray:
    """W[j, r] = sum_{q,l} A[j,q,l] u_qr u_lr; entries may be negative."""
    A = weight_tensor(spectrum, aperture, basis)
    U = model.U
    return np.einsum("jql,qr,lr->jr", A, U, U)


def forward_crosscorr_perturbative(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    H: float,
    basis: ModeBasis,
    tau: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Superposition of N pulses H psi(H(tau - Z/V_r)) damped by exp(-|Lambda_r| Z)."""
    _check_dims(spectrum, model, aperture, basis)
    if model.near_degenerate:
        raise DegenerateSpectrum("perturbative traces need distinct eigenvalues")
    tau = default_tau_grid(basis, Z, H) if tau is None else np.asarray(tau, dtype=float)
    V = transport_speeds(model, basis)
    W = perturbative_weights(spectrum, model, aperture, basis)
    decay = np.exp(-np.abs(model.eigenvalues) * Z)
    pulses = H * psi(H * (tau[:, None] - Z / V[None, :]))  # (tau, r)
    return tau, pulses @ (decay[:, None] * W.T)


def integrate_traces(tau: np.ndarray, C: np.ndarray) -> np.ndarray:
    """M_j = int C_j dtau / psi_hat(0) by the trapezoid rule."""
    return trapezoid(C, tau, axis=0) / float(psi_hat(0.0))
