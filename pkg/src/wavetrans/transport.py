"""Frequency-domain transport kernel exp((i h B' + Gamma) Z) and its perturbative form."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateSpectrum, ExpmFailure
from .modes import ModeBasis
from .scattering import ScatteringModel

EIG_COND_LIMIT = 1e8
DEFAULT_H_POINTS = 33


class KernelMethod(str, enum.Enum):
    EXACT = "exact"
    PERTURBATIVE = "perturbative"


def generator(model: ScatteringModel, basis: ModeBasis, h: float) -> np.ndarray:
    return 1j * h * np.diag(basis.beta_prime) + model.gamma


def _check_inputs(h, Z):
    if not (np.isfinite(h) and np.isfinite(Z)):
        raise ExpmFailure(f"non-finite input h={h!r}, Z={Z!r}")
    if Z < 0:
        raise ValueError(f"Z must be nonnegative, got {Z!r}")


def kernel_hat(model: ScatteringModel, basis: ModeBasis, h: float, Z: float) -> np.ndarray:
    """exp((i h B' + Gamma) Z) as a complex N x N matrix.

    At h = 0 the real symmetric eigenpairs of Gamma are used.  Otherwise the
    complex generator is diagonalized, falling back to scaling-and-squaring
    when its eigenvector matrix is ill-conditioned.
    """
    _check_inputs(h, Z)
    if Z == 0:
        return np.eye(model.N, dtype=complex)
    if h == 0:
        U = model.U
        return ((U * np.exp(model.eigenvalues * Z)) @ U.T).astype(complex)
    A = generator(model, basis, h)
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) < EIG_COND_LIMIT:
        out = (V * np.exp(lam * Z)) @ np.linalg.inv(V)
    else:
        out = scipy.linalg.expm(A * Z)
    if not np.all(np.isfinite(out)):
        raise ExpmFailure("matrix exponential produced non-finite entries")
    return out


def kernel_hat_expm(model: ScatteringModel, basis: ModeBasis, h: float, Z: float) -> np.ndarray:
    """Same quantity by Pade scaling-and-squaring only."""
    _check_inputs(h, Z)
    return scipy.linalg.expm(generator(model, basis, h) * Z)


def propagator(model: ScatteringModel, Z: float) -> np.ndarray:
    """Real matrix exp(Gamma Z)."""
    if Z < 0:
        raise ValueError("Z must be nonnegative")
    U = model.U
    return (U * np.exp(model.eigenvalues * Z)) @ U.T


@dataclass(frozen=True)
class PerturbedSpectrum:
    h: float
    eigenvalues: np.ndarray
    U: np.ndarray


def _require_distinct(model: ScatteringModel):
    if model.near_degenerate:
        raise DegenerateSpectrum(
            f"eigenvalue gap {model.min_gap:.3g} is below the degeneracy threshold"
        )


def slowness_projections(model: ScatteringModel, basis: ModeBasis) -> np.ndarray:
    """u_r^T B' u_r for each r."""
    return np.einsum("qr,q,qr->r", model.U, basis.beta_prime, model.U)


def perturbed_spectrum(model: ScatteringModel, basis: ModeBasis, h: float) -> PerturbedSpectrum:
    """First-order eigenpairs of i h B' + Gamma around the spectrum of Gamma."""
    _require_distinct(model)
    lam = model.eigenvalues
    U = model.U
    if h == 0:
        return PerturbedSpectrum(0.0, lam.astype(complex), U.astype(complex))
    Bp = U.T @ (basis.beta_prime[:, None] * U)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    coef = Bp / diff.T  # coef[q, j] = u_q^T B' u_j / (lam_j - lam_q)
    np.fill_diagonal(coef, 0.0)
    new_lam = lam + 1j * h * np.diag(Bp)
    new_U = U + 1j * h * (U @ coef)
    return PerturbedSpectrum(float(h), new_lam, new_U)


def kernel_hat_perturbative(model: ScatteringModel, basis: ModeBasis, h: float, Z: float) -> np.ndarray:
    """sum_j exp((Lambda_j + i h u_j^T B' u_j) Z) u_j u_j^T."""
    _require_distinct(model)
    _check_inputs(h, Z)
    lam = model.eigenvalues + 1j * h * slowness_projections(model, basis)
    U = model.U
    return (U * np.exp(lam * Z)) @ U.T


def transport_speeds(model: ScatteringModel, basis: ModeBasis) -> np.ndarray:
    """V_r = 1 / (u_r^T B' u_r)."""
    return 1.0 / slowness_projections(model, basis)


def exact_eigenvalues(model: ScatteringModel, basis: ModeBasis, h: float) -> np.ndarray:
    if h == 0:
        return model.eigenvalues.astype(complex)
    return np.linalg.eigvals(generator(model, basis, h))


def eigenvalue_errors(model: ScatteringModel, basis: ModeBasis, h: float) -> np.ndarray:
    """|exact - first-order| per mode, pairing eigenvalues by minimum total distance."""
    approx = perturbed_spectrum(model, basis, h).eigenvalues
    if h == 0:
        return np.zeros(model.N)
    exact = exact_eigenvalues(model, basis, h)
    cost = np.abs(approx[:, None] - exact[None, :])
    rows, cols = linear_sum_assignment(cost)
    err = np.empty(model.N)
    err[rows] = cost[rows, cols]
    return err


@dataclass(frozen=True)
class PerturbationReport:
    H: float
    ratios: np.ndarray
    h_grid: np.ndarray
    rel_errors: np.ndarray  # shape (len(h_grid), N)
    max_rel_error: np.ndarray  # per mode over the h grid
    perturbative: bool


def perturbation_diagnostics(
    model: ScatteringModel, basis: ModeBasis, H: float, n_h: int = DEFAULT_H_POINTS
) -> PerturbationReport:
    """Diagonal-to-slowness ratios |Gamma_jj|/(H beta'_j) and first-order eigenvalue errors on [-H, H]."""
    if not H > 0:
        raise ValueError("H must be positive")
    ratios = np.abs(np.diag(model.gamma)) / (H * basis.beta_prime)
    h_grid = np.linspace(-H, H, n_h)
    rel = np.zeros((n_h, model.N))
    for i, h in enumerate(h_grid):
        if h == 0:
            continue
        exact = exact_eigenvalues(model, basis, h)
        approx = perturbed_spectrum(model, basis, h).eigenvalues
        cost = np.abs(approx[:, None] - exact[None, :])
        r, c = linear_sum_assignment(cost)
        denom = np.maximum(np.abs(exact[c]), np.finfo(float).tiny)
        rel[i, r] = cost[r, c] / denom
    return PerturbationReport(
        H=float(H),
        ratios=ratios,
        h_grid=h_grid,
        rel_errors=rel,
        max_rel_error=rel.max(axis=0),
        perturbative=bool(np.all(ratios >= 1.0)),
    )


@dataclass(frozen=True)
class TransportKernel:
    """Callable kernel bound to a model, basis and range."""

    model: ScatteringModel
    basis: ModeBasis
    Z: float
    method: KernelMethod = KernelMethod.EXACT

    def __call__(self, h: float) -> np.ndarray:
        if KernelMethod(self.method) is KernelMethod.EXACT:
            return kernel_hat(self.model, self.basis, h, self.Z)
        return kernel_hat_perturbative(self.model, self.basis, h, self.Z)


def equipartition_gap(model: ScatteringModel, Z: float) -> float:
    """max |exp(Gamma Z) - 11^T/N|."""
    n = model.N
    return float(np.abs(propagator(model, Z) - 1.0 / n).max())


def anomalous_dispersion(model: ScatteringModel, basis: ModeBasis) -> np.ndarray:
    """|V_r - 1/beta'_r| beta'_r for r = 1..N."""
    V = transport_speeds(model, basis)
    return np.abs(V * basis.beta_prime - 1.0)
