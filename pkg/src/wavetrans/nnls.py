"""Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NNLSNonConvergence


@dataclass(frozen=True)
class NNLSResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    passive: np.ndarray  # boolean mask of the final passive set


def _ls(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(A, b, rcond=None)[0]


def nnls(A, b, max_iter: Optional[int] = None, tol: Optional[float] = None) -> NNLSResult:
    """Classical Lawson-Hanson NNLS.

    ``max_iter`` caps outer iterations (default 10 * n_columns); exceeding it
    raises NNLSNonConvergence.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"b must have shape ({m},)")
    max_iter = 10 * n if max_iter is None else max_iter
    if tol is None:
        tol = 10 * max(m, n) * np.finfo(float).eps * np.linalg.norm(A, 1) * max(np.linalg.norm(b), 1.0)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while (~passive).any() and w[~passive].max() > tol:
        it += 1
        if it > max_iter:
            raise NNLSNonConvergence(f"no convergence after {max_iter} outer iterations")
        cand = np.where(~passive, w, -np.inf)
        passive[int(np.argmax(cand))] = True
        while True:
            z = np.zeros(n)
            if not passive.any():
                break
            z[passive] = _ls(A[:, passive], b)
            if z[passive].min() > 0:
                break
            # step back toward x until the first passive variable hits zero
            neg = passive & (z <= 0)
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        x = z
        w = A.T @ (b - A @ x)
    return NNLSResult(x, float(np.linalg.norm(A @ x - b)), it, passive)


def kkt_residuals(A, b, x) -> tuple[float, float]:
    """KKT diagnostics for the gradient g = A^T (A x - b).

    Returns (max |g_i| over x_i > 0, min g_i over x_i = 0); at an optimum the
    first is ~0 and the second is >= ~0.
    """
    A = np.asarray(A, dtype=float)
    g = A.T @ (A @ x - np.asarray(b, dtype=float))
    on = x > 0
    on_max = float(np.abs(g[on]).max()) if on.any() else 0.0
    off_min = float(g[~on].min()) if (~on).any() else 0.0
    return on_max, off_min
