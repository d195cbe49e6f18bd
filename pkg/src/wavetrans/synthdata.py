"""Synthetic incoherent mode data and its processing into cross-correlations.

Frequencies are handled in the scaled variable nu = (omega - omega_o) / eps^2
and times in the matching scaled time, so a band of width 2 pi B holds
``n_omega`` samples spaced ``dnu`` apart and the scaled recording duration is
T = 2 pi / dnu.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import GridTooCoarse, LagOutOfRange
from .modes import ModeBasis
from .scattering import ApertureCoupling, ScatteringModel
from .source import SourceSpectrum, forward_crosscorr, psi, psi_hat

PSI_CUTOFF = 8.0  # psi_hat(u) is treated as zero for |u| > PSI_CUTOFF
MIN_HT = 50.0


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("WAVETRANS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ProcessingWindows:
    """Recording and correlation windows.

    ``H`` is the correlation-window bandwidth in scaled units (rad/s).  The
    recording window chi is taken identically one, so ``t_o`` has no effect.
    """

    omega_o: float
    H: float
    eps: float = 0.05
    alpha: float = 1.5
    n_omega: int = 1024
    t_o: float = 0.0
    max_lag: Optional[int] = None
    chi: str = "unit"
    psi: str = "gaussian"

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha!r}")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.n_omega < 1:
            raise ValueError("n_omega must be at least 1")
        if not self.H > 0:
            raise ValueError("H must be positive")
        if self.n_omega > 1 and not self.H * self.T > MIN_HT:
            raise ValueError(f"H*T = {self.H * self.T:.3g} must exceed {MIN_HT:g}")

    @property
    def B(self) -> float:
        return self.omega_o * self.eps**self.alpha

    @property
    def dnu(self) -> float:
        return 2 * math.pi * self.B / (self.eps**2 * self.n_omega)

    @property
    def T(self) -> float:
        """Scaled recording duration, also the period of the synthetic time axis."""
        return 2 * math.pi / self.dnu

    @property
    def nu(self) -> np.ndarray:
        half = math.pi * self.B / self.eps**2
        return -half + (np.arange(self.n_omega) + 0.5) * self.dnu

    @property
    def omega(self) -> np.ndarray:
        return self.omega_o + self.eps**2 * self.nu

    @property
    def lags(self) -> int:
        if self.max_lag is not None:
            k = int(self.max_lag)
        else:
            k = int(math.ceil(PSI_CUTOFF * self.H / self.dnu))
        if k >= self.n_omega and self.n_omega > 1:
            raise LagOutOfRange(f"lag count {k} reaches the frequency grid size {self.n_omega}")
        return min(k, self.n_omega - 1)

    def with_bandwidth_factor(self, factor: float) -> "ProcessingWindows":
        """Same dnu and H, bandwidth scaled by ``factor`` through alpha."""
        alpha = self.alpha - math.log(factor) / math.log(1 / self.eps)
        n = int(round(self.n_omega * factor))
        return replace(self, alpha=alpha, n_omega=n)


# -- projection ----------------------------------------------------------------


def project_modes(samples, x, basis: ModeBasis) -> np.ndarray:
    """D_j = int D(x) phi_j(x) dx over the sampled aperture by composite Simpson.

    ``samples`` may carry leading dimensions; the last axis runs over ``x``.
    """
    x = np.asarray(x, dtype=float)
    samples = np.asarray(samples)
    if x.ndim != 1 or samples.shape[-1] != x.size:
        raise ValueError("samples must have x along the last axis")
    dx = np.diff(x).max() if x.size > 1 else math.inf
    if x.size < 3 or dx > basis.X / (2 * basis.N):
        raise GridTooCoarse(
            f"aperture grid spacing {dx:g} exceeds {basis.X / (2 * basis.N):g} (4 points per oscillation of mode N)"
        )
    phi = basis.phi(basis.j[:, None], x[None, :])
    return simpson(samples[..., None, :] * phi, x=x, axis=-1)


# -- processing ----------------------------------------------------------------


@dataclass(frozen=True)
class CrossCorrelation:
    h: np.ndarray
    C_hat: np.ndarray  # (..., len(h))
    tau: np.ndarray
    C: np.ndarray  # (..., len(tau))


def default_tau(windows: ProcessingWindows, tau0: float = 0.0) -> np.ndarray:
    return tau0 + np.arange(windows.n_omega) * windows.T / windows.n_omega


def crosscorrelate(D_hat, windows: ProcessingWindows, tau=None) -> CrossCorrelation:
    """Lag products C_hat(h_k) = psi_hat(h_k/H) sum_n D_n conj(D_{n-k}) dnu and their inverse transform.

    ``D_hat`` has frequency along its last axis.  Samples outside the band
    are zero, so each lag sums over the overlapping part of the band only.
    """
    D = np.asarray(D_hat, dtype=complex)
    n = windows.n_omega
    if D.shape[-1] != n:
        raise ValueError(f"expected {n} frequency samples, got {D.shape[-1]}")
    K = windows.lags
    dnu = windows.dnu
    k = np.arange(-K, K + 1)
    h = k * dnu
    prods = np.empty(D.shape[:-1] + (k.size,), dtype=complex)
    for i, kk in enumerate(k):
        if kk >= 0:
            prods[..., i] = np.sum(D[..., kk:] * np.conj(D[..., : n - kk]), axis=-1)
        else:
            prods[..., i] = np.sum(D[..., : n + kk] * np.conj(D[..., -kk:]), axis=-1)
    C_hat = psi_hat(h / windows.H) * prods * dnu
    tau = default_tau(windows) if tau is None else np.atleast_1d(np.asarray(tau, dtype=float))
    C = np.real(C_hat @ np.exp(-1j * np.outer(h, tau))) * dnu / (2 * math.pi)
    return CrossCorrelation(h, C_hat, tau, C)


def crosscorrelate_time(D_hat, windows: ProcessingWindows, tau=None, tau0: float = 0.0) -> np.ndarray:
    """C(tau) = int_0^T |d(s)|^2 2 pi H psi_T(H(tau - s)) ds with psi periodized over T.

    d(s) is the band-limited periodic signal whose Fourier samples are
    ``D_hat``; the periodic integral is evaluated exactly by the rectangle rule
    on a grid fine enough for the product's bandwidth.
    """
    D = np.asarray(D_hat, dtype=complex)
    n = windows.n_omega
    P = windows.T
    nu = windows.nu
    H = windows.H
    m_pts = 2 * n + 2 * int(math.ceil(PSI_CUTOFF * H / windows.dnu)) + 1
    s = tau0 + np.arange(m_pts) * P / m_pts
    padded = np.zeros(D.shape[:-1] + (m_pts,), dtype=complex)
    padded[..., :n] = D * np.exp(-1j * nu * tau0)
    d = np.fft.fft(padded, axis=-1) * np.exp(-1j * nu[0] * (s - tau0)) / P
    intensity = np.abs(d) ** 2
    tau = default_tau(windows, tau0) if tau is None else np.atleast_1d(np.asarray(tau, dtype=float))
    lag = tau[:, None] - s[None, :]
    lag = (lag + 0.5 * P) % P - 0.5 * P
    images = max(1, int(math.ceil(PSI_CUTOFF / (H * P))) + 1)
    kern = sum(psi(H * (lag + m * P)) for m in range(-images, images + 1))
    kern *= 2 * math.pi * H * P / m_pts
    return intensity @ kern.T


# -- synthesis -----------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticEnsemble:
    seed: int
    n_realizations: int
    windows: ProcessingWindows
    modes: np.ndarray  # 1-based mode indices
    tau_grid: np.ndarray  # synthesis grid, one period
    intensity: np.ndarray  # (n_modes, n_omega)
    H_g: float
    Z: float
    D: np.ndarray = field(repr=False)  # (n_realizations, n_modes, n_omega)

    @property
    def omega(self) -> np.ndarray:
        return self.windows.omega

    @property
    def H_eff(self) -> float:
        """Bandwidth of the expected trace: psi_hat(h/H) psi_hat(h/H_g) = psi_hat(h/H_eff)."""
        return 1.0 / math.sqrt(1.0 / self.windows.H**2 + 1.0 / self.H_g**2)


def _synthesis_start(basis: ModeBasis, Z: float, H_g: float, windows: ProcessingWindows) -> float:
    lo = Z * basis.beta_prime.min() - PSI_CUTOFF / H_g
    hi = Z * basis.beta_prime.max() + PSI_CUTOFF / H_g
    if hi - lo > windows.T:
        raise GridTooCoarse(
            f"trace support {hi - lo:.4g} exceeds the synthetic period {windows.T:.4g}; increase n_omega"
        )
    return lo - 0.5 * (windows.T - (hi - lo))


def model_intensity(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    basis: ModeBasis,
    windows: ProcessingWindows,
    H_g: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Smoothed model time-intensity on the synthesis grid: (tau_grid, I[mode, tau], H_g)."""
    H_g = windows.n_omega * windows.dnu / 16 if H_g is None else H_g
    t0 = _synthesis_start(basis, Z, H_g, windows)
    tau = default_tau(windows, t0)
    _, C = forward_crosscorr(spectrum, model, aperture, Z, H_g, basis, tau=tau)
    return tau, np.clip(C.T, 0.0, None), H_g


def _draw(seq: np.random.SeedSequence, amp: np.ndarray, phase: np.ndarray, dtau: float) -> np.ndarray:
    rng = np.random.default_rng(seq)
    w = (rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape)) / math.sqrt(2)
    d = amp * w
    n = amp.shape[-1]
    return dtau * n * np.fft.ifft(d * phase[0], axis=-1) * phase[1]


def synthesize_ensemble(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    windows: ProcessingWindows,
    seed: int,
    n: int,
    basis: ModeBasis,
    modes: Optional[Sequence[int]] = None,
    H_g: Optional[float] = None,
    threads: Optional[int] = None,
) -> SyntheticEnsemble:
    """Draw n realizations of circular Gaussian mode data whose second moments match the model.

    White noise on the scaled time grid is shaped by the square root of the
    model intensity and transformed to frequency.  Each realization owns a
    spawned seed sequence, so results do not depend on the thread count.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    modes = np.arange(1, basis.N + 1) if modes is None else np.asarray(modes, dtype=int)
    if np.any(modes < 1) or np.any(modes > basis.N):
        raise ValueError("mode indices must lie in 1..N")
    tau, I, H_g = model_intensity(spectrum, model, aperture, Z, basis, windows, H_g)
    I = I[modes - 1]
    nw = windows.n_omega
    dtau = windows.T / nw
    amp = np.sqrt(I / (2 * math.pi))
    nu = windows.nu
    phase = (np.exp(1j * nu[0] * (tau - tau[0])), np.exp(1j * nu * tau[0]))
    seqs = np.random.SeedSequence(seed).spawn(n)
    workers = thread_count() if threads is None else max(1, threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(lambda s: _draw(s, amp, phase, dtau), seqs))
    else:
        draws = [_draw(s, amp, phase, dtau) for s in seqs]
    D = np.stack(draws)
    D.flags.writeable = False
    return SyntheticEnsemble(
        seed=int(seed),
        n_realizations=n,
        windows=windows,
        modes=modes,
        tau_grid=tau,
        intensity=I,
        H_g=H_g,
        Z=float(Z),
        D=D,
    )


def _mean_var(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and unbiased variance over axis 0 with compensated (fsum) reduction."""
    flat = samples.reshape(samples.shape[0], -1)
    n = flat.shape[0]
    mean = np.array([math.fsum(col) / n for col in flat.T])
    var = np.array([math.fsum((col - m) ** 2) / max(n - 1, 1) for col, m in zip(flat.T, mean)])
    return mean.reshape(samples.shape[1:]), var.reshape(samples.shape[1:])


def ensemble_trace_stats(ensemble: SyntheticEnsemble, tau) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance over realizations of C_j(tau); arrays of shape (n_modes, len(tau))."""
    cc = crosscorrelate(ensemble.D, ensemble.windows, tau=tau)
    return _mean_var(cc.C)


def cross_mode_correlation(ensemble: SyntheticEnsemble) -> np.ndarray:
    """|corr(D_j, D_q)| pooled over realizations and frequencies, for the ensemble's modes."""
    D = np.moveaxis(ensemble.D, 1, 0).reshape(len(ensemble.modes), -1)
    G = D @ D.conj().T
    d = np.sqrt(np.real(np.diag(G)))
    return np.abs(G) / np.outer(d, d)


@dataclass(frozen=True)
class SelfAveragingReport:
    B_over_omega: np.ndarray
    scaled_inverse_bandwidth: np.ndarray  # eps^2 omega_o / B
    n_omega: np.ndarray
    ratio: np.ndarray  # var / mean^2 at the trace peak
    slope_vs_B: float
    n_realizations: int

    def rows(self):
        return list(zip(self.B_over_omega, self.scaled_inverse_bandwidth, self.n_omega, self.ratio))


def self_averaging_report(
    spectrum: SourceSpectrum,
    model: ScatteringModel,
    aperture: ApertureCoupling,
    Z: float,
    windows: ProcessingWindows,
    basis: ModeBasis,
    factors: Sequence[float] = (0.25, 0.5, 1.0),
    n: int = 400,
    seed: int = 0,
    mode: int = 1,
    tau_peak: Optional[float] = None,
) -> SelfAveragingReport:
    """Fluctuation ratio var/mean^2 of C_mode(tau_peak) across a bandwidth sweep at fixed dnu and H."""
    if len(factors) < 3:
        raise ValueError("need at least three bandwidth settings")
    sweeps = [windows.with_bandwidth_factor(f) for f in factors]
    H_g = min(w.n_omega for w in sweeps) * windows.dnu / 16
    if tau_peak is None:
        H_eff = 1.0 / math.sqrt(1 / windows.H**2 + 1 / H_g**2)
        tau, C = forward_crosscorr(spectrum, model, aperture, Z, H_eff, basis)
        tau_peak = float(tau[np.argmax(C[:, mode - 1])])
    ratios, Bs, ns = [], [], []
    for i, w in enumerate(sweeps):
        ens = synthesize_ensemble(
            spectrum, model, aperture, Z, w, seed + i, n, basis, modes=[mode], H_g=H_g
        )
        mean, var = ensemble_trace_stats(ens, [tau_peak])
        ratios.append(float(var[0, 0] / mean[0, 0] ** 2))
        Bs.append(w.B / w.omega_o)
        ns.append(w.n_omega)
    Bs = np.array(Bs)
    ratios = np.array(ratios)
    slope = float(np.polyfit(np.log(Bs), np.log(ratios), 1)[0])
    eps = windows.eps
    return SelfAveragingReport(Bs, eps**2 / Bs, np.array(ns), ratios, slope, n)


# -- serialization ---------------------------------------------------------------


def ensemble_to_csv(ensemble: SyntheticEnsemble, header: str = "") -> str:
    """Single concatenated CSV: realization, mode, omega, re, im."""
    buf = io.StringIO()
    buf.write(f"# seed={ensemble.seed} n_realizations={ensemble.n_realizations}")
    buf.write(f" n_omega={ensemble.windows.n_omega} Z={ensemble.Z!r}")
    if header:
        buf.write(" " + header)
    buf.write("\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["realization", "mode", "omega", "re", "im"])
    omega = ensemble.omega
    for r in range(ensemble.n_realizations):
        for mi, m in enumerate(ensemble.modes):
            for om, val in zip(omega, ensemble.D[r, mi]):
                w.writerow([r, int(m), repr(float(om)), repr(float(val.real)), repr(float(val.imag))])
    return buf.getvalue()


def ensemble_from_csv(text: str) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """Parse ``ensemble_to_csv`` output into (seed, modes, omega, D)."""
    lines = text.splitlines()
    seed = int(lines[0].split("seed=")[1].split()[0])
    rows = list(csv.reader(lines[2:]))
    r = np.array([int(x[0]) for x in rows])
    m = np.array([int(x[1]) for x in rows])
    om = np.array([float(x[2]) for x in rows])
    val = np.array([float(x[3]) + 1j * float(x[4]) for x in rows])
    modes = np.unique(m)
    omega = np.unique(om)
    D = val.reshape(r.max() + 1, modes.size, omega.size)
    return seed, modes, omega, D
