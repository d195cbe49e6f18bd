"""Ideal-waveguide geometry and the Dirichlet mode basis.

The waveguide occupies 0 <= x <= X with pressure-release walls and a
constant reference sound speed ``c_o``.  Mode indices are 1-based at every
public interface.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCutoff, OutOfDomain

CUTOFF_RTOL = 1e-9


class FluctuationKind(str, enum.Enum):
    MEDIUM = "medium"
    BOUNDARY = "boundary"
    BOTH = "both"


@dataclass(frozen=True)
class WaveguideConfig:
    """Physical and asymptotic parameters of a random waveguide.

    Parameters
    ----------
    c_o : float
        Reference sound speed (m/s).
    omega_o : float
        Central angular frequency (rad/s).
    X : float
        Waveguide depth (m).
    ell : float
        Correlation length of the fluctuations (m).
    eps : float
        Asymptotic amplitude scale, 0 < eps < 1.
    alpha : float
        Bandwidth exponent, B = omega_o * eps**alpha with 1 < alpha < 2.
    fluctuation_kind : FluctuationKind
        Which fluctuations scatter: the medium, the boundary, or both.
    eps_c, eps_B, eps_T : float
        Relative amplitude scales of the medium, bottom and top fluctuations.
    """

    c_o: float
    omega_o: float
    X: float
    ell: float
    eps: float = 0.05
    alpha: float = 1.5
    fluctuation_kind: FluctuationKind = FluctuationKind.MEDIUM
    eps_c: float = 1.0
    eps_B: float = 0.0
    eps_T: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "fluctuation_kind", FluctuationKind(self.fluctuation_kind))
        for name in ("c_o", "omega_o", "X", "ell"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps!r}")
        if not 1 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha!r}")
        for name in ("eps_c", "eps_B", "eps_T"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        _check_cutoff(self.omega_o * self.X / (math.pi * self.c_o))

    @property
    def k_o(self) -> float:
        return self.omega_o / self.c_o

    @property
    def wavelength(self) -> float:
        return 2 * math.pi * self.c_o / self.omega_o

    @property
    def bandwidth(self) -> float:
        return self.omega_o * self.eps**self.alpha


def reference_config(ell_in_lambda: float = 1.0, kind="medium", **overrides) -> WaveguideConfig:
    """Water waveguide with c_o = 1500 m/s, lambda_o = 1.5 m, X = 20.3 lambda_o."""
    lam = 1.5
    c_o = 1500.0
    kind = FluctuationKind(kind)
    amps = {
        FluctuationKind.MEDIUM: dict(eps_c=1.0, eps_B=0.0, eps_T=0.0),
        FluctuationKind.BOUNDARY: dict(eps_c=0.0, eps_B=0.0, eps_T=1.0),
        FluctuationKind.BOTH: dict(eps_c=1.0, eps_B=0.0, eps_T=1.0),
    }[kind]
    params = dict(
        c_o=c_o,
        omega_o=2 * math.pi * c_o / lam,
        X=20.3 * lam,
        ell=ell_in_lambda * lam,
        fluctuation_kind=kind,
        **amps,
    )
    params.update(overrides)
    return WaveguideConfig(**params)


def _check_cutoff(ratio: float) -> None:
    nearest = round(ratio)
    if nearest >= 1 and abs(ratio - nearest) <= CUTOFF_RTOL * ratio:
        raise DegenerateCutoff(
            f"kX/pi = {ratio!r} is within {CUTOFF_RTOL:g} (relative) of the integer {nearest}; "
            "mode {nearest} would be a standing wave"
        )


def cutoff_ratio(omega: float, config: WaveguideConfig) -> float:
    """Return kX/pi, the (fractional) number of propagating modes at ``omega``."""
    return omega * config.X / (math.pi * config.c_o)


def num_propagating(omega: float, config: WaveguideConfig) -> int:
    """Number N of propagating modes at angular frequency ``omega``."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    ratio = cutoff_ratio(omega, config)
    _check_cutoff(ratio)
    n = math.floor(ratio)
    if n < 1:
        raise OutOfDomain(f"no propagating modes at omega={omega!r} (kX/pi = {ratio:.4g})")
    return n


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModeBasis:
    """Propagating modes of the ideal waveguide at one frequency.

    ``beta[j-1]`` is the range wavenumber of mode j and ``beta_prime[j-1]``
    its group slowness d(beta_j)/d(omega) = k / (c_o beta_j).
    """

    omega: float
    k: float
    N: int
    beta: np.ndarray
    beta_prime: np.ndarray
    X: float = field(repr=False)
    c_o: float = field(repr=False)

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    def phi(self, j, x):
        return _phi(j, x, self.X)


def mode_basis(omega: float, config: WaveguideConfig) -> ModeBasis:
    n = num_propagating(omega, config)
    k = omega / config.c_o
    j = np.arange(1, n + 1)
    beta = np.sqrt(np.abs(k**2 - (math.pi * j / config.X) ** 2))
    beta_prime = k / (config.c_o * beta)
    return ModeBasis(
        omega=float(omega),
        k=k,
        N=n,
        beta=_frozen(beta),
        beta_prime=_frozen(beta_prime),
        X=config.X,
        c_o=config.c_o,
    )


def _phi(j, x, X):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > X):
        raise OutOfDomain(f"cross-range must lie in [0, {X}]")
    j = np.asarray(j)
    if np.any(j < 1):
        raise OutOfDomain("mode index must be >= 1")
    return math.sqrt(2.0 / X) * np.sin(math.pi * j * x / X)


def eigenfunction(j, x, config: WaveguideConfig):
    """phi_j(x) = sqrt(2/X) sin(pi j x / X); broadcasts over ``j`` and ``x``."""
    out = _phi(j, x, config.X)
    return float(out) if np.ndim(out) == 0 else out
