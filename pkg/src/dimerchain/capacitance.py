"""Dilute capacitance matrices of the periodic dimer chain and of finite arrays.

Periodic chain, Bloch phase ``t = alpha L``::

    C11 = cap - cap**2 / (4 pi L) * (-log(2 - 2 cos t))
    C12 = -cap**2 / (4 pi) * sum_m exp(i m t) / |m L + l|

with ``cap = eps * Cap_B``.  Finite array with centers ``z_j``::

    C_ii = cap,   C_ij = -cap**2 / (4 pi |z_i - z_j|)

Only these leading orders are kept.  Near ``alpha = 0`` the dilute formulas
lose validity; phases with ``|alpha L| < min_phase`` are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularityError
from .geometry import ChainParams, FiniteChain
from .special_sums import BrillouinPoint, dimer_sum, dimer_sum_grid, dimer_sum_many, log_kernel

#: default exclusion radius around alpha = 0, in units of the Bloch phase alpha*L
DEFAULT_MIN_PHASE = 1e-3

# |c12| below this fraction of c11 is treated as an exact zero
_DEGENERATE_RTOL = 1e-12


def sphere_cap_b(radius_ratio: float = 1.0) -> float:
    """Capacity of a sphere of the given radius (``4 pi`` for the unit ball)."""
    return 4.0 * math.pi * radius_ratio


@dataclass(frozen=True)
class QuasiCapacitance:
    alpha: float
    c11: float
    c12: complex

    @property
    def c21(self) -> complex:
        return self.c12.conjugate()

    @property
    def c22(self) -> float:
        return self.c11

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.c11, self.c12], [self.c12.conjugate(), self.c11]], dtype=complex)


@dataclass(frozen=True)
class QuasiEigen:
    """Closed-form eigenpairs of a Hermitian 2x2 matrix with constant diagonal.

    ``theta`` is ``None`` when ``c12`` vanishes; the eigenvectors then fall
    back to the canonical ``theta = 0`` choice.
    """

    lambda1: float
    lambda2: float
    theta: float | None
    eigvec1: np.ndarray
    eigvec2: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.theta is None


def _check_phase(t: float, min_phase: float):
    if abs(t) < min_phase:
        raise SingularityError(
            f"|alpha L| = {abs(t):.3g} is inside the excluded window {min_phase:.3g} around alpha = 0"
        )


def quasi_capacitance(params: ChainParams, alpha: float,
                      min_phase: float = DEFAULT_MIN_PHASE) -> QuasiCapacitance:
    """Dilute quasiperiodic capacitance coefficients at quasimomentum ``alpha``."""
    p = BrillouinPoint(alpha=alpha, L=params.L)
    _check_phase(p.phase, min_phase)
    cap = params.cap
    pref = cap * cap / (4.0 * math.pi)
    c11 = cap - pref * float(log_kernel(p.phase)) / params.L
    c12 = -pref * dimer_sum(p, params.l)
    return QuasiCapacitance(alpha=float(alpha), c11=float(c11), c12=complex(c12))


def quasi_eigen(C: QuasiCapacitance) -> QuasiEigen:
    mod = abs(C.c12)
    if mod <= _DEGENERATE_RTOL * abs(C.c11):
        theta = None
        phase = 1.0 + 0j
        mod = 0.0
    else:
        theta = math.atan2(C.c12.imag, C.c12.real)
        if theta < 0:
            theta += 2.0 * math.pi
        if theta >= 2.0 * math.pi:  # -0 rounds up to 2 pi
            theta = 0.0
        phase = C.c12 / mod
    s = 1.0 / math.sqrt(2.0)
    v1 = np.array([-phase * s, s], dtype=complex)
    v2 = np.array([phase * s, s], dtype=complex)
    return QuasiEigen(lambda1=C.c11 - mod, lambda2=C.c11 + mod, theta=theta,
                      eigvec1=v1, eigvec2=v2)


def quasi_bands(params: ChainParams, phases, min_phase: float = DEFAULT_MIN_PHASE):
    """Vectorized ``(c11, c12, lambda1, lambda2)`` at an array of Bloch phases."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if np.any(np.abs(phases) < min_phase):
        raise SingularityError("phase grid enters the excluded window around alpha = 0")
    cap = params.cap
    pref = cap * cap / (4.0 * math.pi)
    c11 = cap - pref * log_kernel(phases) / params.L
    c12 = -pref * dimer_sum_many(phases, params.l, params.L)
    mod = np.abs(c12)
    return c11, c12, c11 - mod, c11 + mod


@dataclass(frozen=True)
class BandGrid:
    """Band data on the midpoint quadrature grid of the Brillouin zone.

    ``phase`` holds ``exp(i theta_alpha)``.  Nodes inside the excluded window
    around ``alpha = 0`` are dropped; ``weight`` is ``1/n`` so that sums
    approximate the zone average ``(1/2pi) int dt``.
    """

    n: int
    t: np.ndarray
    c11: np.ndarray
    c12: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    phase: np.ndarray

    @property
    def weight(self) -> float:
        return 1.0 / self.n


@lru_cache(maxsize=32)
def band_grid(params: ChainParams, n: int, min_phase: float = DEFAULT_MIN_PHASE) -> BandGrid:
    t, ds = dimer_sum_grid(n, params.l, params.L)
    keep = np.abs(t) >= min_phase
    t, ds = t[keep], ds[keep]
    cap = params.cap
    pref = cap * cap / (4.0 * math.pi)
    c11 = cap - pref * log_kernel(t) / params.L
    c12 = -pref * ds
    mod = np.abs(c12)
    phase = np.where(mod > 0, c12 / np.where(mod > 0, mod, 1.0), 1.0)
    arrays = [t, c11, c12, c11 - mod, c11 + mod, phase]
    for a in arrays:
        a.setflags(write=False)
    return BandGrid(n, *arrays)


def finite_capacitance(chain: FiniteChain) -> np.ndarray:
    """Dense ``M x M`` dilute capacitance matrix of a finite array."""
    params = chain.params
    cap = params.cap
    z = chain.centers
    dist = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(dist, 1.0)
    C = -cap * cap / (4.0 * math.pi) / dist
    np.fill_diagonal(C, cap)
    return 0.5 * (C + C.T)
