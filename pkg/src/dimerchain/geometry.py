"""Chain geometries: parameters, the dislocated finite truncation, perturbations.

Coordinates are dimensionless.  A cell ``[mL - L/2, mL + L/2]`` holds the
dimer centers ``mL - l/2`` and ``mL + l/2``; only the ``x1`` coordinate of
each resonator center is stored.

Randomness uses the counter-based Philox generator from numpy.  Trial ``k``
of an experiment seeded with ``seed`` draws from the stream keyed by
``seed ^ k``, so trials can run in any order or in parallel and still
reproduce bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, OverlapError

UNIT_SPHERE_CAPACITY = 4.0 * math.pi
UNIT_SPHERE_VOLUME = 4.0 * math.pi / 3.0


@dataclass(frozen=True)
class ChainParams:
    """Geometry and material parameters of the dimer chain.

    ``eps`` is the resonator size scale (the radius for spheres), ``cap_b``
    and ``vol_b`` describe the unit reference domain.  The single-resonator
    volume ``vol1`` defaults to ``eps**3 * vol_b``.
    """

    L: float
    l: float
    eps: float
    delta: float
    cap_b: float = UNIT_SPHERE_CAPACITY
    vol_b: float = UNIT_SPHERE_VOLUME
    vol1: float | None = None

    def __post_init__(self):
        for name in ("L", "l", "eps", "delta", "cap_b", "vol_b"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive finite number, got {value!r}")
        if not self.l < self.L:
            raise DomainError(f"need 0 < l < L, got l={self.l}, L={self.L}")
        if not (2 * self.eps < self.l and 2 * self.eps < self.L - self.l):
            raise OverlapError(
                f"resonators of radius {self.eps} overlap: need 2*eps < l={self.l} "
                f"and 2*eps < L-l={self.L - self.l}"
            )
        if self.vol1 is None:
            object.__setattr__(self, "vol1", self.eps ** 3 * self.vol_b)
        elif not self.vol1 > 0:
            raise DomainError(f"vol1 must be positive, got {self.vol1}")

    @classmethod
    def unit_sphere(cls, L: float, l: float, delta: float, eps: float = 1.0) -> "ChainParams":
        """Spheres of radius ``eps``."""
        return cls(L=L, l=l, eps=eps, delta=delta)

    @property
    def l0(self) -> float:
        return self.l / self.L

    @property
    def cap(self) -> float:
        """Capacitance of one resonator, ``eps * Cap_B``."""
        return self.eps * self.cap_b

    def with_(self, **changes) -> "ChainParams":
        if "eps" in changes and "vol1" not in changes:
            changes["vol1"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class FiniteChain:
    """Ordered resonator centers on the ``x1`` axis with a common radius."""

    centers: np.ndarray
    radius: float
    params: ChainParams
    dislocation: float | None = None
    K: int | None = None

    def __post_init__(self):
        z = np.array(self.centers, dtype=float)
        if z.ndim != 1 or z.size == 0:
            raise DomainError("centers must be a non-empty 1D sequence")
        if not np.all(np.isfinite(z)):
            raise DomainError("centers must be finite")
        gaps = np.diff(z)
        if gaps.size and not np.all(gaps > 0):
            raise OverlapError("centers are not strictly increasing")
        if gaps.size and gaps.min() <= 2 * self.radius:
            j = int(np.argmin(gaps))
            raise OverlapError(
                f"resonators {j} and {j + 1} overlap: gap {gaps[j]:.6g} <= 2*radius "
                f"= {2 * self.radius:.6g}"
            )
        z.setflags(write=False)
        object.__setattr__(self, "centers", z)

    def __len__(self) -> int:
        return self.centers.size

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.centers)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.centers[0] + self.centers[-1])

    def with_centers(self, centers) -> "FiniteChain":
        return FiniteChain(centers=centers, radius=self.radius, params=self.params,
                           dislocation=self.dislocation, K=self.K)


def build_finite_chain(params: ChainParams, K: int, d: float = 0.0) -> FiniteChain:
    """Truncated dislocated chain with ``M = 4K + 2`` resonators.

    Left half: a lone ``D_2`` of cell ``-K-1`` followed by the dimers of cells
    ``-K..-1``.  Right half: dimers of cells ``0..K-1`` and a lone ``D_1`` of
    cell ``K``, all translated by ``d``.
    """
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    if not (math.isfinite(d) and d >= 0):
        raise DomainError(f"dislocation must be finite and >= 0, got {d!r}")
    K = int(K)
    L, l = params.L, params.l
    left = [(-K - 1) * L + l / 2]
    for m in range(-K, 0):
        left += [m * L - l / 2, m * L + l / 2]
    right = []
    for m in range(0, K):
        right += [m * L - l / 2 + d, m * L + l / 2 + d]
    right.append(K * L - l / 2 + d)
    return FiniteChain(centers=np.array(left + right), radius=params.eps, params=params,
                       dislocation=float(d), K=K)


def make_rng(seed: int, trial: int | None = None, attempt: int = 0) -> np.random.Generator:
    """Philox stream for ``(seed, trial, attempt)``.

    The 128-bit Philox key is ``(seed ^ trial) + attempt * 2**64``; ``trial``
    defaults to no mixing.
    """
    seed = int(seed)
    if seed < 0:
        raise DomainError("seed must be non-negative")
    base = seed ^ int(trial) if trial is not None else seed
    key = (base & (2 ** 64 - 1)) + (int(attempt) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def perturb_chain(chain: FiniteChain, sigma: float, seed: int,
                  trial: int | None = None, attempt: int = 0) -> FiniteChain:
    """Add i.i.d. ``N(0, sigma^2)`` offsets to every center.

    Raises :class:`OverlapError` when the perturbed chain is invalid; the
    caller decides whether to redraw.
    """
    if not (math.isfinite(sigma) and sigma >= 0):
        raise DomainError(f"sigma must be >= 0, got {sigma!r}")
    offsets = make_rng(seed, trial, attempt).normal(0.0, 1.0, len(chain)) * sigma
    return chain.with_centers(chain.centers + offsets)
