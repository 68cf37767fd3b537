"""Subwavelength frequencies from capacitance eigenvalues.

Leading order in the contrast ``delta``: ``omega = sqrt(delta * lambda / |D_1|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capacitance import (
    DEFAULT_MIN_PHASE,
    finite_capacitance,
    quasi_bands,
    quasi_capacitance,
    quasi_eigen,
)
from .errors import DomainError
from .geometry import ChainParams, FiniteChain


def freq_from_lambda(lam, params: ChainParams):
    """Map capacitance eigenvalue(s) to resonant frequencies."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(np.isnan(lam_arr)):
        raise DomainError("capacitance eigenvalue must be non-negative")
    out = np.sqrt(params.delta * lam_arr / params.vol1)
    return float(out) if out.ndim == 0 else out


def lambda_from_freq(omega, params: ChainParams):
    """Inverse of :func:`freq_from_lambda`."""
    omega = np.asarray(omega, dtype=float)
    out = omega * omega * params.vol1 / params.delta
    return float(out) if out.ndim == 0 else out


def alpha_grid(L: float, grid_size: int) -> np.ndarray:
    """Uniform half-open grid of ``(-pi/L, pi/L]`` containing ``pi/L``, without ``alpha = 0``.

    Nodes are ``-pi/L + 2 pi k / (n L)`` for ``k = 1..n``; the node at zero
    (present for even ``n``) is dropped, so even sizes return ``n - 1`` points.
    """
    n = int(grid_size)
    k = np.arange(1, n + 1)
    t = -np.pi + 2.0 * np.pi * k / n
    if n % 2 == 0:
        t = t[k != n // 2]
    t[-1] = np.pi
    return t / L


@dataclass(frozen=True)
class BandStructure:
    """Sampled dispersion of the periodic chain plus the band-gap edges.

    ``valid`` flags samples where ``lambda1 >= 0``; outside the dilute regime
    the leading-order ``lambda1`` turns negative near ``alpha = 0`` and the
    corresponding ``omega1`` is stored as NaN.
    """

    params: ChainParams
    alphas: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    gap_lo: float
    gap_hi: float
    valid: np.ndarray

    @property
    def gap_width(self) -> float:
        return self.gap_hi - self.gap_lo

    @property
    def lambda_gap(self) -> tuple[float, float]:
        i = int(np.argmin(np.abs(self.alphas * self.params.L - np.pi)))
        return float(self.lambda1[i]), float(self.lambda2[i])

    def fit_edge_curvature(self, window: int = 5) -> tuple[float, float]:
        """Least-squares ``c1, c2`` in ``omega_j = omega_j_edge -/+ c_j (alpha - pi/L)^2`` near the edge."""
        t = self.alphas * self.params.L
        order = np.argsort(np.abs(np.pi - np.abs(t)))[: 2 * window + 1]
        da = (np.pi - np.abs(t[order])) / self.params.L
        x = da ** 2
        c1 = -np.polyfit(x, self.omega1[order], 1)[0]
        c2 = np.polyfit(x, self.omega2[order], 1)[0]
        return float(c1), float(c2)


def band_structure(params: ChainParams, grid_size: int = 1025,
                   min_phase: float = DEFAULT_MIN_PHASE) -> BandStructure:
    if grid_size < 64:
        raise DomainError("grid_size must be at least 64")
    alphas = alpha_grid(params.L, grid_size)
    t = alphas * params.L
    t = t[np.abs(t) >= min_phase]
    alphas = t / params.L
    _, _, lam1, lam2 = quasi_bands(params, t, min_phase=min_phase)
    valid = lam1 >= 0
    scale = params.delta / params.vol1
    omega1 = np.where(valid, np.sqrt(np.clip(lam1, 0.0, None) * scale), np.nan)
    omega2 = np.sqrt(np.clip(lam2, 0.0, None) * scale)
    gap_lo, gap_hi = band_gap(params)
    return BandStructure(params, alphas, lam1, lam2, omega1, omega2, gap_lo, gap_hi, valid)


def band_gap(params: ChainParams) -> tuple[float, float]:
    """Gap edges ``(omega_1(pi/L), omega_2(pi/L))`` evaluated directly at the zone edge."""
    C = quasi_capacitance(params, math.pi / params.L)
    eig = quasi_eigen(C)
    lo = freq_from_lambda(eig.lambda1, params)
    # a vanishing c12 (l = L/2) closes the gap exactly
    return lo, lo if eig.degenerate else freq_from_lambda(eig.lambda2, params)


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending spectrum of a finite array.

    Outside the dilute regime the leading-order matrix can have negative
    eigenvalues; their frequencies are NaN and ``nonphysical`` counts them.
    """

    frequencies: np.ndarray
    modes: np.ndarray
    matrix_eigvals: np.ndarray

    @property
    def nonphysical(self) -> int:
        return int(np.count_nonzero(self.matrix_eigvals < 0))


def finite_spectrum(chain: FiniteChain, params: ChainParams | None = None) -> SpectrumResult:
    """Eigen-decomposition of the finite dilute capacitance matrix, ascending order."""
    if params is not None and params is not chain.params:
        chain = FiniteChain(chain.centers, chain.radius, params, chain.dislocation, chain.K)
    params = chain.params
    C = finite_capacitance(chain)
    lam, vecs = np.linalg.eigh(C)
    freqs = np.full(lam.shape, np.nan)
    ok = lam >= 0
    freqs[ok] = freq_from_lambda(lam[ok], params)
    return SpectrumResult(frequencies=freqs, modes=vecs, matrix_eigvals=lam)


def trimer_eigenvalues(params: ChainParams, l: float, L: float) -> np.ndarray:
    """Closed-form capacitance eigenvalues of three resonators at ``(0, l, L)``.

    Second order in ``eps``; returned in ascending order (``k = 1, 2, 3``).
    """
    if not 0.0 < l < L:
        raise DomainError(f"need 0 < l < L, got l={l}, L={L}")
    cap = params.cap
    gamma = math.sqrt(l ** -2 + L ** -2 + (L - l) ** -2)
    arg = -3.0 * math.sqrt(3.0) / (l * L * (L - l) * gamma ** 3)
    if abs(arg) > 1.0:
        if abs(arg) - 1.0 > 1e-12:
            raise DomainError(f"arccos argument {arg} outside [-1, 1]")
        arg = math.copysign(1.0, arg)
    base = math.acos(arg)
    k = np.arange(1, 4)
    cosines = np.cos((base + 2.0 * k * math.pi) / 3.0)
    return cap + cap * cap * gamma / (2.0 * math.sqrt(3.0) * math.pi) * cosines


def eigenvalue_sensitivities(params: ChainParams, l: float, L: float, h: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`trimer_eigenvalues`.

    Row 0 holds ``d lambda_k / d l`` at fixed ``L``; row 1 holds
    ``d lambda_k / d L`` at fixed ``l' = L - l``, the parametrization in
    which the ``L``-dependence vanishes as ``l' -> 0``.
    """
    lp = L - l
    if not h < 0.5 * min(l, lp):
        raise DomainError(f"step h={h} too large for l={l}, L-l={lp}")
    dl = (trimer_eigenvalues(params, l + h, L) - trimer_eigenvalues(params, l - h, L)) / (2 * h)
    dL = (trimer_eigenvalues(params, l + h, L + h)
          - trimer_eigenvalues(params, l - h, L - h)) / (2 * h)
    return np.vstack([dl, dL])


def mode_field(chain: FiniteChain, mode, points) -> np.ndarray:
    """Monopole superposition ``sum_j q_j / (4 pi |x - z_j|)`` for qualitative plots."""
    q = np.asarray(mode)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise DomainError("points must have shape (P, 3)")
    if q.shape != (len(chain),):
        raise DomainError("mode length must match the number of resonators")
    src = np.zeros((len(chain), 3))
    src[:, 0] = chain.centers
    r = np.linalg.norm(pts[:, None, :] - src[None, :, :], axis=-1)
    if np.any(r < chain.radius):
        raise DomainError("evaluation point lies inside a resonator")
    return (q[None, :] / (4.0 * math.pi * r)).sum(axis=1)


def decay_rate(mode, centers, cell_size: int = 1) -> tuple[float, float]:
    """Exponential decay rate of ``|mode|`` away from its peak, with the fit's R^2.

    ``log|a|`` is fitted linearly against the distance from the resonator of
    largest amplitude.  With ``cell_size > 1`` amplitudes are first combined
    into Euclidean norms over consecutive groups of that many resonators
    (positions averaged), which removes sublattice oscillation.
    """
    a = np.abs(np.asarray(mode, dtype=complex))
    z = np.asarray(centers, dtype=float)
    if a.size < 6:
        raise DomainError("decay fit needs at least 6 amplitudes")
    if a.max() < 1e-14:
        raise DomainError("all amplitudes vanish; decay fit is degenerate")
    if cell_size > 1:
        n = a.size // cell_size * cell_size
        offset = (a.size - n) // 2
        a = np.sqrt((a[offset:offset + n].reshape(-1, cell_size) ** 2).sum(axis=1))
        z = z[offset:offset + n].reshape(-1, cell_size).mean(axis=1)
    peak = int(np.argmax(a))
    x = np.abs(z - z[peak])
    keep = a > 1e-14 * a.max()
    x, y = x[keep], np.log(a[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(-slope), r2
