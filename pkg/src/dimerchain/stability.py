"""Finite-chain experiments: dislocation sweeps and positional-disorder statistics.

Random trials perturb the ``x1`` coordinate of every resonator with i.i.d.
``N(0, sigma^2)`` offsets.  Trial ``k`` draws from its own Philox stream
(see :func:`dimerchain.geometry.make_rng`); a draw that makes resonators
overlap is redrawn from the next attempt stream, up to
``MAX_ATTEMPTS`` times, and every such rejection is counted.  Branches are
matched across trials by sorted order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimerChainError, DomainError, OverlapError
from .geometry import ChainParams, FiniteChain, build_finite_chain, perturb_chain
from .spectra import band_gap, finite_spectrum

__all__ = [
    "MAX_ATTEMPTS",
    "SweepResult",
    "StabilityReport",
    "MinVarianceResult",
    "dislocation_sweep",
    "in_gap_counts",
    "block_coupling_norm",
    "stability_experiment",
    "min_variance_scan",
]

MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class SweepResult:
    """Sorted spectra of the dislocated chain for each ``d``.

    ``spectra[i]`` holds the ascending frequencies for ``d_grid[i]`` (NaN for
    non-physical negative capacitance eigenvalues, see
    :class:`~dimerchain.spectra.SpectrumResult`); ``lambdas[i]`` the matrix
    eigenvalues.  A ``d`` whose geometry is invalid keeps a NaN row and its
    error message in ``errors``.
    """

    d_grid: np.ndarray
    spectra: np.ndarray
    lambdas: np.ndarray
    gap: tuple[float, float]
    errors: dict = field(default_factory=dict)

    def in_gap(self, index: int, tol: float = 0.0) -> np.ndarray:
        """Frequencies at ``d_grid[index]`` lying inside the gap shrunk by ``tol`` gap widths."""
        lo, hi = self.gap
        pad = tol * (hi - lo)
        f = self.spectra[index]
        return f[(f > lo + pad) & (f < hi - pad)]


def dislocation_sweep(params: ChainParams, K: int, d_grid) -> SweepResult:
    d_grid = np.asarray(d_grid, dtype=float)
    if d_grid.ndim != 1 or d_grid.size == 0:
        raise DomainError("d_grid must be a non-empty 1D sequence")
    if np.any(d_grid < 0) or np.any(np.diff(d_grid) < 0):
        raise DomainError("d_grid must be non-negative and sorted")
    M = 4 * int(K) + 2
    spectra = np.full((d_grid.size, M), np.nan)
    lambdas = np.full((d_grid.size, M), np.nan)
    errors = {}
    for i, d in enumerate(d_grid):
        try:
            result = finite_spectrum(build_finite_chain(params, K, float(d)))
        except DimerChainError as exc:
            errors[float(d)] = str(exc)
            continue
        spectra[i] = result.frequencies
        lambdas[i] = result.matrix_eigvals
    return SweepResult(d_grid, spectra, lambdas, band_gap(params), errors)


def in_gap_counts(sweep: SweepResult, tol: float = 0.0) -> np.ndarray:
    """Number of frequencies strictly inside the gap at each ``d``."""
    return np.array([sweep.in_gap(i, tol).size for i in range(sweep.d_grid.size)])


def block_coupling_norm(params: ChainParams, K: int, d: float) -> float:
    """Frobenius norm of the capacitance block coupling the two half-chains."""
    from .capacitance import finite_capacitance

    C = finite_capacitance(build_finite_chain(params, K, d))
    half = C.shape[0] // 2
    return float(np.linalg.norm(C[:half, half:]))


@dataclass(frozen=True)
class StabilityReport:
    """Per-branch statistics of sorted frequencies under positional disorder.

    ``failures`` counts trials for which every attempt overlapped;
    ``rejections`` counts all discarded draws.  ``trials = successes +
    failures``.  ``stderr`` is the jackknife standard error of the unbiased
    sample variance.
    """

    sigma: float
    d: float
    trials: int
    successes: int
    failures: int
    rejections: int
    mean: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    branch_mixing_risk: bool
    samples: np.ndarray = field(repr=False)

    @property
    def branches(self) -> int:
        return self.mean.size


def _jackknife_variance_stderr(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    if n < 3:
        return np.full(x.shape[1], np.nan)
    s1 = x.sum(axis=0)
    s2 = (x * x).sum(axis=0)
    loo_s1 = s1[None, :] - x
    loo_s2 = s2[None, :] - x * x
    loo_var = (loo_s2 - loo_s1 * loo_s1 / (n - 1)) / (n - 2)
    mean_loo = loo_var.mean(axis=0)
    return np.sqrt((n - 1) / n * ((loo_var - mean_loo) ** 2).sum(axis=0))


def _branch_mixing_risk(chain: FiniteChain, sigma: float, h: float = 1e-6) -> bool:
    if sigma == 0:
        return False
    lam = finite_spectrum(chain).matrix_eigvals
    spacing = float(np.min(np.diff(lam)))
    slope = 0.0
    for j in range(len(chain)):
        z = np.array(chain.centers)
        z[j] += h
        up = finite_spectrum(chain.with_centers(z)).matrix_eigvals
        z[j] -= 2 * h
        down = finite_spectrum(chain.with_centers(z)).matrix_eigvals
        slope = max(slope, float(np.max(np.abs(up - down))) / (2 * h))
    return not spacing > 6.0 * sigma * slope


def _run_trial(chain: FiniteChain, sigma: float, seed: int, trial: int):
    rejected = 0
    for attempt in range(MAX_ATTEMPTS):
        try:
            sample = perturb_chain(chain, sigma, seed, trial, attempt)
        except OverlapError:
            rejected += 1
            continue
        return finite_spectrum(sample).frequencies, rejected
    return None, rejected


def stability_experiment(params: ChainParams, K: int, d: float, sigma: float, trials: int,
                         seed: int, threads: int | None = None) -> StabilityReport:
    """Sorted-branch statistics of ``trials`` perturbed copies of the dislocated chain."""
    if int(trials) != trials or trials < 2:
        raise DomainError(f"trials must be an integer >= 2, got {trials!r}")
    if not (math.isfinite(sigma) and sigma >= 0):
        raise DomainError(f"sigma must be >= 0, got {sigma!r}")
    chain = build_finite_chain(params, K, d)
    trials = int(trials)

    def job(k):
        return _run_trial(chain, sigma, seed, k)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(trials)))
    else:
        results = [job(k) for k in range(trials)]

    samples = np.array([f for f, _ in results if f is not None]).reshape(-1, len(chain))
    rejections = sum(r for _, r in results)
    successes = samples.shape[0]
    if successes >= 2:
        variance = samples.var(axis=0, ddof=1)
    else:
        variance = np.full(len(chain), np.nan)
    nan = np.full(len(chain), np.nan)
    return StabilityReport(
        sigma=float(sigma),
        d=float(d),
        trials=trials,
        successes=successes,
        failures=trials - successes,
        rejections=int(rejections),
        mean=samples.mean(axis=0) if successes else nan,
        variance=variance,
        stderr=_jackknife_variance_stderr(samples),
        minimum=samples.min(axis=0) if successes else nan,
        maximum=samples.max(axis=0) if successes else nan,
        branch_mixing_risk=_branch_mixing_risk(chain, sigma),
        samples=samples,
    )


@dataclass(frozen=True)
class MinVarianceResult:
    d_star: float
    branch_star: int
    d_grid: np.ndarray
    variance: np.ndarray
    reports: tuple


def min_variance_scan(params: ChainParams, K: int, d_grid, sigma: float, trials: int,
                      seed: int, threads: int | None = None) -> MinVarianceResult:
    """Dislocation and (0-based) branch with the smallest frequency variance."""
    d_grid = np.asarray(d_grid, dtype=float)
    reports = tuple(stability_experiment(params, K, float(d), sigma, trials, seed, threads)
                    for d in d_grid)
    surface = np.array([r.variance for r in reports])
    i, j = np.unravel_index(int(np.nanargmin(surface)), surface.shape)
    return MinVarianceResult(float(d_grid[i]), int(j), d_grid, surface, reports)
