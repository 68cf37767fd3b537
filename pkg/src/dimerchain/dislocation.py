"""Mid-gap frequencies of the dislocated infinite dimer chain.

All Brillouin-zone integrals are normalized zone averages
``<f> = (1/2pi) int f(t) dt`` over the Bloch phase ``t = alpha L``, with the
window ``|t| < min_phase`` around the log singularity removed.  The
integrands are smooth on each half ``[min_phase, pi]`` and ``[-pi, -min_phase]``
but sharply peaked at ``|t| = pi`` when the spectral parameter approaches a
gap edge, so they are integrated with composite Gauss-Legendre panels graded
towards both ends; refinement halves every panel.

In capacitance-eigenvalue variables (``omega**2`` proportional to ``lambda``)::

    eta_j = lambda_j / (lambda - lambda_j)
    I1 = <eta1 + eta2>,   I2 = <exp(i theta) (eta1 - eta2)>
    phi = -(cap/2) [[eta1 + eta2, -e^{i theta}(eta1 - eta2)],
                    [-e^{-i theta}(eta1 - eta2), eta1 + eta2]]
    T_m = <exp(i m t) phi(t)>

Removing ``N`` dimers (dislocation ``d = N L``) gives the block-Toeplitz
matrix ``T_N = (T_{i-j})``; its singular frequencies are the mid-gap
frequencies.  For ``N = 1`` these solve ``I1 = I2`` and ``I1 = -I2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import OptimizeWarning, bisect, curve_fit

from .capacitance import DEFAULT_MIN_PHASE, quasi_capacitance
from .errors import (
    BranchAmbiguityError,
    ConvergenceError,
    NoMidGapError,
    OutOfGapError,
    PoleError,
)
from .geometry import ChainParams
from .special_sums import BrillouinPoint, dimer_sum_many, g_of_alpha, g_of_alpha_lerch, log_kernel
from .spectra import freq_from_lambda, lambda_from_freq

__all__ = [
    "EtaPair",
    "ToeplitzSymbol",
    "BlockToeplitz",
    "MidGapResult",
    "LimitFit",
    "eta_pair",
    "midgap_integrals",
    "solve_midgap_unit",
    "toeplitz_symbol",
    "toeplitz_blocks",
    "det_t0",
    "det_t0_roots",
    "solve_midgap_removed",
    "null_vector",
    "j_parity",
    "fit_omega_infinity",
    "omega_infinity",
    "midgap_interval",
    "midgap_result",
    "appendix_b_diagnostics",
]

#: relative bracket margin at the gap edges, as a fraction of the gap width
EDGE_MARGIN = 1e-6

# Gauss-Legendre rule per panel
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
# coarsest level gives >= 1500 nodes; each level halves all panels
_MAX_LEVEL = 4
# failure threshold for the grid-doubling check
_HARD_TOL = 1e-6


# ---------------------------------------------------------------------------
# zone quadrature


@dataclass(frozen=True)
class _ZoneRule:
    t: np.ndarray
    w: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    phase: np.ndarray  # exp(i theta)


def _half_zone_breaks(min_phase: float) -> np.ndarray:
    near_zero = min_phase * 2.0 ** np.arange(0, 64)
    near_zero = near_zero[near_zero < 0.5]
    near_pi = np.pi - 0.5 * 2.0 ** -np.arange(0, 21)
    middle = np.linspace(0.5, np.pi - 0.5, 10)
    return np.unique(np.concatenate([near_zero, middle, near_pi, [np.pi]]))


@lru_cache(maxsize=64)
def _zone_rule(params: ChainParams, level: int, min_phase: float = DEFAULT_MIN_PHASE) -> _ZoneRule:
    edges = _half_zone_breaks(min_phase)
    for _ in range(level):
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b) + half * _GL_X[None, :]).ravel()
    w = (half * _GL_W[None, :]).ravel() / (2.0 * np.pi)
    # both halves of the zone are evaluated independently, so symmetry of
    # the integrands is a genuine check rather than an assumption
    t = np.concatenate([-x[::-1], x])
    w = np.concatenate([w[::-1], w])
    cap = params.cap
    pref = cap * cap / (4.0 * math.pi)
    c11 = cap - pref * log_kernel(t) / params.L
    c12 = -pref * dimer_sum_many(t, params.l, params.L)
    mod = np.abs(c12)
    phase = np.where(mod > 0, c12 / np.where(mod > 0, mod, 1.0), 1.0)
    arrays = (t, w, c11 - mod, c11 + mod, phase)
    for arr in arrays:
        arr.setflags(write=False)
    return _ZoneRule(*arrays)


def _refine(evaluate, params: ChainParams, tol, min_phase: float = DEFAULT_MIN_PHASE):
    """Evaluate on successive levels until two consecutive results agree.

    ``evaluate(rule)`` returns an array; ``tol(value)`` the accepted change.
    Returns the finer of the two agreeing results.
    """
    prev = evaluate(_zone_rule(params, 0, min_phase))
    change = math.inf
    for level in range(1, _MAX_LEVEL + 1):
        cur = evaluate(_zone_rule(params, level, min_phase))
        change = float(np.max(np.abs(cur - prev)))
        if change <= tol(cur):
            return cur
        prev = cur
    if change > _HARD_TOL * max(1.0, float(np.max(np.abs(prev)))):
        raise ConvergenceError(f"zone quadrature did not converge (last change {change:.3g})")
    return prev


def _etas(lam: float, lam1: np.ndarray, lam2: np.ndarray):
    return lam1 / (lam - lam1), lam2 / (lam - lam2)


# ---------------------------------------------------------------------------
# band-edge helpers


@lru_cache(maxsize=64)
def _edge_lambdas(params: ChainParams) -> tuple[float, float]:
    C = quasi_capacitance(params, math.pi / params.L)
    mod = abs(C.c12)
    return C.c11 - mod, C.c11 + mod


def _check_in_gap(params: ChainParams, lam: float):
    lo, hi = _edge_lambdas(params)
    if not lo < lam < hi:
        raise OutOfGapError(f"lambda = {lam:.12g} is outside the band gap ({lo:.12g}, {hi:.12g})")


def _omega_gap(params: ChainParams) -> tuple[float, float]:
    lo, hi = _edge_lambdas(params)
    return freq_from_lambda(lo, params), freq_from_lambda(hi, params)


# ---------------------------------------------------------------------------
# symbols and integrals


@dataclass(frozen=True)
class EtaPair:
    """``eta_j = (omega_j^alpha)^2 / (omega^2 - (omega_j^alpha)^2)``."""

    eta1: float
    eta2: float


def eta_pair(params: ChainParams, omega: float, alpha: float) -> EtaPair:
    C = quasi_capacitance(params, alpha)
    mod = abs(C.c12)
    lam = lambda_from_freq(omega, params)
    out = []
    for lam_j in (C.c11 - mod, C.c11 + mod):
        if lam == lam_j or (lam_j >= 0 and abs(omega - freq_from_lambda(lam_j, params)) < 1e-14):
            raise PoleError(f"omega = {omega!r} coincides with a band frequency at alpha = {alpha!r}")
        out.append(lam_j / (lam - lam_j))
    return EtaPair(*out)


def midgap_integrals(params: ChainParams, lam: float, rtol: float = 1e-10) -> tuple[float, float]:
    """Zone averages ``I1 = <eta1 + eta2>`` and ``I2 = <e^{i theta}(eta1 - eta2)>``.

    ``lam`` is the spectral parameter in capacitance units and must lie
    strictly inside the gap.  ``I2`` is real by the ``alpha -> -alpha``
    symmetry; an imaginary residue above ``1e-8`` raises
    :class:`ConvergenceError`.
    """
    lam = float(lam)
    _check_in_gap(params, lam)

    def evaluate(rule):
        e1, e2 = _etas(lam, rule.lambda1, rule.lambda2)
        i1 = np.sum(rule.w * (e1 + e2))
        i2 = np.sum(rule.w * rule.phase * (e1 - e2))
        return np.array([i1, i2.real, i2.imag])

    i1, i2, i2_imag = _refine(evaluate, params, lambda v: rtol * max(1.0, float(np.max(np.abs(v)))))
    if abs(i2_imag) >= 1e-8:
        raise ConvergenceError(f"imaginary part of I2 is {i2_imag:.3g}; symmetry check failed")
    return float(i1), float(i2)


def _bracket(params: ChainParams) -> tuple[float, float]:
    lo, hi = _edge_lambdas(params)
    if not hi > lo:
        raise NoMidGapError("the band gap is closed")
    m = EDGE_MARGIN * (hi - lo)
    return lo + m, hi - m


def solve_midgap_unit(params: ChainParams) -> tuple[float, float]:
    """Mid-gap frequencies for one removed dimer from ``I1 = +-I2``.

    Both ``I1 - I2`` and ``I1 + I2`` decrease strictly in ``lambda`` across
    the gap, so each has at most one root, located by bisection.
    """
    a, b = _bracket(params)
    roots = []
    for sign, name in ((-1.0, "I1 - I2"), (1.0, "I1 + I2")):
        def f(lam, sign=sign):
            i1, i2 = midgap_integrals(params, lam)
            return i1 + sign * i2

        fa, fb = f(a), f(b)
        if not (fa > 0 > fb):
            raise NoMidGapError(f"{name} has no sign change in the gap (values {fa:.3g}, {fb:.3g})")
        roots.append(bisect(f, a, b, xtol=1e-10 * max(1.0, abs(a)), rtol=1e-15, maxiter=200))
    lam_minus, lam_plus = sorted(roots)
    return freq_from_lambda(lam_minus, params), freq_from_lambda(lam_plus, params)


@dataclass(frozen=True)
class ToeplitzSymbol:
    """The 2x2 Hermitian symbol ``phi(alpha)``."""

    phi: np.ndarray

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.phi))


def _phi_entries(params: ChainParams, lam: float, lam1, lam2, phase):
    e1, e2 = _etas(lam, lam1, lam2)
    half = 0.5 * params.cap
    diag = -half * (e1 + e2)
    off = half * phase * (e1 - e2)
    return diag, off


def toeplitz_symbol(params: ChainParams, omega: float, alpha: float) -> ToeplitzSymbol:
    C = quasi_capacitance(params, alpha)
    eta = eta_pair(params, omega, alpha)
    mod = abs(C.c12)
    phase = C.c12 / mod if mod > 0 else 1.0
    half = 0.5 * params.cap
    diag = -half * (eta.eta1 + eta.eta2)
    off = half * phase * (eta.eta1 - eta.eta2)
    phi = np.array([[diag, off], [np.conj(off), diag]], dtype=complex)
    return ToeplitzSymbol(phi)


@dataclass(frozen=True)
class BlockToeplitz:
    """Fourier blocks ``T_m`` (``blocks[m + N - 1]``) and the assembled ``2N x 2N`` matrix."""

    N: int
    blocks: np.ndarray
    assembled: np.ndarray

    def block(self, m: int) -> np.ndarray:
        if abs(m) > self.N - 1:
            raise IndexError(f"block index {m} outside |m| <= {self.N - 1}")
        return self.blocks[m + self.N - 1]


def _exchange(n: int) -> np.ndarray:
    return np.eye(n)[::-1]


def _assemble(blocks: np.ndarray, N: int) -> np.ndarray:
    out = np.empty((2 * N, 2 * N), dtype=complex)
    for i in range(N):
        for j in range(N):
            out[2 * i:2 * i + 2, 2 * j:2 * j + 2] = blocks[i - j + N - 1]
    return out


def _toeplitz_at_lambda(params: ChainParams, lam: float, N: int, tol: float = 1e-9) -> BlockToeplitz:
    ms = np.arange(-(N - 1), N)

    def evaluate(rule):
        diag, off = _phi_entries(params, lam, rule.lambda1, rule.lambda2, rule.phase)
        E = np.exp(1j * np.outer(ms, rule.t)) * rule.w[None, :]
        d, o, oc = E @ diag, E @ off, E @ np.conj(off)
        return np.stack([np.stack([d, o], -1), np.stack([oc, d], -1)], -2)

    blocks = _refine(evaluate, params, lambda v: tol * max(1.0, float(np.max(np.abs(v)))))
    assembled = _assemble(blocks, N)
    # Hermitian by construction up to rounding; enforce exactly
    assembled = 0.5 * (assembled + assembled.conj().T)
    return BlockToeplitz(N, blocks, assembled)


def toeplitz_blocks(params: ChainParams, omega: float, N: int) -> BlockToeplitz:
    """Blocks ``T_m`` for ``|m| <= N - 1`` and the Hermitian matrix ``(T_{i-j})``."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    lam = lambda_from_freq(omega, params)
    _check_in_gap(params, lam)
    return _toeplitz_at_lambda(params, lam, int(N))


def det_t0(params: ChainParams, omega: float) -> float:
    """``det T_0``; proportional to ``I1**2 - I2**2``."""
    return float(np.linalg.det(toeplitz_blocks(params, omega, 1).assembled).real)


def _omega_scan(params: ChainParams, steps: int):
    w_lo, w_hi = _omega_gap(params)
    if not w_hi > w_lo:
        raise NoMidGapError("the band gap is closed")
    m = EDGE_MARGIN * (w_hi - w_lo)
    return np.linspace(w_lo + m, w_hi - m, steps + 1)


def det_t0_roots(params: ChainParams, steps: int = 400) -> tuple[float, float]:
    """Zeros of ``det T_0(omega)`` in the gap, by scan and bisection."""
    grid = _omega_scan(params, steps)
    vals = np.array([det_t0(params, w) for w in grid])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if idx.size == 0:
        raise NoMidGapError("det T0 has no zero in the gap")
    if idx.size != 2:
        raise BranchAmbiguityError(f"det T0 changes sign {idx.size} times in the gap")
    roots = [bisect(lambda w: det_t0(params, w), grid[i], grid[i + 1], xtol=1e-15, maxiter=200)
             for i in idx]
    return float(roots[0]), float(roots[1])


def _sorted_eigs(params: ChainParams, omega: float, N: int) -> np.ndarray:
    return np.linalg.eigvalsh(toeplitz_blocks(params, omega, N).assembled)


def solve_midgap_removed(params: ChainParams, N: int, steps: int = 400) -> tuple[float, float]:
    """Frequencies where the ``N``-removed-dimer matrix ``T_N(omega)`` is singular.

    Eigenvalue branches are matched by sorted order along an ``omega`` scan
    of the gap interior (``steps`` intervals, at least 400); every sign
    change of a branch is refined by bisection on that branch.
    """
    if steps < 400:
        raise ValueError("the omega scan needs at least 400 steps")
    grid = _omega_scan(params, steps)
    eigs = np.array([_sorted_eigs(params, w, N) for w in grid])
    crossings = []
    for branch in range(eigs.shape[1]):
        col = eigs[:, branch]
        for i in np.nonzero(np.sign(col[:-1]) * np.sign(col[1:]) < 0)[0]:
            crossings.append((branch, i))
    if not crossings:
        raise NoMidGapError(f"no eigenvalue branch of T_{N} crosses zero inside the gap")
    if len(crossings) != 2:
        raise BranchAmbiguityError(
            f"expected two zero crossings of T_{N}, found {len(crossings)}: {crossings}"
        )
    roots = []
    for branch, i in crossings:
        def f(w, branch=branch):
            return _sorted_eigs(params, w, N)[branch]

        root = bisect(f, grid[i], grid[i + 1], xtol=1e-15, maxiter=200)
        T = toeplitz_blocks(params, root, N).assembled
        if abs(f(root)) > 1e-9 * np.linalg.norm(T, 2):
            raise ConvergenceError(f"branch {branch} bisection stalled at |eig| = {abs(f(root)):.3g}")
        roots.append(float(root))
    roots.sort()
    return roots[0], roots[1]


def null_vector(params: ChainParams, omega: float, N: int) -> np.ndarray:
    """Eigenvector of ``T_N(omega)`` for its smallest-magnitude eigenvalue, phase-normalized.

    The phase is chosen so that the largest component is real and positive;
    ``T_N`` is real symmetric for this chain, so the result is real up to
    rounding.
    """
    vals, vecs = np.linalg.eigh(toeplitz_blocks(params, omega, N).assembled)
    v = vecs[:, int(np.argmin(np.abs(vals)))]
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def j_parity(v) -> tuple[float, float]:
    """Relative residuals ``||v - J conj(v)||/||v||`` and ``||v + J conj(v)||/||v||``."""
    v = np.asarray(v, dtype=complex)
    Jv = np.conj(v[::-1])
    n = np.linalg.norm(v)
    return float(np.linalg.norm(v - Jv) / n), float(np.linalg.norm(v + Jv) / n)


# ---------------------------------------------------------------------------
# limits and summaries


@dataclass(frozen=True)
class LimitFit:
    """Geometric extrapolation ``mid(N) = omega_inf + A r**N`` of bracket midpoints."""

    omega_inf: float
    residual: float
    N: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray


def fit_omega_infinity(params: ChainParams, N_max: int = 5, pairs=None) -> LimitFit:
    """Fit the bracket midpoints for ``N = 1..N_max``.

    ``pairs`` may supply already computed ``solve_midgap_removed`` results
    for those ``N``.
    """
    if N_max < 3:
        raise ValueError("N_max must be at least 3")
    Ns = np.arange(1, N_max + 1)
    if pairs is None:
        pairs = [solve_midgap_removed(params, int(n)) for n in Ns]
    pairs = np.asarray(pairs, dtype=float)[:N_max]
    w1, w2 = pairs[:, 0], pairs[:, 1]
    mid = 0.5 * (w1 + w2)
    lo, hi = w1[-1], w2[-1]

    def model(n, w_inf, amp, rate):
        return w_inf + amp * rate ** n

    try:
        # the covariance is not used; with N_max = 3 the fit is exactly determined
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(model, Ns.astype(float), mid, p0=(mid[-1], mid[0] - mid[-1], 0.5),
                                bounds=([lo, -np.inf, 0.0], [hi, np.inf, 1.0]), maxfev=20000)
        w_inf = float(popt[0])
        residual = float(np.sqrt(np.mean((model(Ns, *popt) - mid) ** 2)))
    except RuntimeError:
        w_inf, residual = float(mid[-1]), float(np.std(mid))
    return LimitFit(float(np.clip(w_inf, lo, hi)), residual, Ns, w1, w2)


def omega_infinity(params: ChainParams, N_max: int = 5) -> float:
    """Common limit of the two hybridized mid-gap frequencies."""
    return fit_omega_infinity(params, N_max).omega_inf


def midgap_interval(params: ChainParams) -> tuple[float, float]:
    """Range ``[omega_1(L), omega_2(L)]`` swept by the mid-gap frequencies."""
    return solve_midgap_removed(params, 1)


@dataclass(frozen=True)
class MidGapResult:
    omega_minus: np.ndarray
    omega_plus: np.ndarray
    gap: tuple[float, float]
    omega_inf: float
    interval: tuple[float, float]
    fit_residual: float


def midgap_result(params: ChainParams, N_max: int = 5) -> MidGapResult:
    fit = fit_omega_infinity(params, N_max)
    return MidGapResult(
        omega_minus=fit.omega1,
        omega_plus=fit.omega2,
        gap=_omega_gap(params),
        omega_inf=fit.omega_inf,
        interval=(float(fit.omega1[0]), float(fit.omega2[0])),
        fit_residual=fit.residual,
    )


# ---------------------------------------------------------------------------
# diagnostics


def appendix_b_diagnostics(params: ChainParams, samples: int = 50) -> dict:
    """Sign and monotonicity checks behind the existence argument.

    The report has one entry per check with its measured value and an
    ``ok`` flag; ``report["ok"]`` is the conjunction.  Nothing is raised.
    """
    L, l0 = params.L, params.l0
    report: dict = {"l0": l0}
    lam_lo, lam_hi = _edge_lambdas(params)
    c12_pi = quasi_capacitance(params, math.pi / L).c12
    expected = 0.0 if l0 == 0.5 else math.copysign(1.0, l0 - 0.5)
    report["c12_pi"] = {
        "value": c12_pi.real,
        "imag": c12_pi.imag,
        "expected_sign": expected,
        "ok": bool(expected == 0.0 or np.sign(c12_pi.real) == expected),
    }

    if l0 < 0.5:
        t = np.linspace(-np.pi, np.pi, 129)[1:]
        t = t[np.abs(t) >= 0.1]
        g_pi = g_of_alpha(BrillouinPoint.from_phase(np.pi, L), l0).real
        bound = np.array([g_of_alpha(BrillouinPoint.from_phase(x, L), l0).real for x in t]) - g_pi
        report["bound"] = {"max": float(bound.max()), "argmax_phase": float(t[int(np.argmax(bound))]),
                           "ok": bool(bound.max() <= 1e-10)}

    if lam_hi > lam_lo:
        width = lam_hi - lam_lo
        lams = lam_lo + width * (np.arange(samples) + 0.5) / samples
        h = 1e-4 * width
        deriv_minus, deriv_plus, imag = [], [], 0.0
        for lam in lams:
            lo_i = midgap_integrals(params, lam - h)
            hi_i = midgap_integrals(params, lam + h)
            deriv_minus.append(((hi_i[0] - hi_i[1]) - (lo_i[0] - lo_i[1])) / (2 * h))
            deriv_plus.append(((hi_i[0] + hi_i[1]) - (lo_i[0] + lo_i[1])) / (2 * h))
        rule = _zone_rule(params, 1)
        for lam in lams:
            e1, e2 = _etas(lam, rule.lambda1, rule.lambda2)
            imag = max(imag, abs(float(np.sum(rule.w * rule.phase * (e1 - e2)).imag)))
        report["monotonicity"] = {
            "samples": samples,
            "max_dI_minus": float(max(deriv_minus)),
            "max_dI_plus": float(max(deriv_plus)),
            "ok": bool(max(deriv_minus) < 0 and max(deriv_plus) < 0),
        }
        report["imag_I2"] = {"max": imag, "ok": bool(imag < 1e-8)}

    phases = -np.pi + 2.0 * np.pi * (np.arange(16) + 0.5) / 16
    l0_grid = (0.2, 0.4, 0.6, 0.8)
    diff = 0.0
    for x in phases:
        p = BrillouinPoint.from_phase(x, L)
        for l0_k in l0_grid:
            diff = max(diff, abs(g_of_alpha(p, l0_k) - g_of_alpha_lerch(p, l0_k)))
    report["g_cross_check"] = {"max_abs_diff": float(diff), "ok": bool(diff < 1e-8)}

    report["ok"] = all(v["ok"] for v in report.values() if isinstance(v, dict))
    return report
