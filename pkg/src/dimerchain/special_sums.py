"""Lattice sums and special functions behind the dilute capacitance formulas.

All one-dimensional lattice sums are written in terms of the Bloch phase
``t = alpha * L`` in ``(-pi, pi]``.  The only singular point is ``t = 0``,
where the monopole and dimer sums diverge logarithmically.

Acceleration strategy for the slowly convergent oscillatory sums: the terms
``m`` and ``-m`` are paired, the known kernels ``cos(mt)/m`` and
``sin(mt)/m**2`` are subtracted (they sum to a logarithm and to the Clausen
function respectively), and the remainders, which decay like ``m**-3`` and
``m**-4``, are truncated using a summation-by-parts (Dirichlet) tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import zeta

from .errors import DomainError, SingularityError

__all__ = [
    "BrillouinPoint",
    "log_kernel",
    "monopole_sum",
    "direct_monopole_sum",
    "wynn_epsilon",
    "clausen2",
    "dimer_sum",
    "dimer_sum_grid",
    "dimer_sum_many",
    "lerch_phi",
    "g_of_alpha",
    "g_of_alpha_lerch",
    "g_series",
]

#: absolute tail tolerance for the accelerated lattice sums
SUM_TAIL_TOL = 1e-13

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class BrillouinPoint:
    """A quasimomentum ``alpha`` in the Brillouin zone ``(-pi/L, pi/L]``."""

    alpha: float
    L: float

    def __post_init__(self):
        if self.L <= 0:
            raise DomainError(f"cell length must be positive, got {self.L}")
        t = self.alpha * self.L
        if not (-math.pi - 1e-12 < t <= math.pi + 1e-12):
            raise DomainError(f"alpha*L = {t} outside (-pi, pi]")

    @property
    def phase(self) -> float:
        t = self.alpha * self.L
        # snap rounding residue so the zone edge is hit exactly
        if abs(abs(t) - math.pi) <= 4.0 * math.ulp(math.pi):
            return math.copysign(math.pi, t)
        return t

    @property
    def is_singular(self) -> bool:
        return self.alpha == 0.0

    @classmethod
    def from_phase(cls, t: float, L: float) -> "BrillouinPoint":
        return cls(alpha=t / L, L=L)


def _check_phase(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.sin(t / 2.0) == 0.0):
        raise SingularityError("lattice sum diverges at alpha = 0")
    return t


def log_kernel(t):
    """``sum_{m != 0} exp(i m t) / |m| = -log(2 - 2 cos t)``, vectorized.

    Evaluated as ``-2 log|2 sin(t/2)|`` which keeps full relative accuracy
    for small ``t``.
    """
    t = _check_phase(t)
    return -2.0 * np.log(np.abs(2.0 * np.sin(t / 2.0)))


def monopole_sum(p: BrillouinPoint) -> float:
    """Closed form of ``sum_{m != 0} exp(i m alpha L) / |m|``."""
    if p.is_singular:
        raise SingularityError("monopole sum diverges at alpha = 0")
    return float(log_kernel(p.phase))


def wynn_epsilon(partial_sums) -> tuple[complex, float]:
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Returns the best even-column estimate and the difference between its two
    last entries, used as an error indicator.
    """
    prev = np.zeros(len(partial_sums) + 1, dtype=complex)
    cur = np.asarray(partial_sums, dtype=complex)
    best = cur[-1]
    best_err = abs(cur[-1] - cur[-2])
    k = 0
    while len(cur) > 2:
        d = np.diff(cur)
        if np.any(np.abs(d) < 1e-300):
            break
        prev, cur = cur, prev[1:len(cur)] + 1.0 / d
        k += 1
        if k % 2 == 0 and len(cur) >= 2:
            err = abs(cur[-1] - cur[-2])
            if err < best_err:
                best, best_err = cur[-1], err
    return complex(best), float(best_err)


def direct_monopole_sum(t: float, terms: int | None = None) -> float:
    """Monopole sum by explicit partial summation plus Wynn acceleration.

    Independent of :func:`log_kernel`; serves as its numerical cross-check.
    """
    t = float(t)
    if math.sin(t / 2.0) == 0.0:
        raise SingularityError("monopole sum diverges at alpha = 0")
    if terms is None:
        terms = int(math.ceil(16.0 * math.pi / abs(t))) + 32
    m = np.arange(1, terms + 1)
    partial = np.cumsum(np.exp(1j * m * t) / m)
    est, _ = wynn_epsilon(partial)
    return 2.0 * est.real


def clausen2(t):
    """Clausen function ``Cl_2(t) = sum_{m>=1} sin(m t) / m**2``.

    Uses the expansion of ``-int_0^t log|2 sin(x/2)| dx`` in even zeta
    values, convergent for ``|t| < 2 pi``; arguments are reduced to
    ``[-pi, pi]`` first.
    """
    t = np.asarray(t, dtype=float)
    t = np.remainder(t + np.pi, 2.0 * np.pi) - np.pi
    out = np.where(t == 0.0, 0.0, t - t * np.log(np.abs(np.where(t == 0.0, 1.0, t))))
    x2 = (t / (2.0 * np.pi)) ** 2
    power = t.copy()
    for k in range(1, 40):
        power = power * x2
        out = out + zeta(2 * k) / (k * (2 * k + 1)) * power
    return out


def _dimer_remainders(m, t, l, L):
    mL = m * L
    denom = mL * mL - l * l
    h_re = 2.0 * l * l / (mL * denom)
    h_im = -2.0 * l ** 3 / (mL * mL * denom)
    return h_re * np.cos(m * t), h_im * np.sin(m * t)


def dimer_sum(p: BrillouinPoint, l: float) -> complex:
    """Accelerated ``sum_{m in Z} exp(i m alpha L) / |m L + l|`` for ``0 < l < L``."""
    L = p.L
    if not 0.0 < l < L:
        raise DomainError(f"need 0 < l < L, got l={l}, L={L}")
    if p.is_singular:
        raise SingularityError("dimer sum diverges at alpha = 0")
    t = p.phase
    s = abs(math.sin(t / 2.0))
    # Dirichlet bound: |sum_{m>M} cos(mt) h(m)| <= h(M+1) / |sin(t/2)|
    h0 = 2.0 * l * l / L ** 3
    terms = int(math.ceil((h0 / (SUM_TAIL_TOL * s)) ** (1.0 / 3.0))) + 8
    total_re = 1.0 / l + float(log_kernel(t)) / L
    total_im = -2.0 * l / L ** 2 * float(clausen2(t))
    chunk = 1 << 16
    for start in range(1, terms + 1, chunk):
        m = np.arange(start, min(start + chunk, terms + 1), dtype=float)
        r_re, r_im = _dimer_remainders(m, t, l, L)
        total_re += math.fsum(r_re)
        total_im += math.fsum(r_im)
    if abs(t) == math.pi:
        # sin(m pi) = 0; for l = L/2 the terms m and -m-1 cancel pairwise
        total_im = 0.0
        if 2.0 * l == L:
            total_re = 0.0
    return complex(total_re, total_im)


def dimer_sum_many(t, l: float, L: float) -> np.ndarray:
    """Vectorized :func:`dimer_sum` at an array of Bloch phases ``t = alpha L``.

    Terms are summed in blocks ``m = s..s+B-1`` as
    ``Re/Im[exp(i s t) * sum_k h_{s+k} exp(i k t)]``, i.e. one matrix-vector
    product per block against a fixed table of ``exp(i k t)``.  A node stops
    once its Dirichlet bound is met (possibly a few terms late, which only
    helps accuracy).
    """
    if not 0.0 < l < L:
        raise DomainError(f"need 0 < l < L, got l={l}, L={L}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _check_phase(t)
    s = np.abs(np.sin(t / 2.0))
    h0 = 2.0 * l * l / L ** 3
    terms = np.ceil((h0 / (SUM_TAIL_TOL * s)) ** (1.0 / 3.0)).astype(np.int64) + 8
    total_re = 1.0 / l + log_kernel(t) / L
    total_im = -2.0 * l / L ** 2 * clausen2(t)
    block = 2048
    table = np.exp(1j * np.outer(t, np.arange(block)))
    for start in range(1, int(terms.max()) + 1, block):
        active = np.nonzero(terms >= start)[0]
        m = np.arange(start, start + block, dtype=float)
        mL = m * L
        denom = mL * mL - l * l
        h_re = 2.0 * l * l / (mL * denom)
        h_im = -2.0 * l ** 3 / (mL * mL * denom)
        shift = np.exp(1j * start * t[active])
        rows = table[active]
        total_re[active] += (shift * (rows @ h_re)).real
        total_im[active] += (shift * (rows @ h_im)).imag
    edge = np.abs(t) == np.pi
    total_im[edge] = 0.0
    if 2.0 * l == L:
        total_re[edge] = 0.0
    return total_re + 1j * total_im


@lru_cache(maxsize=64)
def _dimer_sum_fine_grid(n2: int, l: float, L: float) -> np.ndarray:
    # values at t_k = 2 pi k / n2 for k = 0..n2-1 (k = 0 left as nan)
    total_terms = 16 * n2
    folded_re = np.zeros(n2)
    folded_im = np.zeros(n2)
    for start in range(1, total_terms + 1, n2):
        m = np.arange(start, start + n2, dtype=float)
        mL = m * L
        denom = mL * mL - l * l
        idx = np.remainder(m.astype(np.int64), n2)
        folded_re[idx] += 2.0 * l * l / (mL * denom)
        folded_im[idx] += -2.0 * l ** 3 / (mL * mL * denom)
    # sum_m c_m exp(i m t_k) = n2 * ifft(c)_k
    re_part = (n2 * np.fft.ifft(folded_re)).real
    im_part = (n2 * np.fft.ifft(folded_im)).imag
    t = 2.0 * np.pi * np.arange(n2) / n2
    out = np.full(n2, np.nan, dtype=complex)
    nz = slice(1, None)
    out[nz] = (
        1.0 / l
        + log_kernel(t[nz]) / L
        + re_part[nz]
        + 1j * (-2.0 * l / L ** 2 * clausen2(t[nz]) + im_part[nz])
    )
    out.setflags(write=False)
    return out


def dimer_sum_grid(n: int, l: float, L: float) -> tuple[np.ndarray, np.ndarray]:
    """Dimer sum on the ``n``-point midpoint grid of ``(-pi, pi)``.

    Nodes are ``t_k = -pi + 2 pi (k + 1/2) / n``.  The remainder series is
    folded modulo the grid period and summed with one FFT, so the cost is
    ``O(n log n)`` for all nodes at once.  Returns ``(t, values)``.
    """
    if not 0.0 < l < L:
        raise DomainError(f"need 0 < l < L, got l={l}, L={L}")
    if n < 2 or n % 2:
        raise DomainError("midpoint grid size must be an even integer >= 2")
    n2 = 2 * n
    fine = _dimer_sum_fine_grid(n2, float(l), float(L))
    # midpoint nodes are the odd nodes of the doubled grid, shifted by -pi
    k = np.arange(n)
    t = -np.pi + 2.0 * np.pi * (k + 0.5) / n
    idx = np.remainder(2 * k + 1 + n, n2)
    return t, np.array(fine[idx])


def _composite_gauss(f: Callable[[np.ndarray], np.ndarray], breaks: np.ndarray,
                     rtol: float, atol: float = 0.0, max_splits: int = 12):
    """Composite 20-point Gauss-Legendre on panels, halving all panels until stable."""

    def integrate(edges):
        a, b = edges[:-1, None], edges[1:, None]
        half = 0.5 * (b - a)
        x = 0.5 * (a + b) + half * _GL_NODES[None, :]
        vals = f(x.ravel()).reshape(x.shape)
        return np.sum(half * vals * _GL_WEIGHTS[None, :])

    edges = np.asarray(breaks, dtype=float)
    est = integrate(edges)
    for _ in range(max_splits):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
        new = integrate(edges)
        if abs(new - est) <= max(rtol * abs(new), atol):
            return new
        est = new
    from .errors import ConvergenceError

    raise ConvergenceError("composite Gauss-Legendre did not converge")


def _graded_breaks(scale: float, T: float) -> np.ndarray:
    scale = min(max(scale, 1e-12), 1.0)
    near = scale * 2.0 ** np.arange(-4, int(math.ceil(math.log2(1.0 / scale))) + 1)
    near = near[near < 1.0]
    far = np.arange(1.0, T, 1.0)
    return np.unique(np.concatenate([[0.0], near, far, [T]]))


def lerch_phi(z: complex, a: float, rtol: float = 1e-10) -> complex:
    """Lerch transcendent ``Phi(z, 1, a)`` from its Laplace-type integral.

    ``Phi(z, 1, a) = int_0^inf exp(-a t) / (1 - z exp(-t)) dt`` for ``a > 0``
    and ``z`` off the ray ``[1, inf)``.  The integral is truncated at ``T``
    where the tail bound ``exp(-a T) / (a (1 - |z| exp(-T)))`` is negligible.
    """
    z = complex(z)
    a = float(a)
    if a <= 0:
        raise DomainError(f"Lerch parameter a must be positive, got {a}")
    if z.imag == 0.0 and z.real >= 1.0:
        raise DomainError(f"z = {z} lies on the branch cut [1, inf)")
    if z == 0:
        return complex(1.0 / a)
    rz = abs(z)
    # crude magnitude guess for a relative tail target
    guess = 1.0 / (a * max(abs(1.0 - z), 1e-300))
    T = max(1.0, math.log(max(rz, 1.0)) + 1.0)
    while math.exp(-a * T) / (a * (1.0 - rz * math.exp(-T))) > 1e-3 * rtol * min(guess, 1.0 / a):
        T *= 1.5

    def integrand(t):
        return np.exp(-a * t) / (1.0 - z * np.exp(-t))

    breaks = _graded_breaks(abs(1.0 - z), T)
    return complex(_composite_gauss(integrand, breaks, rtol=1e-2 * rtol))


def _check_l0(l0):
    if not 0.0 < l0 < 1.0:
        raise DomainError(f"l0 must lie in (0, 1), got {l0}")


def g_of_alpha(p: BrillouinPoint, l0: float, rtol: float = 1e-12) -> complex:
    """``g(alpha) = sum_{m>=1} exp(i m alpha L) (2/m - 1/(m+l0) - 1/(m-l0))``.

    Real part from ``int (cosh(l0 t)-1)(exp(-t)-cos) / (cosh t - cos) dt``,
    imaginary part from ``-int (cosh(l0 t)-1) sin / (cosh t - cos) dt``
    (``cos``, ``sin`` of ``alpha L``).
    """
    _check_l0(l0)
    if p.is_singular:
        raise SingularityError("g(alpha) is undefined at alpha = 0")
    t_a = p.phase
    c, s = math.cos(t_a), math.sin(t_a)
    decay = 1.0 - l0
    T = 40.0 / decay

    def common(t):
        # (cosh(l0 t) - 1) / (cosh t - c), rescaled by 2 exp(-t) to avoid overflow
        num = np.exp((l0 - 1.0) * t) + np.exp(-(l0 + 1.0) * t) - 2.0 * np.exp(-t)
        den = 1.0 + np.exp(-2.0 * t) - 2.0 * c * np.exp(-t)
        return num / den

    breaks = _graded_breaks(abs(2.0 * math.sin(t_a / 2.0)), T)
    scale = 1.0 / decay
    re = _composite_gauss(lambda t: common(t) * (np.exp(-t) - c), breaks,
                          rtol=rtol, atol=rtol * scale)
    im = _composite_gauss(lambda t: -s * common(t), breaks,
                          rtol=rtol, atol=rtol * scale)
    return complex(re, im)


def g_of_alpha_lerch(p: BrillouinPoint, l0: float) -> complex:
    """Second evaluation path for ``g`` via three Lerch transcendents."""
    _check_l0(l0)
    if p.is_singular:
        raise SingularityError("g(alpha) is undefined at alpha = 0")
    z = complex(math.cos(p.phase), math.sin(p.phase))
    return z * (2.0 * lerch_phi(z, 1.0) - lerch_phi(z, 1.0 + l0) - lerch_phi(z, 1.0 - l0))


def g_series(t: float, l0: float, terms: int = 100_000) -> complex:
    """Truncated series for ``g`` with ``m``-terms combined as ``-2 l0^2 / (m (m^2 - l0^2))``."""
    m = np.arange(1, terms + 1, dtype=float)
    coef = -2.0 * l0 * l0 / (m * (m * m - l0 * l0))
    return complex(np.sum(coef * np.exp(1j * m * t)))
