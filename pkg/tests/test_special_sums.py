import math

import mpmath
import numpy as np
import pytest

from dimerchain.errors import DomainError, SingularityError
from dimerchain.special_sums import (
    BrillouinPoint,
    clausen2,
    dimer_sum,
    dimer_sum_grid,
    dimer_sum_many,
    direct_monopole_sum,
    g_of_alpha,
    g_of_alpha_lerch,
    g_series,
    lerch_phi,
    log_kernel,
    monopole_sum,
    wynn_epsilon,
)

L = 9.0


def mp_dimer_sum(t, l, L):
    """Independent oracle: sum_m e^{imt}/|mL + l| through mpmath's Lerch transcendent."""
    x = mpmath.mpf(l) / L
    z = mpmath.expj(t)
    total = mpmath.lerchphi(z, 1, x) + mpmath.lerchphi(mpmath.conj(z), 1, 1 - x) * mpmath.conj(z)
    return complex(total / L)


class TestBrillouinPoint:
    def test_phase_and_singular_flag(self):
        p = BrillouinPoint(alpha=math.pi / L, L=L)
        assert p.phase == math.pi
        assert not p.is_singular
        assert BrillouinPoint(alpha=0.0, L=L).is_singular

    def test_rejects_outside_zone(self):
        with pytest.raises(DomainError):
            BrillouinPoint(alpha=1.5 * math.pi / L, L=L)

    def test_from_phase_round_trip(self):
        assert BrillouinPoint.from_phase(1.25, L).phase == pytest.approx(1.25, abs=1e-15)


class TestMonopoleSum:
    def test_zone_edge_is_minus_log_four(self):
        assert monopole_sum(BrillouinPoint(math.pi / L, L)) == pytest.approx(-math.log(4.0), abs=1e-15)

    def test_quarter_phase_matches_direct_summation(self):
        p = BrillouinPoint(math.pi / 2 / L, L)
        assert monopole_sum(p) == pytest.approx(-math.log(2.0), abs=1e-14)
        assert direct_monopole_sum(math.pi / 2) == pytest.approx(-math.log(2.0), abs=1e-8)

    def test_singular_at_zero(self):
        with pytest.raises(SingularityError):
            monopole_sum(BrillouinPoint(0.0, L))

    def test_log_kernel_vectorized_grows_near_zero(self):
        t = np.array([1e-1, 1e-3, 1e-6])
        vals = log_kernel(t)
        assert np.all(np.diff(vals) > 0)

    def test_direct_sum_against_mpmath(self):
        for t in (0.3, 1.7, -2.9):
            oracle = 2 * float(mpmath.nsum(lambda m: mpmath.cos(m * t) / m, [1, mpmath.inf]))
            assert direct_monopole_sum(t) == pytest.approx(oracle, abs=1e-9)


def test_wynn_epsilon_accelerates_alternating_series():
    partial = np.cumsum([(-1) ** k / (k + 1) for k in range(30)])
    best, err = wynn_epsilon(partial)
    assert abs(best - math.log(2.0)) < 1e-12
    assert err < 1e-8


def test_clausen_against_mpmath():
    for t in (1e-3, 0.5, 2.0, 3.1):
        assert float(clausen2(t)) == pytest.approx(float(mpmath.clsin(2, t)), abs=1e-14)


class TestDimerSum:
    @pytest.mark.parametrize("t", [1e-3, 0.1, 1.0, 2.5, math.pi, -0.7])
    @pytest.mark.parametrize("l", [3.0, 4.5, 6.0, 8.0])
    def test_matches_lerch_oracle(self, t, l):
        value = dimer_sum(BrillouinPoint.from_phase(t, L), l)
        assert abs(value - mp_dimer_sum(t, l, L)) < 1e-12

    def test_cancels_exactly_for_centered_dimer_at_zone_edge(self):
        assert dimer_sum(BrillouinPoint(math.pi / L, L), L / 2) == 0

    def test_negative_at_zone_edge_for_l0_two_thirds(self):
        value = dimer_sum(BrillouinPoint(math.pi / L, L), 6.0)
        assert value.real < 0

    @pytest.mark.parametrize("l", [2.0, 6.0])
    def test_real_at_zone_edge(self, l):
        assert dimer_sum(BrillouinPoint(math.pi / L, L), l).imag == 0.0

    def test_conjugate_symmetry(self):
        for t in (0.2, 1.3, 2.8):
            a = dimer_sum(BrillouinPoint.from_phase(t, L), 6.0)
            b = dimer_sum(BrillouinPoint.from_phase(-t, L), 6.0)
            assert b == a.conjugate()

    def test_singular_at_zero(self):
        with pytest.raises(SingularityError):
            dimer_sum(BrillouinPoint(0.0, L), 6.0)

    def test_rejects_bad_separation(self):
        with pytest.raises(DomainError):
            dimer_sum(BrillouinPoint(0.1, L), 9.5)

    def test_vectorized_matches_pointwise(self):
        t = np.array([-3.0, -1e-3, 2e-3, 0.4, 2.2, math.pi])
        many = dimer_sum_many(t, 6.0, L)
        single = np.array([dimer_sum(BrillouinPoint.from_phase(x, L), 6.0) for x in t])
        assert np.max(np.abs(many - single)) < 1e-12

    def test_fft_grid_matches_pointwise(self):
        t, vals = dimer_sum_grid(64, 6.0, L)
        single = np.array([dimer_sum(BrillouinPoint.from_phase(x, L), 6.0) for x in t[::7]])
        assert np.max(np.abs(vals[::7] - single)) < 1e-10
        assert np.all(t != 0)


class TestLerch:
    def test_zero_argument(self):
        assert lerch_phi(0, 2.5) == pytest.approx(1 / 2.5)

    def test_minus_one_gives_log_two(self):
        assert lerch_phi(-1, 1.0).real == pytest.approx(math.log(2.0), abs=1e-10)

    def test_unit_circle_point_against_mpmath(self):
        z = complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
        oracle = complex(mpmath.lerchphi(z, 1, 1))
        assert abs(lerch_phi(z, 1.0) - oracle) < 1e-8 * abs(oracle)

    @pytest.mark.parametrize("z", [0.5, -0.9 + 0.2j, complex(math.cos(2.0), math.sin(2.0))])
    @pytest.mark.parametrize("a", [0.25, 1.0, 1.75])
    def test_against_mpmath(self, z, a):
        oracle = complex(mpmath.lerchphi(z, 1, a))
        assert abs(lerch_phi(z, a) - oracle) < 1e-10 * abs(oracle)

    def test_contiguous_relation(self):
        z = complex(math.cos(1.1), math.sin(1.1))
        for a in (0.3, 1.0, 2.2):
            lhs = lerch_phi(z, a)
            rhs = 1 / a + z * lerch_phi(z, a + 1)
            assert abs(lhs - rhs) < 1e-9

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            lerch_phi(1.0, 1.0)
        with pytest.raises(DomainError):
            lerch_phi(2.0, 1.0)
        with pytest.raises(DomainError):
            lerch_phi(0.5, 0.0)


class TestG:
    @pytest.mark.parametrize("l0", [0.2, 1 / 3, 0.5, 2 / 3, 0.9])
    def test_zone_edge_real_part_positive(self, l0):
        assert g_of_alpha(BrillouinPoint(math.pi / L, L), l0).real > 0

    def test_paths_agree_at_half(self):
        p = BrillouinPoint(math.pi / L, L)
        assert abs(g_of_alpha(p, 0.5) - g_of_alpha_lerch(p, 0.5)) < 1e-8

    def test_series_agrees_at_two_thirds_pi(self):
        t = 2 * math.pi / 3
        for l0 in (0.3, 0.7):
            integral = g_of_alpha(BrillouinPoint.from_phase(t, L), l0)
            assert abs(g_series(t, l0, terms=100_000) - integral) < 1e-6

    def test_paths_agree_on_grid(self):
        for t in np.linspace(-3.0, 3.1, 9):
            p = BrillouinPoint.from_phase(t, L)
            for l0 in (0.15, 0.45, 0.8):
                assert abs(g_of_alpha(p, l0) - g_of_alpha_lerch(p, l0)) < 1e-8

    def test_against_mpmath_series(self):
        t, l0 = 1.3, 0.4
        z = mpmath.expj(t)
        oracle = z * (2 * mpmath.lerchphi(z, 1, 1) - mpmath.lerchphi(z, 1, 1 + l0) - mpmath.lerchphi(z, 1, 1 - l0))
        assert abs(g_of_alpha(BrillouinPoint.from_phase(t, L), l0) - complex(oracle)) < 1e-10

    def test_errors(self):
        with pytest.raises(SingularityError):
            g_of_alpha(BrillouinPoint(0.0, L), 0.5)
        with pytest.raises(DomainError):
            g_of_alpha(BrillouinPoint(0.1, L), 1.0)
