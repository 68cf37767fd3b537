import math

import numpy as np
import pytest

from dimerchain.capacitance import quasi_capacitance, quasi_eigen
from dimerchain.dislocation import (
    appendix_b_diagnostics,
    det_t0,
    det_t0_roots,
    eta_pair,
    fit_omega_infinity,
    j_parity,
    midgap_integrals,
    midgap_interval,
    midgap_result,
    null_vector,
    solve_midgap_removed,
    solve_midgap_unit,
    toeplitz_blocks,
    toeplitz_symbol,
)
from dimerchain.errors import NoMidGapError, OutOfGapError, PoleError
from dimerchain.spectra import band_gap, lambda_from_freq

# frozen reference values for L = 9, l = 6, eps = 0.1, delta = 1e-4
UNIT_ROOTS = (0.17374081314194, 0.17421144622466)
OMEGA_INF = 0.173923169


def inside(params, omega, frac):
    lo, hi = band_gap(params)
    return lo + frac * (hi - lo)


class TestSymbol:
    def test_eta_pair_definition(self, dilute):
        omega = inside(dilute, None, 0.5)
        alpha = 0.2
        eig = quasi_eigen(quasi_capacitance(dilute, alpha))
        lam = lambda_from_freq(omega, dilute)
        eta = eta_pair(dilute, omega, alpha)
        assert eta.eta1 == pytest.approx(eig.lambda1 / (lam - eig.lambda1))
        assert eta.eta2 == pytest.approx(eig.lambda2 / (lam - eig.lambda2))

    def test_pole_detected(self, dilute):
        lo, _ = band_gap(dilute)
        with pytest.raises(PoleError):
            eta_pair(dilute, lo, math.pi / dilute.L)

    def test_symbol_is_hermitian(self, dilute):
        sym = toeplitz_symbol(dilute, inside(dilute, None, 0.3), 0.25)
        np.testing.assert_allclose(sym.phi, sym.phi.conj().T, atol=1e-15)
        assert abs(sym.det.imag) < 1e-12 * abs(sym.det)


class TestUnitDislocation:
    def test_integrals_real_and_decreasing(self, dilute):
        lo, hi = band_gap(dilute)
        lam = lambda_from_freq(np.linspace(lo, hi, 7)[1:-1], dilute)
        I1 = np.array([midgap_integrals(dilute, x)[0] for x in lam])
        assert np.all(np.diff(I1) < 0)

    def test_out_of_gap(self, dilute):
        lo, _ = band_gap(dilute)
        with pytest.raises(OutOfGapError):
            midgap_integrals(dilute, lambda_from_freq(0.9 * lo, dilute))

    def test_frozen_roots(self, dilute):
        np.testing.assert_allclose(solve_midgap_unit(dilute), UNIT_ROOTS, rtol=1e-10)

    def test_no_root_for_short_intracell_separation(self, dilute_trivial):
        with pytest.raises(NoMidGapError):
            solve_midgap_unit(dilute_trivial)

    def test_closed_gap(self, dilute):
        with pytest.raises(NoMidGapError):
            solve_midgap_unit(dilute.with_(l=4.5))


class TestToeplitz:
    def test_single_block_determinant_vanishes_at_roots(self, dilute):
        roots = det_t0_roots(dilute)
        np.testing.assert_allclose(roots, UNIT_ROOTS, rtol=1e-10)
        lo, hi = band_gap(dilute)
        scale = abs(det_t0(dilute, 0.5 * (lo + hi)))
        for w in roots:
            assert abs(det_t0(dilute, w)) < 1e-6 * scale

    @pytest.mark.parametrize("N", [1, 3])
    def test_structure(self, dilute, N):
        T = toeplitz_blocks(dilute, inside(dilute, None, 0.4), N)
        A = T.assembled
        assert A.shape == (2 * N, 2 * N)
        np.testing.assert_allclose(A, A.conj().T, atol=1e-12 * np.abs(A).max())
        J = np.eye(2 * N)[::-1]
        np.testing.assert_allclose(A, J @ A.conj() @ J, atol=1e-12 * np.abs(A).max())
        if N > 1:
            np.testing.assert_allclose(T.block(-1), T.block(1).conj().T, atol=1e-12 * np.abs(A).max())
            with pytest.raises(IndexError):
                T.block(N)

    def test_bad_size(self, dilute):
        with pytest.raises(ValueError):
            toeplitz_blocks(dilute, inside(dilute, None, 0.5), 0)


class TestRemovedDimers:
    def test_single_dimer_matches_unit_roots(self, dilute):
        np.testing.assert_allclose(solve_midgap_removed(dilute, 1), UNIT_ROOTS, rtol=1e-10)

    def test_brackets_nest(self, dilute):
        pairs = [solve_midgap_removed(dilute, n) for n in (1, 2, 3)]
        for (a1, b1), (a2, b2) in zip(pairs, pairs[1:]):
            assert a1 < a2 < b2 < b1

    def test_null_vectors_have_opposite_parity(self, dilute):
        w1, w2 = solve_midgap_removed(dilute, 3)
        sym1, _ = j_parity(null_vector(dilute, w1, 3))
        _, anti2 = j_parity(null_vector(dilute, w2, 3))
        assert sym1 < 1e-8 and anti2 < 1e-8

    def test_j_parity_examples(self):
        assert j_parity(np.array([1.0, 2.0, 2.0, 1.0])) == (0.0, 2.0)
        sym, anti = j_parity(np.array([1.0, -1.0]))
        assert anti == 0.0 and sym == pytest.approx(2.0)

    def test_interval_and_limit(self, dilute):
        assert midgap_interval(dilute) == pytest.approx(UNIT_ROOTS, rel=1e-10)
        fit = fit_omega_infinity(dilute, 5)
        assert fit.omega_inf == pytest.approx(OMEGA_INF, rel=1e-6)
        assert fit.omega1[-1] < fit.omega_inf < fit.omega2[-1]
        res = midgap_result(dilute, 5)
        assert res.omega_inf == pytest.approx(fit.omega_inf)

    def test_limit_needs_three_sizes(self, dilute):
        with pytest.raises(ValueError):
            fit_omega_infinity(dilute, 2)


class TestDiagnostics:
    @pytest.mark.parametrize("fixture", ["dilute", "dilute_trivial"])
    def test_all_checks_pass(self, fixture, request):
        report = appendix_b_diagnostics(request.getfixturevalue(fixture), samples=20)
        assert report["ok"]

    def test_coupling_sign(self, dilute, dilute_trivial):
        a = appendix_b_diagnostics(dilute, samples=10)["c12_pi"]["value"]
        b = appendix_b_diagnostics(dilute_trivial, samples=10)["c12_pi"]["value"]
        assert b < 0 < a


class TestExamples:
    def test_eta_limits(self, dilute):
        alpha = 0.2
        eig = quasi_eigen(quasi_capacitance(dilute, alpha))
        low = eta_pair(dilute, 1e-9, alpha)
        assert low.eta1 == pytest.approx(-1.0) and low.eta2 == pytest.approx(-1.0)
        w1 = math.sqrt(dilute.delta * eig.lambda1 / dilute.vol1)
        assert eta_pair(dilute, math.sqrt(2) * w1, alpha).eta1 == pytest.approx(1.0)

    def test_eta_signs_at_zone_edge(self, dilute):
        eta = eta_pair(dilute, inside(dilute, None, 0.5), math.pi / dilute.L)
        assert eta.eta1 > 0 > eta.eta2

    @pytest.mark.parametrize("alpha", [0.05, 0.2, math.pi / 9])
    def test_symbol_identities(self, dilute, alpha):
        omega = inside(dilute, None, 0.6)
        sym = toeplitz_symbol(dilute, omega, alpha)
        eta = eta_pair(dilute, omega, alpha)
        expected = dilute.cap ** 2 * eta.eta1 * eta.eta2
        assert abs(sym.det - expected) < 1e-10 * abs(expected)
        J1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(J1 @ sym.phi @ J1, sym.phi.conj(), atol=1e-14 * np.abs(sym.phi).max())

    def test_block_reflection(self, dilute):
        T = toeplitz_blocks(dilute, inside(dilute, None, 0.7), 4)
        J1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        scale = np.abs(T.blocks).max()
        for m in range(-3, 4):
            np.testing.assert_allclose(T.block(m), J1 @ T.block(-m).conj() @ J1, atol=1e-10 * scale)

    def test_single_block_determinant_sign(self, dilute):
        for frac in (0.1, 0.35, 0.5, 0.9):
            omega = inside(dilute, None, frac)
            i1, i2 = midgap_integrals(dilute, lambda_from_freq(omega, dilute))
            assert np.sign(det_t0(dilute, omega)) == np.sign(i1 ** 2 - i2 ** 2)

    def test_sign_changes_on_dense_scan(self, dilute):
        lo, hi = band_gap(dilute)
        lam_lo, lam_hi = lambda_from_freq(lo, dilute), lambda_from_freq(hi, dilute)
        lams = lam_lo + (lam_hi - lam_lo) * (np.arange(200) + 0.5) / 200
        vals = np.array([midgap_integrals(dilute, x) for x in lams])
        for f in (vals[:, 0] - vals[:, 1], vals[:, 0] + vals[:, 1]):
            assert np.count_nonzero(np.diff(np.sign(f))) == 1

    def test_signs_for_short_intracell_separation(self, dilute_trivial):
        # no root: I1 - I2 stays positive and I1 + I2 stays negative across the gap
        lo, hi = band_gap(dilute_trivial)
        lam_lo, lam_hi = lambda_from_freq(lo, dilute_trivial), lambda_from_freq(hi, dilute_trivial)
        for frac in (1e-5, 0.25, 0.5, 0.75, 1 - 1e-5):
            i1, i2 = midgap_integrals(dilute_trivial, lam_lo + frac * (lam_hi - lam_lo))
            assert i1 - i2 > 0 > i1 + i2

    def test_interval_inside_gap_and_empty_otherwise(self, dilute, dilute_trivial):
        lo, hi = band_gap(dilute)
        a, b = midgap_interval(dilute)
        assert lo < a < OMEGA_INF < b < hi
        with pytest.raises(NoMidGapError):
            midgap_interval(dilute_trivial)
