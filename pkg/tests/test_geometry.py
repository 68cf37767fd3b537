import math

import numpy as np
import pytest

from dimerchain.errors import DomainError, OverlapError
from dimerchain.geometry import (
    UNIT_SPHERE_VOLUME,
    ChainParams,
    FiniteChain,
    build_finite_chain,
    make_rng,
    perturb_chain,
)


class TestChainParams:
    def test_derived_quantities(self):
        p = ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4)
        assert p.l0 == pytest.approx(2 / 3)
        assert p.cap == pytest.approx(0.4 * math.pi)
        assert p.vol1 == pytest.approx(1e-3 * UNIT_SPHERE_VOLUME)

    def test_explicit_volume_is_kept(self):
        assert ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4, vol1=2.0).vol1 == 2.0

    def test_with_recomputes_default_volume(self):
        p = ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4)
        assert p.with_(eps=0.2).vol1 == pytest.approx(8e-3 * UNIT_SPHERE_VOLUME)
        assert p.with_(l=3.0).l0 == pytest.approx(1 / 3)

    def test_unit_sphere(self):
        p = ChainParams.unit_sphere(L=9.0, l=6.0, delta=1 / 7000)
        assert p.eps == 1.0 and p.cap == pytest.approx(4 * math.pi)

    @pytest.mark.parametrize("kwargs", [
        dict(L=9.0, l=9.0, eps=0.1, delta=1e-4),
        dict(L=9.0, l=6.0, eps=0.0, delta=1e-4),
        dict(L=9.0, l=6.0, eps=0.1, delta=-1.0),
        dict(L=float("nan"), l=6.0, eps=0.1, delta=1e-4),
        dict(L=9.0, l=6.0, eps=0.1, delta=1e-4, vol1=0.0),
    ])
    def test_domain_errors(self, kwargs):
        with pytest.raises(DomainError):
            ChainParams(**kwargs)

    def test_overlap(self):
        with pytest.raises(OverlapError):
            ChainParams(L=9.0, l=6.0, eps=1.6, delta=1e-4)


class TestFiniteChain:
    def test_layout_without_dislocation_is_periodic_dimers(self):
        p = ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4)
        chain = build_finite_chain(p, 2, 0.0)
        assert len(chain) == 10
        gaps = chain.gaps
        # lone D2, then alternating l' and l separations
        np.testing.assert_allclose(gaps, [3, 6, 3, 6, 3, 6, 3, 6, 3], atol=1e-12)
        assert chain.centers[0] == pytest.approx(-24.0)
        assert chain.midpoint == pytest.approx(-4.5)

    def test_dislocation_widens_central_gap(self):
        p = ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4)
        chain = build_finite_chain(p, 2, 2.5)
        # the cell boundary between the halves grows from L - l to L - l + d
        assert chain.gaps[4] == pytest.approx(3.0 + 2.5)
        assert chain.dislocation == 2.5 and chain.K == 2

    def test_centers_are_read_only(self):
        chain = build_finite_chain(ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4), 1)
        with pytest.raises(ValueError):
            chain.centers[0] = 1.0

    def test_rejects_overlap_and_bad_input(self):
        p = ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4)
        with pytest.raises(OverlapError):
            FiniteChain(centers=[0.0, 0.15], radius=0.1, params=p)
        with pytest.raises(OverlapError):
            FiniteChain(centers=[1.0, 0.0], radius=0.1, params=p)
        with pytest.raises(DomainError):
            build_finite_chain(p, 0)
        with pytest.raises(DomainError):
            build_finite_chain(p, 1, -1.0)


class TestRandomness:
    def test_streams_are_reproducible_and_distinct(self):
        a = make_rng(7, 3, 0).normal(size=4)
        b = make_rng(7, 3, 0).normal(size=4)
        c = make_rng(7, 3, 1).normal(size=4)
        d = make_rng(7, 4, 0).normal(size=4)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c) and not np.allclose(a, d)

    def test_negative_seed_rejected(self):
        with pytest.raises(DomainError):
            make_rng(-1)

    def test_perturb_zero_sigma_is_identity(self):
        chain = build_finite_chain(ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4), 1, 2.0)
        np.testing.assert_array_equal(perturb_chain(chain, 0.0, 1, 0).centers, chain.centers)

    def test_perturb_overlap_raises(self):
        chain = build_finite_chain(ChainParams.unit_sphere(L=9.0, l=6.0, delta=1e-3), 1)
        with pytest.raises(OverlapError):
            # huge disorder scrambles the order of the centers
            for trial in range(20):
                perturb_chain(chain, 50.0, 0, trial)


class TestLayoutExamples:
    def test_single_cell_chain(self):
        chain = build_finite_chain(ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4), 1, 0.0)
        np.testing.assert_allclose(chain.gaps, [3, 6, 3, 6, 3])
        np.testing.assert_allclose(np.sort(2 * chain.midpoint - chain.centers), chain.centers)

    @pytest.mark.parametrize("K", [1, 4, 10])
    def test_undislocated_chain_is_mirror_symmetric(self, K):
        chain = build_finite_chain(ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4), K, 0.0)
        np.testing.assert_allclose(np.sort(2 * chain.midpoint - chain.centers), chain.centers, atol=1e-12)

    def test_forty_two_resonators(self):
        chain = build_finite_chain(ChainParams.unit_sphere(L=9.0, l=6.0, delta=1 / 7000), 10, 30.0)
        assert len(chain) == 42
        assert chain.gaps[20] == pytest.approx(33.0)


class TestPerturbationStatistics:
    def test_reproducible_centers(self):
        chain = build_finite_chain(ChainParams.unit_sphere(L=9.0, l=6.0, delta=1 / 7000), 1, 10.0)
        a = perturb_chain(chain, 0.2, 42, 3).centers
        b = perturb_chain(chain, 0.2, 42, 3).centers
        assert a.tobytes() == b.tobytes()

    def test_offset_standard_deviation(self):
        offsets = 0.2 * make_rng(2024, 0).normal(0.0, 1.0, 100_000)
        assert 0.195 <= offsets.std() <= 0.205
