"""Pair validation, heights, rotation numbers, and the word algebra."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renormpairs import contfrac
from renormpairs import funcspace as fs
from renormpairs import pairs as pr
from renormpairs.errors import IndexError_, PairConditionError

RHO = contfrac.GOLDEN_MEAN


def translation_pair(shift=RHO):
    return pr.rigid_pair(shift)


class TestMakePair:
    def test_translations_valid(self):
        p = translation_pair()
        assert not p.critical
        assert p.normalized

    def test_noncritical_rejected_when_required(self):
        eta = fs.fit_from_samples(lambda x: x - RHO, (0.0, 1.0), 7)
        xi = fs.fit_from_samples(lambda x: x + 1.0, (-RHO, 0.0), 7)
        with pytest.raises(PairConditionError) as exc:
            pr.make_pair(eta, xi, require_critical=True)
        assert exc.value.condition == "(V)"

    def test_golden_arnold_pair_critical(self, golden_pair):
        # critical family: eta'''(0) comes from f'''(0) = 4 pi^2 via the chain
        assert golden_pair.critical
        assert abs(golden_pair.xi0 - 1.0) < 1e-12

    def test_orientation_violation(self):
        eta = fs.fit_from_samples(lambda x: x + 0.5, (0.0, 1.0), 7)  # eta(0) > 0
        xi = fs.fit_from_samples(lambda x: x + 1.0, (-0.5, 0.0), 7)
        with pytest.raises(PairConditionError) as exc:
            pr.make_pair(eta, xi)
        assert exc.value.condition == "(I)"


class TestCommutator:
    def test_translations_commute(self):
        d = pr.commutator_defect(translation_pair())
        assert np.max(np.abs(d)) < 1e-12

    def test_single_map_iterates_commute(self, golden_pair):
        d = np.abs(pr.commutator_defect(golden_pair))
        res = max(golden_pair.eta.fit_residual, golden_pair.xi.fit_residual, 1e-14)
        # order-k defects feel the fit error through k derivatives; the
        # amplification factor of a degree-N series on a length-L interval
        # is about (2 N^2 / L)^k
        amp = 2.0 * golden_pair.degree**2 / (golden_pair.xi0 - golden_pair.eta0)
        for k in range(4):
            assert d[k] <= 10.0 * res * amp**k

    def test_perturbed_xi_shifts_order_zero(self, golden_pair):
        # oracle: finite difference of the defect in the perturbation size
        base = golden_pair
        xi_p = fs.ChebMap1D(base.xi.coeffs.copy(), base.xi.lo, base.xi.hi)
        xi_p.coeffs[0] += 1e-3
        pert = pr.Pair(base.eta, xi_p, base.critical, False, base.meta)
        d0 = pr.commutator_defect(pert)[0]
        expected = 1e-3 * (base.eta(base.xi0, 1) - 1.0)
        assert d0 == pytest.approx(expected, rel=2e-3)


class TestHeight:
    def test_golden_rigid(self):
        assert pr.height(translation_pair()) == 1

    def test_rho_03_height_three(self):
        assert pr.height(pr.rigid_pair(0.3)) == 3

    def test_eta_fixed_point_gives_infinity(self):
        eta = fs.fit_from_samples(lambda x: 1.5 * x - 0.25, (0.0, 1.0), 7)
        xi = fs.fit_from_samples(lambda x: x + 1.0, (-0.25, 0.0), 7)
        p = pr.Pair(eta, xi, False, False)
        assert math.isinf(pr.height(p))


class TestGlueRotation:
    def test_rigid_rotation(self):
        g = pr.glue_rotation_number(translation_pair(), 200_000)
        assert abs(g.value - RHO) <= g.bound

    def test_infinite_height_is_zero(self):
        eta = fs.fit_from_samples(lambda x: 1.5 * x - 0.25, (0.0, 1.0), 7)
        xi = fs.fit_from_samples(lambda x: x + 1.0, (-0.25, 0.0), 7)
        p = pr.Pair(eta, xi, False, False)
        r = pr.rotation_number_heights(p, 5)
        assert r.terms == [math.inf]
        assert r.value == 0.0

    def test_cross_oracle_on_golden_pair(self, golden_pair):
        rh = pr.rotation_number_heights(golden_pair, 10)
        g = pr.glue_rotation_number(golden_pair, 400_000)
        assert abs(rh.value - g.value) <= rh.bracket + g.bound


class TestRotationHeights:
    def test_rigid_golden_terms(self):
        r = pr.rotation_number_heights(translation_pair(), 10)
        assert r.terms == [1] * 10
        assert abs(r.value - RHO) <= r.bracket

    def test_tuned_arnold_golden_to_depth(self, golden_pair):
        r = pr.rotation_number_heights(golden_pair, 8)
        assert r.terms == [1] * 8

    def test_sqrt2_terms(self):
        r = pr.rotation_number_heights(pr.rigid_pair(math.sqrt(2.0) - 1.0), 8)
        assert r.terms == [2] * 8


class TestRigidPair:
    @pytest.mark.parametrize("seed", range(5))
    def test_heights_match_continued_fraction(self, seed):
        # 50 bounded-type irrationals with known terms (10 per seed)
        rng = np.random.default_rng(100 + seed)
        for _ in range(10):
            terms = [int(t) for t in rng.integers(1, 6, 14)]
            rho = contfrac.value(terms)
            r = pr.rotation_number_heights(pr.rigid_pair(rho), 10)
            assert not r.truncated
            assert r.terms == terms[:10]

    def test_glue_returns_rho(self):
        for rho in (0.3819660112501051, 0.2360679774997897, 0.7320508075688772):
            g = pr.glue_rotation_number(pr.rigid_pair(rho), 400_000)
            assert abs(g.value - rho) <= g.bound


word_blocks = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=0, max_size=4)


class TestWordAlgebra:
    def test_single_letters(self):
        p = translation_pair()
        eta_w = pr.MultiIndex([(1, 0)])
        assert pr.apply_word(p, eta_w, 0.4) == pytest.approx(0.4 - RHO, abs=1e-13)
        xi_w = pr.MultiIndex([(0, 1)])
        assert pr.apply_word(p, xi_w, -0.3) == pytest.approx(0.7, abs=1e-13)

    def test_compose_is_eta_after_xi(self):
        p = translation_pair()
        w = pr.index_compose(pr.MultiIndex([(0, 1)]), pr.MultiIndex([(1, 0)]))
        assert w == pr.MultiIndex([(0, 1, )] and [(0, 1), (1, 0)])
        assert pr.apply_word(p, w, -0.2) == pytest.approx(-0.2 + 1.0 - RHO, abs=1e-13)

    def test_spec_order_examples(self):
        s = pr.MultiIndex([(2, 3)])
        r = pr.index_order(s, pr.MultiIndex([(1, 0)]))
        assert r.precedes and r.ominus == pr.MultiIndex([(1, 3)])
        r = pr.index_order(s, pr.MultiIndex([(2, 1)]))
        assert r.precedes and r.ominus == pr.MultiIndex([(0, 2)])
        assert not pr.index_order(s, pr.MultiIndex([(3, 0)])).precedes

    def test_inadmissible_rejected(self):
        with pytest.raises(IndexError_):
            pr.MultiIndex([(1, 0), (2, 1)])   # interior b = 0
        with pytest.raises(IndexError_):
            pr.MultiIndex([(1, 2), (0, 1)])   # interior a = 0

    @given(word_blocks, word_blocks)
    @settings(max_examples=60, deadline=None)
    def test_order_compose_consistency(self, u_raw, v_raw):
        u = pr.MultiIndex.from_letters(
            sum(([pr.ETA] * a + [pr.XI] * b for a, b in u_raw), []))
        v = pr.MultiIndex.from_letters(
            sum(([pr.ETA] * a + [pr.XI] * b for a, b in v_raw), []))
        s = pr.index_compose(u, v)
        r = pr.index_order(s, u)
        if len(v) > 0:
            assert r.precedes
            assert r.ominus == v
        else:
            assert not r.precedes

    def test_order_consistency_pointwise(self):
        p = translation_pair()
        s = pr.MultiIndex([(1, 1), (1, 0)])
        for t in pr.prefixes(s):
            r = pr.index_order(s, t)
            assert r.precedes
            q = r.ominus
            xs = np.linspace(0.0, 1.0 - RHO, 20)
            via_t = pr.apply_word(p, pr.index_compose(t, q), xs)
            direct = pr.apply_word(p, s, xs)
            assert np.max(np.abs(via_t - direct)) < 1e-10

    def test_index_evolution_level_one(self, golden_pair):
        # height 1: the next words are (0,1,1,0) and (1,0); check pointwise
        from renormpairs.pairs import _renorm_once
        step = _renorm_once(golden_pair)
        s1 = pr.index_compose(pr.MultiIndex([(0, 1)]), pr.MultiIndex([(1, 0)]))
        xs = np.linspace(golden_pair.eta0 * 0.99, 0.0, 15)
        pre = step["pre_eta"]
        word_vals = pr.apply_word(golden_pair, s1, xs)
        assert np.max(np.abs(pre(xs) - word_vals)) < 1e-10


class TestSerialization:
    def test_pair_roundtrip(self, golden_pair):
        import json
        rec = json.loads(json.dumps(golden_pair.to_record()))
        back = pr.Pair.from_record(rec)
        assert np.array_equal(back.eta.coeffs, golden_pair.eta.coeffs)
        assert back.critical == golden_pair.critical

    def test_rotation_report_integer_terms(self):
        r = pr.rotation_number_heights(translation_pair(), 6)
        rec = r.to_record()
        assert all(isinstance(t, int) for t in rec["terms"])
