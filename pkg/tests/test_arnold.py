"""Arnold family: lifts, tuning, extraction, staircase, 2D perturbation."""

import numpy as np
import pytest

from renormpairs import arnold, contfrac
from renormpairs import pairs as pr
from renormpairs.errors import ConfigError, PrecisionError

RHO = contfrac.GOLDEN_MEAN


class TestLift:
    def test_deck_commutation(self):
        for a, w in [(0.0, 0.25), (0.7, 0.4), (1.0, 0.6066)]:
            assert arnold.CircleLift(a, w).deck_defect() < 1e-14

    def test_rigid_rotation_number(self):
        rep = arnold.rotation_number_lift(arnold.CircleLift(0.0, 0.25), 10_000)
        assert rep.value == pytest.approx(0.25, abs=1e-15)
        assert rep.bracket <= 2.0 / 10_000 + 1e-12

    def test_fixed_point_at_omega_zero(self):
        rep = arnold.rotation_number_lift(arnold.CircleLift(1.0, 0.0), 20_000)
        assert abs(rep.value) < 1e-12

    def test_tuned_golden_rotation(self, golden_lift):
        rep = arnold.rotation_number_lift(golden_lift, 2_000_000, refine=True)
        assert abs(rep.value - RHO) < 1e-9


class TestTuneOmega:
    def test_a_zero_exact(self):
        # the rigid family returns the target's own value; 30 golden terms
        # pin it within their convergent bracket of ~1e-12
        assert arnold.tune_omega(0.0, [1] * 30) == pytest.approx(RHO, abs=1e-12)

    def test_recorded_constant_reproduced(self, omega_star):
        # regression: recorded to 12 digits at first computation
        assert omega_star == pytest.approx(arnold.OMEGA_STAR_GOLDEN, abs=5e-12)
        again = arnold.tune_omega(1.0, [1] * 40, tol=1e-11)
        assert again == omega_star  # bisection is deterministic

    def test_rational_target_rejected(self):
        with pytest.raises((ConfigError, PrecisionError)):
            arnold.tune_omega(1.0, [2], tol=1e-10)


class TestExtractPair:
    def test_rigid_lift_gives_rigid_pair(self):
        lift = arnold.CircleLift(0.0, RHO)
        p = arnold.extract_pair(lift, 0, cf_terms=[1] * 20)
        model = pr.rigid_pair(RHO)
        xs = np.linspace(0.0, 1.0, 30)
        assert np.max(np.abs(p.eta(xs) - model.eta(xs))) < 1e-12
        xs = np.linspace(-RHO, 0.0, 30)
        assert np.max(np.abs(p.xi(xs) - model.xi(xs))) < 1e-12

    def test_critical_extraction_heights(self, golden_pair):
        assert golden_pair.critical
        rep = pr.rotation_number_heights(golden_pair, 8)
        assert rep.terms == [1] * 8

    def test_level_too_deep(self, golden_lift):
        with pytest.raises(PrecisionError):
            arnold.extract_pair(golden_lift, 5, cf_terms=[1] * 4)

    def test_gauss_shift_consistency(self):
        # glue rotation of the level-m pair is the (m+1)-fold Gauss shift
        # of rho: the extraction consumes one level by construction
        terms = [3, 1, 2, 1, 1, 4, 1, 2, 1, 3, 1, 1, 2, 5, 1, 1]
        rho = contfrac.value(terms)
        lift = arnold.CircleLift(0.6, arnold.tune_omega(0.6, terms, tol=1e-9))
        for m in (0, 1):
            p = arnold.extract_pair(lift, m, cf_terms=terms)
            g = pr.glue_rotation_number(p, 400_000)
            target = contfrac.value(contfrac.gauss_shift(terms, m + 1))
            assert abs(g.value - target) < 5e-4


class TestAnnulusMap:
    def test_deck_commutation(self):
        amap = arnold.AnnulusMap2D(1.0, 0.6, 1e-3)
        assert amap.deck_defect() < 1e-14

    def test_dissipative_orbit_contracts_to_eps_band(self):
        amap = arnold.AnnulusMap2D(1.0, 0.606, 1e-3)
        xs, ys = amap.orbit(5000, burn=100)
        assert len(xs) > 100
        assert np.max(np.abs(ys)) < 4.0 * amap.eps

    def test_slice_rotation_matches_lift_at_eps_zero(self):
        amap = arnold.AnnulusMap2D(1.0, 0.606, 0.0)
        r2 = arnold.rotation_number_2d(amap, 50_000)
        r1 = arnold.rotation_number_lift(arnold.CircleLift(1.0, 0.606), 50_000)
        assert abs(r2.value - r1.value) <= r2.bracket + r1.bracket


class TestStaircase:
    def test_identity_line_at_a_zero(self):
        omegas = np.linspace(0.1, 0.9, 17)
        rep = arnold.staircase(0.0, omegas, iterations=5000)
        assert np.max(np.abs(rep.rhos - omegas)) < 1e-12

    def test_half_plateau_at_critical(self):
        omegas = np.arange(0.4995, 0.5006, 1e-4)
        rep = arnold.staircase(1.0, omegas, iterations=30_000)
        halves = [p for p in rep.plateaus if p.rational == (1, 2)]
        assert halves and halves[0].count >= 3

    def test_monotone_within_brackets(self):
        omegas = np.linspace(0.55, 0.65, 21)
        rep = arnold.staircase(1.0, omegas, iterations=20_000)
        for i in range(len(omegas) - 1):
            assert rep.rhos[i + 1] >= rep.rhos[i] - rep.brackets[i] - rep.brackets[i + 1]
