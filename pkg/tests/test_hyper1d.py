"""Projection, fixed point, and the hyperbolicity picture."""

import math

import numpy as np
import pytest

from renormpairs import funcspace as fs
from renormpairs import hyper1d as hy
from renormpairs import pairs as pr
from renormpairs import renorm1d as rn
from renormpairs.errors import DegenerateProjectionError

RHO = (math.sqrt(5.0) - 1.0) / 2.0


class TestProjectAC:
    def test_commuting_pair_zero_quintuple(self, golden_pair):
        # once projected, the conditions vanish; reprojection returns the
        # zero quintuple at Newton tolerance (idempotence)
        p1, _ = hy.project_ac(golden_pair)
        p2, q2 = hy.project_ac(p1)
        assert q2.magnitude < 1e-12
        assert rn.pair_distance_c0(p1, p2) < 1e-11

    def test_output_conditions_below_tolerance(self, golden_pair):
        out, quint = hy.project_ac(golden_pair)
        F = hy._conditions(out, np.zeros(5))
        assert np.all(np.abs(F[:4]) < 1e-11)
        assert abs(out.xi0 - 1.0) < 1e-12

    def test_rigid_is_degenerate(self):
        with pytest.raises(DegenerateProjectionError):
            hy.project_ac(pr.rigid_pair(RHO))

    def test_analytic_jacobian_matches_fd(self, golden_pair):
        params = np.array([1e-4, -2e-4, 3e-5, -1e-5, 2e-5])
        J = hy._jacobian(golden_pair, params)
        Jfd = hy._fd_jacobian(golden_pair, params)
        assert np.max(np.abs(J - Jfd)) / np.max(np.abs(Jfd)) < 1e-6

    def test_quintuple_scales_with_defect(self, golden_pair):
        base, _ = hy.project_ac(golden_pair)

        def quintuple_for(delta):
            xi = fs.add_polynomial(base.xi, [0.0, 0.0, 0.0, delta])
            p = pr.Pair(base.eta, xi, base.critical, base.normalized, base.meta)
            return hy.project_ac(p)[1].as_array()

        q1 = quintuple_for(1e-3)
        q2 = quintuple_for(5e-4)
        big = np.abs(q1) > 1e-9
        assert big.any()
        ratios = np.abs(q1[big] / q2[big])
        assert np.all((ratios > 1.6) & (ratios < 2.4))


class TestRenormStepAC:
    def test_heights_shift(self, golden_pair):
        out = hy.renorm_step_ac(golden_pair)
        assert pr.rotation_number_heights(out, 8).terms == [1] * 8

    def test_output_commutes_at_tolerance(self, golden_pair):
        out = hy.renorm_step_ac(golden_pair)
        F = hy._conditions(out, np.zeros(5))
        assert np.all(np.abs(F[:4]) < 1e-11)

    def test_orbit_approaches_fixed_point(self, golden_pair, zstar):
        # the orbit contracts until the double-precision tuning error
        # escapes along the expanding direction; the closest approach is
        # what the Newton solve then beats by orders of magnitude
        cur = golden_pair
        dists = []
        for _ in range(15):
            cur = hy.renorm_step_ac(cur)
            dists.append(rn.pair_distance_c0(cur, zstar))
        assert min(dists) < 1e-3
        assert zstar.meta["newton_residual"] < 1e-9


class TestChart:
    def test_roundtrip(self, zstar):
        c = hy.chart_coords(zstar)
        back = hy.pair_from_chart(c, meta=zstar.meta)
        assert rn.pair_distance_c0(back, zstar) < 1e-12

    def test_retraction_enforces_constraints(self, zstar):
        c = hy.chart_coords(zstar)
        rng = np.random.default_rng(1)
        c2 = c + 1e-4 * rng.standard_normal(len(c)) * hy.chart_weights(len(c))
        p = hy.pair_from_chart(c2)
        assert abs(p.xi0 - 1.0) < 1e-13
        assert abs(p.eta(0.0, 1)) < 1e-11
        assert abs(p.eta(0.0, 2)) < 1e-10


class TestFixedPoint:
    def test_residual(self, zstar):
        assert hy.fixed_point_residual(zstar) < 1e-9

    def test_scaling_constant_stable(self, zstar):
        lams = []
        cur = zstar
        for _ in range(5):
            step = rn.renormalize(cur)
            lams.append(abs(step.lam))
            cur = hy.renorm_step_ac(cur)
        # each application amplifies the Newton residual by |delta| ~ 2.83,
        # so the drift bound follows the achieved residual, not an absolute
        res = zstar.meta["newton_residual"]
        assert np.max(np.abs(np.diff(lams))) < 300.0 * res

    def test_refit_drift(self, zstar):
        z50 = hy.refit_pair(zstar, 50)
        assert rn.pair_distance_c0(z50, zstar) < 1e-6


class TestSpectrum:
    @pytest.fixture(scope="class")
    def spectrum(self, zstar):
        return hy.jacobian_spectrum(zstar, compute_drift=False)

    def test_single_unstable_eigenvalue(self, spectrum):
        assert spectrum.unstable_count == 1
        mods = np.abs(spectrum.eigenvalues)
        assert mods[0] - mods[1] > 0.5

    def test_rest_inside_disk(self, spectrum):
        assert np.all(np.abs(spectrum.eigenvalues[1:]) < 0.9)

    def test_cross_check_agreement(self, zstar, spectrum):
        ratio, n = hy.unstable_cross_check(zstar)
        assert n >= 3
        lam = abs(spectrum.eigenvalues[0])
        assert abs(ratio - lam) / lam < 0.01

    def test_stable_direction_decays(self, zstar):
        vals, vecs = hy.operator_eigen(zstar)
        v = np.real(vecs[:, 1])
        v *= 1e-3 / np.max(np.abs(v))
        ratio, n = hy.unstable_cross_check(zstar, v0=v, steps=5)
        assert ratio < 1.0

    def test_zero_perturbation_inconclusive(self, zstar):
        ratio, n = hy.unstable_cross_check(zstar, v0=np.zeros(hy.chart_dim(zstar.eta.degree)))
        assert n == 0 and math.isnan(ratio)

    def test_no_spurious_unit_eigenvalue(self, spectrum):
        mods = np.abs(spectrum.eigenvalues)
        near_one = np.abs(mods - 1.0) < 0.05
        assert not near_one.any()

    def test_json_record(self, spectrum):
        import json
        rec = json.loads(json.dumps(spectrum.to_record()))
        assert rec["unstableCount"] == 1
        assert len(rec["eigenvalues"]) == len(spectrum.eigenvalues)
