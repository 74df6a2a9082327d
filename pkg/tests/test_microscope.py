"""Microscope charts, nested partitions, and the attractor curve."""

import numpy as np
import pytest

from renormpairs import contfrac
from renormpairs import microscope as mi
from renormpairs import pairs as pr
from renormpairs import renorm1d as rn
from renormpairs import twodim as td
from renormpairs.errors import NotOnStableSetError

RHO = contfrac.GOLDEN_MEAN


@pytest.fixture(scope="module")
def rigid_iota():
    return td.embed_iota(pr.rigid_pair(RHO))


@pytest.fixture(scope="module")
def eps_pair():
    from renormpairs import arnold
    eps = 1e-3
    omega = arnold.tune_omega_2d(1.0, eps, [1] * 30, max_depth=22)
    amap = arnold.AnnulusMap2D(1.0, omega, eps)
    return arnold.extract_pair_2d(amap, 2, cf_terms=[1] * 30), amap


class TestFactors:
    def test_empty_word_is_chart(self, rigid_iota):
        charts, _ = mi.rg_orbit(rigid_iota, 1, n=3)
        lv = charts[0]
        apply_psi, _ = mi.microscope_factor(lv, pr.EMPTY_INDEX)
        pts = np.array([[0.4, 0.0], [0.7, 0.05]])
        direct = lv.apply_L(pts)
        assert np.max(np.abs(apply_psi(pts) - direct)) < 1e-12

    def test_derivative_matches_1d_scaling(self, rigid_iota):
        # on a rigid embedding the chart contracts by |lambda_n| exactly
        charts, _ = mi.rg_orbit(rigid_iota, 1, n=3)
        lv = charts[0]
        apply_psi, dnorm = mi.microscope_factor(lv, pr.MultiIndex([(1, 0)]))
        nrm = dnorm((0.1, 0.9, -0.2, 0.2))
        assert nrm == pytest.approx(RHO**3, rel=1e-6)

    def test_contraction_below_half(self, eps_pair):
        Z, _ = eps_pair
        charts, _ = mi.rg_orbit(Z, 2, n=3)
        _, dnorm = mi.microscope_factor(charts[1], pr.MultiIndex([(1, 0)]))
        nrm = dnorm((0.1, 0.9, -0.1, 0.1))
        assert nrm < 0.5


class TestPartitionQ:
    def test_1d_reduction_matches_dynamical_partition(self, golden_pair):
        Z = td.embed_iota(golden_pair)
        levels, meta, _ = mi.partition_q(Z, 1, n=3)
        xiv = sorted((min(e.points[:, 0].min(), e.points[:, 0].max()),
                      max(e.points[:, 0].min(), e.points[:, 0].max()))
                     for e in levels[0])
        # the level-1 microscope tiles the same fundamental interval
        lo = min(a for a, _ in xiv)
        hi = max(b for _, b in xiv)
        assert lo == pytest.approx(golden_pair.eta0, abs=1e-6)
        assert hi == pytest.approx(golden_pair.xi0, abs=1e-6)
        gaps = [xiv[i + 1][0] - xiv[i][1] for i in range(len(xiv) - 1)]
        assert max(np.abs(gaps)) < 1e-6

    def test_counts_follow_fibonacci(self, rigid_iota):
        levels, _, _ = mi.partition_q(rigid_iota, 3, n=3)
        p, q = contfrac.convergents([1] * 22)
        for k, elems in enumerate(levels, start=1):
            assert len(elems) == q[3 * k + 1] + q[3 * k]

    def test_diameters_decay(self, eps_pair):
        Z, _ = eps_pair
        levels, _, _ = mi.partition_q(Z, 3, n=3)
        diams = [max(e.diameter for e in lvl) for lvl in levels]
        assert diams[1] < diams[0] and diams[2] < diams[1]

    def test_nesting(self, rigid_iota):
        levels, _, _ = mi.partition_q(rigid_iota, 2, n=3)
        coarse = [(e.t_lo - 1e-10, e.t_hi + 1e-10) for e in levels[0]]
        for e in levels[1]:
            parents = [c for c in coarse if c[0] <= e.t_lo and e.t_hi <= c[1]]
            assert len(parents) == 1


class TestAttractor:
    def test_rigid_control(self, rigid_iota):
        c = mi.build_attractor(rigid_iota, 3, n=3)
        assert c.conjugacy_defect <= 2.0 * c.max_diameter
        assert c.gluing_defect <= c.max_diameter
        # a y-independent pair keeps its curve on the diagonal image set
        d = np.abs(c.points[:, 0] - c.points[:, 1])
        assert d.max() <= 2.0 * c.max_diameter
        rep = mi.holder_estimate(c, window=0.2)
        assert abs(rep.slope - 1.0) < 0.02
        assert rep.ci_low <= 1.0 <= rep.ci_high + 0.02

    def test_points_ordered_and_cover(self, rigid_iota):
        c = mi.build_attractor(rigid_iota, 3, n=3)
        assert np.all(np.diff(c.ts) > 0)
        iv = c.t_intervals[np.argsort(c.t_intervals[:, 0])]
        gaps = iv[1:, 0] - iv[:-1, 1]
        assert np.max(np.abs(gaps)) < 1e-9
        assert iv[0, 0] == pytest.approx(-RHO, abs=1e-9)
        assert iv[-1, 1] == pytest.approx(1.0, abs=1e-9)

    def test_eps_pair_defect_and_decay(self, eps_pair):
        Z, _ = eps_pair
        diams = []
        for lvl in (3, 4):
            c = mi.build_attractor(Z, lvl, n=3)
            assert c.conjugacy_defect <= 2.0 * c.max_diameter
            diams.append(c.max_diameter)
        assert diams[1] < 0.7 * diams[0]

    def test_monotone_defect_refinement(self, eps_pair):
        Z, _ = eps_pair
        d3 = mi.build_attractor(Z, 3, n=3).conjugacy_defect
        d4 = mi.build_attractor(Z, 4, n=3).conjugacy_defect
        assert d4 <= d3 + 1e-12

    def test_non_commuting_rejected(self, golden_pair, eps_pair):
        Z, _ = eps_pair
        bad = td.Pair2D(Z.ax, Z.ay, Z.bx,
                        type(Z.by)(Z.by.coeffs + 1e-3, *Z.by.rect),
                        Z.delta, Z.meta)
        with pytest.raises(NotOnStableSetError):
            mi.build_attractor(bad, 3, n=3)

    def test_csv_svg(self, rigid_iota):
        c = mi.build_attractor(rigid_iota, 3, n=3)
        assert c.to_csv().splitlines()[0] == "t,x,y,producer"
        assert c.to_svg().startswith("<svg")


class TestHolder:
    def test_small_window_inconclusive(self, rigid_iota):
        c = mi.build_attractor(rigid_iota, 3, n=3)
        rep = mi.holder_estimate(c, window=1e-6)
        assert rep.inconclusive

    def test_microscope_matches_direct_dynamics(self, eps_pair):
        # 20 random level-2 elements: the representative equals the direct
        # word dynamics applied to the chart-mapped base point
        Z, _ = eps_pair
        charts, pairs_chain = mi.rg_orbit(Z, 2, n=3)
        lv0, lv1 = charts
        base_pair = pairs_chain[1]
        rng = np.random.default_rng(2)
        for _ in range(10):
            w0 = pr.prefixes(lv0.s_tilde)[int(rng.integers(0, len(lv0.s_tilde)))]
            pt = np.array([[0.41, 0.0]])
            a = lv0.apply_word(w0, lv0.apply_L(pt))
            x, y = Z.apply_word(w0, *lv0.apply_L(pt).T)
            assert abs(a[0, 0] - float(x)) < 1e-12
