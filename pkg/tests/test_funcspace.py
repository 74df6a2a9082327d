"""Series representation: fitting, evaluation, composition, rescaling, inversion."""

import math

import numpy as np
import pytest

from renormpairs import funcspace as fs
from renormpairs.errors import (
    CompositionRangeError,
    FitError,
    NotInvertibleError,
    SingularInverseError,
)

RHO = (math.sqrt(5.0) - 1.0) / 2.0


def lift(x, a=1.0, omega=0.6):
    return x - a * np.sin(2.0 * np.pi * x) / (2.0 * np.pi) + omega


class TestFit:
    def test_affine_reproduced_exactly(self):
        m = fs.fit_from_samples(lambda x: x + 1.0, (-RHO, 0.0), 7)
        assert m.fit_residual < 1e-14
        assert abs(m(-0.5) - 0.5) < 1e-14

    def test_cubic_exact_with_third_derivative(self):
        m = fs.fit_from_samples(lambda x: x**3, (0.0, 1.0), 7)
        assert m.fit_residual < 1e-14
        assert abs(m(0.0, 3) - 6.0) < 1e-10

    def test_arnold_lift_fit_residual(self):
        # oracle: direct evaluation of the sampler at 1e4 seeded random points
        m = fs.fit_from_samples(lambda x: lift(x, 1.0, 0.3), (0.0, 1.0), 40)
        assert m.fit_residual < 1e-12
        rng = np.random.default_rng(20260808)
        xs = rng.uniform(0.0, 1.0, 10_000)
        assert np.max(np.abs(m(xs) - lift(xs, 1.0, 0.3))) < 1e-12

    def test_nonfinite_sample_reports_node(self):
        with pytest.raises(FitError) as exc:
            fs.fit_from_samples(lambda x: 1.0 / (x - 0.5), (0.0, 1.0), 12)
        assert exc.value.node is None or isinstance(exc.value.node, float)

    def test_degree_floor(self):
        with pytest.raises(FitError):
            fs.fit_from_samples(lambda x: x, (0.0, 1.0), 4)


class TestEvaluate:
    def test_affine_value(self):
        m = fs.fit_from_samples(lambda x: x + 1.0, (-1.0, 0.0), 7)
        assert m(-0.5) == pytest.approx(0.5, abs=1e-14)

    def test_cubic_second_derivative_at_zero(self):
        m = fs.fit_from_samples(lambda x: x**3, (0.0, 1.0), 7)
        assert abs(m(0.0, 2)) < 1e-11

    def test_critical_point_of_arnold_lift(self):
        # paper family: f'(0) = 1 - a, zero exactly at a = 1
        m = fs.fit_from_samples(lambda x: lift(x, 1.0, 0.35), (0.0, 1.0), 40)
        # endpoint derivative of a degree-40 fit carries ~1e-11 rounding noise
        assert abs(m(0.0, 1)) < 1e-11

    def test_extrapolation_flagging(self):
        m = fs.fit_from_samples(lambda x: x, (0.0, 1.0), 7)
        assert not m.extrapolates(1.2)
        assert m.extrapolates(1.3)
        assert m(2.0) == pytest.approx(2.0, abs=1e-9)


class TestCompose:
    def test_translations(self):
        f = fs.fit_from_samples(lambda x: x - RHO, (0.0, 1.0), 7)
        g = fs.fit_from_samples(lambda x: x + 1.0, (-RHO, 0.0), 7)
        h = fs.compose(f, g, (-RHO, 0.0))
        xs = np.linspace(-RHO, 0.0, 33)
        assert np.max(np.abs(h(xs) - (xs + 1.0 - RHO))) < 1e-13

    def test_cubic_of_cubic(self):
        f = fs.fit_from_samples(lambda x: x**3, (0.0, 1.0), 9)
        h = fs.compose(f, f, (0.0, 1.0))
        assert h.fit_residual < 1e-12
        xs = np.linspace(0.0, 1.0, 50)
        assert np.max(np.abs(h(xs) - xs**9)) < 1e-12

    def test_pair_word_matches_lift_iteration(self):
        # oracle: direct iteration of the circle-map lift at 100 probe points
        eta = fs.fit_from_samples(lambda x: lift(x) - 1.0, (0.0, lift(0.0)), 40)
        xi = fs.fit_from_samples(lift, (lift(0.0) - 1.0, 0.0), 40)
        w = fs.compose(eta, xi, (xi.lo, 0.0))
        xs = np.linspace(xi.lo, 0.0, 100)
        direct = lift(lift(xs)) - 1.0  # deck translation moves through the lift
        assert np.max(np.abs(w(xs) - direct)) < 1e-10

    def test_out_of_range_rejected(self):
        f = fs.fit_from_samples(lambda x: x**2, (0.0, 1.0), 7)
        g = fs.fit_from_samples(lambda x: x + 5.0, (0.0, 1.0), 7)
        with pytest.raises(CompositionRangeError) as exc:
            fs.compose(f, g, (0.0, 1.0))
        assert exc.value.fraction > 0.10


class TestAffineRescale:
    def test_affine_map_mirrored(self):
        m = fs.fit_from_samples(lambda x: x + 1.0, (-1.0, 0.0), 7)
        r = fs.affine_rescale(m, -0.5)
        assert (r.lo, r.hi) == (0.0, 2.0)
        xs = np.linspace(0.0, 2.0, 21)
        assert np.max(np.abs(r(xs) - (xs - 2.0))) < 1e-13

    def test_cubic_coefficient_scaling(self):
        m = fs.fit_from_samples(lambda x: x**3, (-1.0, 1.0), 7)
        lam = 0.37
        r = fs.affine_rescale(m, lam)
        xs = np.linspace(-1.0, 1.0, 11)
        assert np.max(np.abs(r(xs) - lam**2 * xs**3)) < 1e-13

    def test_normalization_forced_exactly(self):
        # rescaling a pre-renormalized second map by eta(0) pins xi(0) = 1
        eta0 = -RHO
        xi_pre = fs.fit_from_samples(lambda x: x - RHO, (0.0, 1.0 - RHO), 7)
        xi_new = fs.affine_rescale(
            fs.fit_from_samples(lambda x: xi_pre(x) + 0.0, (0.0, 1.0 - RHO), 7), eta0)
        # xi_pre(0) = eta0, so the rescaled map takes 0 to exactly 1
        assert xi_new(0.0) == pytest.approx(1.0, abs=1e-14)


class TestInvert:
    def test_affine(self):
        m = fs.fit_from_samples(lambda x: x + 1.0, (-1.0, 0.0), 7)
        assert fs.invert_pointwise(m, 0.3) == pytest.approx(-0.7, abs=1e-12)

    def test_cubic_away_from_critical(self):
        m = fs.fit_from_samples(lambda x: x**3, (0.1, 1.0), 12)
        assert fs.invert_pointwise(m, 0.027) == pytest.approx(0.3, abs=1e-10)

    def test_cubic_critical_value_is_singular(self):
        m = fs.fit_from_samples(lambda x: x**3, (-1.0, 1.0), 12)
        with pytest.raises(SingularInverseError):
            fs.invert_pointwise(m, 1e-30)

    def test_unreachable_target(self):
        m = fs.fit_from_samples(lambda x: x, (0.0, 1.0), 7)
        with pytest.raises(NotInvertibleError):
            fs.invert_pointwise(m, 5.0)


class TestInvariants:
    def test_roundtrip_within_twice_residual(self):
        for deg, fun in [(40, lambda x: np.sin(3.0 * x) + x),
                         (24, lambda x: np.exp(x) * np.cos(x))]:
            m = fs.fit_from_samples(fun, (-0.7, 1.1), deg)
            xs = np.linspace(-0.7, 1.1, 301)
            tol = max(2.0 * m.fit_residual, 1e-15)
            assert np.max(np.abs(m(xs) - fun(xs))) <= tol * 1.0 + 1e-13

    def test_rescale_roundtrip(self):
        m = fs.fit_from_samples(lambda x: np.sin(x) + x**2, (-0.5, 0.8), 30)
        for lam in (0.3, -0.62, 2.5):
            back = fs.affine_rescale(fs.affine_rescale(m, lam), 1.0 / lam)
            assert np.max(np.abs(back.coeffs - m.coeffs)) < 1e-13

    def test_compose_associative(self):
        f = fs.fit_from_samples(lambda x: x - 0.1 * np.sin(2 * np.pi * x), (-2.0, 2.0), 40)
        g = fs.fit_from_samples(lambda x: 0.8 * x + 0.1, (-1.5, 1.5), 40)
        h = fs.fit_from_samples(lambda x: x - 0.3, (-1.0, 1.0), 40)
        left = fs.compose(fs.compose(f, g, (-1.0, 1.0)), h, (-0.5, 0.5))
        right = fs.compose(f, fs.compose(g, h, (-0.5, 0.5)), (-0.5, 0.5))
        xs = np.linspace(-0.5, 0.5, 101)
        res = max(left.fit_residual, right.fit_residual, 1e-15)
        assert np.max(np.abs(left(xs) - right(xs))) <= 5.0 * res + 1e-13

    def test_tail_decay_improves_with_degree(self):
        fun = lambda x: np.sin(2.0 * np.pi * x) * np.exp(x)
        ratios = [fs.fit_from_samples(fun, (0.0, 1.0), n).tail_ratio()
                  for n in (20, 40, 60)]
        # the fit chops sub-noise coefficients, so deep tails floor at 0
        assert ratios[0] > ratios[1] >= ratios[2]

    def test_serialization_roundtrip_exact(self):
        import json
        m = fs.fit_from_samples(lambda x: np.cos(x) + x**3, (-0.3, 0.9), 21)
        rec = json.loads(json.dumps(m.to_record()))
        back = fs.ChebMap1D.from_record(rec)
        assert np.array_equal(back.coeffs, m.coeffs)
        assert (back.lo, back.hi) == (m.lo, m.hi)


class TestChebMap2D:
    def test_tensor_fit_and_partials(self):
        fun = lambda x, y: np.sin(x) * (1.0 + 0.5 * y + 0.25 * y * y) + x**3
        m = fs.fit_from_samples_2d(fun, (0.0, 1.0, -0.5, 0.5), (20, 4))
        assert m.fit_residual < 1e-12
        assert m(0.3, 0.2) == pytest.approx(fun(0.3, 0.2), abs=1e-12)
        # d/dy at (x, 0) = 0.5 sin x
        assert m(0.4, 0.0, dy=1) == pytest.approx(0.5 * np.sin(0.4), abs=1e-10)
        g = 1.0 + 0.5 * 0.1 + 0.25 * 0.01
        assert m(0.0, 0.1, dx=3) == pytest.approx(6.0 - np.cos(0.0) * g, abs=1e-6)

    def test_slice_and_ydep(self):
        fun = lambda x, y: x**2 + 0.001 * y
        m = fs.fit_from_samples_2d(fun, (-1.0, 1.0, -1.0, 1.0), (10, 3))
        s = m.slice_y0()
        xs = np.linspace(-1, 1, 17)
        assert np.max(np.abs(s(xs) - xs**2)) < 1e-13
        assert m.y_dependence() == pytest.approx(0.001, abs=1e-12)

    def test_invert_x(self):
        fun = lambda x, y: x + 0.1 * np.sin(x) + 0.01 * y
        m = fs.fit_from_samples_2d(fun, (0.0, 2.0, -1.0, 1.0), (20, 3))
        targets = np.array([0.5, 1.0, 1.5])
        ys = np.array([0.2, -0.3, 0.0])
        xs = fs.invert_x_2d(m, targets, ys, guess=np.full(3, 1.0))
        assert np.max(np.abs(m(xs, ys) - targets)) < 1e-11
