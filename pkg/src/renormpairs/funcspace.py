"""Real-analytic interval and rectangle maps as Chebyshev series.

A map is stored as coefficients of a Chebyshev expansion pulled back to
[-1, 1] from a certified interval (or rectangle, as a tensor series).
Everything downstream composes, rescales, differentiates and inverts these
objects, so the rules here are strict:

* fitting always records a residual measured on an independent grid,
* composition is done by resampling and refitting, never by coefficient
  substitution (deep words would overflow any fixed degree),
* evaluation off the certified interval is allowed but flagged once the
  point is beyond 1.5x the half-length from the center.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .errors import (
    CompositionRangeError,
    FitError,
    NotInvertibleError,
    SingularInverseError,
)

MIN_DEGREE = 7
EXTRAPOLATION_FACTOR = 1.5
SERIALIZE_VERSION = 1


def _nodes(n):
    """n Chebyshev points of the first kind on [-1, 1], ascending."""
    return _cheb.chebpts1(n)


def _fit_values(vals):
    """Chebyshev coefficients interpolating `vals` at chebpts1(len(vals)).

    Exact (up to rounding) for polynomials of degree < len(vals); uses the
    discrete orthogonality of cos(j*theta_k) at the first-kind angles.
    """
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[0]
    theta = np.arccos(np.clip(_nodes(n), -1.0, 1.0))
    basis = np.cos(np.outer(np.arange(n), theta))
    coeffs = (2.0 / n) * basis.dot(vals)
    coeffs[0] *= 0.5
    # chop coefficients below the rounding floor: they are pure noise and
    # would otherwise dominate high-order derivatives at the endpoints
    amax = np.max(np.abs(coeffs))
    if amax > 0.0:
        coeffs[np.abs(coeffs) < 1e-14 * amax] = 0.0
    return coeffs


def _clenshaw(t, coeffs):
    """Chebyshev sum with a per-point coefficient stack.

    coeffs has shape (n, ...) broadcasting against t; used by the tensor
    evaluation where every point carries its own partial coefficients.
    """
    n = coeffs.shape[0]
    if n == 1:
        return np.broadcast_to(coeffs[0], np.shape(t)).copy()
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for k in range(n - 1, 0, -1):
        b1, b2 = coeffs[k] + 2.0 * t * b1 - b2, b1
    return coeffs[0] + t * b1 - b2


class ChebMap1D:
    """A real-analytic map of [lo, hi] held as a Chebyshev series."""

    __slots__ = ("coeffs", "lo", "hi", "fit_residual", "_ders")

    def __init__(self, coeffs, lo, hi, fit_residual=0.0):
        self._ders = {}
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if len(coeffs) < MIN_DEGREE + 1:
            coeffs = np.concatenate([coeffs, np.zeros(MIN_DEGREE + 1 - len(coeffs))])
        if not (hi > lo):
            raise FitError(f"degenerate interval [{lo}, {hi}]")
        if not np.all(np.isfinite(coeffs)):
            raise FitError("non-finite coefficient")
        self.coeffs = coeffs
        self.lo = float(lo)
        self.hi = float(hi)
        self.fit_residual = float(fit_residual)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def interval(self):
        return (self.lo, self.hi)

    def tail_ratio(self, tail=5):
        """max |c_k| over the last `tail` coefficients / max |c_k| overall.

        A small value certifies an analyticity margin; it is the working
        substitute for a complex domain of definition.
        """
        amax = np.max(np.abs(self.coeffs))
        if amax == 0.0:
            return 0.0
        return float(np.max(np.abs(self.coeffs[-tail:])) / amax)

    def _s(self, x):
        return (2.0 * np.asarray(x, dtype=float) - self.lo - self.hi) / (self.hi - self.lo)

    def __call__(self, x, order=0):
        """Value of the order-th derivative at x (scalar or array).

        Off-interval evaluation is permitted; see `extrapolates`.
        """
        if order == 0:
            c = self.coeffs
        else:
            if order > self.degree:
                return np.zeros_like(np.asarray(x, dtype=float)) + 0.0
            c = self._ders.get(order)
            if c is None:
                c = _cheb.chebder(self.coeffs, order) * (
                    2.0 / (self.hi - self.lo)) ** order
                self._ders[order] = c
        out = _cheb.chebval(self._s(x), c)
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return float(out)
        return out

    def extrapolates(self, x):
        """True where |x - center| exceeds 1.5x the half-length."""
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        return np.abs(np.asarray(x, dtype=float) - center) > EXTRAPOLATION_FACTOR * half

    def to_record(self):
        return {
            "version": SERIALIZE_VERSION,
            "basis": "chebyshev",
            "interval": [self.lo, self.hi],
            "degree": self.degree,
            "coeffs": [float(c) for c in self.coeffs],
            "fitResidual": self.fit_residual,
        }

    @classmethod
    def from_record(cls, rec):
        if rec.get("basis") != "chebyshev":
            raise FitError(f"unknown basis {rec.get('basis')!r}")
        lo, hi = rec["interval"]
        return cls(np.array(rec["coeffs"], dtype=float), lo, hi, rec["fitResidual"])


def fit_from_samples(sampler, interval, degree):
    """Fit a ChebMap1D by interpolating `sampler` at degree+1 nodes.

    Parameters
    ----------
    sampler : callable
        x -> value; may accept arrays (a scalar fallback is applied).
    interval : (lo, hi)
        Certified interval of the fit.
    degree : int
        Series order; at least 7 so third derivatives plus x^4/x^6
        corrections stay representable.

    Returns
    -------
    ChebMap1D with `fit_residual` measured against the sampler on a
    denser, disjoint validation grid.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if degree < MIN_DEGREE:
        raise FitError(f"degree {degree} < {MIN_DEGREE}")
    if not hi > lo:
        raise FitError(f"degenerate interval [{lo}, {hi}]")
    xs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _nodes(degree + 1)
    vals = _sample(sampler, xs)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise FitError("non-finite sample value", node=float(xs[np.argmax(bad)]))
    m = ChebMap1D(_fit_values(vals), lo, hi)
    vx = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _nodes(2 * degree + 3)
    vv = _sample(sampler, vx)
    if not np.all(np.isfinite(vv)):
        raise FitError("non-finite validation sample")
    m.fit_residual = float(np.max(np.abs(m(vx) - vv)))
    return m


def _sample(sampler, xs):
    try:
        vals = np.asarray(sampler(xs), dtype=float)
        if vals.shape != xs.shape:
            raise TypeError
        return vals
    except (TypeError, ValueError):
        return np.array([float(sampler(float(x))) for x in xs])


def compose(f, g, target_interval, degree=None):
    """Refit x -> f(g(x)) on target_interval.

    Rejects the composition when more than 10% of the sampling nodes land
    outside f's flagged-evaluation range (the word has left the certified
    region, results would be extrapolation noise).
    """
    if degree is None:
        degree = max(f.degree, g.degree)
    lo, hi = float(target_interval[0]), float(target_interval[1])
    xs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _nodes(degree + 1)
    inner = g(xs)
    frac = float(np.mean(f.extrapolates(inner)))
    if frac > 0.10:
        raise CompositionRangeError(
            f"{frac:.0%} of nodes extrapolate beyond [{f.lo}, {f.hi}]",
            fraction=frac, lo=float(np.min(inner)), hi=float(np.max(inner)))
    m = ChebMap1D(_fit_values(f(inner)), lo, hi)
    vx = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _nodes(2 * degree + 3)
    m.fit_residual = float(np.max(np.abs(m(vx) - f(g(vx)))))
    return m


def affine_rescale(m, lam):
    """The map z -> m(lam*z)/lam on the rescaled interval, exact on coefficients.

    For lam < 0 the interval flips and odd coefficients change sign
    (T_k(-t) = (-1)^k T_k(t)); no resampling happens.
    """
    if lam == 0.0:
        raise FitError("rescale factor must be nonzero")
    coeffs = m.coeffs / lam
    if lam < 0.0:
        coeffs = coeffs * (-1.0) ** np.arange(len(coeffs))
        lo, hi = m.hi / lam, m.lo / lam
    else:
        lo, hi = m.lo / lam, m.hi / lam
    return ChebMap1D(coeffs, lo, hi, fit_residual=m.fit_residual / abs(lam))


def invert_pointwise(m, y, guess=None, tol=1e-12, max_iter=60, dmin=1e-10,
                     slack=0.0):
    """Solve m(x) = y by safeguarded Newton with bisection fallback.

    Acceptance requires both a small residual and a small step, so a flat
    (near-critical) spot cannot masquerade as a solution; a derivative
    below `dmin` at an iterate raises SingularInverseError instead.
    `slack` widens the bracket beyond the certified interval by that
    fraction of its length (targets at dynamic boundaries).
    """
    lo, hi = m.lo, m.hi
    if slack:
        ext = slack * (hi - lo)
        lo, hi = lo - ext, hi + ext
    x = float(guess) if guess is not None else 0.5 * (lo + hi)
    x = min(max(x, lo), hi)
    flo, fhi = m(lo) - y, m(hi) - y
    if flo * fhi > 0.0 and min(abs(flo), abs(fhi)) > 10.0 * tol:
        raise NotInvertibleError(
            f"no sign change on [{lo}, {hi}] for target {y:.6g}")
    blo, bhi = (lo, hi) if flo <= fhi else (hi, lo)
    fx = m(x) - y
    step = math.inf
    for _ in range(max_iter):
        if abs(fx) < tol and abs(step) < 1e-9 * max(1.0, abs(x)):
            return x
        d = m(x, 1)
        if abs(d) < dmin:
            raise SingularInverseError(
                f"derivative {d:.3e} below {dmin:.0e} at x={x:.6g}")
        step = -fx / d
        xn = x + step
        if (xn - blo) * (xn - bhi) > 0.0:
            xn = 0.5 * (blo + bhi)
            step = xn - x
        fn = m(xn) - y
        if fn > 0.0:
            bhi = xn
        else:
            blo = xn
        x, fx = xn, fn
    if abs(fx) < tol:
        return x
    raise NotInvertibleError(f"no convergence after {max_iter} iterations")


def invert_many(m, ys, slack=0.0, tol=1e-12, max_iter=60, dmin=1e-10):
    """Vectorized monotone inversion of a 1D map at many targets.

    Bisection-safeguarded Newton with per-point brackets; requires the map
    to be monotone over its (slack-extended) interval.
    """
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    lo, hi = m.lo, m.hi
    if slack:
        ext = slack * (hi - lo)
        lo, hi = lo - ext, hi + ext
    flo = m(lo) - ys
    fhi = m(hi) - ys
    increasing = m(hi) > m(lo)
    if increasing:
        blo = np.full_like(ys, lo)
        bhi = np.full_like(ys, hi)
    else:
        blo = np.full_like(ys, hi)
        bhi = np.full_like(ys, lo)
        flo, fhi = fhi, flo
    bad = (flo > 10.0 * tol) | (fhi < -10.0 * tol)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NotInvertibleError(
            f"target {ys[k]:.6g} outside the range of [{m.lo}, {m.hi}]")
    x = 0.5 * (blo + bhi)
    fx = m(x) - ys
    step = np.full_like(ys, np.inf)
    for _ in range(max_iter):
        done = (np.abs(fx) < tol) & (np.abs(step) < 1e-9 * np.maximum(1.0, np.abs(x)))
        if np.all(done):
            return x
    # update brackets
        pos = fx > 0.0
        bhi = np.where(pos, x, bhi)
        blo = np.where(pos, blo, x)
        d = m(x, 1)
        small = np.abs(d) < dmin
        newton = x - fx / np.where(small, 1.0, d)
        inside = (newton - blo) * (newton - bhi) < 0.0
        xn = np.where(inside & ~small, newton, 0.5 * (blo + bhi))
        step = np.where(done, 0.0, xn - x)
        x = np.where(done, x, xn)
        fx = m(x) - ys
    if np.max(np.abs(fx)) < tol:
        return x
    raise NotInvertibleError(
        f"vector inversion: worst residual {np.max(np.abs(fx)):.3e}")


def poly_to_cheb(poly_coeffs, lo, hi):
    """Chebyshev coefficients on [lo, hi] of a polynomial sum_k p_k x^k."""
    p = np.polynomial.Polynomial(np.asarray(poly_coeffs, dtype=float))
    q = p(np.polynomial.Polynomial([0.5 * (lo + hi), 0.5 * (hi - lo)]))
    return _cheb.poly2cheb(q.coef)


def add_polynomial(m, poly_coeffs):
    """Return m + polynomial (monomial coefficients), exact on coefficients."""
    extra = poly_to_cheb(poly_coeffs, m.lo, m.hi)
    n = max(len(m.coeffs), len(extra))
    c = np.zeros(n)
    c[:len(m.coeffs)] += m.coeffs
    c[:len(extra)] += extra
    return ChebMap1D(c, m.lo, m.hi, fit_residual=m.fit_residual)


def refit(m, degree, interval=None):
    """Resample m at a new degree (and optionally a new interval)."""
    if interval is None:
        interval = (m.lo, m.hi)
    return fit_from_samples(lambda x: m(x), interval, degree)


class ChebMap2D:
    """A real-analytic map of a rectangle held as a tensor Chebyshev series.

    coeffs[i, j] multiplies T_i(sx) T_j(sy); Nx >= 7 so cubic slice data
    stay readable, Ny >= 2 so a linear-plus-curvature y-dependence fits.
    """

    __slots__ = ("coeffs", "xlo", "xhi", "ylo", "yhi", "fit_residual", "_ders")

    MIN_NY = 2

    def __init__(self, coeffs, xlo, xhi, ylo, yhi, fit_residual=0.0):
        self._ders = {}
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        nx, ny = coeffs.shape
        if nx < MIN_DEGREE + 1:
            coeffs = np.vstack([coeffs, np.zeros((MIN_DEGREE + 1 - nx, ny))])
        if ny < self.MIN_NY + 1:
            coeffs = np.hstack([coeffs, np.zeros((coeffs.shape[0], self.MIN_NY + 1 - ny))])
        if not (xhi > xlo and yhi > ylo):
            raise FitError("degenerate rectangle")
        self.coeffs = coeffs
        self.xlo, self.xhi = float(xlo), float(xhi)
        self.ylo, self.yhi = float(ylo), float(yhi)
        self.fit_residual = float(fit_residual)

    @property
    def degrees(self):
        return (self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1)

    @property
    def rect(self):
        return (self.xlo, self.xhi, self.ylo, self.yhi)

    def _sx(self, x):
        return (2.0 * np.asarray(x, dtype=float) - self.xlo - self.xhi) / (self.xhi - self.xlo)

    def _sy(self, y):
        return (2.0 * np.asarray(y, dtype=float) - self.ylo - self.yhi) / (self.yhi - self.ylo)

    def __call__(self, x, y, dx=0, dy=0):
        """Mixed partial d^dx d^dy at points (x, y), vectorized."""
        c = self._ders.get((dx, dy))
        if c is None:
            c = self.coeffs
            if dx:
                c = _cheb.chebder(c, dx, axis=0) * (2.0 / (self.xhi - self.xlo)) ** dx
            if dy:
                c = _cheb.chebder(c, dy, axis=1) * (2.0 / (self.yhi - self.ylo)) ** dy
            self._ders[(dx, dy)] = c
        sx, sy = self._sx(x), self._sy(y)
        scalar = np.isscalar(x) and np.isscalar(y)
        sx, sy = np.atleast_1d(sx), np.atleast_1d(sy)
        sx, sy = np.broadcast_arrays(sx, sy)
        # contract y first: stack[i, p] = sum_j c[i, j] T_j(sy_p)
        stack = _cheb.chebval(sy, c.T)
        out = _clenshaw(sx, stack)
        return float(out[0]) if scalar else out.reshape(np.shape(sx))

    def extrapolates(self, x, y):
        cx, hx = 0.5 * (self.xlo + self.xhi), 0.5 * (self.xhi - self.xlo)
        cy, hy = 0.5 * (self.ylo + self.yhi), 0.5 * (self.yhi - self.ylo)
        return (np.abs(np.asarray(x, dtype=float) - cx) > EXTRAPOLATION_FACTOR * hx) | (
            np.abs(np.asarray(y, dtype=float) - cy) > EXTRAPOLATION_FACTOR * hy)

    def slice_y0(self, degree=None, y=0.0):
        """The 1D map x -> self(x, y) as an exact coefficient contraction."""
        ty = float(self._sy(y))
        weights = np.array([float(_cheb.chebval(ty, np.eye(self.coeffs.shape[1])[k]))
                            for k in range(self.coeffs.shape[1])])
        c = self.coeffs.dot(weights)
        if degree is not None and degree + 1 < len(c):
            m = ChebMap1D(c, self.xlo, self.xhi, self.fit_residual)
            return refit(m, degree)
        return ChebMap1D(c, self.xlo, self.xhi, self.fit_residual)

    def y_dependence(self, n=24):
        """sup |f(x,y) - f(x,0)| over a sampling grid of the rectangle."""
        xs = np.linspace(self.xlo, self.xhi, n)
        ys = np.linspace(self.ylo, self.yhi, 9)
        X, Y = np.meshgrid(xs, ys)
        vals = self(X.ravel(), Y.ravel())
        base = np.tile(self(xs, np.zeros_like(xs)), len(ys))
        return float(np.max(np.abs(vals - base)))

    def to_record(self):
        return {
            "version": SERIALIZE_VERSION,
            "basis": "chebyshev-tensor",
            "rect": [self.xlo, self.xhi, self.ylo, self.yhi],
            "degrees": list(self.degrees),
            "coeffs": [[float(v) for v in row] for row in self.coeffs],
            "fitResidual": self.fit_residual,
        }

    @classmethod
    def from_record(cls, rec):
        if rec.get("basis") != "chebyshev-tensor":
            raise FitError(f"unknown basis {rec.get('basis')!r}")
        xlo, xhi, ylo, yhi = rec["rect"]
        return cls(np.array(rec["coeffs"], dtype=float), xlo, xhi, ylo, yhi,
                   rec["fitResidual"])


def fit_from_samples_2d(sampler, rect, degrees):
    """Tensor-interpolate `sampler(x, y)` on first-kind product nodes."""
    xlo, xhi, ylo, yhi = (float(v) for v in rect)
    nx, ny = degrees[0] + 1, degrees[1] + 1
    if degrees[0] < MIN_DEGREE or degrees[1] < ChebMap2D.MIN_NY:
        raise FitError(f"degrees {degrees} below minimum")
    xs = 0.5 * (xlo + xhi) + 0.5 * (xhi - xlo) * _nodes(nx)
    ys = 0.5 * (ylo + yhi) + 0.5 * (yhi - ylo) * _nodes(ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = np.asarray(sampler(X.ravel(), Y.ravel()), dtype=float).reshape(nx, ny)
    if not np.all(np.isfinite(vals)):
        k = int(np.argmax(~np.isfinite(vals.ravel())))
        raise FitError("non-finite sample value",
                       node=(float(X.ravel()[k]), float(Y.ravel()[k])))
    coeffs = np.apply_along_axis(_fit_values, 0, vals)
    coeffs = np.apply_along_axis(_fit_values, 1, coeffs)
    m = ChebMap2D(coeffs, xlo, xhi, ylo, yhi)
    vx = 0.5 * (xlo + xhi) + 0.5 * (xhi - xlo) * _nodes(nx + 5)
    vy = 0.5 * (ylo + yhi) + 0.5 * (yhi - ylo) * _nodes(ny + 3)
    VX, VY = np.meshgrid(vx, vy, indexing="ij")
    ref = np.asarray(sampler(VX.ravel(), VY.ravel()), dtype=float)
    m.fit_residual = float(np.max(np.abs(m(VX.ravel(), VY.ravel()) - ref)))
    return m


def fit_from_values_2d(xs, ys, vals, rect):
    """Tensor fit from values already evaluated on the node grid."""
    xlo, xhi, ylo, yhi = (float(v) for v in rect)
    coeffs = np.apply_along_axis(_fit_values, 0, np.asarray(vals, dtype=float))
    coeffs = np.apply_along_axis(_fit_values, 1, coeffs)
    return ChebMap2D(coeffs, xlo, xhi, ylo, yhi)


def invert_x_2d(m, target, y, guess, tol=1e-12, max_iter=60, dmin=1e-10):
    """Solve m(x, y) = target for x at fixed y, vectorized over points."""
    x = np.array(guess, dtype=float, copy=True)
    y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
    target = np.broadcast_to(np.asarray(target, dtype=float), x.shape)
    fx = m(x, y) - target
    step = np.full_like(x, np.inf)
    for _ in range(max_iter):
        done = (np.abs(fx) < tol) & (np.abs(step) < 1e-9 * np.maximum(1.0, np.abs(x)))
        if np.all(done):
            return x
        d = m(x, y, dx=1)
        small = np.abs(d) < dmin
        if np.any(small & ~done):
            k = int(np.argmax(small & ~done))
            raise SingularInverseError(
                f"derivative {d.flat[k]:.3e} below {dmin:.0e} at "
                f"(x={x.flat[k]:.6g}, y={y.flat[k]:.6g})")
        newstep = np.where(done, 0.0, -fx / np.where(small, 1.0, d))
        x = x + newstep
        step = newstep
        fx = m(x, y) - target
    raise NotInvertibleError(
        f"2D x-inversion: no convergence after {max_iter} iterations "
        f"(worst residual {np.max(np.abs(fx)):.3e})")
