"""Almost-commuting projection, the renormalization fixed point, spectrum.

The projection corrects eta by a x^4 + b x^6 and xi by c + d x + e x^2 so
that the commutator of the pair vanishes to order three at the origin and
xi(0) = 1; Newton on that 5x5 system uses the analytic Jacobian, whose
determinant is comparable to 4 eta'(xi(0))^2 xi'''(0) and therefore
degenerates exactly when the cubic critical point is absent.

The fixed point of projection∘renormalization is found by a damped Newton
iteration on the chart (eta coefficients on [0,1], rescaled-xi
coefficients on [0,1]); its finite-difference linearization yields the
spectrum with one expanding direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import funcspace as fs
from . import pairs as pr
from . import renorm1d as rn
from .errors import (
    DegenerateProjectionError,
    LeftDomainError,
    ProjectionDivergedError,
)


@dataclass
class Quintuple:
    a: float
    b: float
    d: float
    e: float
    c: float
    residual: float

    def as_array(self):
        return np.array([self.a, self.b, self.d, self.e, self.c])

    @property
    def magnitude(self):
        return float(np.max(np.abs(self.as_array())))


def _corrected_eval(m, poly, x, order):
    """Derivative of m + polynomial(monomial coefficients) at x."""
    val = m(x, order)
    p = np.polynomial.Polynomial(poly)
    return val + p.deriv(order)(x) if order else val + p(x)


def _conditions(pair, params):
    """F(a, b, d, e, c): commutator derivatives 0..3 at 0 and xi(0) - 1."""
    a, b, d, e, c = params
    eta, xi = pair.eta, pair.xi
    pe = [0.0, 0.0, 0.0, 0.0, a, 0.0, b]
    px = [c, d, e]
    u0 = _corrected_eval(xi, px, 0.0, 0)
    v0 = _corrected_eval(eta, pe, 0.0, 0)
    fo = [_corrected_eval(eta, pe, u0, k) for k in range(4)]
    fi = [_corrected_eval(xi, px, 0.0, k) for k in range(4)]
    go = [_corrected_eval(xi, px, v0, k) for k in range(4)]
    gi = [_corrected_eval(eta, pe, 0.0, k) for k in range(4)]
    lhs = pr._chain_derivs(fo, fi)
    rhs = pr._chain_derivs(go, gi)
    F = np.array([lhs[0] - rhs[0], lhs[1] - rhs[1], lhs[2] - rhs[2],
                  lhs[3] - rhs[3], u0 - 1.0])
    return F


def _jacobian(pair, params):
    """Analytic 5x5 Jacobian of _conditions at the given parameters."""
    a, b, d, e, c = params
    eta, xi = pair.eta, pair.xi
    pe = [0.0, 0.0, 0.0, 0.0, a, 0.0, b]
    px = [c, d, e]
    u0 = _corrected_eval(xi, px, 0.0, 0)
    v0 = _corrected_eval(eta, pe, 0.0, 0)
    E = [_corrected_eval(eta, pe, u0, k) for k in range(5)]
    X = [_corrected_eval(xi, px, v0, k) for k in range(4)]
    s0 = _corrected_eval(xi, px, 0.0, 1)
    s1 = _corrected_eval(xi, px, 0.0, 2)
    s2 = _corrected_eval(xi, px, 0.0, 3)
    h0, h1, h2 = eta(0.0, 1), eta(0.0, 2), eta(0.0, 3)
    J = np.zeros((5, 5))
    J[0] = [u0**4, u0**6, -v0, -v0**2, E[1] - 1.0]
    J[1] = [4 * u0**3 * s0, 6 * u0**5 * s0, E[1] - h0, -2 * v0 * h0, E[2] * s0]
    J[2] = [12 * u0**2 * s0**2 + 4 * u0**3 * s1,
            30 * u0**4 * s0**2 + 6 * u0**5 * s1,
            2 * E[2] * s0 - h1,
            2 * E[1] - 2 * h0**2 - 2 * v0 * h1,
            E[3] * s0**2 + E[2] * s1]
    J[3] = [24 * u0 * s0**3 + 36 * u0**2 * s0 * s1 + 4 * u0**3 * s2,
            120 * u0**3 * s0**3 + 90 * u0**4 * s0 * s1 + 6 * u0**5 * s2,
            3 * E[3] * s0**2 + 3 * E[2] * s1 - h2,
            6 * E[2] * s0 - 6 * h0 * h1 - 2 * v0 * h2,
            E[4] * s0**3 + 3 * E[3] * s0 * s1 + E[2] * s2]
    J[4] = [0.0, 0.0, 0.0, 0.0, 1.0]
    return J


COND_TOL = np.array([1e-11, 1e-11, 1e-11, 1e-11, 1e-13])


def project_ac(pair, max_newton=30, det_floor=1e-8):
    """Correct the pair so the commutator vanishes to order 3 and xi(0)=1.

    Newton on (a, b, d, e, c) with the analytic Jacobian and a
    finite-difference fallback; the corrected maps are returned with the
    quintuple. Degenerate systems (no cubic critical point, det below
    `det_floor`) are rejected.
    """
    d0 = _conditions(pair, np.zeros(5))
    if np.max(np.abs(d0[:4])) > 0.2:
        raise ProjectionDivergedError(
            f"input too far from commuting: defect {np.max(np.abs(d0[:4])):.3g}")
    # near-critical leading determinant 4 eta'(xi(0))^2 xi'''(0): vanishing
    # third derivative means no cubic critical point and no valid projection
    det = 4.0 * pair.eta(pair.xi0, 1) ** 2 * pair.xi(0.0, 3)
    if abs(det) < det_floor:
        raise DegenerateProjectionError(
            f"projection system degenerate (leading det={det:.3e}); "
            "the pair has no usable cubic critical point")
    params = np.zeros(5)
    F = d0
    for it in range(max_newton):
        if np.all(np.abs(F) < COND_TOL):
            break
        J = _jacobian(pair, params)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            J = _fd_jacobian(pair, params)
            step = np.linalg.solve(J, -F)
        scale = 1.0
        base = np.max(np.abs(F / COND_TOL))
        for _ in range(8):
            cand = params + scale * step
            Fc = _conditions(pair, cand)
            if np.max(np.abs(Fc / COND_TOL)) < base or scale < 1e-3:
                params, F = cand, Fc
                break
            scale *= 0.5
        else:
            raise ProjectionDivergedError("line search failed")
    else:
        raise ProjectionDivergedError(
            f"no convergence in {max_newton} Newton steps; residual {F}")
    a, b, d, e, c = params
    eta = fs.add_polynomial(pair.eta, [0.0, 0.0, 0.0, 0.0, a, 0.0, b])
    xi = fs.add_polynomial(pair.xi, [c, d, e])
    xi.coeffs[0] += 1.0 - xi(0.0)
    out = pr.make_pair(eta, xi, require_normalized=True, mono_floor=1e-5,
                       meta=dict(pair.meta, projected=True))
    return out, Quintuple(a, b, d, e, c, float(np.max(np.abs(F))))


def _fd_jacobian(pair, params, h=1e-8):
    J = np.zeros((5, 5))
    for k in range(5):
        dp = np.zeros(5)
        dp[k] = h
        J[:, k] = (_conditions(pair, params + dp)
                   - _conditions(pair, params - dp)) / (2.0 * h)
    return J


def renorm_step_ac(pair, degree=None):
    """One renormalization followed by the almost-commuting projection."""
    step = rn.renormalize(pair, degree=degree)
    out, _ = project_ac(step.result)
    return out


# ---------------------------------------------------------------------------
# chart


def chart_coords(pair):
    """Coefficient chart: eta on [0,1] and xi(eta(0) x)/eta(0) on [0,1]."""
    xihat = fs.affine_rescale(pair.xi, pair.eta0)
    return np.concatenate([pair.eta.coeffs, xihat.coeffs])


def pair_from_chart(vec, meta=None):
    """Rebuild a pair from chart coordinates, retracting onto the
    constraint set (eta critical to second order at 0, xi(0) = 1)."""
    n = len(vec) // 2
    eta = fs.ChebMap1D(np.array(vec[:n]), 0.0, 1.0)
    d1, d2 = eta(0.0, 1), eta(0.0, 2)
    if abs(d1) > 0.0 or abs(d2) > 0.0:
        corr = fs.poly_to_cheb([0.0, d1, 0.5 * d2], 0.0, 1.0)
        c = eta.coeffs.copy()
        c[:len(corr)] -= corr
        eta = fs.ChebMap1D(c, 0.0, 1.0)
    eta0 = eta(0.0)
    if not eta0 < 0.0:
        raise LeftDomainError(f"chart point has eta(0) = {eta0:.6g} >= 0")
    xihat = fs.ChebMap1D(np.array(vec[n:]), 0.0, 1.0)
    # xi-criticality is implied by commutation on the constraint set, so
    # retracting it too is the identity there; without this the two
    # criticality-breaking directions pollute the spectrum
    e1, e2 = xihat(0.0, 1), xihat(0.0, 2)
    if abs(e1) > 0.0 or abs(e2) > 0.0:
        corr = fs.poly_to_cheb([0.0, e1, 0.5 * e2], 0.0, 1.0)
        c2 = xihat.coeffs.copy()
        c2[:len(corr)] -= corr
        xihat = fs.ChebMap1D(c2, 0.0, 1.0)
    xi = fs.affine_rescale(xihat, 1.0 / eta0)
    xi.coeffs[0] += 1.0 - xi(0.0)
    return pr.make_pair(eta, xi, require_normalized=True, meta=meta,
                        mono_floor=1e-5)


def chart_dim(degree):
    return 2 * (degree + 1)


def chart_weights(dim, k0=5.0):
    """Diagonal weights taming the k^6 endpoint-derivative stiffness.

    A unit perturbation of a high-order Chebyshev coefficient moves third
    derivatives at the interval ends by O(k^6), far outside the operator's
    linear regime; differencing along w_k e_k with w_k ~ (k0/k)^6 keeps
    every probe comparably sized. Eigenvalues are invariant under this
    diagonal similarity; the weighted matrix is the well-conditioned
    representative.
    """
    n = dim // 2
    k = np.arange(n, dtype=float)
    w = 1.0 / (1.0 + (k / k0) ** 6)
    return np.concatenate([w, w])


# ---------------------------------------------------------------------------
# Newton for the fixed point


def newton_fixed_point(seed, tol=1e-9, max_newton=40, fd_step=1e-6,
                       verbose=False):
    """Fixed point of renorm_step_ac by damped Newton on the chart.

    The Jacobian is finite-differenced column by column and reused while
    the residual keeps dropping. A height change along the way means the
    iterate left the golden domain and aborts. Returns the best iterate;
    its meta carries the achieved residual.
    """
    target_height = pr.height(seed)
    c = chart_coords(seed)
    dim = len(c)
    w = chart_weights(dim)

    def G(vec):
        p = pair_from_chart(vec)
        if pr.height(p) != target_height:
            raise LeftDomainError("height changed during Newton")
        return chart_coords(renorm_step_ac(p)) - vec

    g = G(c)
    res = float(np.max(np.abs(g)))
    best = (res, c.copy())
    J = None
    stale = True
    for it in range(max_newton):
        if res < tol:
            break
        if J is None or stale:
            # weighted-basis Jacobian: columns probed along w_k e_k
            J = np.empty((dim, dim))
            for k in range(dim):
                dv = np.zeros(dim)
                dv[k] = fd_step * w[k]
                J[:, k] = (G(c + dv) - g) / (fd_step * w[k]) * w[k] / w
            stale = False
        step = w * np.linalg.solve(J, -(g / w))
        scale = 1.0
        for _ in range(8):
            try:
                g_new = G(c + scale * step)
            except Exception:
                scale *= 0.5
                continue
            if np.max(np.abs(g_new)) < res:
                c = c + scale * step
                g = g_new
                new_res = float(np.max(np.abs(g)))
                if new_res > 0.5 * res:
                    stale = True   # Jacobian went stale, refresh next loop
                res = new_res
                break
            scale *= 0.5
        else:
            if stale:
                raise ProjectionDivergedError(
                    f"Newton stalled at residual {res:.3e}")
            stale = True
            continue
        if verbose:
            print(f"  newton[{it}] residual {res:.3e}")
        if res < best[0]:
            best = (res, c.copy())
    res, c = best
    out = pair_from_chart(c, meta=dict(seed.meta, newton_residual=res))
    return out


def fixed_point_residual(pair):
    return float(np.max(np.abs(chart_coords(renorm_step_ac(pair))
                               - chart_coords(pair))))


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray          # sorted by modulus, descending
    unstable_count: int
    perturb_step: float
    truncation_degrees: tuple
    drift_under_refinement: float    # max relative drift of top-3 moduli
    failed_columns: tuple = ()

    @property
    def unstable(self):
        return self.eigenvalues[0]

    def to_record(self):
        return {
            "eigenvalues": [{"re": float(z.real), "im": float(z.imag)}
                            for z in self.eigenvalues],
            "unstableCount": int(self.unstable_count),
            "perturbStep": self.perturb_step,
            "truncationDegrees": list(self.truncation_degrees),
            "drift": self.drift_under_refinement,
        }


def _operator_matrix(zstar, h):
    """Weighted-basis finite-difference matrix of the operator at zstar.

    Same spectrum as the raw coefficient matrix (diagonal similarity);
    failed columns are recorded and left zero.
    """
    c0 = chart_coords(zstar)
    dim = len(c0)
    w = chart_weights(dim)
    J = np.zeros((dim, dim))
    failed = []
    for k in range(dim):
        dv = np.zeros(dim)
        dv[k] = h * w[k]
        try:
            gp = chart_coords(renorm_step_ac(pair_from_chart(c0 + dv)))
            gm = chart_coords(renorm_step_ac(pair_from_chart(c0 - dv)))
            J[:, k] = (gp - gm) / (2.0 * h * w[k]) * w[k] / w
        except Exception:
            failed.append(k)
    return J, tuple(failed), c0


def jacobian_spectrum(zstar, h=1e-6, refine_degree=50, compute_drift=True):
    """Spectrum of the linearized operator at the fixed point.

    Central finite differences over the chart basis; with `compute_drift`
    the fixed point is refit at `refine_degree`, re-polished, and the
    drift of the top-3 moduli across truncations is reported.
    """
    J, failed, _ = _operator_matrix(zstar, h)
    eig = np.linalg.eigvals(J)
    eig = eig[np.argsort(-np.abs(eig))]
    unstable = int(np.sum(np.abs(eig) > 1.0))
    degree = zstar.eta.degree
    drift = math.nan
    if compute_drift:
        z50 = refit_pair(zstar, refine_degree)
        z50 = newton_fixed_point(z50, tol=1e-9)
        J2, _, _ = _operator_matrix(z50, h)
        eig2 = np.linalg.eigvals(J2)
        eig2 = eig2[np.argsort(-np.abs(eig2))]
        top = np.abs(eig[:3])
        top2 = np.abs(eig2[:3])
        drift = float(np.max(np.abs(top - top2) / top))
    return SpectrumReport(eig, unstable, h, (degree, refine_degree), drift,
                          failed)


def operator_eigen(zstar, h=1e-6):
    """Eigenvalues (sorted by modulus) and raw-chart eigenvectors."""
    J, _, _ = _operator_matrix(zstar, h)
    vals, vecs = np.linalg.eig(J)
    order = np.argsort(-np.abs(vals))
    w = chart_weights(J.shape[0])
    return vals[order], (vecs[:, order].T * w).T


def refit_pair(pair, degree):
    eta = fs.refit(pair.eta, degree)
    # truncation moves eta(0) slightly; xi's interval must follow it
    xi = fs.refit(pair.xi, degree, (eta(0.0), 0.0))
    xi.coeffs[0] += 1.0 - xi(0.0)
    return pr.make_pair(eta, xi, require_normalized=True, meta=dict(pair.meta))


def unstable_cross_check(zstar, v0=None, steps=40, lo=1e-6, hi=1e-2, seed=7):
    """Geometric-mean growth of a generic perturbation under the operator.

    Tracks the chart distance of the orbit of zstar + v0 from zstar while
    it stays inside [lo, hi]; returns (ratio, n_ratios); inconclusive
    (nan, 0) when the window captures fewer than two steps.
    """
    c0 = chart_coords(zstar)
    if v0 is not None and np.max(np.abs(np.asarray(v0))) == 0.0:
        return math.nan, 0
    if v0 is None:
        rng = np.random.default_rng(seed)
        w = chart_weights(len(c0))
        v0 = rng.standard_normal(len(c0)) * w**3   # smooth generic direction
        v0 *= lo / np.max(np.abs(v0))
        # power-iteration warm-up at tiny amplitude: two applications align
        # a generic probe with the leading mode, so the measured window is
        # not polluted by the initial stiff transient
        cw = c0 + 1e-3 * v0
        for _ in range(3):
            try:
                cw = chart_coords(renorm_step_ac(pair_from_chart(cw)))
            except Exception:
                break
        u = cw - c0
        if np.max(np.abs(u)) > 0.0:
            v0 = u * (lo / np.max(np.abs(u)))
    c = c0 + v0
    dists = []
    for _ in range(steps):
        d = float(np.max(np.abs(c - c0)))
        if d > hi:
            break
        if d >= lo:
            dists.append(d)
        try:
            c = chart_coords(renorm_step_ac(pair_from_chart(c)))
        except Exception:
            break
    if len(dists) < 3:
        return math.nan, 0
    ratios = np.diff(np.log(dists))
    return float(np.exp(np.mean(ratios))), len(ratios)
