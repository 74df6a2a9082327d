"""Nested renormalization charts and the critical invariant circle.

The microscope composes one rescaled chart per renormalization level:
Psi_w = Z^w ∘ L_Z with L_Z = H_Z^{-1} ∘ Lambda_Z. Level-l compositions map
the base rectangles onto an exponentially fine partition of a
neighborhood of the attractor; picking one sample point per element and
indexing the elements by the same words applied to the golden translation
pair produces the parametrized invariant curve, together with measurable
conjugacy, gluing, and smoothness diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contfrac
from . import funcspace as fs
from . import pairs as pr
from . import renorm1d as rn
from . import twodim as td
from .errors import NotOnStableSetError, NotRenormalizableError

RHO = contfrac.GOLDEN_MEAN


@dataclass
class MicroscopeLevel:
    level: int
    n: int
    ell: float
    words_s: pr.MultiIndex
    words_t: pr.MultiIndex
    derivative_norm_bound: float


@dataclass
class QElement:
    t_lo: float                 # parameter interval on the translation pair
    t_hi: float
    side: int                   # +1: next word from the s-family, -1: t-family
    base_kind: int              # 1 or 2: which base rectangle seeded it
    points: np.ndarray          # sampled boundary + center images, (m, 2)
    center: np.ndarray          # image of the base center, (2,)

    @property
    def t_mid(self):
        return 0.5 * (self.t_lo + self.t_hi)

    @property
    def diameter(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(np.hypot(*(hi - lo)))


class _Level:
    """Per-level data: the pair, its transform, words, and scale."""

    def __init__(self, Z, n):
        heights = td.heights_by_words_2d(Z, n)
        if len(heights) < n or any(h != 1 for h in heights[:n]):
            raise NotOnStableSetError(
                f"level pair heights {heights[:n]} are not golden")
        self.Z = Z
        self.n = n
        self.H = td.build_transform_h(Z, n, heights=[1] * n)
        s_n, t_n = rn.evolve_words([1] * n)
        self.s_hat = self.H.provenance["s_hat"]
        self.t_hat = self.H.provenance["t_hat"]
        self.kind = self.H.provenance["kind"]
        # the conjugated level words: eta-prefix, hat word, prefix map letter
        f_letter = pr.ETA if self.kind == "eta2" else pr.XI
        self.s_tilde = pr.MultiIndex.from_letters(
            (pr.ETA,) + self.s_hat.letters + (f_letter,))
        self.t_tilde = pr.MultiIndex.from_letters(
            (pr.ETA,) + self.t_hat.letters + (f_letter,))
        self.ell = None  # set by the orbit builder

    def apply_L(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        u, v = self.H.inverse(self.ell * x, self.ell * y)
        return np.column_stack([u, v])

    def apply_word(self, word, pts):
        x, y = self.Z.apply_word(word, pts[:, 0], pts[:, 1])
        return np.column_stack([x, y])


def rg_orbit(Z, levels, n=3, degrees=None, eps_tube=0.2):
    """The renormalization orbit with charts: per-level `_Level` objects
    and the pair chain [Z, RG Z, ..., RG^{levels-1} Z].

    The deepest pair is never renormalized again; its successor exists
    only through the last chart, whose one-point composites give the
    base-rectangle endpoints.
    """
    charts = []
    pairs = [Z]
    cur = Z
    for j in range(levels):
        lv = _Level(cur, n)
        comp_a = td._composite(cur, lv.H, "A")
        comp_b = td._composite(cur, lv.H, "B")
        bx0 = comp_b(np.array([0.0]), np.array([0.0]))
        ax0 = comp_a(np.array([0.0]), np.array([0.0]))
        lv.ell = float(bx0[0][0])
        lv.x_left = float(ax0[0][0]) / lv.ell
        charts.append(lv)
        if j < levels - 1:
            step = td.renormalize_2d(cur, n=n, degrees=degrees,
                                     eps_tube=eps_tube)
            cur = step.result
            pairs.append(cur)
    return charts, pairs


def _t_star_maps(n):
    """The translation-pair analogues: lambda_n and the affine L."""
    lam_t = (-RHO) ** n

    def l_t(t):
        return lam_t * t + RHO   # eta*^{-1}(lam t), eta* = x - rho

    return lam_t, l_t


def _t_star_word(word, t):
    """Apply a word of the golden translation pair to parameters t."""
    out = np.asarray(t, dtype=float).copy()
    for ltr in word.letters:
        out = out + (-RHO if ltr == pr.ETA else 1.0)
    return out


def _base_elements(pair_rect_a, pair_rect_b, r_mic, samples=6):
    """The two base rectangles with boundary samples and exact parameter
    intervals on the translation pair."""
    out = []
    for kind, (xlo, xhi), (tlo, thi) in (
            (1, pair_rect_a, (0.0, 1.0)), (2, pair_rect_b, (-RHO, 0.0))):
        xs = np.linspace(xlo, xhi, samples)
        ys = np.linspace(-r_mic, r_mic, samples)
        edge = np.concatenate([
            np.column_stack([xs, np.full_like(xs, -r_mic)]),
            np.column_stack([xs, np.full_like(xs, r_mic)]),
            np.column_stack([np.full_like(ys, xlo), ys]),
            np.column_stack([np.full_like(ys, xhi), ys]),
            [[0.5 * (xlo + xhi), 0.0]],
        ])
        out.append(QElement(tlo, thi, +1 if tlo >= -1e-12 else -1, kind,
                            edge, edge[-1].copy()))
    return out


def partition_q(Z, levels, n=3, degrees=None, eps_tube=0.2, samples=6):
    """Microscope partitions of levels 1..levels for the 2D pair Z.

    Each level-l element is the image of a base rectangle under the
    composition of l charts; the parameter interval carries the identical
    construction on the golden translation pair. Returns (per-level
    element lists, per-level metadata).
    """
    orbit, pairs = rg_orbit(Z, levels, n=n, degrees=degrees,
                            eps_tube=eps_tube)
    lam_t, _ = _t_star_maps(n)
    levels_out = []
    meta = []
    for k in range(1, levels + 1):
        if k < len(pairs):
            base_pair = pairs[k]
            rect_a = (base_pair.ax.xlo, base_pair.ax.xhi)
            rect_b = (base_pair.bx.xlo, base_pair.bx.xhi)
            r_mic = 0.8 * min(base_pair.ax.yhi, base_pair.bx.yhi)
        else:
            rect_a = (0.0, 1.0)
            rect_b = (orbit[k - 1].x_left, 0.0)
            prev = pairs[-1]
            r_mic = 0.8 * min(prev.ax.yhi, prev.bx.yhi)
        elements = _base_elements(rect_a, rect_b, r_mic, samples)
        for j in range(k - 1, -1, -1):
            lv = orbit[j]
            new = []
            for e in elements:
                pts = lv.apply_L(e.points)
                t_lo = lam_t * e.t_lo + RHO
                t_hi = lam_t * e.t_hi + RHO
                t_lo, t_hi = min(t_lo, t_hi), max(t_lo, t_hi)
                fam = lv.s_tilde if e.side > 0 else lv.t_tilde
                for w in pr.prefixes(fam):
                    pts2 = lv.apply_word(w, pts)
                    tl = float(_t_star_word(w, t_lo))
                    th = float(_t_star_word(w, t_hi))
                    tl, th = min(tl, th), max(tl, th)
                    side = +1 if 0.5 * (tl + th) >= 0.0 else -1
                    new.append(QElement(tl, th, side, e.base_kind, pts2,
                                        pts2[-1].copy()))
            elements = new
        levels_out.append(elements)
        meta.append(MicroscopeLevel(k, n, orbit[k - 1].ell,
                                    orbit[k - 1].s_tilde,
                                    orbit[k - 1].t_tilde, math.nan))
    return levels_out, meta, orbit


def microscope_factor(level: _Level, word):
    """The chart factor Psi_w = Z^w ∘ L as an evaluable map with sampled
    derivative norms over the two base rectangles."""
    if level.ell is None:
        raise NotRenormalizableError("level chart has no rescale factor yet")

    def apply(pts):
        return level.apply_word(word, level.apply_L(pts))

    def derivative_norm(rect, grid=(5, 3), h=1e-6):
        xlo, xhi, ylo, yhi = rect
        xs = np.linspace(xlo + 1e-3, xhi - 1e-3, grid[0])
        ys = np.linspace(ylo, yhi, grid[1])
        X, Y = np.meshgrid(xs, ys)
        best = 0.0
        for x, y in zip(X.ravel(), Y.ravel()):
            cols = []
            for dx, dy in ((h, 0.0), (0.0, h)):
                p1 = apply(np.array([[x + dx, y + dy]]))
                p0 = apply(np.array([[x - dx, y - dy]]))
                cols.append((p1[0] - p0[0]) / (2.0 * h))
            best = max(best, float(np.linalg.norm(np.array(cols).T, 2)))
        return best

    return apply, derivative_norm


def commutator_2d(Z, probes=60):
    """sup |A∘B - B∘A| sampled near the shared domain around the origin."""
    half = 0.06 * min(-Z.bx.xlo, Z.ax.xhi)
    xs = np.linspace(-half, half, probes)
    ys = np.linspace(0.5 * Z.ax.ylo, 0.5 * Z.ax.yhi, 5)
    X, Y = np.meshgrid(xs, ys)
    x1, y1 = Z.apply_a(*Z.apply_b(X.ravel(), Y.ravel()))
    x2, y2 = Z.apply_b(*Z.apply_a(X.ravel(), Y.ravel()))
    return float(max(np.max(np.abs(x1 - x2)), np.max(np.abs(y1 - y2))))


@dataclass
class AttractorCurve:
    ts: np.ndarray               # ordered parameter midpoints
    points: np.ndarray           # curve samples, (m, 2)
    t_intervals: np.ndarray      # (m, 2) parameter intervals
    level: int
    max_diameter: float
    conjugacy_defect: float
    gluing_defect: float

    def to_csv(self):
        from . import __version__
        lines = ["t,x,y,producer"]
        for t, (x, y) in zip(self.ts, self.points):
            lines.append(f"{t!r},{x!r},{y!r},renormpairs {__version__}")
        return "\n".join(lines) + "\n"

    def to_svg(self, width=800, height=400):
        xs, ys = self.points[:, 0], self.points[:, 1]
        xlo, xhi = xs.min(), xs.max()
        ylo, yhi = ys.min() - 1e-9, ys.max() + 1e-9
        px = (xs - xlo) / (xhi - xlo) * (width - 20) + 10
        py = height - ((ys - ylo) / (yhi - ylo) * (height - 20) + 10)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                f'height="{height}">\n<polyline points="{pts}" fill="none" '
                f'stroke="#4477aa" stroke-width="1"/>\n</svg>\n')


def build_attractor(Z, level, n=3, degrees=None, eps_tube=0.2,
                    defect_probes=200):
    """The invariant-circle approximation of a commuting 2D pair.

    One representative point (the image of the base-rectangle center) per
    level-`level` microscope element, parametrized by the corresponding
    element of the golden translation pair. The conjugacy defect compares
    the translation dynamics on parameters with the pair dynamics on
    points at element representatives; the gluing defect checks that the
    overlap piece closes the circle.
    """
    dmax = commutator_2d(Z)
    if dmax > 1e-6:
        raise NotOnStableSetError(
            f"2D commutator defect {dmax:.3g}: pair must commute")
    heights = td.heights_by_words_2d(Z, min(level * n + 2, 20))
    need = level * n
    if len([h for h in heights if h == 1]) < min(need, len(heights)) or \
            any(h != 1 for h in heights[:min(need, len(heights))]):
        raise NotOnStableSetError(
            f"pair heights {heights} not golden to depth {need}")
    levels_out, meta, orbit = partition_q(Z, level, n=n, degrees=degrees,
                                          eps_tube=eps_tube)
    elements = sorted(levels_out[level - 1], key=lambda e: e.t_mid)
    ts = np.array([e.t_mid for e in elements])
    points = np.array([e.center for e in elements])
    t_iv = np.array([[e.t_lo, e.t_hi] for e in elements])
    max_diam = max(e.diameter for e in elements)

    # conjugacy defect: translation step on parameters against the pair
    # step on points, measured at element representatives
    glue_hi = 1.0 - RHO   # xi(eta(0)) of the translation pair
    rng = np.random.default_rng(11)
    sel = rng.choice(len(elements), size=min(defect_probes, len(elements)),
                     replace=False)
    defect = 0.0
    for i in sel:
        t = ts[i]
        if not (-RHO <= t < glue_hi):
            continue
        p = points[i]
        if t >= 0.0:
            t2 = t - RHO
            q2 = np.array(Z.apply_a(p[0], p[1]), dtype=float).ravel()
        else:
            t2 = t + 1.0 - RHO
            xb, yb = Z.apply_b(p[0], p[1])
            q2 = np.array(Z.apply_a(xb, yb), dtype=float).ravel()
        k = int(np.searchsorted(t_iv[:, 0], t2) - 1)
        k = max(0, min(k, len(elements) - 1))
        if not (t_iv[k, 0] - 1e-12 <= t2 <= t_iv[k, 1] + 1e-12):
            k = int(np.argmin(np.abs(ts - t2)))
        defect = max(defect, float(np.hypot(*(points[k] - q2))))

    # gluing: the tail piece t in (1-rho, 1] repeats the arc over
    # (-rho, 0] composed with B
    glue = 0.0
    for i in range(len(elements)):
        t = ts[i]
        if t <= glue_hi:
            continue
        t2 = t - 1.0
        k = int(np.argmin(np.abs(ts - t2)))
        xb, yb = Z.apply_b(points[k][0], points[k][1])
        glue = max(glue, float(np.hypot(points[i][0] - float(np.ravel(xb)[0]),
                                        points[i][1] - float(np.ravel(yb)[0]))))
    return AttractorCurve(ts, points, t_iv, level, max_diam, defect, glue)


@dataclass
class HolderReport:
    slope: float
    ci_low: float
    ci_high: float
    n_points: int
    inconclusive: bool


def holder_estimate(curve, window=0.15, t0=0.0):
    """Log-log regression of |phi(t) - phi(t0)| against |t - t0|.

    A slope bounded away from 1 flags a non-Lipschitz conjugacy at the
    critical parameter; a smooth conjugacy gives slope ~ 1.
    """
    ts = curve.ts
    pts = curve.points
    k0 = int(np.argmin(np.abs(ts - t0)))
    base = pts[k0]
    mask = (np.abs(ts - ts[k0]) <= window) & (np.abs(ts - ts[k0]) > 1e-12)
    n = int(np.sum(mask))
    if n < 10:
        return HolderReport(math.nan, math.nan, math.nan, n, True)
    dx = np.log(np.abs(ts[mask] - ts[k0]))
    dy = np.log(np.hypot(pts[mask, 0] - base[0], pts[mask, 1] - base[1]) + 1e-300)
    A = np.column_stack([dx, np.ones_like(dx)])
    coef, res, _, _ = np.linalg.lstsq(A, dy, rcond=None)
    slope = float(coef[0])
    resid = dy - A.dot(coef)
    se = math.sqrt(float(resid @ resid) / max(n - 2, 1)
                   / float(((dx - dx.mean()) ** 2).sum()))
    return HolderReport(slope, slope - 1.96 * se, slope + 1.96 * se, n, False)
