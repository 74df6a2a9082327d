"""Dissipative 2D pairs and the renormalization that contracts them to 1D.

A 2D pair Z = (A, B) holds four tensor maps on rectangles whose x-slices
form an (almost) commuting pair. Renormalization composes the return
words of the slice, conjugates by the coordinate change H (which blows
the thin dissipative direction up to unit scale and kills first-order
y-dependence), rescales diagonally by ell_n = pi1 Bbar(0,0), and projects
back onto the order-three commutation conditions. y-independent input
reproduces the 1D operator exactly; eps-size input contracts
quadratically toward the diagonal embedding iota.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import funcspace as fs
from . import hyper1d as hy
from . import pairs as pr
from . import renorm1d as rn
from .errors import (
    DegenerateProjectionError,
    IndexError_,
    NotRenormalizableError,
    PairConditionError,
    ProjectionDivergedError,
    TransformInaccurateError,
    TransformSingularError,
)

ETA, XI = pr.ETA, pr.XI
DEFAULT_EPS_TUBE = 1e-2
DEFAULT_R_OUT = 2.0
GRID_FACTOR = 2      # sampling grid is GRID_FACTOR x (degree+1) per axis


# ---------------------------------------------------------------------------
# the pair type


class Pair2D:
    """Pair of 2D maps A = (ax, ay), B = (bx, by) on their rectangles."""

    __slots__ = ("ax", "ay", "bx", "by", "delta", "meta",
                 "ydep_norm", "discrepancy", "cond_report")

    def __init__(self, ax, ay, bx, by, delta, meta=None):
        self.ax, self.ay, self.bx, self.by = ax, ay, bx, by
        self.delta = float(delta)
        self.meta = dict(meta or {})
        self.ydep_norm = max(m.y_dependence() for m in (ax, ay, bx, by))
        self.discrepancy = self._discrepancy()
        self.cond_report = None

    def _discrepancy(self):
        out = 0.0
        for mx, my in ((self.ax, self.ay), (self.bx, self.by)):
            xs = np.linspace(mx.xlo, mx.xhi, 33)
            ys = np.linspace(mx.ylo, mx.yhi, 7)
            X, Y = np.meshgrid(xs, ys)
            out = max(out, float(np.max(np.abs(mx(X.ravel(), Y.ravel())
                                                - my(X.ravel(), Y.ravel())))))
        return out

    @property
    def epsilon_estimate(self):
        """Distance to the y-independent forms (the operator's tube metric)."""
        return self.ydep_norm

    @property
    def iota_distance(self):
        """Distance to the diagonal embedding of a 1D pair."""
        return max(self.ydep_norm, 0.5 * self.discrepancy)

    def apply_a(self, x, y):
        return self.ax(x, y), self.ay(x, y)

    def apply_b(self, x, y):
        return self.bx(x, y), self.by(x, y)

    def apply_letter(self, letter, x, y):
        return self.apply_a(x, y) if letter == ETA else self.apply_b(x, y)

    def apply_word(self, word, x, y):
        for ltr in word.letters:
            x, y = self.apply_letter(ltr, x, y)
        return x, y

    def slice_pair(self, degree=None, require_normalized=False,
                   mono_floor=None, interval_tol=1e-5):
        eta = self.ax.slice_y0(degree)
        xi = self.bx.slice_y0(degree)
        if mono_floor is None:
            # dissipative feedback makes the slice dip by O(tube width)
            # inside the cubically flat critical zone; renormalized pairs
            # carry the residue in the component discrepancy instead
            mono_floor = max(1e-5, 10.0 * self.ydep_norm,
                             6.0 * self.discrepancy)
        return pr.make_pair(eta, xi, require_normalized=require_normalized,
                            mono_floor=mono_floor, interval_tol=interval_tol,
                            meta=dict(self.meta, slice=True))

    @property
    def rect_a(self):
        return self.ax.rect

    @property
    def rect_b(self):
        return self.bx.rect

    def to_record(self):
        return {"A": [self.ax.to_record(), self.ay.to_record()],
                "B": [self.bx.to_record(), self.by.to_record()],
                "delta": self.delta, "meta": self.meta,
                "metrics": self.metrics()}

    def metrics(self):
        return {"ydep": self.ydep_norm, "discrepancy": self.discrepancy,
                "iotaDistance": self.iota_distance}

    @classmethod
    def from_record(cls, rec):
        ax, ay = (fs.ChebMap2D.from_record(r) for r in rec["A"])
        bx, by = (fs.ChebMap2D.from_record(r) for r in rec["B"])
        return cls(ax, ay, bx, by, rec["delta"], rec.get("meta"))

    def __repr__(self):
        return (f"Pair2D(ydep={self.ydep_norm:.3g}, "
                f"discrepancy={self.discrepancy:.3g}, delta={self.delta:.3g})")


def make_pair_2d(ax, ay, bx, by, delta, meta=None, cond_floor=0.0,
                 slice_degree=None):
    """Validate and assemble a Pair2D.

    cond1: |d/dx of the second components| > cond_floor outside the
    delta-disk; cond2: second components bounded by half the rectangle
    height; the y=0 slice must form a valid pair.
    """
    Z = Pair2D(ax, ay, bx, by, delta, meta)
    report = {}
    for name, m in (("A", ay), ("B", by)):
        xs = np.linspace(m.xlo, m.xhi, 65)
        xs = xs[np.abs(xs) > delta]
        ys = np.linspace(m.ylo, m.yhi, 5)
        X, Y = np.meshgrid(xs, ys)
        d = np.abs(m(X.ravel(), Y.ravel(), dx=1))
        k = int(np.argmin(d))
        report[f"cond1_{name}"] = (float(d[k]), float(X.ravel()[k]), float(Y.ravel()[k]))
        if d[k] <= cond_floor:
            raise PairConditionError(
                "cond1", f"|dx {name}2| = {d[k]:.3e} at x={X.ravel()[k]:.4g}, "
                         f"y={Y.ravel()[k]:.4g}")
        half = 0.5 * (m.yhi - m.ylo)
        sup = float(np.max(np.abs(m(X.ravel(), Y.ravel()))))
        report[f"cond2_{name}"] = (sup, half)
        if sup >= 0.5 * half:
            raise PairConditionError(
                "cond2", f"sup|{name}2| = {sup:.4g} >= R/2 = {0.5 * half:.4g}")
    Z.slice_pair(slice_degree)   # raises with the named condition on failure
    Z.cond_report = report
    return Z


def embed_iota(pair, rect_half_height=None, ny=2):
    """The diagonal embedding: A = (eta, eta), B = (xi, xi), y-independent."""
    if rect_half_height is None:
        sup = max(np.max(np.abs(pair.eta(np.linspace(0.0, pair.xi0, 50)))),
                  np.max(np.abs(pair.xi(np.linspace(pair.eta0, 0.0, 50)))))
        rect_half_height = 2.2 * float(sup)
    R = float(rect_half_height)

    def lift(m):
        c = np.zeros((len(m.coeffs), ny + 1))
        c[:, 0] = m.coeffs
        return fs.ChebMap2D(c, m.lo, m.hi, -R, R, m.fit_residual)

    eta2, xi2 = lift(pair.eta), lift(pair.xi)
    return make_pair_2d(eta2, eta2, xi2, xi2,
                        delta=0.1 * abs(pair.eta0),
                        meta=dict(pair.meta, embedded=True))


# ---------------------------------------------------------------------------
# index surgery


def hat_index_surgery(index_s, index_t):
    """Split the prefix map (eta^2 or eta∘xi) off the level-n words.

    Returns (s_hat, t_hat, kind) with kind in {"eta2", "etaxi"} so that
    zeta^{s} = phi0 ∘ zeta^{s_hat} with phi0 = eta∘f, f = eta or xi
    (one commutation swap is used when the word ends in xi-letters).
    """
    s_hat, kind_s = _strip_prefix_map(index_s)
    t_hat, kind_t = _strip_prefix_map(index_t)
    if kind_s != kind_t:
        raise IndexError_(f"inconsistent prefix kinds {kind_s} / {kind_t}")
    return s_hat, t_hat, kind_s


def _strip_prefix_map(word):
    letters = list(word.letters)
    b_tail = 0
    while letters and letters[-1] == XI:
        b_tail += 1
        letters.pop()
    if not letters or letters[-1] != ETA:
        raise IndexError_("malformed index: final eta-power is zero")
    run = 0
    while letters and letters[-1] == ETA:
        run += 1
        letters.pop()
    if run >= 2:
        kind = "eta2"
        rest = letters + [ETA] * (run - 2) + [XI] * b_tail
    else:
        kind = "etaxi"
        if b_tail >= 1:
            rest = letters + [XI] * (b_tail - 1)
        else:
            if not letters or letters[-1] != XI:
                raise IndexError_("no xi available for the eta∘xi prefix")
            rest = letters[:-1]
    return pr.MultiIndex.from_letters(tuple(rest)), kind


def prefix_map_1d(pair, kind):
    def phi(x):
        return pair.eta(pair.eta(x)) if kind == "eta2" else pair.eta(pair.xi(x))
    return phi


def _monotone_branch(m, grid=257, degree=24):
    """Restriction of a 1D map to its longest strictly increasing run."""
    xs = np.linspace(m.lo, m.hi, grid)
    inc = np.diff(m(xs)) > 0.0
    best = (0, 0, 0)
    start = None
    for i, up in enumerate(np.append(inc, False)):
        if up and start is None:
            start = i
        elif not up and start is not None:
            if i - start > best[0]:
                best = (i - start, start, i)
            start = None
    if best[0] >= grid - 2:
        return m
    length, i0, i1 = best
    if length < 8:
        return m
    return fs.refit(m, degree, (float(xs[i0]), float(xs[i1])))


def graph_values(Z, xs, depth=4):
    """y-coordinates of the invariant graph over positions xs.

    Solves the backward chain through A: u_{j+1} = Ax^{-1}(u_j) on the
    graph, Y(u_j) = Ay(u_{j+1}, Y(u_{j+1})), truncating Y = 0 at `depth`
    (each level gains a factor of the tube width). Exactly 0 on
    y-independent pairs.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    # invert on the longest increasing branch only: the dissipative dip
    # inside the critical zone makes raw slices non-monotone at the tube
    # scale, and branch ambiguity there costs no more than O(tube^2)
    ax_slice = _monotone_branch(Z.ax.slice_y0())
    bx_slice = _monotone_branch(Z.bx.slice_y0())
    # positions alternate predecessors: below the overlap of the two
    # image intervals back through A, above through B
    thr = 0.5 * (ax_slice(ax_slice.hi) + bx_slice(bx_slice.lo))

    a_img = (float(ax_slice(ax_slice.lo)), float(ax_slice(ax_slice.hi)))
    b_img = (float(bx_slice(bx_slice.lo)), float(bx_slice(bx_slice.hi)))

    def back(values):
        # clamp marginal overshoots into the invertible image: the branch
        # truncation near the critical dip costs at most O(tube^2) here
        out = np.empty_like(values)
        use_a = values <= thr
        for i, t in enumerate(values):
            m, img = (ax_slice, a_img) if use_a[i] else (bx_slice, b_img)
            t = min(max(float(t), img[0]), img[1])
            out[i] = fs.invert_pointwise(m, t, slack=0.05)
        return out, use_a

    def fwd_y(us_level, prev_ys, used_a):
        ya = Z.ay(us_level, prev_ys)
        yb = Z.by(us_level, prev_ys)
        return np.where(used_a, ya, yb)

    try:
        us = [xs]
        letters = []
        for _ in range(depth):
            prev, used_a = back(us[-1])
            us.append(prev)
            letters.append(used_a)
        ys = np.zeros_like(xs)
        for j in range(depth, 0, -1):
            ys = fwd_y(us[j], ys, letters[j - 1])
        return ys
    except Exception:
        return np.zeros_like(xs)


def graph_height(Z, depth=4):
    """y-coordinate of the invariant graph over the critical position."""
    return float(graph_values(Z, np.array([0.0]), depth)[0])


def heights_by_words_2d(Z, max_depth, r_cap=2000):
    """Heights of the 2D word dynamics started on the invariant graph.

    The 2D words inherit exact commutation from the underlying map, so
    this stays coherent far deeper than the y=0 slice words, whose defect
    grows like eps x word length. The base point sits on the attractor
    graph over the critical position (the track the coordinate change
    uses); crossing is tracked on the first coordinate.
    """
    heights = []
    y0 = Z.meta.get("graph_y0")
    if y0 is None:
        y0 = graph_height(Z)
    s = pr.MultiIndex([(1, 0)])
    t = pr.MultiIndex([(0, 1)])
    for _ in range(max_depth):
        try:
            x, y = Z.apply_word(t, 0.0, y0)
            sgn = 1.0 if x > 0.0 else -1.0
            r = 0
            prev = abs(float(x))
            while True:
                x, y = Z.apply_word(s, x, y)
                if float(x) * sgn < 0.0:
                    break
                if abs(float(x)) >= prev - 1e-14:
                    return heights + [math.inf]
                prev = abs(float(x))
                r += 1
                if r > r_cap:
                    return heights + [math.inf]
            if r == 0:
                return heights
        except Exception:
            return heights
        heights.append(r)
        s_rep = pr.MultiIndex.from_letters(s.letters * r)
        s, t = pr.index_compose(t, s_rep), s
    return heights


# ---------------------------------------------------------------------------
# the coordinate change H


class TransformH:
    """H(x, y) = (ax(x, y), T(g^{-1}(y))) and its inverse.

    The scalar second-coordinate change is assembled on the dynamical
    track (x, nu(x)) of points entering the prefix map F: g is the
    second component of F along the track, T the first component of
    A∘F along it, both fitted as 1D series and inverted by safeguarded
    Newton. On a y-independent pair the composite reduces exactly to
    eta, and in general it matches the first output component to second
    order in the tube width, which is what kills the y-dependence.
    """

    def __init__(self, Z, g, T, validation_residual, provenance):
        self.Z = Z
        self.g = g
        self.T = T
        self.validation_residual = validation_residual
        self.provenance = provenance

    def second(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return self.T(fs.invert_many(self.g, y, slack=0.05))

    def second_inv(self, Y):
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        return self.g(fs.invert_many(self.T, Y, slack=0.05))

    def forward(self, x, y):
        return self.Z.ax(x, y), self.second(y)

    def inverse(self, X, Y):
        X = np.atleast_1d(np.asarray(X, dtype=float))
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        v = self.second_inv(Y)
        slice_eta = self.provenance["slice_eta"]
        guess = np.clip(fs.invert_many(slice_eta, X, slack=0.02),
                        self.Z.ax.xlo, self.Z.ax.xhi)
        u = fs.invert_x_2d(self.Z.ax, X, v, guess)
        return u, v

    def jacobian_norms(self, xs, ys, h=1e-6):
        """Sampled sup operator norms of DH over the given points."""
        out = []
        for x, y in zip(np.ravel(xs), np.ravel(ys)):
            fx1, fy1 = self.forward(x + h, y)
            fx0, fy0 = self.forward(x - h, y)
            gx1, gy1 = self.forward(x, y + h)
            gx0, gy0 = self.forward(x, y - h)
            J = np.array([[float(fx1[0] - fx0[0]), float(gx1[0] - gx0[0])],
                          [float(fy1[0] - fy0[0]), float(gy1[0] - gy0[0])]]) / (2.0 * h)
            out.append(float(np.linalg.norm(J, 2)))
        return np.array(out)


def _track_T(Z, Fx, Fy, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nu = graph_values(Z, x)
    return Z.ax(Fx(x, nu), Fy(x, nu))


def build_transform_h(Z, n, heights=None, r_out=DEFAULT_R_OUT, validate=True,
                      track="slice"):
    """Construct H for the n-th pre-renormalization of Z.

    The usable y-extent of the scaled rectangles is limited by the range
    of the track map T; the achieved half-height (at most |Lambda_n|
    r_out) is recorded as provenance["y_span"]. An empty coverage means
    n is too small and raises TransformSingularError.
    """
    sl = Z.slice_pair(mono_floor=math.inf)
    if heights is None:
        found = heights_by_words_2d(Z, n)
        if len(found) < n or any(math.isinf(t) for t in found):
            raise NotRenormalizableError(
                f"pair not reliably {n}-times renormalizable (got {found})")
        heights = [int(t) for t in found[:n]]
    s_n, t_n = rn.evolve_words(heights)
    s_hat, t_hat, kind = hat_index_surgery(s_n, t_n)
    Fx, Fy = (Z.ax, Z.ay) if kind == "eta2" else (Z.bx, Z.by)
    y0g = Z.meta.get("graph_y0")
    if y0g is None:
        y0g = graph_height(Z)
    lam_n = float(Z.apply_word(t_n, 0.0, y0g)[0])
    y_request = abs(lam_n) * r_out

    # track section: positions reachable backward through A (the graph
    # solver inverts the first component of A)
    Lx_slice = Z.ax.slice_y0()
    sec_lo, sec_hi = sorted((Lx_slice(Lx_slice.lo), Lx_slice(Lx_slice.hi)))
    span = sec_hi - sec_lo
    xlo = max(Fx.xlo, sec_lo + 1e-9 * span)
    xhi = min(Fx.xhi, sec_hi - 1e-9 * span)
    xs = np.linspace(xlo, xhi, 257)
    try:
        nu = graph_values(Z, xs) if track == "graph" else np.zeros_like(xs)
        gv = Fy(xs, nu)
        tv = Z.ax(Fx(xs, nu), Fy(xs, nu))
    except Exception as exc:
        raise TransformSingularError(f"track construction failed: {exc}") from exc
    # pick the monotone-in-g run whose T-values straddle 0; runs split
    # at sign changes of dg (the dissipative dip excludes itself)
    dg = np.diff(gv)
    runs = []
    start = 0
    for i in range(1, len(dg)):
        if dg[i] * dg[i - 1] < 0.0:
            runs.append((start, i))
            start = i
    runs.append((start, len(dg)))
    best = None
    for a, b in runs:
        seg = tv[a:b + 1]
        cover = min(-float(np.min(seg)), float(np.max(seg)))
        if cover > 0.0 and (best is None or cover > best[0]):
            best = (cover, a, b)
    if best is None:
        raise TransformSingularError(
            f"track output range [{tv.min():.4g}, {tv.max():.4g}] does not "
            "straddle 0; increase n")
    cover, a, b = best
    y_span = min(y_request, 0.92 * cover)
    # pad freely at window ends, but never across an interior flip
    step_sz = (xs[-1] - xs[0]) / (len(xs) - 1)
    pad = 0.02 * (xs[b] - xs[a])
    lo_pad = pad if a == 0 else 0.25 * step_sz
    hi_pad = pad if b == len(xs) - 1 else 0.25 * step_sz
    x_run = (max(float(xs[a]) - lo_pad, xlo), min(float(xs[b]) + hi_pad, xhi))
    if track == "graph":
        g = fs.fit_from_samples(
            lambda x: Fy(np.atleast_1d(x), graph_values(Z, x)), x_run, 24)
        T = fs.fit_from_samples(
            lambda x: _track_T(Z, Fx, Fy, x), x_run, 24)
    else:
        g = fs.fit_from_samples(
            lambda x: Fy(np.atleast_1d(x), np.zeros(np.shape(np.atleast_1d(x)))),
            x_run, 24)
        T = fs.fit_from_samples(
            lambda x: Z.ax(Fx(np.atleast_1d(x), 0.0 * np.atleast_1d(x)),
                           Fy(np.atleast_1d(x), 0.0 * np.atleast_1d(x))),
            x_run, 24)
    for name, m in (("g", g), ("T", T)):
        dm = np.diff(m(np.linspace(m.lo, m.hi, 100)))
        if not (np.all(dm > 0.0) or np.all(dm < 0.0)):
            raise TransformSingularError(f"track map {name} not monotone")
    prov = {"kind": kind, "n": n, "heights": heights, "s_hat": s_hat,
            "t_hat": t_hat, "s_n": s_n, "t_n": t_n, "lam_n": lam_n,
            "y_span": y_span, "clipped": y_span < y_request,
            "slice_eta": sl.eta, "x_guess": 0.5 * (sl.eta.lo + sl.eta.hi)}
    H = TransformH(Z, g, T, math.nan, prov)
    if validate:
        xs = np.linspace(lam_n * 0.02, lam_n * 0.98, 20)
        ys = np.linspace(-0.9 * y_span, 0.9 * y_span, 5)
        X, Y = np.meshgrid(xs, ys)
        u, v = H.inverse(X.ravel(), Y.ravel())
        X2, Y2 = H.forward(u, v)
        res = float(max(np.max(np.abs(X2 - X.ravel())), np.max(np.abs(Y2 - Y.ravel()))))
        H.validation_residual = res
        if res > 1e-8:
            raise TransformInaccurateError(
                f"H round-trip residual {res:.3e}", residual=res)
    return H


# ---------------------------------------------------------------------------
# pre-renormalization and renormalization


@dataclass
class Renorm2DStep:
    result: Pair2D
    ell: float
    n: int
    kind: str
    metrics: dict
    quintuple: object = None
    projected: bool = False


def _composite(Z, H, which):
    """The pre-renormalized component map (pointwise evaluator)."""
    kind = H.provenance["kind"]
    word = H.provenance["s_hat"] if which == "A" else H.provenance["t_hat"]

    def ev(X, Y):
        u, v = H.inverse(X, Y)
        x, y = Z.apply_a(u, v)
        x, y = Z.apply_word(word, x, y)
        x, y = (Z.apply_a(x, y) if kind == "eta2" else Z.apply_b(x, y))
        return H.forward(x, y)

    return ev


def pre_renormalize_2d(Z, n, degrees=None, r_out=DEFAULT_R_OUT,
                       eps_tube=DEFAULT_EPS_TUBE):
    """Unrescaled n-th pre-renormalization on the Lambda_n rectangles.

    Returns a Renorm2DStep whose result is fitted on the scaled
    rectangles; metrics carry the y-dependence norms (tau, pi), component
    discrepancies, and the rescale factor ell_n for the follow-up.
    """
    return _renorm_2d_impl(Z, n, degrees, r_out, eps_tube, rescale=False,
                           project="never")


def renormalize_2d(Z, n=None, degrees=None, r_out=DEFAULT_R_OUT,
                   eps_tube=DEFAULT_EPS_TUBE, project="auto"):
    """Full order-n renormalization: prerenormalize, rescale by ell_n,
    project onto the order-3 commutation conditions (skipped automatically
    for pairs whose slice commutes exactly, where it is the identity)."""
    if n is None:
        n = default_renorm_depth(Z)
    return _renorm_2d_impl(Z, n, degrees, r_out, eps_tube, rescale=True,
                           project=project)


def default_renorm_depth(Z, threshold=0.05, max_n=20):
    """Smallest n with |Lambda_n| below the threshold, capped two short
    of the measured word-coherence depth."""
    scale = abs(float(Z.bx(0.0, 0.0)))
    heights = [int(t) for t in heights_by_words_2d(Z, max_n)
               if not math.isinf(t)]
    cap = max(len(heights) - 2, 3)
    for k in range(1, min(len(heights), cap) + 1):
        s_n, t_n = rn.evolve_words(heights[:k])
        lam = abs(float(Z.apply_word(t_n, 0.0, 0.0)[0])) / scale
        if (lam < threshold and k >= 3) or k == cap:
            return k
    raise NotRenormalizableError(
        f"no usable depth <= {len(heights)} (threshold {threshold})")


def _renorm_2d_impl(Z, n, degrees, r_out, eps_tube, rescale, project):
    if Z.ydep_norm > eps_tube:
        raise ProjectionDivergedError(
            f"pair outside the eps-tube: y-dependence {Z.ydep_norm:.3g} "
            f"> {eps_tube:.3g}")
    if degrees is None:
        degrees = (Z.ax.degrees[0], Z.ax.degrees[1])
    H = build_transform_h(Z, n, r_out=r_out)
    lam_n = H.provenance["lam_n"]
    y_span = H.provenance["y_span"]
    comp_a = _composite(Z, H, "A")
    comp_b = _composite(Z, H, "B")
    ax0, ay0 = comp_a(np.array([0.0]), np.array([0.0]))
    bx0, by0 = comp_b(np.array([0.0]), np.array([0.0]))
    ell = float(bx0[0])
    x_left = float(ax0[0]) / ell
    if not x_left < 0.0 < 1.0:
        raise NotRenormalizableError(f"renormalized eta(0) = {x_left:.4g} >= 0")

    def fit_pair(comp, rect):
        xlo, xhi, ylo, yhi = rect
        nx, ny = degrees
        gx = 0.5 * (xlo + xhi) + 0.5 * (xhi - xlo) * fs._nodes(GRID_FACTOR * (nx + 1))
        gy = 0.5 * (ylo + yhi) + 0.5 * (yhi - ylo) * fs._nodes(GRID_FACTOR * (ny + 1))
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        if rescale:
            VX, VY = comp(ell * X.ravel(), ell * Y.ravel())
            VX, VY = VX / ell, VY / ell
        else:
            VX, VY = comp(X.ravel(), Y.ravel())
        out = []
        for vals in (VX, VY):
            big = vals.reshape(X.shape)
            cf = np.apply_along_axis(fs._fit_values, 0, big)
            cf = np.apply_along_axis(fs._fit_values, 1, cf)
            m = fs.ChebMap2D(cf[:nx + 1, :ny + 1], xlo, xhi, ylo, yhi)
            m.fit_residual = float(np.max(np.abs(
                m(X.ravel(), Y.ravel()) - vals)))
            out.append(m)
        return out

    if rescale:
        r_eff = 0.98 * y_span / abs(ell)
        rect_a = (0.0, 1.0, -r_eff, r_eff)
        rect_b = (x_left, 0.0, -r_eff, r_eff)
    else:
        lo_a, hi_a = sorted((0.0, lam_n))
        lo_b, hi_b = sorted((0.0, float(ax0[0])))
        span = 0.98 * y_span
        rect_a = (lo_a, hi_a, -span, span)
        rect_b = (lo_b, hi_b, -span, span)
    axm, aym = fit_pair(comp_a, rect_a)
    bxm, bym = fit_pair(comp_b, rect_b)
    if rescale:
        bxm.coeffs[0, 0] += 1.0 - bxm(0.0, 0.0)   # pin the normalization
    metrics = {
        "ell": ell,
        "lam_n": lam_n,
        "tauNorms": [axm.y_dependence(), aym.y_dependence()],
        "piNorms": [bxm.y_dependence(), bym.y_dependence()],
        "inYdep": Z.ydep_norm,
        "inDiscrepancy": Z.discrepancy,
        "transformResidual": H.validation_residual,
        "fitResiduals": [m.fit_residual for m in (axm, aym, bxm, bym)],
    }
    delta_out = 0.1 * abs(x_left) if rescale else Z.delta
    out = Pair2D(axm, aym, bxm, bym, delta_out,
                 meta={k: v for k, v in Z.meta.items() if k != "graph_y0"}
                 | {"depth2d": Z.meta.get("depth2d", 0) + 1})
    metrics["outYdep"] = out.ydep_norm
    metrics["outDiscrepancy"] = out.discrepancy
    metrics["outIotaDistance"] = out.iota_distance
    quint = None
    projected = False
    if rescale and project != "never":
        # on commuting pairs the projection is the identity; at the
        # fit-noise level its response only tracks representation noise,
        # so it engages above the honest derivative-noise floor
        slice_defect = float(np.max(np.abs(pr.commutator_defect(
            out.slice_pair(mono_floor=math.inf)))))
        if project == "always" or (project == "auto" and slice_defect > 1e-6):
            out, quint = project_ac_2d(out)
            projected = True
            metrics["outYdep"] = out.ydep_norm
            metrics["outDiscrepancy"] = out.discrepancy
            metrics["outIotaDistance"] = out.iota_distance
    return Renorm2DStep(out, ell, n, H.provenance["kind"], metrics, quint,
                        projected)


# ---------------------------------------------------------------------------
# the 2D projection


def _poly_eval(coeffs, x, order=0):
    p = np.polynomial.Polynomial(coeffs)
    return p.deriv(order)(x) if order else p(x)


def _comp_derivs_2d(fmap, fpoly_u, u, v, uder, vder):
    """Derivatives 0..3 at 0 of x -> fmap(u(x), v(x)) + fpoly(u(x)).

    uder/vder are (u(0), u'(0), u''(0), u'''(0)) etc.; partials of fmap are
    taken at (u, v).
    """
    u0, u1, u2, u3 = uder
    v0, v1, v2, v3 = vder
    f = {}
    for i in range(4):
        for j in range(4 - i):
            f[(i, j)] = fmap(u, v, dx=i, dy=j)
    pu = [_poly_eval(fpoly_u, u, k) for k in range(4)]
    d0 = f[(0, 0)] + pu[0]
    fu = f[(1, 0)] + pu[1]
    fv = f[(0, 1)]
    d1 = fu * u1 + fv * v1
    fuu = f[(2, 0)] + pu[2]
    fuv = f[(1, 1)]
    fvv = f[(0, 2)]
    d2 = fuu * u1**2 + 2 * fuv * u1 * v1 + fvv * v1**2 + fu * u2 + fv * v2
    fuuu = f[(3, 0)] + pu[3]
    fuuv = f[(2, 1)]
    fuvv = f[(1, 2)]
    fvvv = f[(0, 3)]
    d3 = (fuuu * u1**3 + 3 * fuuv * u1**2 * v1 + 3 * fuvv * u1 * v1**2
          + fvvv * v1**3
          + 3 * (fuu * u1 * u2 + fuv * (u1 * v2 + u2 * v1) + fvv * v1 * v2)
          + fu * u3 + fv * v3)
    return np.array([d0, d1, d2, d3])


def _conditions_2d(Z, params):
    """Commutator derivatives 0..3 at 0 along y=0 and the normalization."""
    a, b, d, e, c = params
    pa = [0.0, 0.0, 0.0, 0.0, a, 0.0, b]
    pb = [c, d, e]
    bx0 = [Z.bx(0.0, 0.0, dx=k) + _poly_eval(pb, 0.0, k) for k in range(4)]
    by0 = [Z.by(0.0, 0.0, dx=k) + _poly_eval(pb, 0.0, k) for k in range(4)]
    ax0 = [Z.ax(0.0, 0.0, dx=k) + _poly_eval(pa, 0.0, k) for k in range(4)]
    ay0 = [Z.ay(0.0, 0.0, dx=k) + _poly_eval(pa, 0.0, k) for k in range(4)]
    lhs = _comp_derivs_2d(Z.ax, pa, bx0[0], by0[0], bx0, by0)

    def bx_corr(u, v, dx=0, dy=0):
        val = Z.bx(u, v, dx=dx, dy=dy)
        if dy == 0:
            val = val + _poly_eval(pb, u, dx)
        return val

    rhs = _comp_derivs_2d(bx_corr, [0.0], ax0[0], ay0[0], ax0, ay0)
    F = np.empty(5)
    F[:4] = lhs - rhs
    F[4] = bx0[0] - 1.0
    return F


def project_ac_2d(Z, max_newton=30, det_floor=1e-8):
    """Correct both components of A by a x^4 + b x^6 and of B by
    c + d x + e x^2 so the first-component commutator along y=0 vanishes
    to order three and pi1 B(0,0) = 1.

    Newton iterates the exact tensor conditions with the slice's analytic
    5x5 matrix (the y-coupling corrections are second order in the tube
    width); a finite-difference Jacobian is the fallback.
    """
    sl = Z.slice_pair(mono_floor=math.inf)
    det = 4.0 * sl.eta(sl.xi0, 1) ** 2 * sl.xi(0.0, 3)
    if abs(det) < det_floor:
        raise DegenerateProjectionError(
            f"2D projection degenerate (leading det={det:.3e})")
    params = np.zeros(5)
    F = _conditions_2d(Z, params)
    if np.max(np.abs(F[:4])) > 0.2:
        raise ProjectionDivergedError(
            f"input too far from commuting: defect {np.max(np.abs(F[:4])):.3g}")
    tol = hy.COND_TOL
    used_fd = False
    for it in range(max_newton):
        if np.all(np.abs(F) < tol):
            break
        if not used_fd:
            J = hy._jacobian(sl, params)
        else:
            J = _fd_jacobian_2d(Z, params)
        step = np.linalg.solve(J, -F)
        base = np.max(np.abs(F / tol))
        scale = 1.0
        for _ in range(8):
            cand = params + scale * step
            Fc = _conditions_2d(Z, cand)
            if np.max(np.abs(Fc / tol)) < base:
                params, F = cand, Fc
                break
            scale *= 0.5
        else:
            if used_fd:
                raise ProjectionDivergedError("2D projection line search failed")
            used_fd = True
    else:
        raise ProjectionDivergedError(
            f"2D projection: no convergence in {max_newton} steps")
    a, b, d, e, c = params

    def corrected(m, poly):
        extra1d = fs.poly_to_cheb(poly, m.xlo, m.xhi)
        cf = m.coeffs.copy()
        ncol = max(len(extra1d), cf.shape[0])
        if ncol > cf.shape[0]:
            cf = np.vstack([cf, np.zeros((ncol - cf.shape[0], cf.shape[1]))])
        cf[:len(extra1d), 0] += extra1d
        return fs.ChebMap2D(cf, m.xlo, m.xhi, m.ylo, m.yhi, m.fit_residual)

    pa = [0.0, 0.0, 0.0, 0.0, a, 0.0, b]
    pb = [c, d, e]
    out = Pair2D(corrected(Z.ax, pa), corrected(Z.ay, pa),
                 corrected(Z.bx, pb), corrected(Z.by, pb),
                 Z.delta, meta=dict(Z.meta, projected2d=True))
    return out, hy.Quintuple(a, b, d, e, c, float(np.max(np.abs(F))))


def _fd_jacobian_2d(Z, params, h=1e-8):
    J = np.zeros((5, 5))
    for k in range(5):
        dp = np.zeros(5)
        dp[k] = h
        J[:, k] = (_conditions_2d(Z, params + dp)
                   - _conditions_2d(Z, params - dp)) / (2.0 * h)
    return J


# ---------------------------------------------------------------------------
# 2D spectrum


def _chart_2d(Z, ref=None):
    """Coefficient chart; with `ref`, the B-components are refit onto the
    reference rectangle so the chart has a probe-independent domain (the
    moving left endpoint otherwise leaks into the coefficients)."""
    bx, by = Z.bx, Z.by
    if ref is not None and abs(bx.xlo - ref.bx.xlo) > 0.0:
        nx, ny = ref.bx.degrees
        rect = ref.bx.rect
        bx = fs.fit_from_samples_2d(lambda x, y: Z.bx(x, y), rect, (nx, ny))
        by = fs.fit_from_samples_2d(lambda x, y: Z.by(x, y), rect, (nx, ny))
    return np.concatenate([Z.ax.coeffs.ravel(), Z.ay.coeffs.ravel(),
                           bx.coeffs.ravel(), by.coeffs.ravel()])


def _pair_from_chart_2d(vec, template):
    shapes = [template.ax.coeffs.shape] * 2 + [template.bx.coeffs.shape] * 2
    rects = [template.ax.rect, template.ay.rect, template.bx.rect,
             template.by.rect]
    maps = []
    k = 0
    for shape, rect in zip(shapes, rects):
        size = shape[0] * shape[1]
        maps.append(fs.ChebMap2D(np.array(vec[k:k + size]).reshape(shape),
                                 *rect))
        k += size
    ax, ay, bx, by = maps
    # retraction: slice criticality of the first components and the
    # normalization of bx (identity on the invariant set)
    for m in (ax, ay):
        d1 = m(0.0, 0.0, dx=1)
        d2 = m(0.0, 0.0, dx=2)
        corr = fs.poly_to_cheb([0.0, d1, 0.5 * d2], m.xlo, m.xhi)
        m.coeffs[:len(corr), 0] -= corr
    for m in (bx, by):
        d1 = m(0.0, 0.0, dx=1)
        d2 = m(0.0, 0.0, dx=2)
        corr = fs.poly_to_cheb([0.0, d1, 0.5 * d2], m.xlo, m.xhi)
        m.coeffs[:len(corr), 0] -= corr
    bx.coeffs[0, 0] += 1.0 - bx(0.0, 0.0)
    return Pair2D(ax, ay, bx, by, template.delta, dict(template.meta))


def _chart_weights_2d(template, k0=5.0):
    out = []
    for m in (template.ax, template.ay, template.bx, template.by):
        nx, ny = m.coeffs.shape
        wx = 1.0 / (1.0 + (np.arange(nx) / k0) ** 6)
        wy = 1.0 / (1.0 + (np.arange(ny) / 2.0) ** 4)
        out.append(np.outer(wx, wy).ravel())
    return np.concatenate(out)


def spectrum_2d(zstar, n=6, degrees=(20, 3), h=1e-6, r_out=DEFAULT_R_OUT):
    """Spectrum of the linearized order-n 2D operator at iota(zstar).

    The chart ranges over all four coefficient tensors (criticality and
    normalization retracted); all but a bounded number of eigenvalues
    must fall inside the unit disk, with the expanding one matching the
    n-th power of the 1D unstable eigenvalue.
    """
    sl40 = zstar
    slice_small = hy.refit_pair(sl40, degrees[0])
    Z0 = embed_iota(slice_small, ny=degrees[1])

    def op(vec):
        Zp = _pair_from_chart_2d(vec, Z0)
        step = renormalize_2d(Zp, n=n, degrees=degrees, r_out=r_out,
                              project="auto")
        return _chart_2d(step.result, ref=Z0)

    c0 = _chart_2d(Z0)
    w = _chart_weights_2d(Z0)
    dim = len(c0)
    J = np.zeros((dim, dim))
    failed = []
    for k in range(dim):
        dv = np.zeros(dim)
        dv[k] = h * w[k]
        try:
            gp = op(c0 + dv)
            gm = op(c0 - dv)
            J[:, k] = (gp - gm) / (2.0 * h * w[k]) * w[k] / w
        except Exception:
            failed.append(k)
    eig = np.linalg.eigvals(J)
    eig = eig[np.argsort(-np.abs(eig))]
    outside = int(np.sum(np.abs(eig) >= 1.0))
    return hy.SpectrumReport(eig, outside, h, degrees, math.nan,
                             tuple(failed)), n
