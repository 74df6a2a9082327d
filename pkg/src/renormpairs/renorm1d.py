"""Renormalization of pairs, dynamical partitions, and expansion diagnostics.

One renormalization step: iterate eta over xi(0) until the orbit crosses 0
(the height r), form the shorter pair (eta^r∘xi, eta), and rescale by
lambda = eta(0) < 0, which flips orientation and pins xi(0) = 1. The
partition machinery enumerates the composition words preceding the level-n
words; the cone/monotonicity/expansion probes quantify the expanding
behaviour of the operator along positive perturbation fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contfrac
from . import funcspace as fs
from . import pairs as pr
from .errors import NotRenormalizableError, PartitionDefectError

S0 = pr.MultiIndex([(1, 0)])
T0 = pr.MultiIndex([(0, 1)])


@dataclass
class RenormStep:
    r: int
    lam: float                    # rescale factor, eta(0) of the input
    lam_zeta: float               # eta^r(xi(0)) > 0
    pre_eta: fs.ChebMap1D         # eta^r ∘ xi on [eta(0), 0]
    pre_xi: fs.ChebMap1D          # eta restricted to [0, lam_zeta]
    result: pr.Pair               # normalized renormalization
    index_s: pr.MultiIndex        # word of the unrescaled new eta
    index_t: pr.MultiIndex        # word of the unrescaled new xi
    boundary_hit: bool = False
    pre_commutator: np.ndarray | None = None


def evolve_words(heights):
    """Words (s_n, t_n) of the n-th pre-renormalization from the heights."""
    s, t = S0, T0
    for r in heights:
        s_rep = pr.MultiIndex.from_letters(s.letters * int(r))
        s, t = pr.index_compose(t, s_rep), s
    return s, t


def pre_renormalize(pair, degree=None):
    """One unrescaled step; the result pair in RenormStep is normalized,
    the raw maps are pre_eta/pre_xi."""
    return renormalize(pair, degree=degree)


def renormalize(pair, degree=None):
    """One full renormalization step with metadata."""
    step = pr._renorm_once(pair, degree=degree)
    s1, t1 = evolve_words([step["r"]])
    pre_def = _pre_commutator(step["pre_eta"], step["pre_xi"])
    return RenormStep(step["r"], step["lam"], step["lam_zeta"],
                      step["pre_eta"], step["pre_xi"], step["result"],
                      s1, t1, step["boundary_hit"], pre_def)


def _pre_commutator(pre_eta, pre_xi):
    a = pr._chain_derivs(pr._derivs_at(pre_eta, pre_xi(0.0)),
                         pr._derivs_at(pre_xi, 0.0))
    b = pr._chain_derivs(pr._derivs_at(pre_xi, pre_eta(0.0)),
                         pr._derivs_at(pre_eta, 0.0))
    return np.array(a) - np.array(b)


@dataclass
class RenormOrbit:
    steps: list
    truncated: bool = False
    reason: str = ""

    @property
    def pairs(self):
        return [s.result for s in self.steps]

    @property
    def heights(self):
        return [s.r for s in self.steps]


def renormalize_n(pair, n, degree=None):
    """Orbit of n renormalizations; stops early with a truncation flag."""
    steps = []
    cur = pair
    for _ in range(int(n)):
        try:
            step = renormalize(cur, degree=degree)
        except Exception as exc:  # reliability loss downstream of fitting
            if not steps:
                raise
            return RenormOrbit(steps, truncated=True, reason=str(exc))
        steps.append(step)
        cur = step.result
    return RenormOrbit(steps)


# ---------------------------------------------------------------------------
# dynamical partitions


@dataclass
class PartitionElement:
    word: pr.MultiIndex
    lo: float
    hi: float
    kind: str            # "I" (image of I_n) or "J" (image of J_n)

    @property
    def diameter(self):
        return self.hi - self.lo


@dataclass
class PartitionAtlas:
    level: int
    elements: list
    cover_residual: float
    overlap_residual: float
    adjacency_ratios: tuple      # (min, max) of adjacent length ratios
    bounds: np.ndarray = field(default=None)

    @property
    def max_diameter(self):
        return max(e.diameter for e in self.elements)

    def to_csv(self):
        lines = ["word,lo,hi,kind,diameter,producer"]
        from . import __version__
        for e in self.elements:
            w = "".join("e" if l == pr.ETA else "x" for l in e.word.letters) or "id"
            lines.append(f"{w},{e.lo!r},{e.hi!r},{e.kind},{e.diameter!r},"
                         f"renormpairs {__version__}")
        return "\n".join(lines) + "\n"

    def to_svg(self, width=800, height=60):
        lo = min(e.lo for e in self.elements)
        hi = max(e.hi for e in self.elements)
        sx = width / (hi - lo)
        rows = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                f'height="{height}" viewBox="0 0 {width} {height}">']
        for e in self.elements:
            x = (e.lo - lo) * sx
            w = max(e.diameter * sx, 0.5)
            fill = "#4477aa" if e.kind == "I" else "#cc6677"
            rows.append(f'<rect x="{x:.2f}" y="10" width="{w:.2f}" height="40" '
                        f'fill="{fill}" stroke="white" stroke-width="0.5"/>')
        rows.append("</svg>")
        return "\n".join(rows) + "\n"


def dynamical_partition(pair, n, defect_tol=1e-8):
    """Level-n partition of [eta(0), xi(0)] by the word images of I_n, J_n.

    Validates the cover and interior disjointness and reports adjacent
    commensurability ratios; a gap or overlap above `defect_tol` raises.
    """
    rep = pr.rotation_number_heights(pair, n)
    if rep.truncated or len(rep.terms) < n or any(math.isinf(t) for t in rep.terms):
        raise NotRenormalizableError(f"pair is not reliably {n} times renormalizable")
    heights = [int(t) for t in rep.terms[:n]]
    s_n, t_n = evolve_words(heights)
    xi_n0 = pr.apply_word(pair, t_n, 0.0)
    eta_n0 = pr.apply_word(pair, s_n, 0.0)
    elements = []
    for base, word, kind in ((xi_n0, s_n, "I"), (eta_n0, t_n, "J")):
        ends = np.array([0.0, base])
        elements.append(PartitionElement(pr.EMPTY_INDEX, float(min(ends)),
                                         float(max(ends)), kind))
        letters = word.letters
        for j, ltr in enumerate(letters[:-1]):
            ends = pair.map(ltr)(ends)
            elements.append(PartitionElement(
                pr.MultiIndex.from_letters(letters[:j + 1]),
                float(np.min(ends)), float(np.max(ends)), kind))
    elements.sort(key=lambda e: e.lo)
    scale = pair.xi0 - pair.eta0
    gap = max(abs(elements[0].lo - pair.eta0), abs(elements[-1].hi - pair.xi0))
    overlap = 0.0
    ratios = []
    for a, b in zip(elements, elements[1:]):
        gap = max(gap, b.lo - a.hi)
        overlap = max(overlap, a.hi - b.lo)
        if b.diameter > 0:
            ratios.append(a.diameter / b.diameter)
    if gap > defect_tol * max(scale, 1.0):
        raise PartitionDefectError(f"cover gap {gap:.3e}", elements=elements)
    if overlap > defect_tol * max(scale, 1.0):
        raise PartitionDefectError(f"interior overlap {overlap:.3e}", elements=elements)
    bounds = np.unique(np.array([e.lo for e in elements] + [elements[-1].hi]))
    return PartitionAtlas(n, elements, gap, overlap,
                          (float(np.min(ratios)), float(np.max(ratios))),
                          bounds)


# ---------------------------------------------------------------------------
# cone field, monotonicity, expansion


def default_cone_field(pair, degree=12):
    """The polynomial field ((x(x-1)(x-eta0))^4, same), positive away from
    {0, 1, eta(0)} and vanishing to order >= 3 there; tangent to the
    critical-point and normalization constraints."""
    e0 = pair.eta0
    xs = np.linspace(e0, 1.0, 201)
    sup = np.max((xs * (xs - 1.0) * (xs - e0)) ** 4)

    def f(x):
        return (x * (x - 1.0) * (x - e0)) ** 4 / sup

    alpha = fs.fit_from_samples(f, (pair.eta.lo, pair.eta.hi), degree)
    beta = fs.fit_from_samples(f, (pair.xi.lo, pair.xi.hi), degree)
    return alpha, beta


def _word_eval_family(pair, v, word, xs, t):
    """zeta_t^word (xs) for the family (eta + t alpha, xi + t beta)."""
    alpha, beta = v
    vals = np.asarray(xs, dtype=float).copy()
    for ltr in word.letters:
        if ltr == pr.ETA:
            vals = pair.eta(vals) + t * alpha(vals)
        else:
            vals = pair.xi(vals) + t * beta(vals)
    return vals


@dataclass
class ConeReport:
    inf_derivative: float
    in_cone: bool
    step: float


def cone_probe(pair, v, h=1e-5, grid=200):
    """Directional derivative of the second pre-renormalization along v.

    Central differences in the family parameter with one Richardson
    refinement, minimized over a grid on I_2 ∪ J_2; in_cone when the
    infimum is positive.
    """
    rep = pr.rotation_number_heights(pair, 2)
    if len(rep.terms) < 2 or any(math.isinf(t) for t in rep.terms[:2]):
        raise NotRenormalizableError("cone probe needs two renormalizations")
    heights = [int(t) for t in rep.terms[:2]]
    s2, t2 = evolve_words(heights)
    xi_20 = pr.apply_word(pair, t2, 0.0)
    eta_20 = pr.apply_word(pair, s2, 0.0)
    half = grid // 2
    xs_i = np.linspace(min(0.0, xi_20), max(0.0, xi_20), half)
    xs_j = np.linspace(min(0.0, eta_20), max(0.0, eta_20), grid - half)
    # the monitored quantity is the eta-component zeta^{s_2}, whose analytic
    # extension covers both level-2 intervals
    xs = np.concatenate([xs_i, xs_j])

    def deriv_field(hh):
        plus = _word_eval_family(pair, v, s2, xs, hh)
        minus = _word_eval_family(pair, v, s2, xs, -hh)
        return (plus - minus) / (2.0 * hh)

    for attempt in range(2):
        try:
            d1 = deriv_field(h)
            d2 = deriv_field(0.5 * h)
            d = (4.0 * d2 - d1) / 3.0
            break
        except Exception:
            if attempt:
                raise
            h *= 0.5
    inf = float(np.min(d))
    return ConeReport(inf, inf > 0.0, h)


def perturbed_pair(pair, v, t, require_normalized=True):
    """The pair (eta + t alpha, xi + t beta) with coefficients added exactly."""
    alpha, beta = v
    ec = pair.eta.coeffs.copy()
    xc = pair.xi.coeffs.copy()
    ac = fs.fit_from_samples(lambda x: alpha(x), (pair.eta.lo, pair.eta.hi),
                             max(len(ec) - 1, 12)).coeffs
    bc = fs.fit_from_samples(lambda x: beta(x), (pair.xi.lo, pair.xi.hi),
                             max(len(xc) - 1, 12)).coeffs
    n = max(len(ec), len(ac))
    eta_c = np.zeros(n)
    eta_c[:len(ec)] += ec
    eta_c[:len(ac)] += t * ac
    n = max(len(xc), len(bc))
    xi_c = np.zeros(n)
    xi_c[:len(xc)] += xc
    xi_c[:len(bc)] += t * bc
    eta = fs.ChebMap1D(eta_c, pair.eta.lo, pair.eta.hi, pair.eta.fit_residual)
    xi = fs.ChebMap1D(xi_c, pair.xi.lo, pair.xi.hi, pair.xi.fit_residual)
    return pr.make_pair(eta, xi, require_normalized=require_normalized,
                        meta=dict(pair.meta, perturbed=t))


@dataclass
class MonotonicityReport:
    ts: np.ndarray
    values: np.ndarray
    brackets: np.ndarray
    nondecreasing: bool
    nonincreasing: bool
    strict_where_separated: bool

    @property
    def monotone(self):
        return self.nondecreasing or self.nonincreasing


def monotonicity_probe(pair, v, t_grid, depth=12):
    """Heights-based rotation numbers along the family zeta + t v.

    Two values count as ordered only when their convergent brackets
    separate. In this package's orientation (xi(0) = 1 > 0 > eta(0)) a
    positive cone field pushes the rotation number *down*; the mirrored
    orientation reverses the sign, so the report carries both directions
    and a strictness flag for the pairs that separate.
    """
    ts = np.asarray(t_grid, dtype=float)
    vals, brs = [], []
    for t in ts:
        p = perturbed_pair(pair, v, float(t))
        rep = pr.rotation_number_heights(p, depth)
        vals.append(rep.value)
        brs.append(0.5 * rep.bracket)
    vals = np.array(vals)
    brs = np.array(brs)
    nondec = True
    noninc = True
    separated = []
    for i in range(len(ts) - 1):
        sep = brs[i] + brs[i + 1]
        if vals[i + 1] < vals[i] - sep:
            nondec = False
        if vals[i + 1] > vals[i] + sep:
            noninc = False
        if abs(vals[i + 1] - vals[i]) > sep:
            separated.append(i)
    strict = bool(separated) and all(
        abs(vals[i + 1] - vals[i]) > brs[i] + brs[i + 1] for i in separated)
    return MonotonicityReport(ts, vals, brs, nondec, noninc,
                              strict and len(ts) > 1)


def expansion_probe(pair, v, k, h=1e-6, degree=None):
    """Norms of the finite-difference image of v under 2j renormalizations.

    Returns the list ||D R^{2j} v|| for j = 1..k (sup distance of the two
    perturbed orbits over 2h) and the fitted per-double-step growth rate.
    """
    plus = perturbed_pair(pair, v, h)
    minus = perturbed_pair(pair, v, -h)
    norms = []
    for j in range(1, k + 1):
        for _ in range(2):
            plus = renormalize(plus, degree=degree).result
            minus = renormalize(minus, degree=degree).result
        norms.append(pair_distance_c0(plus, minus) / (2.0 * h))
    js = np.arange(1, k + 1)
    slope = np.polyfit(js, np.log(np.maximum(norms, 1e-300)), 1)[0]
    return norms, float(np.exp(slope))


def pair_distance_c0(p1, p2, grid=257):
    """Distance in the normalized chart (eta(0), eta, rescaled xi)."""
    xs = np.linspace(0.0, 1.0, grid)
    d0 = abs(p1.eta0 - p2.eta0)
    d1 = float(np.max(np.abs(p1.eta(xs) - p2.eta(xs))))
    x1 = p1.xi(p1.eta0 * xs) / p1.eta0
    x2 = p2.xi(p2.eta0 * xs) / p2.eta0
    d2 = float(np.max(np.abs(x1 - x2)))
    return max(d0, d1, d2)
