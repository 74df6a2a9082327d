"""(Almost) commuting pairs of interval maps and their word algebra.

A pair zeta = (eta, xi) holds eta on [0, xi(0)] and xi on [eta(0), 0],
orientation eta(0) < 0 < xi(0). Heights, two independent rotation-number
definitions, composition words with their partial order, and the rigid
(translation) model pairs all live here; the renormalization operator
itself is in `renorm1d`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import contfrac, kernels
from . import funcspace as fs
from .errors import (
    GlueInconsistencyError,
    HeightUnreliableError,
    IndexError_,
    NotRenormalizableError,
    PairConditionError,
    WordRangeError,
)

DEFAULT_TOL_CRIT = 1e-8
DEFAULT_C0 = 10.0
HEIGHT_CAP = 10**6
FIXED_POINT_SLACK = 1e-14
BOUNDARY_TOL = 1e-12

ETA, XI = 0, 1


class Pair:
    """A validated (almost) commuting pair; immutable by convention."""

    __slots__ = ("eta", "xi", "critical", "normalized", "meta")

    def __init__(self, eta, xi, critical, normalized, meta=None):
        self.eta = eta
        self.xi = xi
        self.critical = bool(critical)
        self.normalized = bool(normalized)
        self.meta = dict(meta or {})

    @property
    def eta0(self):
        return self.eta(0.0)

    @property
    def xi0(self):
        return self.xi(0.0)

    @property
    def degree(self):
        return max(self.eta.degree, self.xi.degree)

    def map(self, which):
        return self.eta if which == ETA else self.xi

    def to_record(self):
        return {
            "eta": self.eta.to_record(),
            "xi": self.xi.to_record(),
            "critical": self.critical,
            "normalized": self.normalized,
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, rec):
        return cls(fs.ChebMap1D.from_record(rec["eta"]),
                   fs.ChebMap1D.from_record(rec["xi"]),
                   rec["critical"], rec["normalized"], rec.get("meta"))

    def __repr__(self):
        return (f"Pair(eta0={self.eta0:.6g}, xi0={self.xi0:.6g}, "
                f"critical={self.critical}, normalized={self.normalized})")


def make_pair(eta, xi, require_critical=False, require_normalized=False,
              tol_crit=DEFAULT_TOL_CRIT, c0=DEFAULT_C0, meta=None,
              mono_floor=1e-12, interval_tol=1e-9):
    """Validate and assemble a Pair; failures name the violated condition.

    Conditions, in the order checked: (I) orientation and intervals,
    (III) xi(eta(0)) lands in eta's interval, (IV) both maps strictly
    increasing on their intervals, (V) cubic critical point at 0 when
    requested, plus the normalization xi(0)=1 and 1/(2 c0)<|eta(0)|<2 c0
    when requested.
    """
    eta0, xi0 = eta(0.0), xi(0.0)
    scale = max(abs(eta0), abs(xi0), 1.0)
    tol_iv = interval_tol * scale
    if not (eta0 < 0.0 < xi0):
        raise PairConditionError("(I)", f"need eta(0) < 0 < xi(0), got {eta0:.6g}, {xi0:.6g}")
    if abs(eta.lo) > tol_iv or abs(eta.hi - xi0) > tol_iv:
        raise PairConditionError("(I)", f"eta fitted on [{eta.lo}, {eta.hi}], expected [0, {xi0:.6g}]")
    if abs(xi.lo - eta0) > tol_iv or abs(xi.hi) > tol_iv:
        raise PairConditionError("(I)", f"xi fitted on [{xi.lo}, {xi.hi}], expected [{eta0:.6g}, 0]")
    v = xi(eta0)
    if not (-tol_iv <= v <= xi0 + tol_iv):
        raise PairConditionError("(III)", f"xi(eta(0)) = {v:.6g} outside [0, {xi0:.6g}]")
    for name, m in (("eta", eta), ("xi", xi)):
        xs = np.linspace(m.lo, m.hi, 129)
        # strict increase up to a floor; operator internals pass a looser
        # floor because projection corrections dip microscopically inside
        # the cubically flat zone at 0
        if np.any(np.diff(m(xs)) <= -mono_floor * scale):
            raise PairConditionError("(IV)", f"{name} not strictly increasing on its interval")
    d_eta = [eta(0.0, k) for k in (1, 2, 3)]
    d_xi = [xi(0.0, k) for k in (1, 2, 3)]
    critical = (abs(d_eta[0]) < tol_crit and abs(d_eta[1]) < tol_crit and
                abs(d_xi[0]) < tol_crit and abs(d_xi[1]) < tol_crit and
                abs(d_eta[2]) > tol_crit and abs(d_xi[2]) > tol_crit)
    if require_critical and not critical:
        raise PairConditionError(
            "(V)", f"not a cubic critical point: eta'(0)={d_eta[0]:.3g}, "
                   f"eta''(0)={d_eta[1]:.3g}, xi'(0)={d_xi[0]:.3g}, xi''(0)={d_xi[1]:.3g}, "
                   f"eta'''(0)={d_eta[2]:.3g}, xi'''(0)={d_xi[2]:.3g}")
    normalized = abs(xi0 - 1.0) < 1e-12 and 1.0 / (2.0 * c0) < abs(eta0) < 2.0 * c0
    if require_normalized and not normalized:
        raise PairConditionError(
            "normalization", f"xi(0)={xi0:.15g}, |eta(0)|={abs(eta0):.6g} with C0={c0}")
    meta = dict(meta or {})
    if mono_floor > 1e-12:
        meta.setdefault("mono_floor", mono_floor)
    return Pair(eta, xi, critical, normalized, meta)


def rigid_pair(rho, degree=None, meta=None):
    """The translation model pair (x - rho on [0,1], x + 1 on [-rho, 0]).

    Its heights reproduce the continued fraction of rho and its glue map is
    the rigid rotation by rho. The golden-mean instance is the mirrored
    form of the standard rotation pair used by the attractor construction.
    """
    if not (0.0 < rho < 1.0):
        raise PairConditionError("(I)", f"rho={rho} outside (0, 1)")
    eta = fs.ChebMap1D([0.5 - rho, 0.5], 0.0, 1.0)
    xi = fs.ChebMap1D([1.0 - 0.5 * rho, 0.5 * rho], -rho, 0.0)
    if degree is not None:
        pad = max(degree + 1 - len(eta.coeffs), 0)
        if pad:
            eta = fs.ChebMap1D(np.concatenate([eta.coeffs, np.zeros(pad)]), 0.0, 1.0)
            xi = fs.ChebMap1D(np.concatenate([xi.coeffs, np.zeros(pad)]), -rho, 0.0)
    return make_pair(eta, xi, meta=dict(meta or {}, source="rigid", rho=rho))


# ---------------------------------------------------------------------------
# commutator


def _chain_derivs(outer, inner):
    """Derivative orders 0..3 of outer∘inner from per-map order 0..3 lists."""
    f0, f1, f2, f3 = outer
    g0, g1, g2, g3 = inner
    return (
        f0,
        f1 * g1,
        f2 * g1**2 + f1 * g2,
        f3 * g1**3 + 3.0 * f2 * g1 * g2 + f1 * g3,
    )


def _derivs_at(m, x):
    return [m(x, k) for k in range(4)]


def commutator_defect(pair):
    """Derivatives 0..3 at 0 of eta∘xi - xi∘eta as a length-4 array."""
    eta, xi = pair.eta, pair.xi
    a = _chain_derivs(_derivs_at(eta, xi(0.0)), _derivs_at(xi, 0.0))
    b = _chain_derivs(_derivs_at(xi, eta(0.0)), _derivs_at(eta, 0.0))
    return np.array(a) - np.array(b)


# ---------------------------------------------------------------------------
# heights


@dataclass
class HeightReport:
    value: float                      # int-valued float, or math.inf
    boundary_hit: bool = False        # an iterate landed within 1e-12 of 0
    iterations: int = 0


def height_report(pair, cap=HEIGHT_CAP):
    """Smallest r with eta^{r+1}(xi(0)) < 0 <= eta^r(xi(0)).

    Returns inf when eta stops decreasing (a fixed point of eta) or the
    cap is hit; raises HeightUnreliableError if an iterate leaves eta's
    flagged-evaluation range while still positive.
    """
    eta = pair.eta
    z = pair.xi0
    r = 0
    while True:
        if eta.extrapolates(z):
            raise HeightUnreliableError(
                f"iterate {z:.6g} left the trusted range at r={r}", last_reliable=r)
        zn = eta(z)
        if zn >= z - FIXED_POINT_SLACK:
            return HeightReport(math.inf, iterations=r)
        if zn < 0.0:
            if r == 0:
                raise PairConditionError("(III)", f"eta(xi(0)) = {zn:.6g} already negative")
            return HeightReport(float(r), boundary_hit=abs(z) < BOUNDARY_TOL or abs(zn) < BOUNDARY_TOL,
                                iterations=r)
        z = zn
        r += 1
        if r > cap:
            return HeightReport(math.inf, iterations=r)


def height(pair, cap=HEIGHT_CAP):
    return height_report(pair, cap).value


# ---------------------------------------------------------------------------
# one renormalization microstep (shared with renorm1d)


def _renorm_once(pair, degree=None):
    """Pre-renormalize and rescale; returns a dict with all step data."""
    rep = height_report(pair)
    if math.isinf(rep.value):
        raise NotRenormalizableError("height is infinite")
    r = int(rep.value)
    degree = degree or pair.degree
    eta, xi = pair.eta, pair.xi

    def eta_iter_xi(x):
        v = xi(x)
        for _ in range(r):
            v = eta(v)
        return v

    pre_eta = fs.fit_from_samples(eta_iter_xi, (xi.lo, 0.0), degree)
    lam_zeta = eta_iter_xi(0.0)          # eta^r(xi(0)) > 0
    pre_xi = fs.fit_from_samples(lambda x: eta(x), (0.0, lam_zeta), degree)
    lam = eta(0.0)
    new_eta = fs.affine_rescale(pre_eta, lam)
    new_xi = fs.affine_rescale(pre_xi, lam)
    new_xi.coeffs[0] += 1.0 - new_xi(0.0)   # pin xi(0) = 1 exactly
    result = make_pair(new_eta, new_xi,
                       require_normalized=True,
                       mono_floor=max(1e-5, pair.meta.get("mono_floor", 0.0)),
                       meta=dict(pair.meta, depth=pair.meta.get("depth", 0) + 1))
    return {
        "r": r,
        "lam": lam,
        "lam_zeta": lam_zeta,
        "pre_eta": pre_eta,
        "pre_xi": pre_xi,
        "result": result,
        "boundary_hit": rep.boundary_hit,
    }


# ---------------------------------------------------------------------------
# rotation numbers


@dataclass
class GlueReport:
    value: float
    bound: float
    iterations: int


def glue_rotation_number(pair, max_iter=10**6):
    """Rotation number of the glue map by branch occupancy of a long orbit.

    The interval [eta(0), xi(eta(0))] becomes a circle; one xi-branch use
    is one wind. Error bound 2/max_iter. Escape of the orbit signals a bad
    commutation and raises GlueInconsistencyError.
    """
    eta, xi = pair.eta, pair.xi
    scale = pair.xi0 - pair.eta0
    x0 = 0.5 * (pair.eta0 + xi(pair.eta0))
    wraps, done, final = kernels.glue_orbit(
        list(eta.coeffs), eta.lo, eta.hi, list(xi.coeffs), xi.lo, xi.hi,
        x0, int(max_iter), 1e-7 * scale)
    if done < max_iter:
        raise GlueInconsistencyError(
            f"glue orbit escaped to {final:.6g} after {done} steps")
    return GlueReport(wraps / max_iter, 2.0 / max_iter, int(max_iter))


@dataclass
class RotationNumberReport:
    terms: list
    value: float
    value_low: float
    value_high: float
    truncated: bool

    @property
    def bracket(self):
        return self.value_high - self.value_low

    def to_record(self):
        return {
            "terms": [None if math.isinf(t) else int(t) for t in self.terms],
            "value": self.value,
            "valueLow": self.value_low,
            "valueHigh": self.value_high,
            "truncated": self.truncated,
        }


def rotation_number_heights(pair, max_depth=10, residual_cap=1e-6):
    """Heights of successive renormalizations, as a continued fraction.

    Stops at max_depth, at an infinite height (rational tail), or at
    reliability loss (flagged `truncated`); the value carries the bracket
    of the last two convergents.
    """
    terms = []
    cur = pair
    truncated = False
    for _ in range(max_depth):
        try:
            rep = height_report(cur)
        except (HeightUnreliableError, PairConditionError):
            truncated = True
            break
        if math.isinf(rep.value):
            terms.append(math.inf)
            break
        terms.append(int(rep.value))
        try:
            step = _renorm_once(cur)
        except Exception:
            truncated = True
            break
        cur = step["result"]
        if max(cur.eta.fit_residual, cur.xi.fit_residual) > residual_cap:
            truncated = True
            break
    if not terms:
        raise HeightUnreliableError("no reliable heights", last_reliable=0)
    lo, hi = contfrac.value_bracket([t for t in terms])
    finite = [t for t in terms if not math.isinf(t)]
    value = contfrac.value(finite) if (terms and math.isinf(terms[-1])) else 0.5 * (lo + hi)
    if terms == [math.inf]:
        value, lo, hi = 0.0, 0.0, 0.0
    return RotationNumberReport(terms, value, lo, hi, truncated)


def heights_by_words(pair, max_depth, r_cap=2000):
    """Heights of successive pre-renormalizations by pure word evaluation.

    No refitting happens: the level-k maps are evaluated as composition
    words of the original pair, so slightly non-commuting pairs (thin 2D
    slices) can be taken much deeper than the refit-based route. Returns
    the list of heights found (possibly ending with math.inf).
    """
    heights = []
    s = MultiIndex([(1, 0)])
    t = MultiIndex([(0, 1)])
    for _ in range(max_depth):
        try:
            z = apply_word(pair, t, 0.0)
            sgn = 1.0 if z > 0.0 else -1.0
            r = 0
            prev = abs(z)
            while True:
                z = apply_word(pair, s, z)
                if z * sgn < 0.0:
                    break
                if abs(z) >= prev - FIXED_POINT_SLACK:
                    return heights + [math.inf]
                prev = abs(z)
                r += 1
                if r > r_cap:
                    return heights + [math.inf]
            if r == 0:
                return heights
        except (WordRangeError, HeightUnreliableError):
            return heights
        heights.append(r)
        s_rep = MultiIndex.from_letters(s.letters * r)
        s, t = index_compose(t, s_rep), s
    return heights


# ---------------------------------------------------------------------------
# multi-index algebra


class MultiIndex:
    """Composition word (a1, b1, ..., an, bn): xi^{bn}∘eta^{an}∘...∘eta^{a1}.

    Stored as blocks; the letter string (application order, 0 = eta,
    1 = xi) is the normal form used for ordering and subtraction.
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        blocks = tuple((int(a), int(b)) for a, b in blocks)
        if blocks == ((0, 0),):
            blocks = ()
        if blocks and blocks[-1] == (0, 0):
            raise IndexError_("trailing empty block")
        for j, (a, b) in enumerate(blocks):
            if a < 0 or b < 0:
                raise IndexError_(f"negative entry in block {j}")
            if j > 0 and a == 0:
                raise IndexError_(f"a_{j + 1} = 0 in the interior")
            if j < len(blocks) - 1 and b == 0:
                raise IndexError_(f"b_{j + 1} = 0 in the interior")
        self.blocks = blocks

    @classmethod
    def from_letters(cls, letters):
        blocks = []
        a = b = 0
        for ltr in letters:
            if ltr == ETA:
                if b > 0:
                    blocks.append((a, b))
                    a = b = 0
                a += 1
            else:
                b += 1
        if a or b:
            blocks.append((a, b))
        return cls(blocks)

    @property
    def letters(self):
        out = []
        for a, b in self.blocks:
            out.extend([ETA] * a)
            out.extend([XI] * b)
        return tuple(out)

    def __len__(self):
        return sum(a + b for a, b in self.blocks)

    def __eq__(self, other):
        return isinstance(other, MultiIndex) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def __repr__(self):
        flat = ",".join(f"{a},{b}" for a, b in self.blocks)
        return f"MultiIndex({flat})"


EMPTY_INDEX = MultiIndex([])


def index_compose(u, v):
    """Word for apply(v) ∘ apply(u): u's letters first, then v's."""
    return MultiIndex.from_letters(u.letters + v.letters)


@dataclass
class OrderResult:
    precedes: bool
    ominus: MultiIndex | None = None


def index_order(s, t):
    """Whether t strictly precedes s; if so, the remainder q = s ⊖ t.

    t ≺ s exactly when t's letter string is a proper prefix of s's, and
    then apply(s) = apply(q) ∘ apply(t).
    """
    ls, lt = s.letters, t.letters
    if len(lt) >= len(ls) or ls[:len(lt)] != lt:
        return OrderResult(False, None)
    return OrderResult(True, MultiIndex.from_letters(ls[len(lt):]))


def prefixes(s):
    """All words strictly preceding s, by increasing length (len(s) of them)."""
    ls = s.letters
    return [MultiIndex.from_letters(ls[:j]) for j in range(len(ls))]


def apply_word(pair, word, x):
    """Evaluate zeta^word at x (scalar or array), flagging range breaks."""
    vals = np.atleast_1d(np.asarray(x, dtype=float))
    for pos, ltr in enumerate(word.letters):
        m = pair.map(ltr)
        if np.any(m.extrapolates(vals)):
            k = int(np.argmax(m.extrapolates(vals)))
            raise WordRangeError(
                f"factor {pos} ({'eta' if ltr == ETA else 'xi'}) got {vals[k]:.6g} "
                f"outside [{m.lo:.6g}, {m.hi:.6g}]", position=pos)
        vals = m(vals)
        vals = np.atleast_1d(vals)
    return float(vals[0]) if np.isscalar(x) or np.asarray(x).ndim == 0 else vals


def word_as_map(pair, word, interval, degree=None):
    """Refit zeta^word on an interval."""
    degree = degree or pair.degree
    return fs.fit_from_samples(lambda xs: apply_word(pair, word, xs), interval, degree)
