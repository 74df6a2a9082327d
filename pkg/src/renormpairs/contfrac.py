"""Continued-fraction helpers: convergents, values, Gauss shifts."""

from __future__ import annotations

import math
from fractions import Fraction

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0


def convergents(terms):
    """Convergents p_k/q_k of [r0, r1, ...].

    Returns lists p, q with p[0]/q[0] = 0/1 (the empty convergent) and
    p[k]/q[k] = [r0, ..., r_{k-1}] for k >= 1, so q_{k+1} = r_k q_k + q_{k-1}.
    """
    p = [0, 1]
    q = [1, terms[0]]
    for r in terms[1:]:
        p.append(r * p[-1] + p[-2])
        q.append(r * q[-1] + q[-2])
    return p, q


def value(terms):
    """Float value of the finite continued fraction [r0, r1, ...]."""
    acc = Fraction(0)
    for r in reversed(terms):
        if math.isinf(r):
            acc = Fraction(0)
            continue
        acc = Fraction(1, int(r) + acc) if acc == 0 else Fraction(1, 1) / (int(r) + acc)
    return float(acc)


def value_bracket(terms):
    """(low, high) enclosure of any irrational with this CF prefix."""
    if any(math.isinf(r) for r in terms):
        k = next(i for i, r in enumerate(terms) if math.isinf(r))
        v = value(terms[:k]) if k else 0.0
        return v, v
    p, q = convergents(terms)
    a, b = p[-2] / q[-2], p[-1] / q[-1]
    return (a, b) if a <= b else (b, a)


def terms_from_value(x, depth, qmax=10**12):
    """CF terms of x in (0, 1) by the Gauss map; stops when unreliable.

    Plain float arithmetic: trustworthy to depth ~15 for generic x, which
    is all the callers need (deep targets are supplied as terms).
    """
    terms = []
    q_prev, q_cur = 0, 1
    for _ in range(depth):
        if x <= 0.0:
            break
        inv = 1.0 / x
        r = int(math.floor(inv))
        if r < 1:
            break
        q_prev, q_cur = q_cur, r * q_cur + q_prev
        if q_cur > qmax:
            break
        terms.append(r)
        x = inv - r
    return terms


def gauss_shift(terms, m):
    """Drop the first m terms: CF of G^m(x)."""
    return terms[m:]
