"""Pure-Python orbit kernels: the fallback twin of `_kernels_cy`.

Same signatures and semantics as the compiled module; used when the
extension has not been built. Loops are written with local bindings and
plain floats, which is as fast as interpreted Python gets.
"""

from __future__ import annotations

import math

TWO_PI = 2.0 * math.pi

COMPILED = False


def lift_marks(a, omega, x0, marks):
    """Values of the Arnold lift orbit f^k(x0) at the iteration counts `marks`.

    `marks` must be sorted ascending; returns a list of floats.
    """
    sin = math.sin
    inv = 1.0 / TWO_PI
    x = float(x0)
    out = []
    k = 0
    for m in marks:
        while k < m:
            x = x - a * sin(TWO_PI * x) * inv + omega
            k += 1
        out.append(x)
    return out


def lift_final(a, omega, x0, n):
    """f^n(x0) for the Arnold lift."""
    return lift_marks(a, omega, x0, [n])[0]


def lift_closest_returns(a, omega, x0, n, max_records=64):
    """Closest-return times and integer parts of the lift orbit of x0.

    Records (k, round(f^k(x0) - x0)) whenever |f^k(x0) - x0 - round| sets a
    new minimum; these are the continued-fraction denominators/numerators
    of the rotation number.
    """
    sin = math.sin
    inv = 1.0 / TWO_PI
    x = float(x0)
    base = x
    best = math.inf
    qs, ps = [], []
    for k in range(1, n + 1):
        x = x - a * sin(TWO_PI * x) * inv + omega
        d = x - base
        p = math.floor(d + 0.5)
        err = abs(d - p)
        if err < best:
            best = err
            qs.append(k)
            ps.append(int(p))
            if len(qs) >= max_records:
                break
    return qs, ps


def glue_orbit(eta_c, eta_lo, eta_hi, xi_c, xi_lo, xi_hi, x0, n, escape_tol):
    """Branch occupancy of the glue-map orbit of a pair.

    The pair's circle is [eta(0), xi(eta(0))]; each step applies eta on
    [0, ...] and eta∘xi on [..., 0), counting the xi-branch uses (wraps).
    Returns (wraps, steps_done, final_x); steps_done < n means escape.
    """
    ea = 2.0 / (eta_hi - eta_lo)
    eb = -(eta_hi + eta_lo) / (eta_hi - eta_lo)
    xa = 2.0 / (xi_hi - xi_lo)
    xb = -(xi_hi + xi_lo) / (xi_hi - xi_lo)
    ne, nx = len(eta_c), len(xi_c)

    def ev(c, m, t):
        b1 = 0.0
        b2 = 0.0
        for k in range(m - 1, 0, -1):
            b1, b2 = c[k] + 2.0 * t * b1 - b2, b1
        return c[0] + t * b1 - b2

    eta0 = ev(eta_c, ne, eb)
    xi_eta0 = ev(xi_c, nx, xa * eta0 + xb)
    lo = eta0 - escape_tol
    hi = xi_eta0 + escape_tol
    x = float(x0)
    wraps = 0
    for step in range(n):
        if x < lo or x > hi:
            return wraps, step, x
        if x < 0.0:
            x = ev(xi_c, nx, xa * x + xb)
            x = ev(eta_c, ne, ea * x + eb)
            wraps += 1
        else:
            x = ev(eta_c, ne, ea * x + eb)
    return wraps, n, x


def annulus_orbit(a, omega, eps, x0, y0, n, burn, stride, window_lo, window_hi):
    """Forward orbit of the perturbed Arnold annulus map, subsampled.

    x is reduced mod 1 into [window_lo, window_lo + 1); a point is recorded
    every `stride` steps after `burn`, but only when the reduced x lies in
    [window_lo, window_hi]. Returns (xs, ys) lists.
    """
    sin = math.sin
    inv = 1.0 / TWO_PI
    x = float(x0)
    y = float(y0)
    xs, ys = [], []
    for k in range(n):
        fx = x - a * sin(TWO_PI * x) * inv + omega
        x, y = fx + y, eps * (fx - x + y)
        x -= math.floor(x - window_lo)
        if k >= burn and (k - burn) % stride == 0 and x <= window_hi:
            xs.append(x)
            ys.append(y)
    return xs, ys


def annulus_marks(a, omega, eps, marks, x0=0.0, y0=0.0):
    """Unreduced x of the annulus-map orbit of (x0, y0) at `marks` steps."""
    sin = math.sin
    inv = 1.0 / TWO_PI
    x = float(x0)
    y = float(y0)
    out = []
    k = 0
    for m in marks:
        while k < m:
            fx = x - a * sin(TWO_PI * x) * inv + omega
            x, y = fx + y, eps * (fx - x + y)
            k += 1
        out.append(x)
    return out
