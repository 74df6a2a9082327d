# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled orbit kernels; the hot twin of `_kernels_py` (same API)."""

from libc.math cimport sin, floor, fabs, INFINITY

cdef double TWO_PI = 6.283185307179586476925286766559

COMPILED = True


def lift_marks(double a, double omega, double x0, marks):
    cdef double x = x0
    cdef double inv = 1.0 / TWO_PI
    cdef long k = 0
    cdef long m
    out = []
    for m in marks:
        while k < m:
            x = x - a * sin(TWO_PI * x) * inv + omega
            k += 1
        out.append(x)
    return out


def lift_final(double a, double omega, double x0, long n):
    cdef double x = x0
    cdef double inv = 1.0 / TWO_PI
    cdef long k
    for k in range(n):
        x = x - a * sin(TWO_PI * x) * inv + omega
    return x


def lift_closest_returns(double a, double omega, double x0, long n, int max_records=64):
    cdef double x = x0
    cdef double base = x0
    cdef double best = INFINITY
    cdef double inv = 1.0 / TWO_PI
    cdef double d, p, err
    cdef long k
    qs, ps = [], []
    for k in range(1, n + 1):
        x = x - a * sin(TWO_PI * x) * inv + omega
        d = x - base
        p = floor(d + 0.5)
        err = fabs(d - p)
        if err < best:
            best = err
            qs.append(k)
            ps.append(int(p))
            if len(qs) >= max_records:
                break
    return qs, ps


cdef inline double _ev(double[::1] c, int m, double t) noexcept nogil:
    cdef double b1 = 0.0
    cdef double b2 = 0.0
    cdef double tmp
    cdef int k
    for k in range(m - 1, 0, -1):
        tmp = c[k] + 2.0 * t * b1 - b2
        b2 = b1
        b1 = tmp
    return c[0] + t * b1 - b2


def glue_orbit(eta_c, double eta_lo, double eta_hi,
               xi_c, double xi_lo, double xi_hi,
               double x0, long n, double escape_tol):
    import numpy as np
    cdef double[::1] ec = np.ascontiguousarray(eta_c, dtype=np.float64)
    cdef double[::1] xc = np.ascontiguousarray(xi_c, dtype=np.float64)
    cdef int ne = ec.shape[0]
    cdef int nx = xc.shape[0]
    cdef double ea = 2.0 / (eta_hi - eta_lo)
    cdef double eb = -(eta_hi + eta_lo) / (eta_hi - eta_lo)
    cdef double xa = 2.0 / (xi_hi - xi_lo)
    cdef double xb = -(xi_hi + xi_lo) / (xi_hi - xi_lo)
    cdef double eta0 = _ev(ec, ne, eb)
    cdef double xi_eta0 = _ev(xc, nx, xa * eta0 + xb)
    cdef double lo = eta0 - escape_tol
    cdef double hi = xi_eta0 + escape_tol
    cdef double x = x0
    cdef long wraps = 0
    cdef long step
    for step in range(n):
        if x < lo or x > hi:
            return wraps, step, x
        if x < 0.0:
            x = _ev(xc, nx, xa * x + xb)
            x = _ev(ec, ne, ea * x + eb)
            wraps += 1
        else:
            x = _ev(ec, ne, ea * x + eb)
    return wraps, n, x


def annulus_orbit(double a, double omega, double eps, double x0, double y0,
                  long n, long burn, long stride,
                  double window_lo, double window_hi):
    cdef double x = x0
    cdef double y = y0
    cdef double inv = 1.0 / TWO_PI
    cdef double fx
    cdef long k
    xs, ys = [], []
    for k in range(n):
        fx = x - a * sin(TWO_PI * x) * inv + omega
        x, y = fx + y, eps * (fx - x + y)
        x -= floor(x - window_lo)
        if k >= burn and (k - burn) % stride == 0 and x <= window_hi:
            xs.append(x)
            ys.append(y)
    return xs, ys


def annulus_marks(double a, double omega, double eps, marks, double x0=0.0,
                  double y0=0.0):
    cdef double x = x0
    cdef double y = y0
    cdef double inv = 1.0 / TWO_PI
    cdef double fx
    cdef long k = 0
    cdef long m
    out = []
    for m in marks:
        while k < m:
            fx = x - a * sin(TWO_PI * x) * inv + omega
            x, y = fx + y, eps * (fx - x + y)
            k += 1
        out.append(x)
    return out
