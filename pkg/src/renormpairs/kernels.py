"""Orbit-kernel dispatch: compiled extension when built, pure Python otherwise.

Build the fast twin in place with

    python setup.py build_ext --inplace

`KERNEL_BACKEND` records which twin is active; both expose the same API
and are compared by `benchmarks/bench_kernels.py`.
"""

from __future__ import annotations

try:
    from . import _kernels_cy as _impl
    KERNEL_BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _kernels_py as _impl
    KERNEL_BACKEND = "python"

lift_marks = _impl.lift_marks
lift_final = _impl.lift_final
lift_closest_returns = _impl.lift_closest_returns
glue_orbit = _impl.glue_orbit
annulus_orbit = _impl.annulus_orbit
annulus_marks = _impl.annulus_marks

__all__ = [
    "KERNEL_BACKEND",
    "annulus_marks",
    "annulus_orbit",
    "glue_orbit",
    "lift_closest_returns",
    "lift_final",
    "lift_marks",
]
