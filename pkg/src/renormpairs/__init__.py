"""Renormalization laboratory for critical circle maps.

The package represents circle dynamics near a cubic critical point as
(almost) commuting pairs of analytic interval maps, renormalizes them,
locates the golden-mean fixed point and its spectrum, extends the operator
to dissipative two-dimensional pairs, and reconstructs critical invariant
circles of perturbed Arnold maps through the renormalization microscope.
"""

__version__ = "0.1.0"

from .contfrac import GOLDEN_MEAN

__all__ = ["GOLDEN_MEAN", "__version__"]
