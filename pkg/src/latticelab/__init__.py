"""Numerical laboratory for lattice orbit counting on two homogeneous spaces:
the hyperbolic plane and the triple space SO_e(1,2)^3 / diag.

Subpackages
-----------
hypgeom     exact-signature Lorentzian linear algebra and hyperbolic geometry
numberfield exact arithmetic in the totally real cubic field Q[x]/(x^3+x^2-2x-1)
lattice     enumeration of the integral and cubic-integer orthogonal groups
zspace      intrinsic norms and ball volumes (Monte Carlo / quadrature / growth rate)
spectral    spherical functions, triple-product kernel integrals, norm-ratio probes
countlab    counting experiments, error statistics, CSV/JSON/SVG reporting
"""

from . import hypgeom, numberfield, lattice, zspace, spectral, countlab

__version__ = "0.1.0"

__all__ = [
    "hypgeom",
    "numberfield",
    "lattice",
    "zspace",
    "spectral",
    "countlab",
    "__version__",
]
