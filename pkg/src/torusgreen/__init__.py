"""Numerical dynamics of the antiholomorphic zeta-perturbation family on flat tori.

The package classifies parameters tau in the upper half plane by the fixed
points of the torus map g_tau (equivalently, by the number of critical
points of the Green's function on C/Lambda_tau), computes the dynamical
invariants of hyperbolic and parabolic parameters (Koenigs ratio, critical
Ecalle height), and traces the structure of parameter space (hyperbolic
components, parabolic arcs, internal rays).
"""

__version__ = "0.1.0"

from . import elliptic, errors
from .elliptic import LatticeContext, make_context

__all__ = [
    "__version__",
    "elliptic",
    "errors",
    "LatticeContext",
    "make_context",
]
