"""Odd antiholomorphic Blaschke models of the hyperbolic components.

The model families are proper antiholomorphic self-maps of the unit disc
of degree 2 and 3, fixing 0 and the boundary point 1:

    B_{2,a}(z) = lam * phi_{2,a}(conj z),   phi_{2,a}(w) = w (w - a) / (1 - conj(a) w)
    B_{3,a}(z) = lam * phi_{3,a}(conj z),   phi_{3,a}(w) = w (w^2 - a^2) / (1 - conj(a)^2 w^2)

with a in the unit disc and lam = 1 / phi(1) unimodular, so B(1) = 1
exactly.  Conjugating first and then applying a holomorphic Blaschke
product makes the antiholomorphy explicit; the degree-3 family is odd.
The fixed point 0 is always attracting (Schwarz), a = 0 is the unique
super-attracting member of each family, and the Koenigs ratio of the
critical orbit is a branched covering of the disc ramified only over the
origin: threefold for the degree-2 family, twofold for the degree-3 one.
model_covering_degree verifies those degrees by direct winding.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotConverging
from .koenigs import SUPER_TOL, ratio_limit


@dataclass(frozen=True)
class BlaschkeMap:
    degree: int            # 2 or 3
    param: complex         # the a of the family, |a| < 1
    unimodular: complex    # lam, solved from B(1) = 1


def make_blaschke(degree: int, param: complex) -> BlaschkeMap:
    """Construct B_{degree, param} with the boundary fixed point at 1."""
    if degree not in (2, 3):
        raise ValueError(f"degree must be 2 or 3, got {degree}")
    param = complex(param)
    if abs(param) >= 1.0:
        raise ValueError(f"|param| = {abs(param)} must be < 1")
    phi1 = _phi(degree, param, 1.0 + 0j)
    lam = 1.0 / phi1
    return BlaschkeMap(degree=degree, param=param, unimodular=lam)


def _phi(degree: int, a: complex, w):
    ab = np.conj(a)
    if degree == 2:
        return w * (w - a) / (1.0 - ab * w)
    return w * (w - a) * (w + a) / ((1.0 - ab * w) * (1.0 + ab * w))


def _phi_prime(degree: int, a: complex, w):
    ab = np.conj(a)
    if degree == 2:
        return (-ab * w**2 + 2.0 * w - a) / (1.0 - ab * w) ** 2
    num = -(ab**2) * w**4 + (3.0 - abs(a) ** 4) * w**2 - a**2
    return num / (1.0 - ab**2 * w**2) ** 2


def apply(bm: BlaschkeMap, z):
    """Evaluate B(z) = lam * phi(conj z)."""
    z = np.asarray(z, dtype=np.complex128)
    val = bm.unimodular * _phi(bm.degree, bm.param, np.conj(z))
    if np.isscalar(z) or z.ndim == 0:
        return complex(val)
    return val


def antiderivative(bm: BlaschkeMap, z):
    """d B / d conj(z) = lam * phi'(conj z); 0 exactly at the critical points."""
    z = np.asarray(z, dtype=np.complex128)
    val = bm.unimodular * _phi_prime(bm.degree, bm.param, np.conj(z))
    if np.isscalar(z) or z.ndim == 0:
        return complex(val)
    return val


def critical_points(bm: BlaschkeMap) -> tuple[complex, ...]:
    """Critical points of B inside the unit disc, in closed form.

    phi' has a quadratic (degree 2) or biquadratic (degree 3) numerator;
    exactly one root (respectively one symmetric pair) lies inside the disc.
    """
    a = bm.param
    if bm.degree == 2:
        if abs(a) < 1e-9:
            w = 0.5 * a
        else:
            w = a / (1.0 + math.sqrt(1.0 - abs(a) ** 2))
        return (complex(np.conj(w)),)
    if abs(a) < 1e-9:
        w = a / math.sqrt(3.0)
        return (complex(np.conj(w)), complex(-np.conj(w)))
    ab2 = np.conj(a) ** 2
    t = abs(a) ** 4
    disc = cmath.sqrt((3.0 - t) ** 2 - 4.0 * t)
    v_plus = ((3.0 - t) + disc) / (2.0 * ab2)
    v_minus = ((3.0 - t) - disc) / (2.0 * ab2)
    v = v_minus if abs(v_minus) <= abs(v_plus) else v_plus
    w = cmath.sqrt(v)
    if abs(w) >= 1.0:  # pragma: no cover - |v-| < 1 < |v+| for |a| < 1
        raise NotConverging(f"no critical point inside the disc for a={a}")
    return (complex(np.conj(w)), complex(-np.conj(w)))


def model_koenigs_ratio(bm: BlaschkeMap, super_tol: float = SUPER_TOL,
                        tol: float = 1e-9, max_steps: int = 100_000) -> complex:
    """Koenigs ratio of the critical orbit of the model map.

    Same multiplier-free orbit-ratio limit as for the torus family; the
    attracting fixed point is 0 exactly, and the multiplier of the second
    iterate there is |phi'(0)|^2.
    """
    lam0 = abs(_phi_prime(bm.degree, bm.param, 0.0 + 0j))
    if lam0 < super_tol:
        return 0j
    mu = lam0 * lam0

    def step(z):
        return complex(bm.unimodular * _phi(bm.degree, bm.param, z.conjugate()))

    def diff(z, w):
        return z - w

    c = critical_points(bm)[0]
    z_odd = step(c)
    rho, _, converged = ratio_limit(step, c, z_odd, 0j, mu, diff, tol=tol,
                                    max_steps=max_steps)
    if not converged:
        raise NotConverging(f"model ratio did not converge for a={bm.param}")
    return complex(rho)


def model_covering_degree(degree: int, radius: float, tol: float = 1e-9,
                          n_start: int = 64, max_points: int = 4096) -> int:
    """Winding of the Koenigs ratio along the parameter loop |a| = radius.

    Samples are refined until consecutive arguments differ by < 1 rad, so
    the unwrapped total is unambiguous; the result is the covering degree
    of the ratio map with its orientation sign.
    """
    if not (0.1 < radius < 0.9):
        raise ValueError("radius must lie in (0.1, 0.9)")
    ts = list(np.linspace(0.0, 1.0, n_start + 1))
    rhos: dict[float, complex] = {}

    def rho_of(t: float) -> complex:
        if t not in rhos:
            a = radius * cmath.exp(2j * math.pi * t)
            rhos[t] = model_koenigs_ratio(make_blaschke(degree, a), tol=tol)
        return rhos[t]

    j = 0
    while j < len(ts) - 1:
        d = cmath.phase(rho_of(ts[j + 1]) / rho_of(ts[j]))
        if abs(d) > 1.0:
            if len(ts) >= max_points:
                raise NotConverging("winding refinement budget exhausted")
            ts.insert(j + 1, 0.5 * (ts[j] + ts[j + 1]))
            continue
        j += 1
    total = sum(cmath.phase(rho_of(ts[j + 1]) / rho_of(ts[j]))
                for j in range(len(ts) - 1))
    winding = round(total / (2.0 * math.pi))
    if abs(total / (2.0 * math.pi) - winding) > 0.05:
        raise NotConverging(f"non-integer winding {total / (2 * math.pi):.4f}")
    return int(winding)
