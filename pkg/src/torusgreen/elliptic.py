"""Lattice bookkeeping and evaluation of theta_1, zeta, wp, wp' on Lambda_tau.

Lambda_tau is the lattice generated by 1 and tau (Im tau > 0).  All series
are evaluated at an SL(2,Z)-reduced representative tau' (so the nome
satisfies |q| <= exp(-pi*sqrt(3)/2) ~ 0.066 and four or five terms give
double precision), and results are mapped back through the lattice identity

    Lambda_tau = s * Lambda_tau',      s = C*tau + D,

where tau' = (A*tau + B)/(C*tau + D).  zeta and wp are lattice-intrinsic,
so only the homogeneity scalings by s appear; the quasi-periods eta1, eta2
of the user basis (1, tau) are obtained from the reduced ones by the
integer change of basis.

theta_1 uses the convention

    theta_1(z | tau') = 2 * sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) pi z),

with q = exp(i pi tau').  Arguments are reduced into the fundamental cell
before summation and the exact quasi-periodicity factors are reapplied, so
nothing overflows for any argument a double can describe.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NearPole, NonPositiveImaginaryPart, PrecisionUnreachable

TWO_PI_I = 2j * math.pi

#: points closer than POLE_RADIUS (in reduced-frame units, i.e. relative to
#: the shortest lattice vector) to a lattice point are rejected as NearPole
POLE_RADIUS = 1e-8

_REDUCED_IM_FLOOR = math.sqrt(3.0) / 2.0 - 1e-12


def _reduce_modular(tau: complex) -> tuple[complex, tuple[int, int, int, int]]:
    """Return (tau', (A, B, C, D)) with tau' = (A tau + B)/(C tau + D) reduced.

    The matrix is recomputed against the original tau each sweep so the
    reduced value carries no accumulated Moebius round-off.
    """
    A, B, C, D = 1, 0, 0, 1
    for _ in range(512):
        t = (A * tau + B) / (C * tau + D)
        k = round(t.real)
        if k != 0:
            A, B = A - k * C, B - k * D
            t = t - k
        if abs(t) < 1.0 - 1e-15:
            A, B, C, D = -C, -D, A, B
            continue
        if abs(t.real) <= 0.5 + 1e-15:
            break
    else:  # pragma: no cover - the gauss reduction always terminates
        raise PrecisionUnreachable(f"modular reduction did not terminate for tau={tau}")
    t = (A * tau + B) / (C * tau + D)
    if t.imag < _REDUCED_IM_FLOOR:  # pragma: no cover - fundamental domain guarantee
        raise PrecisionUnreachable(f"reduction failed: Im tau' = {t.imag}")
    return t, (A, B, C, D)


def _truncation(q_abs: float, eps: float) -> int:
    n = 1
    while q_abs ** ((n + 0.5) ** 2) >= eps:
        n += 1
        if n > 10_000:
            raise PrecisionUnreachable(f"eps={eps} needs more than 1e4 theta terms")
    return n + 1  # one spare term absorbs the (2n+1)^3 derivative weights


@dataclass(frozen=True, eq=False)
class LatticeContext:
    """Immutable evaluation kernel for the lattice generated by 1 and tau.

    basis_change is (A, B, C, D) with reduced_tau = (A tau + B)/(C tau + D)
    and det = 1; scale is s = C tau + D, so Lambda_tau = s * Lambda_reduced.
    eta1, eta2 are the zeta quasi-periods for the basis (1, tau); they
    satisfy the Legendre relation eta1*tau - eta2 = 2 pi i exactly by
    construction.
    """

    tau: complex
    reduced_tau: complex
    basis_change: tuple[int, int, int, int]
    scale: complex
    eta1: complex
    eta2: complex
    eta1_reduced: complex
    eta2_reduced: complex
    nome: complex
    trunc: int
    eps: float
    _coef: np.ndarray = field(repr=False)        # (-1)^n exp(i pi tau' (n^2+n))
    _odd: np.ndarray = field(repr=False)         # 2n+1 as float
    _q4: complex = field(repr=False)             # q^{1/4}

    @property
    def min_period(self) -> float:
        """Length of the shortest nonzero lattice vector."""
        return abs(self.scale)

    def half_periods(self) -> tuple[complex, complex, complex]:
        """The three half-periods 1/2, tau/2, (1+tau)/2 of Lambda_tau."""
        return 0.5 + 0j, self.tau / 2.0, (1.0 + self.tau) / 2.0


def make_context(tau: complex, eps: float = 1e-12) -> LatticeContext:
    """Build a LatticeContext for Lambda_tau with target series precision eps."""
    tau = complex(tau)
    if not (tau.imag > 0.0):
        raise NonPositiveImaginaryPart(f"Im tau = {tau.imag} must be positive")
    if not (1e-15 <= eps <= 1e-6):
        raise ValueError(f"eps={eps} outside [1e-15, 1e-6]")

    red, (A, B, C, D) = _reduce_modular(tau)
    s = C * tau + D
    q = cmath.exp(1j * math.pi * red)
    trunc = _truncation(abs(q), eps)

    n = np.arange(trunc + 1, dtype=np.float64)
    coef = np.where(n.astype(np.int64) % 2 == 0, 1.0, -1.0) * np.exp(
        1j * math.pi * red * (n * n + n)
    )
    odd = 2.0 * n + 1.0

    # eta'_1 = -theta'''(0)/(3 theta'(0)); the q^{1/4} prefactor cancels.
    d1 = np.sum(coef * odd)
    d3 = np.sum(coef * odd**3)
    eta1_red = (math.pi**2 / 3.0) * complex(d3 / d1)
    eta2_red = eta1_red * red - TWO_PI_I

    eta1 = (A * eta1_red - C * eta2_red) / s
    eta2 = (-B * eta1_red + D * eta2_red) / s

    return LatticeContext(
        tau=tau,
        reduced_tau=red,
        basis_change=(A, B, C, D),
        scale=s,
        eta1=eta1,
        eta2=eta2,
        eta1_reduced=eta1_red,
        eta2_reduced=eta2_red,
        nome=q,
        trunc=trunc,
        eps=eps,
        _coef=coef,
        _odd=odd,
        _q4=cmath.exp(0.25j * math.pi * red),
    )


# ---------------------------------------------------------------------------
# cell reduction helpers
# ---------------------------------------------------------------------------

def reduce_cell(ctx: LatticeContext, z):
    """Reduce z modulo Lambda_tau into the cell centered at 0.

    Returns (z0, m, n) with z = z0 + m + n*tau and the coordinates of z0 in
    the (1, tau) frame lying in [-1/2, 1/2].
    """
    z = np.asarray(z, dtype=np.complex128)
    y = z.imag / ctx.tau.imag
    n = np.round(y)
    x = z.real - y * ctx.tau.real
    m = np.round(x)
    z0 = z - m - n * ctx.tau
    return z0, m.astype(np.int64), n.astype(np.int64)


def mod_distance(ctx: LatticeContext, z, w) -> np.ndarray:
    """Distance between z and w on the torus C/Lambda_tau.

    Uses the centered-cell representative of z - w and minimizes over the
    nine neighboring translates to avoid cell-edge artifacts.
    """
    d0, _, _ = reduce_cell(ctx, np.asarray(z) - np.asarray(w))
    best = np.abs(d0)
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            if i == 0 and j == 0:
                continue
            best = np.minimum(best, np.abs(d0 + i + j * ctx.tau))
    return best


def centered_diff(ctx: LatticeContext, z, w):
    """Minimal representative of z - w modulo Lambda_tau.

    Like mod_distance but returns the complex difference itself (the one of
    smallest modulus among the nine candidates around the centered cell).
    """
    d0, _, _ = reduce_cell(ctx, np.asarray(z) - np.asarray(w))
    d0 = np.atleast_1d(d0)
    cands = np.stack(
        [d0 + i + j * ctx.tau for i in (-1, 0, 1) for j in (-1, 0, 1)], axis=0
    )
    pick = np.argmin(np.abs(cands), axis=0)
    out = np.take_along_axis(cands, pick[np.newaxis, ...], axis=0)[0]
    if np.isscalar(z) or (np.asarray(z).ndim == 0 and np.asarray(w).ndim == 0):
        return complex(out[0] if out.ndim else out)
    return out


def _reduce_cell_reduced(ctx: LatticeContext, w):
    """Centered-cell reduction in the reduced frame (lattice <1, tau'>)."""
    red = ctx.reduced_tau
    y = w.imag / red.imag
    n = np.round(y)
    x = w.real - y * red.real
    m = np.round(x)
    w0 = w - m - n * red
    return w0, m, n


def _pole_mask(ctx: LatticeContext, w0) -> np.ndarray:
    """True where w0 (centered-cell, reduced frame) is NOT near a lattice point."""
    red = ctx.reduced_tau
    d = np.abs(w0)
    for om in (1.0, -1.0, red, -red, 1.0 + red, -1.0 - red, red - 1.0, 1.0 - red):
        d = np.minimum(d, np.abs(w0 - om))
    return d > POLE_RADIUS


# ---------------------------------------------------------------------------
# theta core
# ---------------------------------------------------------------------------

def _theta_sums(ctx: LatticeContext, w0, third: bool = False):
    """Sine/cosine theta sums at w0 (reduced frame, cell-centered).

    Returns (S0, S1, S2, S3) with
        theta1   = 2 q^{1/4} S0
        theta1'  = 2 pi q^{1/4} S1
        theta1'' = -2 pi^2 q^{1/4} S2
        theta1''' = -2 pi^3 q^{1/4} S3   (S3 only when third=True)

    The q-power and the sin/cos exponentials are combined inside a single
    exp() per term so nothing overflows for |Im w0| <= Im tau'/2.
    """
    w0 = np.asarray(w0, dtype=np.complex128)
    coef = ctx._coef.reshape((-1,) + (1,) * w0.ndim)
    odd = ctx._odd.reshape((-1,) + (1,) * w0.ndim)
    arg = 1j * math.pi * odd * w0[np.newaxis, ...]
    ep = coef * np.exp(arg)
    em = coef * np.exp(-arg)
    sin_t = (ep - em) / 2j
    cos_t = (ep + em) / 2.0
    S0 = np.sum(sin_t, axis=0)
    S1 = np.sum(odd * cos_t, axis=0)
    S2 = np.sum(odd**2 * sin_t, axis=0)
    S3 = np.sum(odd**3 * cos_t, axis=0) if third else None
    return S0, S1, S2, S3


def _log_derivatives(ctx: LatticeContext, w0, third: bool = False):
    """(log theta1)', '', ''' at w0; the q^{1/4} prefactor cancels out."""
    S0, S1, S2, S3 = _theta_sums(ctx, w0, third=third)
    r1 = math.pi * S1 / S0
    L1 = r1
    L2 = -math.pi**2 * S2 / S0 - r1 * r1
    L3 = None
    if third:
        r2 = -math.pi**2 * S2 / S0
        r3 = -math.pi**3 * S3 / S0
        L3 = r3 - 3.0 * r2 * r1 + 2.0 * r1**3
    return L1, L2, L3


def _zeta_wp_raw(ctx: LatticeContext, z, want=("zeta",)):
    """Vectorized masked evaluation; returns dict of arrays plus ok mask."""
    z = np.asarray(z, dtype=np.complex128)
    w = z / ctx.scale
    w0, _, n = _reduce_cell_reduced(ctx, w)
    ok = _pole_mask(ctx, w0)
    w0_safe = np.where(ok, w0, 0.25 + 0.25j * ctx.reduced_tau.imag)
    third = "wp_prime" in want
    L1, L2, L3 = _log_derivatives(ctx, w0_safe, third=third)
    out = {}
    if "zeta" in want:
        zr = ctx.eta1_reduced * w + L1 - TWO_PI_I * n
        out["zeta"] = zr / ctx.scale
    if "wp" in want:
        out["wp"] = (-ctx.eta1_reduced - L2) / ctx.scale**2
    if "wp_prime" in want:
        out["wp_prime"] = -L3 / ctx.scale**3
    return out, ok


def _unwrap(value, z):
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return complex(value)
    return value


def _check_ok(ctx: LatticeContext, ok, z) -> None:
    if not np.all(ok):
        bad = np.asarray(z, dtype=np.complex128)[~np.asarray(ok)] if np.asarray(z).ndim else z
        raise NearPole(f"evaluation within pole-exclusion radius of Lambda_tau: z={bad}")


def zeta(ctx: LatticeContext, z):
    """Weierstrass zeta for Lambda_tau; accepts scalars or arrays."""
    out, ok = _zeta_wp_raw(ctx, z, want=("zeta",))
    _check_ok(ctx, ok, z)
    return _unwrap(out["zeta"], z)


def wp(ctx: LatticeContext, z):
    """Weierstrass wp = -zeta' for Lambda_tau."""
    out, ok = _zeta_wp_raw(ctx, z, want=("wp",))
    _check_ok(ctx, ok, z)
    return _unwrap(out["wp"], z)


def wp_prime(ctx: LatticeContext, z):
    """Derivative wp' for Lambda_tau."""
    out, ok = _zeta_wp_raw(ctx, z, want=("wp_prime",))
    _check_ok(ctx, ok, z)
    return _unwrap(out["wp_prime"], z)


def theta1(ctx: LatticeContext, z):
    """theta_1(z | reduced_tau), entire in z.

    The argument is reduced into the fundamental cell of <1, reduced_tau>
    and the exact quasi-periodicity factor (-1)^{m+n} e^{-i pi (n^2 tau' + 2 n z0)}
    is reapplied.  For astronomically large |n| the factor itself can leave
    double range; that is inherent to the value, not to the algorithm.
    """
    z = np.asarray(z, dtype=np.complex128)
    w0, m, n = _reduce_cell_reduced(ctx, z)
    S0, _, _, _ = _theta_sums(ctx, w0)
    base = 2.0 * ctx._q4 * S0
    factor = np.where((m + n) % 2 == 0, 1.0, -1.0) * np.exp(
        -1j * math.pi * (n * n * ctx.reduced_tau + 2.0 * n * w0)
    )
    return _unwrap(factor * base, z)


def log_abs_theta1(ctx: LatticeContext, w):
    """log |theta_1(w | reduced_tau)|, stable for arbitrary arguments.

    The quasi-periodicity factor enters additively, so this never overflows;
    it diverges to -inf only on the lattice itself.
    """
    w = np.asarray(w, dtype=np.complex128)
    w0, _, n = _reduce_cell_reduced(ctx, w)
    S0, _, _, _ = _theta_sums(ctx, w0)
    mag = 2.0 * np.abs(ctx._q4) * np.abs(S0)
    with np.errstate(divide="ignore"):
        base = np.log(mag)
    shift = math.pi * (n * n * ctx.reduced_tau.imag + 2.0 * n * w0.imag)
    out = base + shift
    if np.isscalar(w) or w.ndim == 0:
        return float(out)
    return out
