"""The antiholomorphic map g_tau, its fixed points, and the Green's function.

The critical points of the torus Green's function solve

    F(z) = zeta(z) + a z + b conj(z) = 0,

where (a, b) is the unique pair making F exactly Lambda_tau-periodic
(eta1 + a + b = 0 and eta2 + a tau + b conj(tau) = 0; the Legendre relation
forces b = -pi / Im tau, real).  Rewriting F = 0 as a fixed-point problem
gives the antiholomorphic meromorphic map

    g(z) = -(conj(zeta(z)) + conj(a z)) / conj(b),

which commutes with lattice translations and with z -> -z.  Its fixed
points modulo Lambda_tau are exactly the zeros of F; the three half-periods
are always among them, and a symmetric extra pair {z0, -z0} may exist.  The
modulus of the antiholomorphic derivative at z is |wp(z) - a| / |b|; the
holomorphic multiplier of g o g at a fixed point is its square.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import elliptic as el
from .elliptic import LatticeContext
from .errors import CriticalPointNotFound, NearPole

VERDICT_X = "X"
VERDICT_Y = "Y"
VERDICT_BOUNDARY = "Boundary"

CLASS_ATTRACTING = "attracting"
CLASS_REPELLING = "repelling"
CLASS_PARABOLIC = "parabolic-candidate"

#: half-width of the |lambda| = 1 band used for the parabolic-candidate class
DEFAULT_TOL_PAR = 1e-6


def _wirtinger_newton_step(F, Fz, Fzb):
    """Newton displacement delta solving Fz*delta + Fzb*conj(delta) = -F.

    Vectorized; returns (delta, ok) where ok is False when the real 2x2
    system is numerically singular (|Fz| ~ |Fzb|).
    """
    det = np.abs(Fz) ** 2 - np.abs(Fzb) ** 2
    ok = np.abs(det) > 1e-300
    safe = np.where(ok, det, 1.0)
    delta = (Fzb * np.conj(F) - np.conj(Fz) * F) / safe
    return delta, ok


@dataclass(frozen=True, eq=False)
class GreenMap:
    """Coefficients of g_tau plus the chosen critical-point representative.

    c solves wp(c) = a; the pair {c, -c} are the critical points of g.  The
    stored representative is the centered-cell one with Im c >= 0 (ties
    broken toward Re c >= 0).
    """

    ctx: LatticeContext
    a: complex
    b: complex
    c: complex

    @property
    def tau(self) -> complex:
        return self.ctx.tau


@dataclass(frozen=True)
class HalfPeriodFixedPoint:
    index: int            # 1 -> 1/2, 2 -> tau/2, 3 -> (1+tau)/2
    location: complex
    multiplier_modulus: float
    cls: str


@dataclass(frozen=True)
class ExtraPair:
    z0: complex
    multiplier_modulus: float


@dataclass(frozen=True)
class FixedPointReport:
    half_periods: tuple[HalfPeriodFixedPoint, HalfPeriodFixedPoint, HalfPeriodFixedPoint]
    extra_pair: ExtraPair | None
    count: int            # 3 or 5
    verdict: str          # X | Y | Boundary
    note: str | None = None

    @property
    def min_half_period_lambda(self) -> float:
        return min(h.multiplier_modulus for h in self.half_periods)


@dataclass(frozen=True)
class TwoCycle:
    q: complex
    gq: complex
    multiplier_modulus: float     # |(g o g)'| along the cycle


@dataclass(frozen=True)
class CycleReport:
    cycles: tuple[TwoCycle, ...]
    note: str | None = None


@dataclass(frozen=True)
class MapDerivative:
    lam: complex          # d(g)/d(conj z) = conj((wp(z) - a)/b)
    modulus: float


def coefficients(ctx: LatticeContext) -> tuple[complex, complex]:
    """Solve the 2x2 periodicity system for (a, b)."""
    det = np.conj(ctx.tau) - ctx.tau  # -2i Im tau
    b = (ctx.eta1 * ctx.tau - ctx.eta2) / det
    a = (ctx.eta2 - ctx.eta1 * np.conj(ctx.tau)) / det
    return complex(a), complex(b)


def _canonical_sign(ctx: LatticeContext, z: complex) -> complex:
    """Centered-cell representative of {z, -z} with Im >= 0 (ties: Re >= 0)."""
    z0, _, _ = el.reduce_cell(ctx, z)
    z0 = complex(z0)
    if abs(z0.imag) > 1e-12:
        return z0 if z0.imag > 0 else -z0
    return z0 if z0.real >= 0 else -z0


def _critical_point(ctx: LatticeContext, a: complex, c_seed: complex | None,
                    grid: int = 16, canonical: bool = True) -> complex:
    """Solve wp(z) = a by Newton with wp' from a grid of seeds."""
    if c_seed is not None:
        z = np.atleast_1d(np.asarray(c_seed, dtype=np.complex128))
    else:
        i = (np.arange(grid) + 0.5) / grid
        u, v = np.meshgrid(i, i)
        z = (u + v * ctx.tau).ravel() - (1 + ctx.tau) / 2.0
    live = np.ones(z.shape, dtype=bool)
    for _ in range(60):
        out, ok = el._zeta_wp_raw(ctx, z, want=("wp", "wp_prime"))
        live &= ok
        f = out["wp"] - a
        df = out["wp_prime"]
        small = np.abs(df) < 1e-300
        step = np.where(small | ~live, 0.0, f / np.where(small, 1.0, df))
        step_abs = np.abs(step)
        live &= step_abs < 2.0 * (1.0 + abs(ctx.tau))
        z = np.where(live, z - step, z)
        if np.all(~live | (step_abs < 1e-14)):
            break
    out, ok = el._zeta_wp_raw(ctx, z, want=("wp",))
    scale = max(1.0, abs(a))
    good = live & ok & (np.abs(out["wp"] - a) < 1e-9 * scale)
    if not np.any(good):
        if c_seed is not None:
            return _critical_point(ctx, a, None, grid=grid, canonical=canonical)
        raise CriticalPointNotFound(f"no seed converged for wp(z) = a at tau={ctx.tau}")
    cands = z[good]
    resid = np.abs(out["wp"][good] - a)
    best = complex(cands[int(np.argmin(resid))])
    return _canonical_sign(ctx, best) if canonical else best


def critical_point_near(ctx: LatticeContext, a: complex, c_ref: complex) -> complex:
    """Critical point aligned to a reference representative (no sign canonicalization).

    Used by parameter-space Newton solvers that need c to vary continuously
    across a finite-difference stencil; the {c, -c} tie-break would make it
    jump.
    """
    c = _critical_point(ctx, a, c_ref, canonical=False)
    if abs(float(el.mod_distance(ctx, -c, c_ref))) < abs(float(el.mod_distance(ctx, c, c_ref))):
        return -c
    return c


def build(ctx: LatticeContext, c_seed: complex | None = None) -> GreenMap:
    """Construct g_tau: solve for (a, b) and locate the critical point."""
    a, b = coefficients(ctx)
    c = _critical_point(ctx, a, c_seed)
    return GreenMap(ctx=ctx, a=a, b=b, c=c)


def map_defect(gm: GreenMap, z):
    """F(z) = zeta(z) + a z + b conj(z); exactly periodic, zero at fixed points."""
    z = np.asarray(z, dtype=np.complex128)
    return el.zeta(gm.ctx, z) + gm.a * z + gm.b * np.conj(z)


def apply(gm: GreenMap, z):
    """Evaluate g(z) = -(conj(zeta(z)) + conj(a z)) / conj(b)."""
    z = np.asarray(z, dtype=np.complex128)
    val = -(np.conj(el.zeta(gm.ctx, z)) + np.conj(gm.a * z)) / np.conj(gm.b)
    if np.isscalar(z) or z.ndim == 0:
        return complex(val)
    return val


def antiderivative_modulus(gm: GreenMap, z) -> MapDerivative:
    """Antiholomorphic derivative lambda(z) = conj((wp(z) - a)/b) and |lambda|.

    At a fixed point z* the holomorphic multiplier of g o g is modulus^2.
    """
    lam = np.conj((el.wp(gm.ctx, z) - gm.a) / gm.b)
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        lam = complex(lam)
        return MapDerivative(lam=lam, modulus=abs(lam))
    return MapDerivative(lam=lam, modulus=np.abs(lam))


def half_period_multipliers(ctx: LatticeContext, a: complex, b: complex) -> np.ndarray:
    """|lambda| at the three half-periods 1/2, tau/2, (1+tau)/2."""
    ps = np.array(ctx.half_periods(), dtype=np.complex128)
    vals = el.wp(ctx, ps)
    return np.abs(vals - a) / abs(b)


def stepper(gm: GreenMap):
    """Fast scalar closure z -> g(z), cell-centered, for deep orbit iteration.

    Pure-python complex arithmetic; raises NearPole when the orbit hits the
    pole-exclusion radius.
    """
    ctx = gm.ctx
    s = complex(ctx.scale)
    red = complex(ctx.reduced_tau)
    im_red, re_red = red.imag, red.real
    tau = complex(ctx.tau)
    im_tau, re_tau = tau.imag, tau.real
    eta1r = complex(ctx.eta1_reduced)
    a = complex(gm.a)
    bbar = complex(gm.b).conjugate()
    pi = math.pi
    terms = [
        (1.0 if n % 2 == 0 else -1.0, 1j * pi * red * (n * n + n), 2 * n + 1)
        for n in range(len(ctx._odd))
    ]
    two_pi_i = 2j * pi

    def step(z: complex) -> complex:
        w = z / s
        yn = w.imag / im_red
        n = round(yn)
        x = w.real - yn * re_red
        m = round(x)
        w0 = complex(w.real - m - n * re_red, w.imag - n * im_red)
        if abs(w0) < el.POLE_RADIUS:
            raise NearPole(f"orbit hit a pole at z={z}")
        S0 = 0j
        S1 = 0j
        for sgn, qn, k in terms:
            ep = cmath.exp(qn + 1j * pi * k * w0)
            em = cmath.exp(qn - 1j * pi * k * w0)
            S0 += sgn * (ep - em)
            S1 += sgn * k * (ep + em)
        L1 = pi * 1j * S1 / S0
        zv = (eta1r * w + L1 - two_pi_i * n) / s
        gz = -(zv + a * z).conjugate() / bbar
        y2 = gz.imag / im_tau
        n2 = round(y2)
        x2 = gz.real - y2 * re_tau
        m2 = round(x2)
        return complex(gz.real - m2 - n2 * re_tau, gz.imag - n2 * im_tau)

    return step


def _lambda_of(gm: GreenMap, z):
    return np.conj((el.wp(gm.ctx, z) - gm.a) / gm.b)


def polish_fixed_point(gm: GreenMap, z: complex, steps: int = 12) -> complex:
    """Newton-polish a fixed point of g (zero of F) with the exact Jacobian."""
    ctx = gm.ctx
    z = complex(z)
    for _ in range(steps):
        out, ok = el._zeta_wp_raw(ctx, np.asarray([z]), want=("zeta", "wp"))
        if not ok[0]:
            raise NearPole(f"fixed-point polish hit a pole at {z}")
        F = out["zeta"][0] + gm.a * z + gm.b * np.conj(z)
        Fz = gm.a - out["wp"][0]
        delta, okd = _wirtinger_newton_step(np.asarray([F]), np.asarray([Fz]),
                                            np.asarray([gm.b]))
        if not okd[0]:
            break
        z = complex(z - delta[0])
        if abs(delta[0]) < 1e-14:
            break
    return z


def _extra_pair_search(gm: GreenMap, grid: int = 24):
    """Newton on the torus defect D(z) = g(z) - z from a seed grid.

    Returns (roots, ambiguous): converged non-half-period roots (deduplicated
    modulo Lambda and z -> -z) and a flag for roots suspiciously close to a
    half-period (within 1e-7 but not on it).
    """
    ctx = gm.ctx
    i = (np.arange(grid) + 0.5) / grid
    u, v = np.meshgrid(i, i)
    z = (u + v * ctx.tau).ravel() - (1 + ctx.tau) / 2.0
    live = np.ones(z.shape, dtype=bool)
    cell_scale = 1.0 + abs(ctx.tau)
    for _ in range(50):
        out, ok = el._zeta_wp_raw(ctx, z, want=("zeta", "wp"))
        live &= ok
        F = out["zeta"] + gm.a * z + gm.b * np.conj(z)
        D = -np.conj(F) / np.conj(gm.b)          # g(z) - z
        lam = np.conj((out["wp"] - gm.a) / gm.b)
        delta, okd = _wirtinger_newton_step(D, np.full_like(D, -1.0), lam)
        live &= okd
        step_abs = np.abs(delta)
        live &= step_abs < 1.0
        z = np.where(live, z + delta, z)
        if not np.any(live) or np.all(~live | (step_abs < 1e-13)):
            break
    out, ok = el._zeta_wp_raw(ctx, z, want=("zeta",))
    F = out["zeta"] + gm.a * z + gm.b * np.conj(z)
    D = -np.conj(F) / np.conj(gm.b)
    conv = live & ok & (np.abs(D) < 1e-11 * cell_scale)
    roots = z[conv]

    halves = np.array(ctx.half_periods(), dtype=np.complex128)
    kept: list[complex] = []
    ambiguous = False
    for r in roots:
        d_half = min(float(el.mod_distance(ctx, r, p)) for p in halves)
        if d_half < 1e-9 * cell_scale:
            continue
        if d_half < 1e-7:
            ambiguous = True
            continue
        is_new = True
        for k in kept:
            if float(el.mod_distance(ctx, r, k)) < 1e-7 or \
               float(el.mod_distance(ctx, -r, k)) < 1e-7:
                is_new = False
                break
        if is_new:
            kept.append(complex(r))
    return kept, ambiguous


def fixed_points(gm: GreenMap, tol_par: float = DEFAULT_TOL_PAR) -> FixedPointReport:
    """All fixed points of g modulo Lambda_tau with multipliers and verdict.

    The three half-periods are exact fixed points and are reported
    unconditionally; the symmetric extra pair is searched by Newton on the
    torus defect g(z) - z.  Verdict: Y iff the extra pair exists (count 5),
    X iff count is 3 with no parabolic-candidate half-period, Boundary
    otherwise.
    """
    ctx = gm.ctx
    mods = half_period_multipliers(ctx, gm.a, gm.b)

    def classify(m: float) -> str:
        if m < 1.0 - tol_par:
            return CLASS_ATTRACTING
        if m > 1.0 + tol_par:
            return CLASS_REPELLING
        return CLASS_PARABOLIC

    halves = tuple(
        HalfPeriodFixedPoint(index=k + 1, location=p, multiplier_modulus=float(m),
                             cls=classify(float(m)))
        for k, (p, m) in enumerate(zip(ctx.half_periods(), mods))
    )

    roots, ambiguous = _extra_pair_search(gm)
    note = None
    extra = None
    if len(roots) > 1:
        # at most one symmetric pair can exist; keep the best-converged root
        resid = [abs(complex(map_defect(gm, r))) for r in roots]
        roots = [roots[int(np.argmin(resid))]]
        note = "multiple extra roots; kept best residual"
    if roots:
        z0 = _canonical_sign(ctx, polish_fixed_point(gm, roots[0]))
        extra = ExtraPair(z0=z0, multiplier_modulus=float(np.abs(_lambda_of(gm, z0))))

    count = 3 + (2 if extra is not None else 0)
    any_parabolic = any(h.cls == CLASS_PARABOLIC for h in halves)
    if extra is not None:
        verdict = VERDICT_Y
    elif not any_parabolic and not ambiguous:
        verdict = VERDICT_X
    else:
        verdict = VERDICT_BOUNDARY
        if ambiguous:
            note = "ambiguous root near half-period"
    return FixedPointReport(half_periods=halves, extra_pair=extra, count=count,
                            verdict=verdict, note=note)


def verdict_quick(tau: complex, eps: float = 1e-12,
                  band: float = DEFAULT_TOL_PAR) -> tuple[str, float]:
    """Cheap classification from half-period multipliers only.

    The extremal (least repelling / most attracting) half-period multiplier
    decides: < 1 - band -> X, > 1 + band -> Y, else Boundary.  Agrees with
    fixed_points away from the band because the extra pair exists exactly
    when every half-period repels.
    """
    ctx = el.make_context(tau, eps)
    a, b = coefficients(ctx)
    m = float(np.min(half_period_multipliers(ctx, a, b)))
    if m < 1.0 - band:
        return VERDICT_X, m
    if m > 1.0 + band:
        return VERDICT_Y, m
    return VERDICT_BOUNDARY, m


def two_cycles(gm: GreenMap, grid: int = 32) -> CycleReport:
    """Period-two orbits of g, found by Newton on g(g(z)) = z modulo Lambda.

    Fixed points of g are filtered out; cycles are reported as orbit classes
    {q, g(q)} (the -z mirror of a cycle is listed separately when distinct).
    """
    ctx = gm.ctx
    i = (np.arange(grid) + 0.5) / grid
    u, v = np.meshgrid(i, i)
    z = (u + v * ctx.tau).ravel() - (1 + ctx.tau) / 2.0
    live = np.ones(z.shape, dtype=bool)
    cell_scale = 1.0 + abs(ctx.tau)

    def g_and_lambda(pts, mask):
        out, ok = el._zeta_wp_raw(ctx, pts, want=("zeta", "wp"))
        mask = mask & ok
        gz = -np.conj(out["zeta"] + gm.a * pts + gm.b * np.conj(pts)) / np.conj(gm.b) + pts
        lam = np.conj((out["wp"] - gm.a) / gm.b)
        return gz, lam, mask

    for _ in range(60):
        gz, lam1, live = g_and_lambda(z, live)
        gz0, _, _ = el.reduce_cell(ctx, np.where(live, gz, 0.25))
        ggz, lam2, live = g_and_lambda(gz0, live)
        P = el.centered_diff(ctx, ggz, z)
        hz = lam2 * np.conj(lam1)
        denom = hz - 1.0
        bad = np.abs(denom) < 1e-12
        live &= ~bad
        delta = np.where(live, -P / np.where(bad, 1.0, denom), 0.0)
        step_abs = np.abs(delta)
        live &= step_abs < 1.0
        z = np.where(live, z + delta, z)
        if not np.any(live) or np.all(~live | (step_abs < 1e-13)):
            break

    gz, lam1, live = g_and_lambda(z, live)
    gz0, _, _ = el.reduce_cell(ctx, np.where(live, gz, 0.25))
    ggz, lam2, live = g_and_lambda(gz0, live)
    resid = np.abs(el.centered_diff(ctx, ggz, z))
    fixed_dist = el.mod_distance(ctx, gz0, z)
    conv = live & (resid < 1e-10 * cell_scale) & (fixed_dist > 1e-6)

    cycles: list[TwoCycle] = []
    for q, gq, l1, l2 in zip(z[conv], gz0[conv], lam1[conv], lam2[conv]):
        q = complex(q)
        gq = complex(gq)
        is_new = True
        for cyc in cycles:
            if (float(el.mod_distance(ctx, q, cyc.q)) < 1e-7 and
                    float(el.mod_distance(ctx, gq, cyc.gq)) < 1e-7) or \
               (float(el.mod_distance(ctx, q, cyc.gq)) < 1e-7 and
                    float(el.mod_distance(ctx, gq, cyc.q)) < 1e-7):
                is_new = False
                break
        if is_new:
            q0, _, _ = el.reduce_cell(ctx, q)
            gq0, _, _ = el.reduce_cell(ctx, gq)
            cycles.append(TwoCycle(q=complex(q0), gq=complex(gq0),
                                   multiplier_modulus=float(abs(l1) * abs(l2))))
    note = None if cycles else "no seeds converged"
    return CycleReport(cycles=tuple(cycles), note=note)


def green_value(gm: GreenMap, z) -> float:
    """Green's function G(z) with the additive normalization C(tau) := 0.

    Evaluated in the reduced frame: G(z) = -(1/2pi) log|theta_1(z/s | tau')|
    + (Im(z/s))^2 / (2 Im tau'), which is exactly Lambda_tau-periodic and
    differs from any other theta normalization only by a z-independent
    constant (irrelevant to critical points).
    """
    ctx = gm.ctx
    z = np.asarray(z, dtype=np.complex128)
    if np.any(el.mod_distance(ctx, z, 0.0) < el.POLE_RADIUS * ctx.min_period):
        raise NearPole("Green's function singularity at the lattice")
    w = z / ctx.scale
    val = (-log_term(ctx, w) / (2.0 * math.pi)
           + w.imag**2 / (2.0 * ctx.reduced_tau.imag))
    if np.isscalar(z) or z.ndim == 0:
        return float(val)
    return val


def log_term(ctx: LatticeContext, w):
    return el.log_abs_theta1(ctx, w)


def green_gradient_fd(gm: GreenMap, z: complex, step: float = 1e-6) -> complex:
    """Central finite-difference gradient (dG/dx, dG/dy) as G_x + i G_y."""
    z = complex(z)
    gx = (green_value(gm, z + step) - green_value(gm, z - step)) / (2.0 * step)
    gy = (green_value(gm, z + 1j * step) - green_value(gm, z - 1j * step)) / (2.0 * step)
    return complex(gx, gy)
