"""Koenigs ratio, component centers, covering degrees, and internal rays.

For a hyperbolic parameter the critical orbit converges to an attracting
fixed point z* of g.  In a linearizing (Koenigs) coordinate kappa of the
holomorphic second iterate, the two interleaved critical orbits have the
scale-free ratio

    rho = kappa(g(c)) / kappa(c) = lim_n (g^{2n+1}(c) - z*) / (g^{2n}(c) - z*),

a conformal conjugacy invariant with |rho| = |lambda(z*)| < 1.  rho := 0
at super-attracting (center) parameters.  The ratio limit is computed with
two levels of Richardson extrapolation in the known multiplier
mu = |lambda|^2, which is real and positive for antiholomorphic maps.

rho is a real-analytic branched cover of the unit disc on each hyperbolic
component, ramified only over 0; winding_degree measures its degree by
lifting a |rho| = const loop, and trace_internal_ray follows arg rho = const
curves from the center toward the parabolic boundary.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import elliptic as el
from . import greenmap as gmap
from . import parabolic as par
from .errors import (LeftComponent, LiftBroken, NearPole, NoConvergence,
                     NoCrossing, NonPositiveImaginaryPart, NotConverging,
                     NotParabolic, PetalEscape, SlowConvergence)

SUPER_TOL = 1e-8

#: generous default window for ray escape detection (re_min, re_max, im_min, im_max)
DEFAULT_RAY_WINDOW = (-1.0, 2.0, 0.02, 8.0)


@dataclass(frozen=True)
class KoenigsResult:
    rho: complex
    attractor: complex
    lambda_modulus: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class LandedOnArc:
    half_period_index: int
    ecalle_height: float
    tau: complex

    kind = "landed-on-arc"


@dataclass(frozen=True)
class EscapedToBoundary:
    tau: complex

    kind = "escaped-to-boundary"


@dataclass(frozen=True)
class Truncated:
    tau: complex
    reason: str

    kind = "truncated"


@dataclass(frozen=True)
class RayPath:
    angle: float
    branch: int
    samples: tuple[complex, ...]
    rhos: tuple[complex, ...]
    terminal: LandedOnArc | EscapedToBoundary | Truncated


def ratio_limit(step, z_even, z_odd, z_star, mu, diff, tol=1e-9,
                max_steps=100_000):
    """Orbit-ratio limit with two Richardson levels in the multiplier mu.

    step advances the orbit by one application of g; z_even/z_odd are the
    current even/odd critical-orbit points; diff(z, w) is the (possibly
    torus-metric) difference.  Returns (rho, steps_used, converged).
    """
    mu = float(mu)
    raw_prev = None
    r1_prev = None
    r2_prev = None
    best = None
    steps = 0
    use_rich = 1e-6 < mu < 1.0 - 1e-15
    while steps < max_steps:
        u = diff(z_even, z_star)
        v = diff(z_odd, z_star)
        au = abs(u)
        if au < 1e-13 * (1.0 + abs(z_star)):
            return (best if best is not None else 0j), steps, best is not None
        raw = v / u
        est = raw
        if use_rich and raw_prev is not None:
            r1 = (raw - mu * raw_prev) / (1.0 - mu)
            if r1_prev is not None:
                r2 = (r1 - mu * mu * r1_prev) / (1.0 - mu * mu)
                est = r2
                if r2_prev is not None and abs(r2 - r2_prev) < tol:
                    return r2, steps, True
                r2_prev = r2
            r1_prev = r1
        elif raw_prev is not None and abs(raw - raw_prev) < tol:
            return raw, steps, True
        raw_prev = raw
        best = est
        z_even = step(z_odd)
        z_odd = step(z_even)
        steps += 2
    raise NotConverging(f"ratio limit did not settle within {max_steps} steps")


def koenigs_ratio(gm: gmap.GreenMap, super_tol: float = SUPER_TOL,
                  tol: float = 1e-9, max_steps: int = 100_000) -> KoenigsResult:
    """Koenigs ratio of the critical orbit of g_tau.

    Iterates c, g(c), ... until the even subsequence settles, Newton-polishes
    the attractor on the fixed-point equation, and forms the multiplier-free
    orbit ratio.  rho := 0 when |lambda(z*)| < super_tol.
    """
    ctx = gm.ctx
    step = gmap.stepper(gm)
    cell = 1.0 + abs(ctx.tau)

    def diff(z, w):
        return el.centered_diff(ctx, z, w)

    ze = complex(gm.c)
    try:
        zo = step(ze)
    except NearPole as exc:
        raise NotConverging(f"critical orbit hit a pole immediately: {exc}") from exc

    steps = 1
    settle_budget = max_steps
    prev_even = ze
    settled = False
    while steps < settle_budget:
        try:
            ze_next = step(zo)
            zo_next = step(ze_next)
        except NearPole as exc:
            raise NotConverging(f"critical orbit hit a pole: {exc}") from exc
        steps += 2
        ze, zo = ze_next, zo_next
        if abs(diff(ze, prev_even)) < 1e-3 * cell:
            settled = True
            break
        prev_even = ze
    if not settled:
        raise NotConverging(f"critical orbit did not settle in {settle_budget} steps")

    z_star = gmap.polish_fixed_point(gm, ze)
    lam_mod = float(np.abs(el.wp(ctx, z_star) - gm.a)) / abs(gm.b)
    resid = abs(complex(gmap.map_defect(gm, z_star)))
    if resid > 1e-8 * cell or lam_mod >= 1.0:
        raise NotConverging(
            f"attractor polish failed (residual {resid:.2e}, |lambda| {lam_mod:.6f})")
    if lam_mod < super_tol:
        return KoenigsResult(rho=0j, attractor=z_star, lambda_modulus=lam_mod,
                             iterations=steps, converged=True)

    mu = lam_mod * lam_mod
    rho, used, converged = ratio_limit(step, ze, zo, z_star, mu, diff, tol=tol,
                                       max_steps=max_steps - steps)
    return KoenigsResult(rho=complex(rho), attractor=z_star,
                         lambda_modulus=lam_mod, iterations=steps + used,
                         converged=converged)


def rho_at(tau: complex, eps: float = 1e-12, tol: float = 1e-9,
           max_steps: int = 200_000) -> KoenigsResult:
    """Convenience: build g_tau and return its Koenigs data."""
    gm = gmap.build(el.make_context(tau, eps))
    return koenigs_ratio(gm, tol=tol, max_steps=max_steps)


# ---------------------------------------------------------------------------
# component centers
# ---------------------------------------------------------------------------

def _fd_newton_2d(func, tau0, target_resid, max_steps=100, fd_step=1e-6,
                  on_step=None):
    """Damped 2D Newton on a complex-valued smooth function of tau."""
    tau = complex(tau0)
    f = func(tau)
    for _ in range(max_steps):
        if abs(f) < target_resid:
            return tau
        fx = (func(tau + fd_step) - func(tau - fd_step)) / (2.0 * fd_step)
        fy = (func(tau + 1j * fd_step) - func(tau - 1j * fd_step)) / (2.0 * fd_step)
        det = fx.real * fy.imag - fy.real * fx.imag
        if abs(det) < 1e-300:
            raise NoConvergence("singular Jacobian in parameter Newton")
        dx = (-f.real * fy.imag + fy.real * f.imag) / det
        dy = (-fx.real * f.imag + f.real * fx.imag) / det
        moved = False
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625):
            cand = tau + damp * (dx + 1j * dy)
            if cand.imag <= 1e-3:
                continue
            f_cand = func(cand)
            if abs(f_cand) < abs(f):
                tau, f = cand, f_cand
                moved = True
                break
        if not moved:
            raise NoConvergence(f"parameter Newton stalled at tau={tau}, |f|={abs(f):.3e}")
        if on_step is not None:
            on_step(tau)
    if abs(f) < target_resid:
        return tau
    raise NoConvergence(f"parameter Newton exhausted its budget, |f|={abs(f):.3e}")


def find_center(tau_seed: complex, eps: float = 1e-12) -> complex:
    """The super-attracting (center) parameter of the component containing tau_seed.

    For a component of int(X) the attracting fixed point is the half-period
    p and the center condition a(tau) = wp_tau(p) is a smooth 2D root
    problem (at the center the two critical points merge at p, so the
    defect g(c) - c has a square-root cusp there and cannot be driven to
    1e-10 directly).  For a component of Y the critical point is simple and
    the damped Newton runs on g_tau(c_tau) - c_tau itself.  Either way the
    returned parameter is super-attracting: |lambda(z*)| < 1e-8.
    """
    ctx0 = el.make_context(tau_seed, eps)
    gm0 = gmap.build(ctx0)
    rep0 = gmap.fixed_points(gm0)
    if rep0.verdict == gmap.VERDICT_BOUNDARY:
        raise LeftComponent(f"seed {tau_seed} classifies as Boundary")

    if rep0.verdict == gmap.VERDICT_X:
        k = int(np.argmin([h.multiplier_modulus for h in rep0.half_periods]))

        def defect(tau):
            ctx = el.make_context(tau, eps)
            a, _ = gmap.coefficients(ctx)
            p = ctx.half_periods()[k]
            return complex(a - el.wp(ctx, p))

        tau_star = _fd_newton_2d(defect, tau_seed, target_resid=1e-12)
    else:
        c_ref = [complex(gm0.c)]

        def defect(tau):
            ctx = el.make_context(tau, eps)
            a, b = gmap.coefficients(ctx)
            c = gmap.critical_point_near(ctx, a, c_ref[0])
            gm = gmap.GreenMap(ctx=ctx, a=a, b=b, c=c)
            return complex(el.centered_diff(ctx, gmap.apply(gm, c), c))

        def track(tau):
            ctx = el.make_context(tau, eps)
            a, _ = gmap.coefficients(ctx)
            c_ref[0] = gmap.critical_point_near(ctx, a, c_ref[0])

        tau_star = _fd_newton_2d(defect, tau_seed, target_resid=1e-11,
                                 on_step=track)

    for t in np.linspace(0.0, 1.0, 25)[1:]:
        tau_t = tau_seed + t * (tau_star - tau_seed)
        verdict, _ = gmap.verdict_quick(tau_t, eps)
        if verdict != rep0.verdict:
            raise LeftComponent(
                f"Newton path left the component near tau={tau_t} ({verdict})")
    return complex(tau_star)


# ---------------------------------------------------------------------------
# covering degree of rho
# ---------------------------------------------------------------------------

def _rho_or_none(tau, eps, tol):
    try:
        return rho_at(tau, eps=eps, tol=tol).rho
    except (NotConverging, NearPole, NonPositiveImaginaryPart):
        return None


def _level_start(center, radius_in_rho, direction, eps, tol):
    """March outward from the center until |rho| = radius, then refine."""
    base = max(0.02 * (1.0 + abs(center.imag)), 1e-3)
    s_lo, r_lo = 0.0, 0.0
    s = base
    for _ in range(60):
        rho = _rho_or_none(center + s * direction, eps, tol)
        if rho is None:
            s *= 0.7
            continue
        if abs(rho) >= radius_in_rho:
            break
        s_lo, r_lo = s, abs(rho)
        s *= 1.35
    else:
        raise LiftBroken(f"could not bracket |rho| = {radius_in_rho} from {center}")
    s_hi, r_hi = s, abs(rho)
    for _ in range(60):
        if r_hi - r_lo < 1e-14:
            break
        s_mid = s_lo + (radius_in_rho - r_lo) * (s_hi - s_lo) / (r_hi - r_lo)
        s_mid = min(max(s_mid, s_lo + 0.05 * (s_hi - s_lo)),
                    s_hi - 0.05 * (s_hi - s_lo))
        rho = _rho_or_none(center + s_mid * direction, eps, tol)
        if rho is None:
            raise LiftBroken("rho evaluation failed during level bracketing")
        if abs(abs(rho) - radius_in_rho) < 1e-8:
            return center + s_mid * direction, rho
        if abs(rho) < radius_in_rho:
            s_lo, r_lo = s_mid, abs(rho)
        else:
            s_hi, r_hi = s_mid, abs(rho)
    rho = _rho_or_none(center + s_lo * direction, eps, tol)
    return center + s_lo * direction, rho


def winding_degree(center: complex, radius_in_rho: float, eps: float = 1e-12,
                   tol: float = 1e-9, max_steps: int = 4096) -> int:
    """Total winding of arg rho along the closed loop {|rho| = radius} around center.

    Lifts the level curve by walking the polar angle about the center and
    holding |rho| with a radial secant corrector; the accumulated unwrapped
    increment of arg rho over one closed loop is the covering degree (with
    orientation sign).
    """
    if not (0.0 < radius_in_rho < 0.9):
        raise ValueError("radius_in_rho must lie in (0, 0.9)")
    tau0, rho0 = _level_start(center, radius_in_rho, 1.0 + 0j, eps, tol)

    def corrected(phi, u_guess):
        """Hold |rho| = radius on the ray center + u e^{i phi}."""
        direction = cmath.exp(1j * phi)
        u0, u1 = u_guess, u_guess * 1.02
        f0 = None
        rho1 = None
        for _ in range(20):
            rho0_ = _rho_or_none(center + u0 * direction, eps, tol)
            rho1 = _rho_or_none(center + u1 * direction, eps, tol)
            if rho0_ is None or rho1 is None:
                return None
            f0 = abs(rho0_) - radius_in_rho
            f1 = abs(rho1) - radius_in_rho
            if abs(f1) < 1e-7:
                return center + u1 * direction, rho1
            if f1 == f0:
                return None
            u2 = u1 - f1 * (u1 - u0) / (f1 - f0)
            if u2 <= 0:
                return None
            u0, u1 = u1, u2
        return None

    total = 0.0
    phi = cmath.phase(tau0 - center)
    phi_walked = 0.0
    rho_prev = rho0
    tau_prev = tau0
    dphi = 2.0 * math.pi / 64.0
    steps = 0
    while phi_walked < 2.0 * math.pi - 1e-12 and steps < max_steps:
        steps += 1
        dphi_eff = min(dphi, 2.0 * math.pi - phi_walked)
        res = corrected(phi + dphi_eff, abs(tau_prev - center))
        if res is None:
            dphi *= 0.5
            if dphi < 2.0 * math.pi / 8192.0:
                raise LiftBroken("level-curve corrector failed")
            continue
        tau_new, rho_new = res
        darg = cmath.phase(rho_new / rho_prev)
        if abs(darg) > 1.2:
            dphi *= 0.5
            if dphi < 2.0 * math.pi / 8192.0:
                raise LiftBroken("arg rho jump too large; level curve lost")
            continue
        total += darg
        phi += dphi_eff
        phi_walked += dphi_eff
        tau_prev, rho_prev = tau_new, rho_new
        if steps % 8 == 0 and dphi < 2.0 * math.pi / 64.0:
            dphi *= 1.5
    if phi_walked < 2.0 * math.pi - 1e-12:
        raise LiftBroken("loop did not close within the step budget")
    winding = round(total / (2.0 * math.pi))
    if abs(total / (2.0 * math.pi) - winding) > 0.1:
        raise LiftBroken(f"non-integer winding {total / (2.0 * math.pi):.4f}")
    return int(winding)


# ---------------------------------------------------------------------------
# internal rays
# ---------------------------------------------------------------------------

def ray_branch_directions(center: complex, angle: float, eps: float = 1e-12,
                          tol: float = 1e-9, n_probe: int = 64):
    """Unit directions of the internal-ray branches at a given angle.

    rho restricted to a small circle around the center winds d times
    (d = covering degree), so arg rho meets the target angle exactly d
    times; each crossing seeds one branch.
    """
    target = 2.0 * math.pi * (angle % 1.0)
    base = max(0.02 * (1.0 + abs(center.imag)), 1e-3)
    s = base
    probes = None
    for _ in range(24):
        psis = np.linspace(0.0, 2.0 * math.pi, n_probe, endpoint=False)
        rhos = []
        ok = True
        for psi in psis:
            rho = _rho_or_none(center + s * cmath.exp(1j * psi), eps, tol)
            if rho is None:
                ok = False
                break
            rhos.append(rho)
        if ok:
            mx = max(abs(r) for r in rhos)
            if 0.02 <= mx <= 0.3:
                probes = (psis, rhos)
                break
            s *= 0.5 if mx > 0.3 else 1.7
        else:
            s *= 0.6
    if probes is None:
        raise LiftBroken("could not probe a small rho-circle around the center")
    psis, rhos = probes
    args = np.unwrap([cmath.phase(r) for r in rhos])
    # close the loop: continue the unwrapped argument back to psi = 2 pi
    psis_ext = np.append(psis, 2.0 * math.pi)
    args_ext = np.append(args, args[-1] + cmath.phase(rhos[0] / rhos[-1]))
    crossings = []
    for j in range(len(psis_ext) - 1):
        a0, a1 = args_ext[j], args_ext[j + 1]
        if a0 == a1:
            continue
        lo, hi = min(a0, a1), max(a0, a1)
        k0 = math.ceil((lo - target) / (2.0 * math.pi) - 1e-12)
        k1 = math.floor((hi - target) / (2.0 * math.pi) + 1e-12)
        for k in range(k0, k1 + 1):
            t = (target + 2.0 * math.pi * k - a0) / (a1 - a0)
            if -1e-9 <= t < 1.0:
                crossings.append(psis_ext[j] + t * (psis_ext[j + 1] - psis_ext[j]))
    dirs = [cmath.exp(1j * psi) for psi in sorted(set(round(c, 12) for c in crossings))]
    return dirs, s


def trace_internal_ray(center: complex, angle: float, start_direction: complex,
                       window=DEFAULT_RAY_WINDOW, im_floor: float = 0.02,
                       rho_max: float = 1.0 - 1e-4, max_steps: int = 400,
                       eps: float = 1e-12, tol: float = 1e-9) -> RayPath:
    """Predictor-corrector lift of {arg rho = 2 pi angle} from the center outward.

    |rho| increases monotonically along the path.  Terminates LandedOnArc at
    |rho| >= rho_max (recording the nearest parabolic parameter and its
    critical Ecalle height), EscapedToBoundary when the path leaves the
    window or drops below the Im tau floor, Truncated on budget exhaustion.
    """
    target = 2.0 * math.pi * (angle % 1.0)
    dirs, s_seed = ray_branch_directions(center, angle, eps=eps, tol=tol)
    if not dirs:
        raise LiftBroken("no ray branch found at this angle")
    want = cmath.phase(complex(start_direction))
    branch = int(np.argmin([abs(cmath.phase(d / cmath.exp(1j * want))) for d in dirs]))
    tau = center + s_seed * dirs[branch]
    rho = _rho_or_none(tau, eps, tol)
    if rho is None:
        raise LiftBroken("seed rho evaluation failed")

    samples = [complex(tau)]
    rhos = [complex(rho)]
    re_min, re_max, w_im_min, w_im_max = window

    def in_window(t):
        return (re_min <= t.real <= re_max and
                max(im_floor, w_im_min) <= t.imag <= w_im_max)

    def correct(tau_guess, r_target):
        """2D Newton on rho(tau) = r_target e^{i target} with FD Jacobian."""
        t = tau_guess
        tgt = r_target * cmath.exp(1j * target)
        for _ in range(8):
            rho_t = _rho_or_none(t, eps, tol)
            if rho_t is None:
                return None
            f = rho_t - tgt
            if abs(f) < 1e-7:
                return t, rho_t
            h = 1e-6 * (1.0 + abs(t))
            rx = _rho_or_none(t + h, eps, tol)
            ry = _rho_or_none(t + 1j * h, eps, tol)
            if rx is None or ry is None:
                return None
            fx = (rx - rho_t) / h
            fy = (ry - rho_t) / h
            det = fx.real * fy.imag - fy.real * fx.imag
            if abs(det) < 1e-300:
                return None
            dx = (-f.real * fy.imag + fy.real * f.imag) / det
            dy = (-fx.real * f.imag + f.real * fx.imag) / det
            t = t + dx + 1j * dy
        rho_t = _rho_or_none(t, eps, tol)
        if rho_t is not None and abs(rho_t - tgt) < 1e-6:
            return t, rho_t
        return None

    r = abs(rho)
    dr = 0.05
    prev_tau = tau
    for _ in range(max_steps):
        if r >= rho_max - 1e-12:
            direction = tau - prev_tau
            if abs(direction) == 0.0:
                direction = tau - center
            direction /= abs(direction)
            try:
                seed = par.find_parabolic_seed(tau, direction, eps=eps,
                                               s_max=0.2 * (1.0 + abs(tau)))
                gm_arc = gmap.build(el.make_context(seed.tau, eps))
                height = par.critical_ecalle_height(gm_arc)
            except (NoCrossing, NotConverging, NotParabolic, PetalEscape,
                    SlowConvergence) as exc:
                return RayPath(angle=angle, branch=branch, samples=tuple(samples),
                               rhos=tuple(rhos),
                               terminal=Truncated(tau=tau, reason=str(exc)))
            return RayPath(angle=angle, branch=branch, samples=tuple(samples),
                           rhos=tuple(rhos),
                           terminal=LandedOnArc(half_period_index=seed.half_period_index,
                                                ecalle_height=height, tau=seed.tau))
        dr = min(dr, 0.5 * (1.0 - r))
        dr = max(dr, 1e-5)
        r_next = min(r + dr, rho_max)
        if len(samples) >= 2:
            scale = (r_next - r) / max(abs(rhos[-1]) - abs(rhos[-2]), 1e-12)
            guess = tau + (tau - samples[-2]) * min(scale, 4.0)
        else:
            guess = tau + (tau - center) * (r_next - r) / max(r, 1e-3)
        res = correct(guess, r_next)
        if res is None:
            dr *= 0.5
            if dr <= 1e-5:
                return RayPath(angle=angle, branch=branch, samples=tuple(samples),
                               rhos=tuple(rhos),
                               terminal=Truncated(tau=tau, reason="corrector failure"))
            continue
        prev_tau = tau
        tau, rho = res
        if not in_window(tau):
            return RayPath(angle=angle, branch=branch, samples=tuple(samples),
                           rhos=tuple(rhos), terminal=EscapedToBoundary(tau=tau))
        samples.append(complex(tau))
        rhos.append(complex(rho))
        r = abs(rho)
        dr *= 1.4
    return RayPath(angle=angle, branch=branch, samples=tuple(samples),
                   rhos=tuple(rhos),
                   terminal=Truncated(tau=tau, reason="step budget"))
