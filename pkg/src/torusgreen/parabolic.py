"""Double-parabolic fixed points: normal form, Fatou coordinates, arcs.

On the boundary between the three-fixed-point and five-fixed-point regions
one half-period p has |lambda(p)| = 1; the holomorphic second iterate
h = g o g then has multiplier +1 there, and because g is odd about every
half-period the local expansion has no even terms:

    h(p + u) = p + u + c3 u^3 + c5 u^5 + ...

(two attracting petals, both fixed by g).  The attracting Fatou coordinate
has the classical asymptotics

    Phi(u) ~ -1/(2 c3 u^2) + C log u + const,   C = 3/2 - c5/c3^2,

computed here as lim_N [alpha(h^N z) - N] with Richardson extrapolation in
1/N.  The antiholomorphic normalization Phi(g(z)) = conj(Phi(z)) + 1/2
pins the imaginary part of the free constant; the real part is gauge and is
fixed by the reporting convention Re Phi(g(c)) = 1/4.  The imaginary part
of Phi is the Ecalle height; the height of the critical value g(c) is the
conformal invariant that parametrizes each parabolic arc.

Arcs themselves are traced by pseudo-arclength continuation on the smooth
defect f(tau) = |wp_tau(p) - a_tau|^2 / |b_tau|^2 - 1, whose zero set is
exactly the parabolic locus for the given half-period.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import elliptic as el
from . import greenmap as gmap
from .errors import (NearPole, NoCrossing, NotParabolic, PetalEscape,
                     SingularGradient, SlowConvergence)

ARC_EDGE = "reached-window-edge"
ARC_STEPFAIL = "step-failure"

DEFAULT_IM_FLOOR = 0.02
DEFAULT_ARC_WINDOW = (-0.5, 1.5, 0.02, 4.0)


@dataclass(frozen=True)
class NormalForm:
    """Local data of h = g o g at a parabolic half-period p, coordinate u = z - p."""
    p: complex
    half_period_index: int
    c1: complex           # multiplier estimate (1 on the arc)
    c2: complex           # vanishes identically by oddness; measures FD noise
    c3: complex
    c5: complex

    @property
    def log_coefficient(self) -> complex:
        return 1.5 - self.c5 / self.c3**2


@dataclass(frozen=True)
class FatouData:
    """Normalization of the preferred Fatou coordinate of the critical-orbit petal."""
    petal_point: complex          # deep point of the critical orbit inside the petal
    direction: complex            # attracting direction the orbit follows
    normalization: complex        # additive constant w: Phi = Phi_raw + w
    entry_depth: int              # h-iterations from c to petal_point
    tail: int                     # Richardson tail length actually used
    residual: float               # translation-invariant self-consistency
    critical_value_phi_raw: complex   # Phi_raw(g(c))


@dataclass(frozen=True)
class ParabolicSeed:
    tau: complex
    half_period_index: int


@dataclass(frozen=True)
class ArcSample:
    tau: complex
    f_residual: float
    ecalle_height: float | None


@dataclass(frozen=True)
class ParabolicArc:
    half_period_index: int
    samples: tuple[ArcSample, ...]
    start_tag: str
    end_tag: str


def half_period(ctx: el.LatticeContext, index: int) -> complex:
    """Half-period by index: 1 -> 1/2, 2 -> tau/2, 3 -> (1+tau)/2."""
    return ctx.half_periods()[index - 1]


# ---------------------------------------------------------------------------
# arc defect and boundary crossing
# ---------------------------------------------------------------------------

def arc_defect(tau: complex, index: int, eps: float = 1e-12) -> float:
    """f(tau) = |wp(p) - a|^2 / |b|^2 - 1; zero exactly on the index-p arc.

    Normalized by |b|^2 so the corrector can hold |f| ~ 1e-12 uniformly in
    Im tau (the raw squared defect scales like (pi/Im tau)^2).
    """
    ctx = el.make_context(tau, eps)
    a, b = gmap.coefficients(ctx)
    p = half_period(ctx, index)
    val = complex(el.wp(ctx, p)) - a
    return float((val.real**2 + val.imag**2) / abs(b) ** 2 - 1.0)


def _min_multiplier(tau: complex, eps: float) -> tuple[float, int]:
    ctx = el.make_context(tau, eps)
    a, b = gmap.coefficients(ctx)
    mods = gmap.half_period_multipliers(ctx, a, b)
    k = int(np.argmin(mods))
    return float(mods[k]), k + 1


def find_parabolic_seed(tau_inside: complex, direction: complex,
                        s_max: float = 1.0, eps: float = 1e-12) -> ParabolicSeed:
    """Bisect along tau_inside + s*direction for the |lambda(p)| = 1 crossing.

    The crossing quantity is the extremal half-period multiplier minus one
    (negative on the three-fixed-point side, positive on the five-point
    side); it is refined to |.| < 1e-10.  Returns the crossing parameter
    and the index of the half-period that turns parabolic.
    """
    direction = complex(direction)
    direction /= abs(direction)
    m0, _ = _min_multiplier(tau_inside, eps)
    sign0 = math.copysign(1.0, m0 - 1.0)

    s_lo = 0.0
    s = max(1e-3 * (1.0 + abs(tau_inside)), 1e-4)
    found = False
    while s <= s_max:
        tau_s = tau_inside + s * direction
        if tau_s.imag <= 1e-3:
            break
        m, _ = _min_multiplier(tau_s, eps)
        if math.copysign(1.0, m - 1.0) != sign0:
            found = True
            break
        s_lo = s
        s *= 1.5
    if not found:
        raise NoCrossing(f"no parabolic crossing within s_max={s_max} from {tau_inside}")

    s_hi = s
    for _ in range(200):
        s_mid = 0.5 * (s_lo + s_hi)
        tau_m = tau_inside + s_mid * direction
        m, k = _min_multiplier(tau_m, eps)
        if abs(m - 1.0) < 1e-10:
            return ParabolicSeed(tau=tau_m, half_period_index=k)
        if math.copysign(1.0, m - 1.0) == sign0:
            s_lo = s_mid
        else:
            s_hi = s_mid
    tau_m = tau_inside + 0.5 * (s_lo + s_hi) * direction
    m, k = _min_multiplier(tau_m, eps)
    if abs(m - 1.0) < 1e-8:
        return ParabolicSeed(tau=tau_m, half_period_index=k)
    raise NoCrossing(f"bisection stalled at |m-1|={abs(m - 1.0):.2e}")


def _defect_gradient(tau: complex, index: int, eps: float,
                     h: float = 1e-6) -> complex:
    gx = (arc_defect(tau + h, index, eps) - arc_defect(tau - h, index, eps)) / (2 * h)
    gy = (arc_defect(tau + 1j * h, index, eps) - arc_defect(tau - 1j * h, index, eps)) / (2 * h)
    return complex(gx, gy)


def polish_onto_arc(tau: complex, index: int, eps: float = 1e-12,
                    target: float = 1e-12, max_steps: int = 12) -> complex:
    """Transverse 1D Newton driving the arc defect below target."""
    tau = complex(tau)
    for _ in range(max_steps):
        f = arc_defect(tau, index, eps)
        if abs(f) < target:
            return tau
        grad = _defect_gradient(tau, index, eps)
        g2 = abs(grad) ** 2
        if g2 < 1e-24:
            raise SingularGradient(f"defect gradient vanished at tau={tau}")
        tau = tau - f * grad / g2
    return tau


# ---------------------------------------------------------------------------
# local normal form
# ---------------------------------------------------------------------------

def _h_local(gm: gmap.GreenMap, p: complex, u):
    """h(p + u) - p without cell reduction (valid near the fixed point p)."""
    z1 = gmap.apply(gm, p + u)
    z2 = gmap.apply(gm, z1)
    return z2 - p


def _circle_coeffs(gm: gmap.GreenMap, p: complex, r: float, m: int,
                   kmax: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(m) / m
    u = r * np.exp(1j * theta)
    vals = _h_local(gm, p, u)
    fft = np.fft.fft(vals) / m
    ks = np.arange(kmax + 1)
    return fft[ks] / r**ks


def local_normal_form(gm: gmap.GreenMap, p: complex,
                      radius: float | None = None) -> NormalForm:
    """Taylor coefficients of h at p from circle samples, Richardson-refined.

    Two circles of radius r and r/2 (16 points each) give finite-difference
    coefficient estimates whose leading aliasing error cancels in the
    combination (2^{16-k} c_k(r/2) - c_k(r)) / (2^{16-k} - 1).
    """
    ctx = gm.ctx
    halves = ctx.half_periods()
    dists = [float(el.mod_distance(ctx, p, q)) for q in halves]
    index = int(np.argmin(dists))
    if dists[index] > 1e-8 * (1.0 + abs(ctx.tau)):
        raise NotParabolic(f"{p} is not a half-period of Lambda_tau")
    p = halves[index]

    lam = float(np.abs(el.wp(ctx, p) - gm.a)) / abs(gm.b)
    if abs(lam - 1.0) > 1e-4:
        raise NotParabolic(f"|lambda(p)| = {lam:.8f} is not within 1e-4 of 1")

    if radius is None:
        radius = 0.05 * ctx.min_period
    m = 16
    kmax = 6
    c_r = _circle_coeffs(gm, p, radius, m, kmax)
    c_h = _circle_coeffs(gm, p, radius / 2.0, m, kmax)
    ks = np.arange(kmax + 1)
    weight = 2.0 ** (m - ks)
    coeffs = (weight * c_h - c_r) / (weight - 1.0)

    return NormalForm(p=p, half_period_index=index + 1,
                      c1=complex(coeffs[1]), c2=complex(coeffs[2]),
                      c3=complex(coeffs[3]), c5=complex(coeffs[5]))


# ---------------------------------------------------------------------------
# Fatou coordinate
# ---------------------------------------------------------------------------

def _attracting_directions(c3: complex) -> tuple[complex, complex]:
    d = cmath.exp(1j * (math.pi - cmath.phase(c3)) / 2.0)
    return d, -d


def _branch_log(u: complex, direction: complex) -> complex:
    """log u continuous on the sector arg(u/direction) in (-pi, pi)."""
    rel = u / direction
    return cmath.log(abs(u)) + 1j * (cmath.phase(rel) + cmath.phase(direction))


class _PetalOrbit:
    """h-orbit bookkeeping relative to the parabolic point p."""

    def __init__(self, gm: gmap.GreenMap, nf: NormalForm, z: complex,
                 budget: int):
        self.step = gmap.stepper(gm)
        self.ctx = gm.ctx
        self.nf = nf
        self.z = complex(z)
        self.depth = 0
        self.budget = budget
        self.u_enter = 0.05 / math.sqrt(abs(nf.c3))
        self.w_min = 4.0

    def u(self) -> complex:
        return complex(el.centered_diff(self.ctx, self.z, self.nf.p))

    def advance(self, n: int) -> None:
        for _ in range(n):
            try:
                self.z = self.step(self.step(self.z))
            except NearPole as exc:
                raise PetalEscape(f"orbit hit a pole at depth {self.depth}") from exc
            self.depth += 1
            if self.depth > self.budget:
                raise SlowConvergence(f"no petal entry within {self.budget} h-steps")

    def run_to_petal(self) -> complex:
        while True:
            u = self.u()
            if abs(u) < self.u_enter:
                w = -1.0 / (2.0 * self.nf.c3 * u * u)
                if w.real > self.w_min:
                    return u
            self.advance(1)


def _phi_raw(gm: gmap.GreenMap, nf: NormalForm, z: complex, direction: complex,
             tail: int, budget: int = 10**6,
             im_tol: float = 3e-7) -> tuple[complex, int, int, complex]:
    """lim_N alpha(h^N z) - N by Richardson in 1/N.

    Returns (phi_raw, entry_depth, tail_used, tail_gap); the real part of
    tail_gap carries the multiplier-drift error, its imaginary part is the
    convergence gauge used for the adaptive tail.
    """
    C = nf.log_coefficient

    def alpha(u: complex) -> complex:
        return -1.0 / (2.0 * nf.c3 * u * u) + C * _branch_log(u, direction)

    orbit = _PetalOrbit(gm, nf, z, budget)
    orbit.run_to_petal()
    n_entry = orbit.depth
    while True:
        orbit.advance(n_entry + tail - orbit.depth)
        e1 = alpha(orbit.u()) - orbit.depth
        orbit.advance(tail)
        e2 = alpha(orbit.u()) - orbit.depth
        gap = e2 - e1
        if abs(gap.imag) < im_tol or tail >= 64000:
            return 2.0 * e2 - e1, n_entry, tail, gap
        tail *= 2


def fatou_data(gm: gmap.GreenMap, nf: NormalForm, tail: int = 1000,
               budget: int = 10**6) -> FatouData:
    """Normalize the preferred Fatou coordinate on the critical-orbit petal.

    Phi = Phi_raw + w with Im w forced by Phi(g(z)) = conj(Phi(z)) + 1/2 at
    a deep orbit point and Re w set so that Re Phi(g(c)) = 1/4.  The
    recorded residual bounds the translation-invariant defects: |Re d| for
    the antiholomorphic constant, its drift between two depths, and the
    imaginary tail gaps (the real part of the Abel constant is the
    horizontal gauge the coordinate is only ever defined up to).
    """
    ctx = gm.ctx
    step = gmap.stepper(gm)

    probe = _PetalOrbit(gm, nf, gm.c, budget)
    u_entry = probe.run_to_petal()
    d1, d2 = _attracting_directions(nf.c3)
    direction = d1 if abs(u_entry / abs(u_entry) - d1) <= abs(u_entry / abs(u_entry) - d2) else d2
    z_deep = probe.z
    n_c = probe.depth

    g_deep = step(z_deep)
    z_deep2 = step(g_deep)          # h(z_deep)
    g_deep2 = step(z_deep2)         # g(h(z_deep)) = h(g(z_deep))

    A, _, tail_a, gap_a = _phi_raw(gm, nf, z_deep, direction, tail, budget)
    B, _, tail_b, gap_b = _phi_raw(gm, nf, g_deep, direction, tail, budget)
    A2, _, _, _ = _phi_raw(gm, nf, z_deep2, direction, tail, budget)
    B2, _, _, _ = _phi_raw(gm, nf, g_deep2, direction, tail, budget)

    d = B - A.conjugate() - 0.5
    d2c = B2 - A2.conjugate() - 0.5
    abel = A2 - A - 1.0
    residual = max(abs(d.real), abs(d - d2c), abs(gap_a.imag), abs(gap_b.imag),
                   abs(abel.imag))

    im_w = -0.5 * d.imag
    # g(z_deep) = g^{2 n_c + 1}(c) = h^{n_c}(g(c)), so Phi_raw(g(c)) = B - n_c
    phi_gc_raw = B - n_c
    re_w = 0.25 - phi_gc_raw.real
    w = complex(re_w, im_w)

    return FatouData(petal_point=z_deep, direction=direction, normalization=w,
                     entry_depth=n_c, tail=max(tail_a, tail_b),
                     residual=float(residual), critical_value_phi_raw=phi_gc_raw)


def fatou_coordinate(gm: gmap.GreenMap, nf: NormalForm, z: complex,
                     data: FatouData | None = None, tail: int = 1000,
                     budget: int = 10**6) -> complex:
    """Preferred Fatou coordinate Phi(z) on the critical-orbit petal.

    Satisfies Phi(h(z)) = Phi(z) + 1 and Phi(g(z)) = conj(Phi(z)) + 1/2 up
    to the recorded residuals; defined for any z whose h-orbit enters the
    petal (PetalEscape / SlowConvergence otherwise).
    """
    if data is None:
        data = fatou_data(gm, nf, tail=tail, budget=budget)
    phi, _, _, _ = _phi_raw(gm, nf, z, data.direction, tail, budget)
    return phi + data.normalization


def critical_ecalle_height(gm: gmap.GreenMap, polish: bool = True,
                           tail: int = 1000, eps: float | None = None) -> float:
    """Im Phi(g(c)) in the preferred Fatou coordinate: the critical Ecalle height.

    polish=True first drives the parameter onto the arc (defect < 1e-12) so
    that the residual multiplier offset does not pollute the orbit; the map
    is rebuilt at the polished parameter.
    """
    ctx = gm.ctx
    eps = ctx.eps if eps is None else eps
    mods = gmap.half_period_multipliers(ctx, gm.a, gm.b)
    index = int(np.argmin(np.abs(mods - 1.0))) + 1
    if abs(float(mods[index - 1]) - 1.0) > 1e-4:
        raise NotParabolic(
            f"no half-period within 1e-4 of multiplier 1 at tau={ctx.tau}")

    if polish and abs(arc_defect(ctx.tau, index, eps)) > 1e-12:
        tau_p = polish_onto_arc(ctx.tau, index, eps)
        ctx = el.make_context(tau_p, eps)
        a, b = gmap.coefficients(ctx)
        c = gmap.critical_point_near(ctx, a, gm.c)
        gm = gmap.GreenMap(ctx=ctx, a=a, b=b, c=c)

    nf = local_normal_form(gm, half_period(ctx, index))
    data = fatou_data(gm, nf, tail=tail)
    return float(data.critical_value_phi_raw.imag + data.normalization.imag)


# ---------------------------------------------------------------------------
# arc tracing
# ---------------------------------------------------------------------------

def trace_parabolic_arc(seed: complex, half_period_index: int,
                        window=DEFAULT_ARC_WINDOW,
                        im_floor: float = DEFAULT_IM_FLOOR,
                        height_every: int = 5,
                        step0: float | None = None,
                        max_samples: int = 600,
                        eps: float = 1e-12) -> ParabolicArc:
    """Pseudo-arclength continuation of the parabolic arc through the seed.

    Predictor along the tangent of {f = 0} (f the normalized defect for the
    indexed half-period), corrector a transverse 1D Newton to |f| < 1e-12;
    traced in both directions until Im tau < im_floor or the window edge
    (tag reached-window-edge) or persistent corrector failure (step-failure).
    Critical Ecalle height is recorded at every height_every-th sample
    (0 disables heights).
    """
    index = half_period_index
    re_min, re_max, w_im_min, w_im_max = window
    floor = max(im_floor, w_im_min)

    def inside(t: complex) -> bool:
        return re_min <= t.real <= re_max and floor <= t.imag <= w_im_max

    tau0 = polish_onto_arc(seed, index, eps)
    if not inside(tau0):
        raise NoCrossing(f"seed {seed} polishes outside the window")

    def trace_direction(sign: float):
        pts: list[complex] = []
        resids: list[float] = []
        tau = tau0
        grad = _defect_gradient(tau, index, eps)
        if abs(grad) < 1e-12:
            raise SingularGradient(f"defect gradient vanished at tau={tau}")
        tangent = 1j * grad / abs(grad) * sign
        h = step0 if step0 is not None else 0.01 * (1.0 + abs(tau0))
        h_min = 1e-7
        h_max = 0.04 * (1.0 + abs(tau0))
        tag = ARC_STEPFAIL
        while len(pts) < max_samples:
            # the defect landscape sharpens like Im tau near the real axis
            h_cap = min(h_max, 0.25 * tau.imag)
            h = min(h, h_cap)
            pred = tau + h * tangent
            if not inside(pred):
                tag = ARC_EDGE
                break
            grad_p = _defect_gradient(pred, index, eps)
            if abs(grad_p) < 1e-7:
                # cusp-degenerate zone: the defect flattens below double
                # resolution (|lambda| - 1 underflows near modular cusps)
                tag = ARC_STEPFAIL
                break
            cand = pred
            ok = False
            for _ in range(8):
                f = arc_defect(cand, index, eps)
                if abs(f) < 1e-12:
                    ok = True
                    break
                delta = -f * grad_p / abs(grad_p) ** 2
                if abs(delta) > 2.0 * h + 1e-9:
                    break
                cand = cand + delta
                if not (re_min - 1.0 <= cand.real <= re_max + 1.0 and
                        0.005 <= cand.imag <= w_im_max + 1.0):
                    break
            new_tangent = 1j * grad_p / abs(grad_p)
            if (new_tangent.real * tangent.real + new_tangent.imag * tangent.imag) < 0:
                new_tangent = -new_tangent
            cosine = (new_tangent.real * tangent.real + new_tangent.imag * tangent.imag)
            if not ok or not inside(cand) or abs(cand - tau) > 3.0 * h + 1e-9 \
                    or cosine < 0.77:
                h *= 0.5
                if h < h_min:
                    tag = ARC_STEPFAIL
                    break
                continue
            tangent = new_tangent
            tau = cand
            pts.append(tau)
            resids.append(abs(arc_defect(tau, index, eps)))
            h = min(h * 1.3, h_max)
        else:
            tag = ARC_STEPFAIL
        return pts, resids, tag

    fwd_pts, fwd_res, fwd_tag = trace_direction(+1.0)
    bwd_pts, bwd_res, bwd_tag = trace_direction(-1.0)

    taus = list(reversed(bwd_pts)) + [tau0] + fwd_pts
    resids = list(reversed(bwd_res)) + [abs(arc_defect(tau0, index, eps))] + fwd_res

    heights: list[float | None] = [None] * len(taus)
    if height_every:
        for j in range(0, len(taus), height_every):
            ctx = el.make_context(taus[j], eps)
            a, b = gmap.coefficients(ctx)
            c = gmap._critical_point(ctx, a, None)
            gm = gmap.GreenMap(ctx=ctx, a=a, b=b, c=c)
            heights[j] = critical_ecalle_height(gm, polish=False)

    samples = tuple(ArcSample(tau=t, f_residual=r, ecalle_height=hh)
                    for t, r, hh in zip(taus, resids, heights))
    return ParabolicArc(half_period_index=index, samples=samples,
                        start_tag=bwd_tag, end_tag=fwd_tag)
