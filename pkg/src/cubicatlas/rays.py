"""Exact ray angles and numerically traced external and internal rays."""

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dynamics import (
    CubicParam, basin_chart, critical_cycle, forward, forward_with_derivative,
    local_degree,
)
from .errors import NoConvergence, OutsideSpStar, ParabolicSuspect, RayBifurcates, ValidationError

TOP_LEVEL = math.log(1e6)  # potential where the asymptotic inverse Böttcher map is exact
STEPS_PER_LEVEL = 12  # samples per factor 3 (external) or 2 (internal) in potential
EXTERNAL_MIN_LEVEL = 1e-6
INTERNAL_MAX_LEVEL = -1e-6
PARABOLIC_BAND = 1e-4
LANDING_TOL = 1e-10
ANGLE_CHECK = 0.05  # turns


@dataclass(frozen=True)
class RayAngle:
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0:
            raise ValidationError("denominator must be positive")
        num = self.numerator % self.denominator
        g = math.gcd(num, self.denominator)
        object.__setattr__(self, "numerator", num // g)
        object.__setattr__(self, "denominator", self.denominator // g)

    @classmethod
    def of(cls, x):
        x = Fraction(x)
        return cls(x.numerator, x.denominator)

    @property
    def value(self):
        return self.numerator / self.denominator

    @property
    def fraction(self):
        return Fraction(self.numerator, self.denominator)

    def times(self, m):
        return RayAngle(self.numerator * m, self.denominator)

    def double(self):
        return self.times(2)

    def triple(self):
        return self.times(3)

    def period(self, m):
        """Exact period under t -> m t, or None when t is strictly preperiodic."""
        den = self.denominator
        if den == 1:
            return 1
        if math.gcd(den, m) != 1:
            return None
        k, x = 1, m % den
        while x != 1:
            x = x * m % den
            k += 1
        return k

    def preperiod(self, m):
        """Smallest q with m^q t periodic under multiplication by m."""
        q, t = 0, self
        while t.period(m) is None:
            t, q = t.times(m), q + 1
        return q

    def preimages(self, m):
        return tuple(RayAngle(self.numerator + k * self.denominator, m * self.denominator)
                     for k in range(m))

    def shifted(self, m, k):
        """Angle m^k t mod 1 as a float, computed in integers."""
        return pow(m, k, self.denominator) * self.numerator % self.denominator / self.denominator

    def __lt__(self, other):
        return self.numerator * other.denominator < other.numerator * self.denominator

    def __le__(self, other):
        return self == other or self < other

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"


def angle_double_orbit(t):
    """Orbit of t under doubling until the first repeat."""
    out = [t]
    while True:
        nxt = out[-1].double()
        if nxt in out:
            return tuple(out)
        out.append(nxt)


def angle_set_preimages(angles, m, k=1):
    """All angles s with m^k s in the given set."""
    cur = set(angles)
    for _ in range(k):
        cur = {s for t in cur for s in t.preimages(m)}
    return cur


@dataclass(frozen=True)
class External:
    angle: RayAngle


@dataclass(frozen=True)
class Internal:
    component: int
    angle: RayAngle


@dataclass(frozen=True)
class Landed:
    point: complex
    period: int
    multiplier: complex
    residual: float


@dataclass(frozen=True)
class Truncated:
    level: float


@dataclass
class TracedRay:
    kind: object
    samples: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    landing: object = None

    @property
    def end(self):
        return complex(self.samples[-1])


# ---------------------------------------------------------------------------
# external rays

def _inverse_bottcher_far(param, b):
    """Inverse of the Böttcher map at infinity for |b| >= 1e5 (error O(|b|^-3))."""
    c2 = param.c * param.c
    return b + c2 / b - param.a / (3 * b * b)


def _orbit_log_newton(param, z, k, logw, iters=40):
    """Solve log f^k(z) = logw (vectorised), starting from z."""
    c2 = 3 * param.c * param.c
    a = param.a
    z = z.copy()
    for _ in range(iters):
        w, dw = z.copy(), np.ones_like(z)
        for _ in range(k):
            dw = dw * (3 * w * w - c2)
            w = w * w * w - c2 * w + a
        step = np.log(w / np.exp(logw)) * w / dw
        z = z - step
        if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(z))):
            break
    return z


def _far_angle(param, y):
    b = y - param.c * param.c / y + param.a / (3 * y * y)
    return np.angle(b) / (2 * np.pi)


def _check_branch(param, z, angles, k):
    """Angle of f^(k-1)(z) at potential above ~4.6 must equal 3^(k-1) t."""
    if k < 1:
        return np.ones(z.shape, dtype=bool)
    c2 = 3 * param.c * param.c
    w = z.copy()
    for _ in range(k - 1):
        w = w * w * w - c2 * w + param.a
    want = _shift_phases(*_angle_arrays(angles), 3, k - 1)
    d = (_far_angle(param, w) - want + 0.5) % 1.0 - 0.5
    return np.abs(d) < ANGLE_CHECK


def _ext_step(param, angles, z, lam, k):
    phase = _shift_phases(*_angle_arrays(angles), 3, k)
    logw = np.log(_inverse_bottcher_far(param, np.exp(3.0 ** k * lam + 2j * np.pi * phase)))
    return _orbit_log_newton(param, z, k, logw)


def trace_external_rays(param, angles, min_level=EXTERNAL_MIN_LEVEL, steps=STEPS_PER_LEVEL):
    """Trace many external rays at once from potential TOP_LEVEL down to min_level.

    The sample at potential lam solves f^k(z) = B^-1(exp(3^k lam + 2 pi i 3^k t)),
    with k the least integer keeping 3^k lam >= TOP_LEVEL; consecutive samples
    seed Newton.
    """
    angles = list(angles)
    n = len(angles)
    if n == 0:
        return []
    count = int(math.ceil(steps * math.log(TOP_LEVEL / min_level) / math.log(3))) + 1
    levels = TOP_LEVEL * 3.0 ** (-np.arange(count) / steps)
    if count > 1:
        levels[-1] = min_level
    phase0 = np.array([t.value for t in angles])
    z = _inverse_bottcher_far(param, np.exp(TOP_LEVEL + 2j * np.pi * phase0))
    out = np.empty((count, n), dtype=complex)
    out[0] = z
    for i in range(1, count):
        lam = levels[i]
        k = int(math.ceil(math.log(TOP_LEVEL / lam) / math.log(3) - 1e-12))
        guess = z + (z - out[i - 2]) if i >= 2 else z
        znew = _ext_step(param, angles, guess, lam, k)
        bad = ~_check_branch(param, znew, angles, k) | ~np.isfinite(znew)
        if bad.any():
            idx = np.flatnonzero(bad)
            sub = [angles[j] for j in idx]
            zz = z[idx]
            for s in range(1, 9):
                ls = levels[i - 1] * (lam / levels[i - 1]) ** (s / 8)
                ks = int(math.ceil(math.log(TOP_LEVEL / ls) / math.log(3) - 1e-12))
                zz = _ext_step(param, sub, zz, ls, ks)
            if not np.all(_check_branch(param, zz, sub, k)) or not np.all(np.isfinite(zz)):
                j = idx[~_check_branch(param, zz, sub, k)][0] if np.isfinite(zz).all() else idx[0]
                raise RayBifurcates(f"ray {angles[j]} jumps branch near potential {lam:.3g}")
            znew[idx] = zz
        z = znew
        out[i] = z
    return [TracedRay(External(t), out[:, j].copy(), levels.copy(), Truncated(levels[-1]))
            for j, t in enumerate(angles)]


def trace_external_ray(param, t, min_level=EXTERNAL_MIN_LEVEL, certify=True):
    ray = trace_external_rays(param, [t], min_level)[0]
    if certify and t.period(3) is not None:
        try:
            ray.landing = landing_point(param, ray)
        except NoConvergence:
            pass
    return ray


# ---------------------------------------------------------------------------
# internal rays

@dataclass(frozen=True)
class Component:
    """A Fatou component of the critical cycle basin: f^m maps it conformally onto
    the cycle component of index j; center maps to the cycle point."""

    id: int
    center: complex
    m: int
    j: int


def _iterate_vec(param, z, n):
    c2 = 3 * param.c * param.c
    w, dw = z.copy(), np.ones_like(z)
    for _ in range(n):
        dw = dw * (3 * w * w - c2)
        w = w * w * w - c2 * w + param.a
    return w, dw


def _newton_uniform(param, z, n, target, iters):
    c2 = 3 * param.c * param.c
    a = param.a
    for _ in range(iters):
        w, dw = z.copy(), np.ones_like(z)
        for _ in range(n):
            dw *= 3 * w * w - c2
            w = w * w * w - c2 * w + a
        step = (w - target) / dw
        z = z - step
        if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(z))):
            break
    return z


def _newton_iterate(param, z, n, target, iters=40):
    """Solve f^n(z) = target (vectorised, per-entry n allowed)."""
    z = np.array(z, dtype=complex)
    target = np.broadcast_to(np.asarray(target, dtype=complex), z.shape)
    n = np.broadcast_to(np.asarray(n), z.shape)
    if z.size == 0:
        return z
    out = np.empty_like(z)
    for k in np.unique(n):
        sel = n == k
        out[sel] = _newton_uniform(param, z[sel], int(k), target[sel], iters)
    return out


def _shift_phases(nums, dens, m, k):
    """Fractional parts of m^k * num / den for integer arrays, exactly."""
    udens, inv = np.unique(dens, return_inverse=True)
    if udens.max() < 3_000_000_000:
        res = np.array([pow(m, k, int(D)) for D in udens], dtype=np.int64)[inv]
        return (res * nums % dens) / dens
    res = [pow(m, k, int(D)) * int(u) % int(D) / int(D) for u, D in zip(nums, dens)]
    return np.array(res)


def _angle_arrays(angles):
    nums = np.array([t.numerator for t in angles], dtype=np.int64)
    dens = np.array([t.denominator for t in angles], dtype=np.int64)
    return nums, dens


def chart_inverse(chart, xi):
    """Vectorised inverse of the local Böttcher series; returns points z."""
    xi = np.asarray(xi, dtype=complex)
    h = chart.h
    u = xi.copy()
    for _ in range(60):
        # q(u) = sum h_k u^k; value u q(u), derivative q(u) + u q'(u)
        q, dq = np.full_like(u, h[-1]), np.zeros_like(u)
        for coef in h[-2::-1]:
            dq = dq * u + q
            q = q * u + coef
        du = (u * q - xi) / (q + u * dq)
        u = u - du
        if np.all(np.abs(du) <= 1e-16 * np.maximum(np.abs(u), 1e-300)):
            break
    return chart.w + u / chart.kappa


def trace_internal_rays(param, cycle, comps, angles, max_level=INTERNAL_MAX_LEVEL,
                        steps=STEPS_PER_LEVEL):
    """Trace internal rays, one per (component, angle) pair, outward to max_level.

    The sample at potential g in a component mapped by f^m onto the cycle
    component j solves f^(m+kp)(z) = chart_j^-1(exp(d^k (g + 2 pi i t))), with k
    the least integer putting d^k g below the chart's seed level.
    """
    p = cycle.period
    charts = [basin_chart(param, cycle, j) for j in range(p)]
    d = charts[0].degree
    if d > 3:
        raise OutsideSpStar("both critical points lie on the cycle")
    if not comps:
        return []
    g_deep = min(math.log(0.5 * ch.radius) for ch in charts)
    count = int(math.ceil(steps * math.log(g_deep / max_level) / math.log(d))) + 1
    levels = g_deep * float(d) ** (-np.arange(count) / steps)
    if count > 1:
        levels[-1] = max_level
    ms = np.array([cp.m for cp in comps])

    groups = {}
    for r, cp in enumerate(comps):
        groups.setdefault(cp.j, []).append(r)
    groups = {j: np.array(rs) for j, rs in groups.items()}

    nums, dens = _angle_arrays(angles)

    def targets(g, k):
        ang = _shift_phases(nums, dens, d, k)
        beta = np.exp(d ** k * g + 2j * np.pi * ang)
        out = np.empty(len(comps), dtype=complex)
        for j, rs in groups.items():
            out[rs] = chart_inverse(charts[j], beta[rs])
        return out

    y0 = targets(levels[0], 0)
    centers = np.array([cp.center for cp in comps])
    z = centers.copy()
    # seed: f^m(z) = y0 near the center, via the derivative of f^m there
    for r, cp in enumerate(comps):
        if cp.m:
            _, dcm = forward_with_derivative(param, cp.center, cp.m)
            z[r] = cp.center + (y0[r] - charts[cp.j].w) / dcm
        else:
            z[r] = y0[r]
    z = _newton_iterate(param, z, ms, y0)
    out = np.empty((count, len(comps)), dtype=complex)
    out[0] = z
    prev_step = np.full(len(comps), np.inf)
    for i in range(1, count):
        g = levels[i]
        k = int(math.ceil(math.log(g / g_deep) / math.log(1.0 / d) - 1e-12))
        y = targets(g, k)
        guess = z + (z - out[i - 2]) if i >= 2 else z
        znew = _newton_iterate(param, guess, ms + k * p, y)
        step = np.abs(znew - z)
        bad = ~np.isfinite(znew) | (step > 6 * prev_step + 1e-9)
        if bad.any():
            idx = np.flatnonzero(bad)
            zz = z[idx]
            for s in range(1, 9):
                gs = levels[i - 1] * (g / levels[i - 1]) ** (s / 8)
                ks = int(math.ceil(math.log(gs / g_deep) / math.log(1.0 / d) - 1e-12))
                ys = targets(gs, ks)[idx]
                zz = _newton_iterate(param, zz, ms[idx] + ks * p, ys)
            st = np.abs(zz - z[idx])
            if not np.all(np.isfinite(zz)) or np.any(st > 6 * prev_step[idx] + 1e-9):
                j = idx[0]
                raise RayBifurcates(f"internal ray {angles[j]} in component {comps[j].id} jumps")
            znew[idx] = zz
            step = np.abs(znew - z)
        prev_step = np.maximum(step, 1e-300)
        z = znew
        out[i] = z
    return [TracedRay(Internal(cp.id, t), out[:, r].copy(), levels.copy(), Truncated(levels[-1]))
            for r, (cp, t) in enumerate(zip(comps, angles))]


def cycle_components(cycle):
    return [Component(j, complex(w), 0, j) for j, w in enumerate(cycle.points)]


def trace_internal_ray(param, w, t, max_level=INTERNAL_MAX_LEVEL, p=None, certify=True):
    """Internal ray of angle t in the cycle component of the critical cycle point w."""
    if p is None:
        from .classifier import _period_of
        p = _period_of(param)
    cycle = critical_cycle(param, p)
    j = min(range(p), key=lambda i: abs(cycle.points[i] - w))
    comp = cycle_components(cycle)[j]
    ray = trace_internal_rays(param, cycle, [comp], [t], max_level)[0]
    d = local_degree(param, cycle)
    if certify and t.period(d) is not None:
        try:
            ray.landing = landing_point(param, ray, p=p, degree=d)
        except NoConvergence:
            pass
    return ray


# ---------------------------------------------------------------------------
# landing

def _newton_periodic(param, z, n, iters=60):
    for _ in range(iters):
        w, dw = forward_with_derivative(param, z, n)
        step = (w - z) / (dw - 1)
        z -= step
        if abs(step) < 1e-15 * (1 + abs(z)):
            break
    return z


def certify_periodic(param, z, n):
    """Newton on f^n(z) = z; returns Landed with the multiplier of f^n."""
    if not cmath.isfinite(z):
        raise NoConvergence("seed is not finite")
    z = _newton_periodic(param, complex(z), n)
    w, dw = forward_with_derivative(param, z, n)
    res = abs(w - z)
    if not res <= LANDING_TOL * max(1.0, abs(z)):
        raise NoConvergence(f"periodic point residual {res:.3g}")
    if abs(abs(dw) - 1) <= PARABOLIC_BAND:
        raise ParabolicSuspect("multiplier on the unit circle", z, dw)
    return Landed(z, n, dw, res)


def landing_point(param, ray, p=None, degree=None):
    """Landing point of a ray with periodic angle, certified by Newton on the
    periodicity equation; the certificate carries the multiplier."""
    kind = ray.kind
    if isinstance(kind, External):
        n = kind.angle.period(3)
        if n is None:
            raise ValidationError("external angle is not periodic")
    else:
        if p is None or degree is None:
            raise ValidationError("internal landing needs the cycle period and degree")
        s = kind.angle.period(degree)
        if s is None:
            raise ValidationError("internal angle is not periodic")
        n = s * p
    land = certify_periodic(param, ray.end, n)
    # the ray tail must approach the point
    tail = np.abs(ray.samples[-4:] - land.point)
    if not np.all(np.diff(tail) < 0) and tail[-1] > 1e-6:
        raise NoConvergence("ray tail does not approach the periodic point")
    ray.landing = land
    return land


def extend_tail(param, ray, n, scale, zeta, tol=1e-6, max_rounds=400):
    """Continue a ray fixed by f^n (potential scaled by `scale` under f^n) towards
    its landing point zeta: the last fundamental segment is pulled back again and
    again by the branch of f^-n fixing zeta."""
    _, lam = forward_with_derivative(param, zeta, n)
    if abs(lam) <= 1:
        raise NoConvergence("landing point is not repelling")
    lv = ray.levels
    mask = np.abs(lv) < abs(lv[-1]) * scale
    seg, seg_lv = ray.samples[mask], lv[mask]
    pts, lvs = [ray.samples], [lv]
    for _ in range(max_rounds):
        if abs(seg[-1] - zeta) < tol:
            break
        new = _newton_iterate(param, zeta + (seg - zeta) / lam, n, seg)
        if not np.all(np.isfinite(new)) or np.any(np.abs(new - zeta) >= np.abs(seg - zeta)):
            raise NoConvergence("tail pullback leaves the linearisation domain")
        seg, seg_lv = new, seg_lv / scale
        pts.append(seg)
        lvs.append(seg_lv)
    ray.samples, ray.levels = np.concatenate(pts), np.concatenate(lvs)
    return ray


def _lands_at(param, end, land, n):
    """The traced tail end belongs to the ray landing at `land`: either close, or
    in the linear regime of a weakly repelling point, where f^n stretches the
    distance by about |multiplier|."""
    d = abs(end - land.point)
    if d < 1e-2:
        return True
    if d > 0.1:
        return False
    ratio = abs(forward(param, end, n) - land.point) / d
    return abs(ratio / abs(land.multiplier) - 1) < 0.2


@lru_cache(maxsize=32)
def _periodic_landings(c, a, period):
    """Landing points of all external rays whose angles have period dividing `period`."""
    param = CubicParam(c, a)
    den = 3 ** period - 1
    angles = [RayAngle(k, den) for k in range(den)]
    rays = trace_external_rays(param, angles, min_level=1e-7, steps=8)
    out = {}
    for t, ray in zip(angles, rays):
        try:
            land = certify_periodic(param, ray.end, t.period(3))
        except (NoConvergence, ParabolicSuspect):
            continue
        if _lands_at(param, ray.end, land, t.period(3)):
            out[t] = land.point
    return out


def colanding_external_angles(param, zeta, period_bound):
    """External angles of tripling period dividing period_bound landing at zeta."""
    found = _periodic_landings(param.c, param.a, period_bound)
    cand = sorted(t for t, z in found.items() if abs(z - zeta) < 1e-6)
    if not cand:
        return set()
    fine = trace_external_rays(param, cand, min_level=1e-9, steps=16)
    out = set()
    for t, ray in zip(cand, fine):
        try:
            land = certify_periodic(param, ray.end, t.period(3))
        except (NoConvergence, ParabolicSuspect):
            continue
        if abs(land.point - zeta) < 1e-6:
            out.add(t)
    return out
