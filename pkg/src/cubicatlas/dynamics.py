"""Evaluation, orbits, cycles, Green functions and Böttcher coordinates for
the critically marked cubic family f(z) = z^3 - 3 c^2 z + a."""

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .errors import (
    AmbiguousPeriod,
    NoConvergence,
    NotInBasin,
    OnCriticalOrbitRelation,
    OutsideDomain,
    ValidationError,
    WrongPeriod,
)

TOL_CYCLE = 1e-10
SERIES_ORDER = 14
TERMINAL_DEFAULT = 0.05
DELTA_SEP = 1e-6
OVERFLOW = 1e100
MP_BITS = 128


@dataclass(frozen=True)
class CubicParam:
    c: complex
    a: complex

    def __post_init__(self):
        c, a = complex(self.c), complex(self.a)
        if not (cmath.isfinite(c) and cmath.isfinite(a)):
            raise ValidationError(f"non-finite parameter ({self.c}, {self.a})")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)

    @property
    def critical_points(self):
        return self.c, -self.c

    @property
    def critical_values(self):
        return evaluate(self, self.c), evaluate(self, -self.c)

    def negated(self):
        return CubicParam(-self.c, -self.a)


def evaluate(param, z):
    c, a = param.c, param.a
    return z * z * z - 3 * c * c * z + a


def derivative(param, z):
    c = param.c
    return 3 * z * z - 3 * c * c


def forward(param, z, n):
    for _ in range(n):
        z = evaluate(param, z)
    return z


def forward_with_derivative(param, z, n):
    """Return (f^n(z), (f^n)'(z)); works elementwise on arrays."""
    c, a = param.c, param.a
    c2 = 3 * c * c
    dz = np.ones_like(z) if isinstance(z, np.ndarray) else 1.0 + 0j
    for _ in range(n):
        dz = dz * (3 * z * z - c2)
        z = z * z * z - c2 * z + a
    return z, dz


@dataclass(frozen=True)
class EscapeBound:
    radius: float


def escape_bound(param):
    return EscapeBound(math.sqrt(3 * abs(param.c) ** 2 + abs(param.a) + 2))


# orbit statuses
@dataclass(frozen=True)
class BoundedAtBudget:
    n: int


@dataclass(frozen=True)
class Escaped:
    n: int
    modulus: float


@dataclass(frozen=True)
class ConvergedToCycle:
    cycle: int  # index into the known cycles, -1 for a cycle found on the fly
    n: int
    period: int
    points: tuple = ()


@dataclass
class Orbit:
    seed: complex
    samples: list
    status: object


def iterate(param, z, budget, bound=None, known_cycles=(), tol=TOL_CYCLE, max_period=64):
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    bound = bound or escape_bound(param)
    R = bound.radius
    z = complex(z)
    samples = [z]
    for n in range(budget + 1):
        if abs(z) >= R:
            return Orbit(samples[0], samples, Escaped(n, abs(z)))
        for idx, cyc in enumerate(known_cycles):
            if min(abs(z - w) for w in cyc.points) < tol:
                return Orbit(samples[0], samples, ConvergedToCycle(idx, n, cyc.period, tuple(cyc.points)))
        for q in range(1, min(n, max_period) + 1):
            if abs(z - samples[n - q]) < tol:
                pts = tuple(samples[n - q:n])
                return Orbit(samples[0], samples, ConvergedToCycle(-1, n, q, pts))
        if n == budget:
            break
        z = evaluate(param, z)
        samples.append(z)
    return Orbit(samples[0], samples, BoundedAtBudget(budget))


def _period_gaps(param, z, p, mp=False):
    if mp:
        with mpmath.workprec(MP_BITS):
            c, a = mpmath.mpc(param.c), mpmath.mpc(param.a)
            z0 = w = mpmath.mpc(z)
            gaps = []
            for _ in range(p):
                w = w ** 3 - 3 * c * c * w + a
                gaps.append(float(abs(w - z0)))
            return gaps
    gaps, w = [], complex(z)
    for _ in range(p):
        w = evaluate(param, w)
        gaps.append(abs(w - z))
    return gaps


def exact_period(param, z, p, sep=DELTA_SEP, tol=TOL_CYCLE):
    """True iff z is periodic with exact period p (up to the two thresholds).

    A gap in the grey zone [tol, sep] is re-examined in 128-bit arithmetic before
    AmbiguousPeriod is raised.
    """
    if p < 1:
        raise ValidationError("period must be >= 1")
    for mp in (False, True):
        gaps = _period_gaps(param, z, p, mp=mp)
        if not any(tol <= g <= sep for g in gaps):
            break
    else:
        raise AmbiguousPeriod(f"period gaps {gaps} fall between {tol} and {sep}")
    return gaps[-1] < tol and all(g > sep for g in gaps[:-1])


@dataclass(frozen=True)
class MarkedCycle:
    points: tuple
    period: int
    multiplier: complex


def _divisors(n):
    return [k for k in range(1, n + 1) if n % k == 0]


def _cycle_from(param, z0, period):
    pts, mult, z = [z0], 1.0 + 0j, z0
    for _ in range(period):
        mult *= derivative(param, z)
        z = evaluate(param, z)
        pts.append(z)
    return MarkedCycle(tuple(pts[:period]), period, mult)


def find_cycle(param, seed, period, sep=DELTA_SEP, max_steps=50):
    z = complex(seed)
    for _ in range(max_steps):
        w, dw = forward_with_derivative(param, z, period)
        g = w - z
        if abs(g) < 1e-13 * max(1.0, abs(z)):
            break
        step = g / (dw - 1)
        z -= step
        if not cmath.isfinite(z):
            raise NoConvergence("Newton diverged")
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    else:
        raise NoConvergence(f"no period-{period} cycle after {max_steps} Newton steps")
    if abs(forward(param, z, period) - z) >= 1e-12 * max(1.0, abs(z)):
        raise NoConvergence("residual above 1e-12")
    for k in _divisors(period)[:-1]:
        if abs(forward(param, z, k) - z) <= sep:
            raise WrongPeriod(f"point has period dividing {k}")
    return _cycle_from(param, z, period)


def critical_cycle(param, p):
    """The marked critical cycle of period p, starting at c."""
    gaps = _period_gaps(param, param.c, p)
    if gaps[-1] >= 1e-8 * max(1.0, abs(param.c)):
        raise WrongPeriod(f"c is not {p}-periodic (gap {gaps[-1]:.3g})")
    return _cycle_from(param, param.c, p)


@dataclass(frozen=True)
class GreenValue:
    value: float
    bounded: bool
    n: int = 0


def green_infinity(param, z, budget=2000):
    z = complex(z)
    c2 = 3 * param.c * param.c
    for n in range(budget):
        if abs(z) > OVERFLOW:
            corr = math.log(abs(1 - c2 / z / z + param.a / z / z / z))
            return GreenValue(3.0 ** -n * math.log(abs(z)) + 3.0 ** -(n + 1) * corr, False, n)
        z = z * z * z - c2 * z + param.a
    return GreenValue(0.0, True, budget)


def critical_potential(param, budget=2000):
    return max(green_infinity(param, param.c, budget).value, green_infinity(param, -param.c, budget).value)


def _lift_infinity(param, z):
    """Böttcher coordinate at infinity for |z| >= R_esc by cube-root lifting."""
    c2 = 3 * param.c * param.c
    orbit = [complex(z)]
    while abs(orbit[-1]) <= 1e8:
        w = orbit[-1]
        orbit.append(w * w * w - c2 * w + param.a)
    top = orbit[-1]
    b = top * (1 - c2 / top / top + param.a / top / top / top) ** (1 / 3)
    for w in reversed(orbit[:-1]):
        r = b ** (1 / 3)
        roots = [r * cmath.exp(2j * math.pi * k / 3) for k in range(3)]
        b = min(roots, key=lambda q: abs(cmath.phase(q / w)))
    return b


def log_derivative_infinity(param, z, big=1e8, budget=4000):
    """d/dz log B(z) at an escaping point; free of branch choices."""
    c2 = 3 * param.c * param.c
    w, dw, n = complex(z), 1.0 + 0j, 0
    while abs(w) <= big:
        dw = dw * (3 * w * w - c2)
        w = w * w * w - c2 * w + param.a
        n += 1
        if n > budget:
            raise OutsideDomain("point does not escape")
    return 3.0 ** -n * dw / w


def _ray_flow(level, z, logder, target, steps=400):
    """Integrate the gradient line dz/dlambda = 1/L'(z) from level(z) to target.

    The potential is re-imposed after every RK4 step by a move along the gradient,
    which leaves the angle unchanged to first order.
    """
    lam = level(z)
    s0, s1 = math.log(abs(lam)), math.log(abs(target))
    sgn = 1.0 if lam > 0 else -1.0

    def rhs(zz, s):
        return sgn * math.exp(s) / logder(zz)

    ds = (s1 - s0) / steps
    s = s0
    for _ in range(steps):
        k1 = rhs(z, s)
        k2 = rhs(z + 0.5 * ds * k1, s + 0.5 * ds)
        k3 = rhs(z + 0.5 * ds * k2, s + 0.5 * ds)
        k4 = rhs(z + ds * k3, s + ds)
        z = z + ds * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        s += ds
        lt = sgn * math.exp(s)
        for _ in range(2):
            d = logder(z)
            z = z + (lt - level(z)) * d.conjugate() / abs(d) ** 2
    return z


def bottcher_infinity(param, z):
    """B(z) with B(f(z)) = B(z)^3 and B ~ id at infinity.

    Points with |z| >= R_esc are handled by cube-root lifting; points closer in
    but above the critical potential are first carried outward along their
    gradient line.
    """
    z = complex(z)
    R = escape_bound(param).radius
    if abs(z) >= R:
        return _lift_infinity(param, z)
    g = green_infinity(param, z)
    gcrit = critical_potential(param)
    if g.bounded or g.value <= gcrit * (1 + 1e-6) + 1e-12:
        raise OutsideDomain(f"potential {g.value:.3g} not above critical potential {gcrit:.3g}")
    level = lambda q: green_infinity(param, q).value
    far = _ray_flow(level, z, lambda q: log_derivative_infinity(param, q), math.log(2 * R) + 1.0)
    b = _lift_infinity(param, far)
    return math.exp(g.value) * b / abs(b)


# ---------------------------------------------------------------------------
# truncated power series helpers for the local Böttcher chart at a cycle point

def _smul(x, y, K):
    return np.convolve(x, y)[: K + 1]


def _spow(y, alpha, K):
    """y**alpha for a series with y[0] == 1."""
    out = np.zeros(K + 1, dtype=complex)
    out[0] = 1.0
    for n in range(1, K + 1):
        acc = 0j
        for k in range(1, n + 1):
            if k < len(y):
                acc += (alpha * k - (n - k)) * y[k] * out[n - k]
        out[n] = acc / n
    return out


def _scompose(h, s, K):
    res = np.zeros(K + 1, dtype=complex)
    res[0] = h[-1]
    for coef in h[-2::-1]:
        res = _smul(res, s, K)
        res[0] += coef
    return res


def taylor_jet(param, w, n, order):
    """Taylor coefficients of f^n at w up to the given order."""
    c2 = 3 * param.c * param.c
    s = np.zeros(order + 1, dtype=complex)
    s[0] = w
    if order >= 1:
        s[1] = 1.0
    for _ in range(n):
        s = _smul(_smul(s, s, order), s, order) - c2 * s
        s[0] += param.a
    return s


@dataclass
class BasinChart:
    """Local Böttcher chart of f^p at a point w of a superattracting cycle."""

    param: CubicParam
    cycle: MarkedCycle
    index: int
    degree: int
    kappa: complex
    h: np.ndarray = field(repr=False)
    radius: float = TERMINAL_DEFAULT

    @property
    def w(self):
        return self.cycle.points[self.index]

    def local(self, u):
        return u * np.polyval(self.h[::-1], u)

    def local_derivative(self, u):
        hp = np.polyder(self.h[::-1])
        return np.polyval(self.h[::-1], u) + u * np.polyval(hp, u)

    def local_inverse(self, xi):
        u = complex(xi)
        for _ in range(60):
            du = (self.local(u) - xi) / self.local_derivative(u)
            u -= du
            if abs(du) < 1e-16 * max(abs(u), 1e-300):
                break
        return self.w + u / self.kappa




def local_degree(param, cycle, tol=1e-12):
    scale = max(1.0, abs(param.c))
    if abs(param.c) <= tol * scale:
        hits = sum(1 for z in cycle.points if abs(z) <= tol)
        return 3 ** hits
    d = 1
    for z in cycle.points:
        if abs(z - param.c) <= tol * scale or abs(z + param.c) <= tol * scale:
            d *= 2
    return d


@lru_cache(maxsize=256)
def _chart_cached(c, a, points, period, index):
    param = CubicParam(c, a)
    mult = 1.0 + 0j
    for z in points:
        mult *= derivative(param, z)
    cycle = MarkedCycle(points, period, mult)
    d = local_degree(param, cycle)
    if d < 2:
        raise NotInBasin("cycle is not superattracting")
    K = SERIES_ORDER
    w = points[index]
    T = taylor_jet(param, w, period, d + K)
    A = T[d]
    kappa = A ** (1.0 / (d - 1)) if d > 2 else A
    G = np.array([T[d + k] * kappa ** (1 - d - k) for k in range(K + 1)], dtype=complex)
    G[0] = 1.0
    s = np.zeros(K + 1, dtype=complex)
    if d <= K:
        s[d:] = G[: K + 1 - d]
    h = np.zeros(K + 1, dtype=complex)
    h[0] = 1.0
    for _ in range(K + 1):
        h = _spow(_smul(G, _scompose(h, s, K), K), 1.0 / d, K)
    # keep the truncation error of the series below ~1e-17 on the terminal disk
    tail = max(abs(h[K]), abs(h[K - 1]), 1e-300)
    radius = min(TERMINAL_DEFAULT, (1e-17 / tail) ** (1.0 / K))
    return BasinChart(param, cycle, index, d, kappa, h, radius)


def basin_chart(param, cycle, index=0):
    return _chart_cached(param.c, param.a, tuple(cycle.points), cycle.period, index)


def _approach(param, cycle, z, budget):
    """Iterate f^p until z is inside the series disk of some cycle point.

    Returns (chart, n, u_n, dz_n) where u_n is the normalised local coordinate and
    dz_n the derivative of f^{pn} at z.
    """
    p = cycle.period
    charts = [basin_chart(param, cycle, j) for j in range(p)]
    R = escape_bound(param).radius
    z, dz = complex(z), 1.0 + 0j
    for n in range(budget + 1):
        for ch in charts:
            u = ch.kappa * (z - ch.w)
            if abs(u) < ch.radius:
                return ch, n, u, dz
        if abs(z) >= R or not cmath.isfinite(z):
            raise NotInBasin("orbit escapes")
        z, dstep = forward_with_derivative(param, z, p)
        dz *= dstep
    raise NotInBasin(f"orbit not captured within {budget} returns")


def green_basin(param, cycle, z, budget=4000):
    ch, n, u, _ = _approach(param, cycle, z, budget)
    return math.log(abs(ch.local(u))) / ch.degree ** n


def log_derivative_basin(param, cycle, z, budget=4000):
    ch, n, u, dz = _approach(param, cycle, z, budget)
    return ch.local_derivative(u) / ch.local(u) * ch.kappa * dz / ch.degree ** n, ch


def _cycle_for(param, w, cycle):
    if cycle is not None:
        return cycle
    for p in range(1, 65):
        if abs(forward(param, w, p) - w) < 1e-9 * max(1.0, abs(w)):
            return _cycle_from(param, complex(w), p)
    raise NotInBasin("w is not on a short periodic cycle")


def bottcher_basin(param, w, z, cycle=None, budget=4000):
    """Böttcher coordinate of f^p at the superattracting cycle point w.

    Normalised by B(z) ~ A (z - w), A = (f^p)''(w)/2.  Near w the coordinate comes
    from the local series; elsewhere the point is carried down its gradient line
    to the series disk, which fixes the branch by continuity.
    """
    cycle = _cycle_for(param, w, cycle)
    idx = min(range(cycle.period), key=lambda j: abs(cycle.points[j] - w))
    ch = basin_chart(param, cycle, idx)
    if ch.degree > 3:
        raise OnCriticalOrbitRelation("both critical points lie on the cycle")
    z = complex(z)
    u = ch.kappa * (z - ch.w)
    if abs(u) < ch.radius:
        return ch.local(u)
    g = green_basin(param, cycle, z, budget)
    chz, _, _, _ = _approach(param, cycle, z, budget)
    if chz.index != idx:
        raise OutsideDomain("point is attracted to another cycle point")
    level = lambda q: green_basin(param, cycle, q, budget)
    logder = lambda q: log_derivative_basin(param, cycle, q, budget)[0]
    end = _ray_flow(level, z, logder, math.log(ch.radius) - 1.0, steps=200)
    ue = ch.kappa * (end - ch.w)
    if abs(ue) >= ch.radius:
        raise OutsideDomain("gradient line did not reach the cycle point")
    b = ch.local(ue)
    return math.exp(g) * b / abs(b)
