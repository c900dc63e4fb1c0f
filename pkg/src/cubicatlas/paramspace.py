"""Hyperbolic components on S_p: centers, the coordinates Φ (types A/B/C) and ρ
(type D), parameter rays and the type-D boundary."""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import TypeA, TypeB, TypeC, TypeD, classify
from .curve import fiber_solve
from .dynamics import (
    CubicParam, basin_chart, bottcher_basin, critical_cycle, evaluate, exact_period, forward,
    forward_with_derivative, green_basin,
)
from .errors import (
    AmbiguousPeriod, ContinuationStall, NoConvergence, NotHyperbolicABC, NotInBasin, NotTypeD,
    NumericalFailure, OutsideDomain, ValidationError,
)

FD_STEP = 1e-7
CENTER_TOL = 1e-10
DEDUP = 1e-8
COVER_DEGREE = {"A": 2, "B": 3, "C": 1, "D": 1}


def _curve_residual(c, a, p):
    return forward(CubicParam(c, a), c, p) - c


def _newton2(F, x, tol=1e-12, max_steps=60, scale=1.0):
    """Newton for two holomorphic equations in two complex unknowns with a
    forward-difference Jacobian."""
    x = np.array(x, dtype=complex)
    for _ in range(max_steps):
        f0 = np.array(F(x), dtype=complex)
        if not np.all(np.isfinite(f0)):
            raise NoConvergence("residual not finite")
        h = FD_STEP * max(scale, float(np.max(np.abs(x))))
        J = np.empty((2, 2), dtype=complex)
        for k in range(2):
            xk = x.copy()
            xk[k] += h
            J[:, k] = (np.array(F(xk), dtype=complex) - f0) / h
        try:
            dx = np.linalg.solve(J, -f0)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Jacobian") from exc
        x = x + dx
        if np.max(np.abs(dx)) <= tol * max(1.0, float(np.max(np.abs(x)))):
            return x
    raise NoConvergence("2x2 Newton did not converge")


# ---------------------------------------------------------------------------
# centers

@dataclass(frozen=True)
class CenterSolution:
    c: complex
    a: complex
    p: int
    kind: str
    k: int = None
    l: int = None
    kappa: int = None
    q: int = None
    curve_residual: float = 0.0
    relation_residual: float = 0.0


def _relations(p, kind, l_max, q_max):
    if kind == "A":
        return [dict()]
    if kind == "B":
        return [dict(k=k) for k in range(1, p)]
    if kind == "C":
        return [dict(l=l, kappa=kp) for l in range(1, l_max + 1) for kp in range(p)]
    if kind == "D":
        return [dict(q=q) for q in range(1, q_max + 1)]
    raise ValidationError(f"unknown type {kind!r}")


def _relation_value(c, a, kind, rel):
    P = CubicParam(c, a)
    if kind == "A":
        return 2 * c
    if kind == "B":
        return forward(P, c, rel["k"]) + c
    if kind == "C":
        return forward(P, -c, rel["l"]) - forward(P, c, rel["kappa"])
    return forward(P, -c, rel["q"]) + c


def _minimal(c, a, p, kind, rel):
    """Exact period p of c and minimality of the defining relation."""
    P = CubicParam(c, a)
    try:
        if not exact_period(P, c, p):
            return False
    except AmbiguousPeriod:
        return False
    cyc = [forward(P, c, j) for j in range(p)]
    sep = 1e-6 * max(1.0, abs(c))
    on_cycle = lambda z: min(abs(z - w) for w in cyc) < sep
    if kind == "A":
        return True
    if kind == "B":
        return abs(c) > sep and all(abs(forward(P, c, j) + c) > sep for j in range(rel["k"]))
    if kind == "C":
        return not any(on_cycle(forward(P, -c, j)) for j in range(rel["l"]))
    z = -c
    for j in range(1, rel["q"] + 1):
        z = evaluate(P, z)
        if on_cycle(z) or (j < rel["q"] and abs(z + c) < sep):
            return False
    return True


def center_search(p, kind, seeds=None, l_max=2, q_max=3, radius=1.5, grid=10, verify=True):
    """Centers of type `kind` on S_p by 2x2 Newton from grid seeds."""
    if seeds is None:
        xs = np.linspace(-radius, radius, grid)
        seeds = []
        for x in xs:
            for y in xs:
                c = complex(x, y)
                try:
                    sol = fiber_solve(c, p)
                except NumericalFailure:
                    continue
                seeds.extend((c, r.a) for r in sol.roots if r.exact_period == p)
    found = []
    for rel in _relations(p, kind, l_max, q_max):
        F = lambda x, rel=rel: (_curve_residual(x[0], x[1], p), _relation_value(x[0], x[1], kind, rel))
        for c0, a0 in seeds:
            try:
                c, a = _newton2(F, (c0, a0))
            except NoConvergence:
                continue
            if abs(c) > 4 * radius or abs(a) > 100:
                continue
            r1 = abs(_curve_residual(c, a, p))
            r2 = abs(_relation_value(c, a, kind, rel))
            if r1 > CENTER_TOL or r2 > CENTER_TOL:
                continue
            if any(abs(c - s.c) < DEDUP and abs(a - s.a) < DEDUP for s in found):
                continue
            if not _minimal(c, a, p, kind, rel):
                continue
            sol = CenterSolution(complex(c), complex(a), p, kind, curve_residual=float(r1),
                                 relation_residual=float(r2), **rel)
            if verify and not _verdict_matches(sol):
                continue
            found.append(sol)
    found.sort(key=lambda s: (round(s.c.real, 9), round(s.c.imag, 9), round(s.a.real, 9), round(s.a.imag, 9)))
    return found


def _verdict_matches(sol):
    v = classify(sol.c, sol.a, sol.p)
    if sol.kind == "A":
        return isinstance(v, TypeA)
    if sol.kind == "B":
        return isinstance(v, TypeB) and v.k == sol.k
    if sol.kind == "C":
        return isinstance(v, TypeC) and v.l == sol.l and v.kappa == sol.kappa
    return isinstance(v, TypeD) and v.q == sol.q


# ---------------------------------------------------------------------------
# Φ for types A/B/C

def _phi_point(param, p, verdict):
    """(point, cycle index) whose Böttcher coordinate is Φ."""
    if isinstance(verdict, TypeA):
        return -param.c, 0
    if isinstance(verdict, TypeB):
        return -param.c, verdict.k
    if isinstance(verdict, TypeC):
        return forward(param, -param.c, verdict.l), verdict.kappa
    raise NotHyperbolicABC(f"verdict {verdict} is not of type A, B or C")


def _phi_near(param, p, verdict, ref, budget=400):
    """Φ as the root of B(f^(pn)(z)) nearest to ref; no flows, branch by ref."""
    z, idx = _phi_point(param, p, verdict)
    cycle = critical_cycle(param, p)
    ch = basin_chart(param, cycle, idx)
    for n in range(budget):
        u = ch.kappa * (z - ch.w)
        if abs(u) < ch.radius:
            break
        z = forward(param, z, p)
        if not cmath.isfinite(z):
            raise NotInBasin("orbit escapes")
    else:
        raise NotInBasin("orbit not captured")
    beta = ch.local(u)
    if beta == 0:
        return 0j
    N = ch.degree ** n
    r0 = cmath.exp(cmath.log(beta) / N)
    if n == 0 or ref is None:
        return r0
    j = round((cmath.phase(ref) - cmath.phase(r0)) * N / (2 * math.pi))
    return r0 * cmath.exp(2j * math.pi * j / N)


def _phi_reference(param, p, verdict):
    """Branch-safe Φ from the gradient-line Böttcher evaluation."""
    z, idx = _phi_point(param, p, verdict)
    cycle = critical_cycle(param, p)
    ch = basin_chart(param, cycle, idx)
    w = cycle.points[idx]
    if abs(ch.kappa * (z - w)) < ch.radius:
        return ch.local(ch.kappa * (z - w))
    if isinstance(verdict, TypeC):
        return bottcher_basin(param, w, z, cycle=cycle)
    # z = -c is a critical point of f^p: B(z) is a square root of B(f^p z);
    # the sign is read off from nearby points on the side of the cycle point
    img = forward(param, z, p)
    u = ch.kappa * (img - w)
    b2 = ch.local(u) if abs(u) < ch.radius else bottcher_basin(param, w, img, cycle=cycle)
    s = cmath.sqrt(b2)
    near = []
    for frac in (0.03, 0.1):
        eps = frac * abs(z - w)
        for k in range(12):
            try:
                near.append(bottcher_basin(param, w, z + eps * cmath.exp(2j * math.pi * (k + 0.5) / 12),
                                           cycle=cycle))
            except (OutsideDomain, NotInBasin, NoConvergence):
                continue
        if near:
            break
    if not near:
        raise NoConvergence("no nearby point inside the domain of the Böttcher map")
    return min((s, -s), key=lambda r: min(abs(r - b) for b in near))


def phi_eval(c, a, p, verdict=None, ref=None):
    """Φ(c, a): Böttcher coordinate of -c (A/B) or of f^l(-c) (C)."""
    param = CubicParam(c, a)
    if verdict is None:
        verdict = classify(c, a, p)
    if not isinstance(verdict, (TypeA, TypeB, TypeC)):
        raise NotHyperbolicABC(f"verdict {verdict} is not of type A, B or C")
    if ref is None:
        ref = _phi_reference(param, p, verdict)
    return _phi_near(param, p, verdict, ref)


def phi_modulus_check(c, a, p, verdict=None):
    """(|Φ|, exp(G^V(point))) for the modulus cross-check."""
    param = CubicParam(c, a)
    if verdict is None:
        verdict = classify(c, a, p)
    z, idx = _phi_point(param, p, verdict)
    cycle = critical_cycle(param, p)
    return abs(phi_eval(c, a, p, verdict)), math.exp(green_basin(param, cycle, z))


# ---------------------------------------------------------------------------
# ρ for type D

def _rho_near(param, q, seed):
    """Multiplier of the q-cycle through the Newton solution of f^q(z) = z near seed."""
    z = complex(seed)
    for _ in range(60):
        w, dw = forward_with_derivative(param, z, q)
        step = (w - z) / (dw - 1)
        z -= step
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    w, dw = forward_with_derivative(param, z, q)
    if abs(w - z) > 1e-10 * max(1.0, abs(z)):
        raise NoConvergence("cycle point not found")
    return dw, z


def rho_eval(c, a, p, verdict=None):
    """Multiplier of the attracting cycle of -c (type D)."""
    if verdict is None:
        verdict = classify(c, a, p)
    if not isinstance(verdict, TypeD):
        raise NotTypeD(f"verdict {verdict} is not of type D")
    param = CubicParam(c, a)
    z = -param.c
    for _ in range(4000):
        if abs(forward(param, z, verdict.q) - z) < 1e-9:
            break
        z = evaluate(param, z)
    return _rho_near(param, verdict.q, z)[0]


# ---------------------------------------------------------------------------
# charts and parameter rays

@dataclass
class ComponentChart:
    kind: str
    center: CenterSolution
    p: int
    degree: int
    verdict: object
    rays: dict = field(default_factory=dict, repr=False)
    boundary: object = field(default=None, repr=False)
    loop: object = field(default=None, repr=False)

    def value(self, c, a, ref=None, state=None):
        """Φ (A/B/C) or ρ (D); for D, state carries the tracked cycle point."""
        param = CubicParam(c, a)
        if self.kind == "D":
            rho, z = _rho_near(param, self.verdict.q, state if state is not None else -c)
            return rho, z
        if ref is None:
            ref = _phi_reference(param, self.p, self.verdict)
        return _phi_near(param, self.p, self.verdict, ref), None


def component_chart(center):
    if center.kind == "A":
        v = TypeA()
    elif center.kind == "B":
        v = TypeB(center.k)
    elif center.kind == "C":
        v = TypeC(center.l, center.kappa)
    else:
        v = TypeD(center.q, 0j)
    return ComponentChart(center.kind, center, center.p, COVER_DEGREE[center.kind], v)


@dataclass
class ParamRaySample:
    angle: float
    samples: list  # (s, c, a)
    landing: tuple = None  # (c, a)
    error: float = float("nan")
    status: str = "ok"
    last_s: float = None


def _curve_tangent(c, a, p):
    h = FD_STEP * max(1.0, abs(c), abs(a))
    f0 = _curve_residual(c, a, p)
    fc = (_curve_residual(c + h, a, p) - f0) / h
    fa = (_curve_residual(c, a + h, p) - f0) / h
    v = np.array([-fa, fc], dtype=complex)
    return v / np.linalg.norm(v)


class _Solver:
    """Solve {curve, chart value = target} with state tracking for ρ."""

    def __init__(self, chart):
        self.chart = chart
        self.state = -chart.center.c if chart.kind == "D" else None

    def solve(self, x0, target, max_steps=50):
        """1-D Newton in the dominant tangent coordinate, the other coordinate
        projected back onto the curve at every evaluation."""
        chart, p = self.chart, self.chart.p
        st = self.state
        v = _curve_tangent(x0[0], x0[1], p)
        k = 0 if abs(v[0]) >= abs(v[1]) else 1
        other = [complex(x0[1 - k])]

        def point(tau):
            x = _project(tau, other[0], k, p)
            other[0] = x[1 - k]
            return x

        def val(x):
            return chart.value(x[0], x[1], ref=target, state=st)[0]

        tau = complex(x0[k])
        for _ in range(max_steps):
            x = point(tau)
            g = val(x) - target
            h = FD_STEP * max(1.0, abs(tau))
            dg = (val(point(tau + h)) - (g + target)) / h
            if dg == 0 or not cmath.isfinite(dg):
                raise NoConvergence("flat chart value")
            step = g / dg
            tau -= step
            if abs(step) < 1e-14 * max(1.0, abs(tau)):
                break
        x = point(tau)
        value, st2 = chart.value(x[0], x[1], ref=target, state=st)
        if abs(_curve_residual(x[0], x[1], p)) > 1e-10 or abs(value - target) > 1e-8:
            raise NoConvergence("corrector tolerance not met")
        self.state = st2
        return x


def _project(fixed, guess, k, p):
    """Curve point with coordinate k equal to `fixed`, Newton in the other one."""
    y = complex(guess)
    pack = (lambda y: (fixed, y)) if k == 0 else (lambda y: (y, fixed))
    for _ in range(40):
        f0 = _curve_residual(*pack(y), p)
        hh = FD_STEP * max(1.0, abs(y))
        dy = (_curve_residual(*pack(y + hh), p) - f0) / hh
        step = f0 / dy
        y -= step
        if abs(step) < 1e-14 * max(1.0, abs(y)):
            return np.array(pack(y))
    raise NoConvergence("curve projection failed")


def _small_loop(chart, radius=1e-3, loop=96):
    """Chart values on a loop tau = r e^{i theta} in the local coordinate; the
    radius doubles until the values are well above the noise floor."""
    key = (radius, loop)
    if chart.loop is not None and chart.loop[0] == key:
        return chart.loop[1]
    point = _local_coordinate(chart)
    ref = None
    while True:
        taus = radius * np.exp(2j * np.pi * (np.arange(loop) + 0.5) / loop)
        xs = [point(t) for t in taus]
        vals = []
        for x in xs:
            if chart.kind == "D":
                v, _ = chart.value(x[0], x[1], state=-x[0])
            else:
                v, _ = chart.value(x[0], x[1], ref=ref)
            vals.append(v)
            ref = v
        vals = np.array(vals)
        if np.median(np.abs(vals)) >= 1e-3 or radius > 0.05:
            chart.loop = (key, (taus, xs, vals))
            return taus, xs, vals
        radius *= 2
        ref = vals[0] * 2 ** chart.degree  # value ~ C tau^d keeps the branch


def _loop_crossings(xs, vals, phase):
    """Loop points where arg(value) crosses arg(phase), linearly interpolated."""
    rel = np.angle(vals / phase)
    n = len(xs)
    out = []
    for m in range(n):
        r0, r1 = rel[m], rel[(m + 1) % n]
        if r0 < 0 <= r1 and r1 - r0 < np.pi:
            w = -r0 / (r1 - r0)
            out.append((m + w, xs[m] + (xs[(m + 1) % n] - xs[m]) * w))
    return out


def _ray_start(chart, solver, t, s0):
    """Curve point with chart value s0 e^{2 pi i d t} on the branch of angle t.

    Near the center the value is ~ C tau^d; angle t picks the tau direction
    2 pi t - arg(C)/d, and the loop crossing nearest to it seeds the solve."""
    d = chart.degree
    taus, xs, vals = _small_loop(chart)
    C = np.mean(vals / taus ** d)
    phase = cmath.exp(2j * math.pi * d * t)
    want = 2 * math.pi * t - cmath.phase(C) / d
    n = len(taus)
    best = min(_loop_crossings(xs, vals, phase),
               key=lambda mc: abs(cmath.phase(cmath.exp(1j * (2 * math.pi * (mc[0] + 0.5) / n - want)))))
    eps = float(np.median(np.abs(vals)))
    x = solver.solve(best[1], eps * phase)
    if eps >= s0:
        return solver.solve(x, s0 * phase)
    return np.array(_continue_radial(solver, x, phase, eps, s0, steps=30, log_s=True)[-1][1:])


def _continue_radial(solver, x, phase, s_from, s_to, steps=40, min_step=1e-9, log_s=False):
    """Follow value = s * phase from s_from to s_to; samples [(s, c, a)].  Steps are
    geometric in 1 - s (dense near the boundary) or in s (dense near the center)."""
    samples = [(s_from, complex(x[0]), complex(x[1]))]
    if log_s:
        sched = [s_from * (s_to / s_from) ** (k / steps) for k in range(1, steps + 1)]
    else:
        h0, h1 = 1 - s_from, 1 - s_to
        sched = [1 - h0 * (h1 / h0) ** (k / steps) for k in range(1, steps + 1)]
    prev = None
    s_cur = s_from
    i = 0
    while i < len(sched):
        s_new = sched[i]
        guess = x if prev is None else x + (x - prev[1]) * (s_new - s_cur) / (s_cur - prev[0])
        saved = solver.state
        try:
            xn = solver.solve(guess, s_new * phase)
        except (NoConvergence, NumericalFailure):
            solver.state = saved
            if abs(s_new - s_cur) < min_step:
                raise ContinuationStall(f"continuation stalls at s={s_cur:.6g}", s_cur)
            sched.insert(i, 0.5 * (s_cur + s_new))
            continue
        prev = (s_cur, x)
        x, s_cur = xn, s_new
        samples.append((s_cur, complex(x[0]), complex(x[1])))
        i += 1
    return samples


def param_ray_trace(chart, t, s_from=0.05, s_to=0.99, steps=40, min_step=1e-9):
    """Parameter ray of angle t (value target s e^{2 pi i d t}), continued in s."""
    d = chart.degree
    solver = _Solver(chart)
    phase = cmath.exp(2j * math.pi * d * t)
    x = _ray_start(chart, solver, t, s_from)
    out = ParamRaySample(t, _continue_radial(solver, x, phase, s_from, s_to, steps, min_step))
    out.last_s = out.samples[-1][0]
    out.landing, out.error = _richardson(solver, out, phase)
    chart.rays[t] = out
    return out


def _richardson(solver, ray, phase):
    """Landing estimate from the values at h, 2h, 4h with h = 1 - s_end."""
    s_end, c_end, a_end = ray.samples[-1]
    h = 1 - s_end
    if 1 - 4 * h < ray.samples[0][0]:
        return None, float("nan")  # ray too short for an extrapolated landing
    pts = {1: np.array([c_end, a_end])}
    for m in (2, 4):
        s = 1 - m * h
        near = min(ray.samples, key=lambda r: abs(r[0] - s))
        pts[m] = solver.solve(np.array([near[1], near[2]]), s * phase)
    # restore tracked state at the end of the ray
    solver.solve(pts[1], s_end * phase)
    r1a = 2 * pts[1] - pts[2]
    r1b = 2 * pts[2] - pts[4]
    r2 = (4 * r1a - r1b) / 3
    err = float(np.linalg.norm(r2 - r1a))
    return (complex(r2[0]), complex(r2[1])), err


def landing_separation_experiment(chart, angles, s_max=0.995):
    """Trace each angle; PASS iff all pairwise landing distances exceed three
    times the summed error bars.  Returns (passed, rows)."""
    rays = {}
    rows = []
    for t in angles:
        try:
            rays[t] = param_ray_trace(chart, t, s_to=s_max)
        except ContinuationStall as exc:
            rows.append(dict(t1=t, t2=None, distance=float("nan"), bound=float("nan"),
                             status="STALL", note=f"last s {exc.last_s}"))
    keys = sorted(rays)
    for i, t1 in enumerate(keys):
        for t2 in keys[i + 1:]:
            L1, L2 = np.array(rays[t1].landing), np.array(rays[t2].landing)
            dist = float(np.linalg.norm(L1 - L2))
            bound = 3 * (rays[t1].error + rays[t2].error)
            rows.append(dict(t1=t1, t2=t2, distance=dist, bound=bound,
                             status="PASS" if dist > bound else "FAIL",
                             note=_parabolic_note(chart, t1, t2)))
    passed = bool(rows) and all(r["status"] == "PASS" for r in rows)
    return passed, rows


def _doubling_period(x, limit=12):
    from fractions import Fraction
    fx = Fraction(x).limit_denominator(10 ** 6) % 1
    y = fx
    for k in range(1, limit + 1):
        y = (2 * y) % 1
        if y == fx:
            return k
    return None


def _parabolic_note(chart, *ts):
    notes = []
    for t in ts:
        if _doubling_period((chart.degree * t) % 1) == 2:
            notes.append(f"{t}: parabolic-suspect (d t has doubling period 2)")
    return "; ".join(notes)


# ---------------------------------------------------------------------------
# type D boundary

@dataclass
class BoundaryTrace:
    points: np.ndarray  # (c, a) samples, theta from 0 to 2 pi inclusive
    closure_defect: float
    diameter: float
    winding: int
    simple: bool
    stalls: list


def _winding(points, center):
    ang = np.angle(points - center)
    return int(round(np.sum((np.diff(ang) + np.pi) % (2 * np.pi) - np.pi) / (2 * np.pi)))


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign(((b - a).conjugate() * (c - a)).imag)
    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0) and (orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def _is_simple(poly):
    n = len(poly) - 1
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(poly[i], poly[i + 1], poly[j], poly[j + 1]):
                return False
    return True


def boundary_trace_D(chart, m=128, r=0.999, min_step=1e-7):
    """Curve {ρ = r e^{iθ}} on the component, continued in θ over a full turn."""
    if chart.kind != "D":
        raise ValidationError("boundary tracing needs a type-D chart")
    ray = param_ray_trace(chart, 0.0, s_to=r, steps=40)
    solver = _Solver(chart)
    x = np.array([ray.samples[-1][1], ray.samples[-1][2]])
    solver.state = -x[0]
    x = solver.solve(x, r + 0j)
    pts = [x.copy()]
    stalls = []
    th, prev = 0.0, None
    targets = [2 * math.pi * k / m for k in range(1, m + 1)]
    i = 0
    while i < len(targets):
        tn = targets[i]
        guess = x if prev is None else x + (x - prev[1]) * (tn - th) / (th - prev[0])
        saved = solver.state
        try:
            xn = solver.solve(guess, r * cmath.exp(1j * tn))
        except (NoConvergence, NumericalFailure):
            solver.state = saved
            if tn - th < min_step:
                stalls.append(th)
                raise ContinuationStall(f"boundary stalls at theta={th:.6g}", th)
            targets.insert(i, 0.5 * (th + tn))
            continue
        prev = (th, x)
        x, th = xn, tn
        pts.append(x.copy())
        i += 1
    pts = np.array(pts)
    cs = pts[:, 0]
    defect = float(np.linalg.norm(pts[-1] - pts[0]))
    diam = float(np.max(np.abs(cs[:, None] - cs[None, :])))
    out = BoundaryTrace(pts, defect, diam, _winding(cs, chart.center.c), _is_simple(cs), stalls)
    chart.boundary = out
    return out


# ---------------------------------------------------------------------------
# cover degree probe

@dataclass
class PreimageCount:
    count: int
    solutions: list
    winding: int
    expected: int
    erratum_note: str


def _branch_a(c, a_guess, p):
    a = complex(a_guess)
    for _ in range(40):
        h = FD_STEP * max(1.0, abs(a))
        f0 = _curve_residual(c, a, p)
        da = (_curve_residual(c, a + h, p) - f0) / h
        step = f0 / da
        a -= step
        if abs(step) < 1e-14 * max(1.0, abs(a)):
            return a
    raise NoConvergence("fiber point not found")


def _local_coordinate(chart):
    """Curve points near the center as a function of one complex coordinate."""
    c0, a0, p = chart.center.c, chart.center.a, chart.p
    v = _curve_tangent(c0, a0, p)
    use_c = abs(v[0]) >= abs(v[1])

    def point(tau):
        if use_c:
            c = c0 + tau
            return np.array([c, _branch_a(c, a0 + tau * v[1] / v[0], p)])
        a = a0 + tau
        c = c0 + tau * v[0] / v[1]
        for _ in range(40):
            hh = FD_STEP * max(1.0, abs(c))
            f0 = _curve_residual(c, a, p)
            step = f0 / ((_curve_residual(c + hh, a, p) - f0) / hh)
            c -= step
            if abs(step) < 1e-14 * max(1.0, abs(c)):
                break
        return np.array([c, a])

    return point


def count_phi_preimages(chart, w0=0.3 * cmath.exp(0.7j), radius=1e-3, loop=96):
    """Distinct on-curve solutions of Φ = w0 in the component.

    The winding of Φ on a small loop around the center gives the solutions of
    Φ = eps * w0/|w0| near the center; each is continued along the value path
    s * w0/|w0| up to s = |w0| and the endpoints are deduplicated.
    """
    if chart.kind == "D":
        raise ValidationError("count_phi_preimages is for A/B/C charts")
    phase = w0 / abs(w0)
    taus, xs, vals = _small_loop(chart, radius, loop)
    winding = int(round(np.sum(np.angle(np.roll(vals, -1) / vals)) / (2 * np.pi)))
    eps = float(np.median(np.abs(vals)))
    solver = _Solver(chart)
    sols = []
    for _, x0 in _loop_crossings(xs, vals, phase):
        try:
            x = solver.solve(x0, eps * phase)
            samples = _continue_radial(solver, x, phase, eps, abs(w0), steps=60, log_s=True)
        except NumericalFailure:
            continue
        end = np.array(samples[-1][1:])
        if classify(end[0], end[1], chart.p) != chart.verdict:
            continue
        if not any(np.linalg.norm(end - np.array(q)) < 1e-7 for q in sols):
            sols.append((complex(end[0]), complex(end[1])))
    expected = COVER_DEGREE[chart.kind]
    note = ""
    if chart.kind in ("A", "B"):
        if len(sols) == expected:
            note = ("expected-erratum: counts match the cover degrees A=2, B=3; "
                    "the opposite assignment A=3, B=2 is not observed")
        else:
            note = f"count {len(sols)} differs from cover degree {expected}"
    return PreimageCount(len(sols), sols, winding, expected, note)
