"""The curve S_p of parameters whose marked critical point c has exact period p:
degree and Euler characteristic bookkeeping, fibers over c, and continuation of
branches along paths in the c-plane."""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .dynamics import DELTA_SEP, MP_BITS, TOL_CYCLE, CubicParam, forward
from .errors import BranchJump, DegenerateFiber, StepUnderflow, ValidationError

MAX_FIBER_PERIOD = 8


def divisors(n):
    return [k for k in range(1, n + 1) if n % k == 0]


@lru_cache(maxsize=None)
def curve_degree(p):
    if p < 1:
        raise ValidationError("p must be >= 1")
    return 3 ** (p - 1) - sum(curve_degree(n) for n in divisors(p)[:-1])


def euler_characteristic(p):
    return (2 - p) * curve_degree(p)


@dataclass(frozen=True)
class CurveStats:
    p: int
    d: int
    chi: int


def curve_stats(p):
    return CurveStats(p, curve_degree(p), euler_characteristic(p))


def fiber_polynomial(c, p):
    """Coefficients (ascending powers of a) of f^p(c) - c as a polynomial in a.

    Double precision up to p = 5; 128-bit mpmath numbers beyond, since the
    coefficients grow like |c|^(3^p).
    """
    if p > 5:
        with mpmath.workprec(MP_BITS):
            c = mpmath.mpc(c)
            z = [c]
            for _ in range(p):
                z2 = _mp_convolve(z, z)
                z3 = _mp_convolve(z2, z)
                nz = [x for x in z3] + [mpmath.mpc(0)] * (len(z3) < 2)
                for k, v in enumerate(z):
                    nz[k] -= 3 * c * c * v
                nz[1] += 1
                z = nz
            z[0] -= c
            return z
    c = complex(c)
    z = np.array([c], dtype=complex)
    for _ in range(p):
        nz = np.convolve(np.convolve(z, z), z)
        if len(nz) < 2:
            nz = np.append(nz, 0)
        nz[: len(z)] -= 3 * c * c * z
        nz[1] += 1
        z = nz
    z[0] -= c
    return z


def _mp_convolve(x, y):
    out = [mpmath.mpc(0)] * (len(x) + len(y) - 1)
    for i, xi in enumerate(x):
        if xi == 0:
            continue
        for j, yj in enumerate(y):
            out[i + j] += xi * yj
    return out


def _fiber_eval(c, a, p):
    """g(a) = f^p(c) - c and g'(a), evaluated by the orbit recurrence (stable)."""
    c2 = 3 * c * c
    z = np.full_like(a, c)
    dz = np.zeros_like(a)
    for _ in range(p):
        dz = (3 * z * z - c2) * dz + 1
        z = z * z * z - c2 * z + a
    return z - c, dz


def _newton_ratio(c, a, p):
    """g/g' for every entry of a; far-out entries use the leading-term estimate."""
    c2 = 3 * c * c
    z = np.full_like(a, c)
    dz = np.zeros_like(a)
    ratio = np.full(a.shape, np.nan, dtype=complex)
    live = np.ones(a.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for k in range(p):
            dz = np.where(live, (3 * z * z - c2) * dz + 1, dz)
            z = np.where(live, z * z * z - c2 * z + a, z)
            big = live & (np.abs(z) > 1e40)
            if big.any():
                rem = p - k - 1
                ratio[big] = z[big] / (3.0 ** rem * dz[big])
                live &= ~big
        ratio[live] = (z[live] - c) / dz[live]
    return ratio


def _root_radius(coeffs):
    n = len(coeffs) - 1
    if isinstance(coeffs, np.ndarray):
        a0 = abs(coeffs[0])
        return a0 ** (1.0 / n) if a0 > 0 else 1.0
    with mpmath.workprec(MP_BITS):
        a0 = abs(coeffs[0])
        return float(mpmath.power(a0, mpmath.mpf(1) / n)) if a0 > 0 else 1.0


def aberth(c, p, init=None, max_iter=800, tol=1e-14):
    """All roots of f^p(c) = c (in a) by Aberth–Ehrlich simultaneous iteration."""
    n = 3 ** (p - 1)
    if init is None:
        r = max(_root_radius(fiber_polynomial(c, p)), 0.1)
        k = np.arange(n)
        init = r * np.exp(2j * np.pi * (k + 0.25) / n + 0.4j)
    z = np.array(init, dtype=complex)
    if n == 1:
        for _ in range(50):
            z = z - _newton_ratio(c, z, p)
        return z
    eye = np.eye(n, dtype=bool)
    for _ in range(max_iter):
        ratio = _newton_ratio(c, z, p)
        diff = z[:, None] - z[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(eye, 0, 1.0 / np.where(eye, 1, diff))
        s = inv.sum(axis=1)
        with np.errstate(all="ignore"):
            w = ratio / (1 - ratio * s)
        w = np.where(np.isfinite(w), w, 1e-3 * (1 + np.abs(z)))
        z = z - w
        if np.all(np.abs(w) <= tol * (1 + np.abs(z))):
            break
    return z


def polish(c, a, p, steps=8):
    for _ in range(steps):
        g, dg = _fiber_eval(c, a, p)
        a = a - g / dg
    return a


@dataclass(frozen=True)
class FiberRoot:
    a: complex
    exact_period: int
    residual: float


@dataclass
class FiberSolution:
    c: complex
    p: int
    roots: list = field(default_factory=list)

    def histogram(self):
        out = {}
        for r in self.roots:
            out[r.exact_period] = out.get(r.exact_period, 0) + 1
        return dict(sorted(out.items()))

    def values(self):
        return np.array([r.a for r in self.roots])


def _label_period(c, a, p, sep=DELTA_SEP, tol=TOL_CYCLE):
    # the tolerance is widened by a running bound on the rounding error of the orbit
    param = CubicParam(c, a)
    c2 = 3 * abs(c) ** 2
    z, err = c, 0.0
    for n in range(1, p + 1):
        err = abs(3 * z * z - 3 * c * c) * err + 2.2e-16 * (abs(z) ** 3 + c2 * abs(z) + abs(a))
        z = forward(param, z, 1)
        if p % n:
            continue
        gap = abs(z - c)
        if gap < max(tol, 10 * err):
            return n
        if n < p and gap <= sep:
            raise DegenerateFiber(f"a={a}: gap {gap:.3g} at n={n} is ambiguous")
    raise DegenerateFiber(f"a={a}: residual {gap:.3g} above tolerance")


def fiber_solve(c, p, perturb=False, rng=None, tries=5):
    """All a with f^p(c) = c, each labelled with its exact period.

    With perturb=True a DegenerateFiber is answered by moving c by 1e-4 in a
    random direction and solving again (the returned solution records the c used).
    """
    if p < 1 or p > MAX_FIBER_PERIOD:
        raise ValidationError(f"p must lie in 1..{MAX_FIBER_PERIOD}")
    c = complex(c)
    rng = rng or np.random.default_rng(0)
    for attempt in range(tries):
        try:
            return _fiber_solve_once(c, p)
        except DegenerateFiber:
            if not perturb or attempt == tries - 1:
                raise
            c = c + 1e-4 * np.exp(2j * np.pi * rng.random())
    raise AssertionError("unreachable")


def _mp_residual(c, a, p, polish_steps=0):
    """Residual of f^p(c) = c at a in 128-bit arithmetic, optionally Newton-polishing
    a first; returns (a rounded to double, |residual| of that double)."""
    with mpmath.workprec(MP_BITS):
        cm, am = mpmath.mpc(c), mpmath.mpc(a)
        for _ in range(polish_steps):
            z, dz = cm, mpmath.mpc(0)
            for _ in range(p):
                dz = (3 * z * z - 3 * cm * cm) * dz + 1
                z = z ** 3 - 3 * cm * cm * z + am
            am -= (z - cm) / dz
        a = complex(am)
        z, am = cm, mpmath.mpc(a)
        for _ in range(p):
            z = z ** 3 - 3 * cm * cm * z + am
        return a, float(abs(z - cm))


def _fiber_solve_once(c, p, init=None):
    roots = polish(c, aberth(c, p, init=init), p)
    if len(roots) > 1:
        d = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots)) * 1e300
        if d.min() < DELTA_SEP:
            raise DegenerateFiber(f"roots cluster within {d.min():.3g}")
    out = []
    for a in roots:
        a = complex(a)
        res = abs(forward(CubicParam(c, a), c, p) - c)
        if res > 1e-11:
            # double evaluation is at its rounding floor here; finish in 128 bits
            a, res = _mp_residual(c, a, p, polish_steps=3)
        out.append(FiberRoot(a, _label_period(c, a, p), res))
    out.sort(key=lambda r: (r.exact_period, round(r.a.real, 12), round(r.a.imag, 12)))
    return FiberSolution(c, p, out)


def on_curve_residual(c, a, p):
    param = CubicParam(c, a)
    z, margin = complex(c), math.inf
    for k in range(1, p + 1):
        z = forward(param, z, 1)
        if k < p and p % k == 0:
            margin = min(margin, abs(z - c))
    return z - c, margin


@dataclass
class BranchSample:
    path: list
    p: int
    steps: list = field(default_factory=list)
    halvings: int = 0

    @property
    def end(self):
        return self.path[-1]


def _da_dc(c, a, p):
    g, ga = _fiber_eval(np.array([c]), np.array([a]), p)
    h = 1e-7 * max(1.0, abs(c))
    g2, _ = _fiber_eval(np.array([c + h]), np.array([a]), p)
    gc = (g2[0] - g[0]) / h
    return -gc / ga[0]


def _correct(c, a, p, iters=30):
    for _ in range(iters):
        g, ga = _fiber_eval(np.array([c]), np.array([a]), p)
        step = g[0] / ga[0]
        a = a - step
        if abs(step) < 1e-15 * max(1.0, abs(a)):
            break
    return a


def branch_continue(seed, p, c_path, max_step=0.05, min_step=1e-7):
    """Follow the branch of S_p through `seed` = (c, a) along the c-path.

    Every accepted point is matched against the full fiber at its c: the
    corrected root must be the nearest one to the prediction with a factor-2
    margin over the runner-up, otherwise the step is halved.
    """
    c0, a0 = complex(seed[0]), complex(seed[1])
    res, _ = on_curve_residual(c0, a0, p)
    if abs(res) >= 1e-10:
        raise ValidationError(f"seed residual {abs(res):.3g} >= 1e-10")
    sample = BranchSample([(c0, a0)], p)
    fiber = _fiber_solve_once(c0, p).values() if p > 1 else None
    c, a = c0, a0
    for target in list(c_path)[1:] if c_path and abs(complex(c_path[0]) - c0) < 1e-12 else list(c_path):
        target = complex(target)
        step = max_step
        while abs(target - c) > 1e-15:
            dist = abs(target - c)
            h = min(step, dist)
            cn = c + (target - c) / dist * h
            ap = a + _da_dc(c, a, p) * (cn - c)
            if fiber is not None:
                shift = ap - a
                try:
                    new_fiber = _fiber_solve_once(cn, p, init=fiber + shift * 0).values()
                except DegenerateFiber:
                    new_fiber = None
                if new_fiber is None:
                    ok = False
                else:
                    dists = np.sort(np.abs(new_fiber - ap))
                    ok = dists[0] * 2 < dists[1]
                if not ok:
                    step /= 2
                    sample.halvings += 1
                    if step < min_step:
                        raise StepUnderflow(f"step below {min_step} near c={c}")
                    continue
            an = _correct(cn, ap, p)
            if fiber is not None:
                nearest = new_fiber[np.argmin(np.abs(new_fiber - ap))]
                if abs(an - nearest) > 1e-8 * max(1.0, abs(an)):
                    raise BranchJump(f"corrector left the predicted root near c={cn}")
                fiber = new_fiber
            res, _ = on_curve_residual(cn, an, p)
            if abs(res) >= 1e-10:
                step /= 2
                sample.halvings += 1
                if step < min_step:
                    raise StepUnderflow(f"residual stuck at {abs(res):.3g} near c={cn}")
                continue
            c, a = cn, an
            sample.path.append((c, a))
            sample.steps.append(h)
            step = min(max_step, step * 1.5)
    return sample
