"""Fate of the free critical point -c for a parameter on S_p: escape, one of the
four hyperbolic types, or an honest Undecided."""

import cmath
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dynamics import (
    DELTA_SEP, CubicParam, critical_cycle, escape_bound, evaluate, find_cycle, forward,
)
from .errors import NoConvergence, NoTrapFound, ResolutionExhausted, WrongPeriod

BASE_CELLS = 64  # cells from the grid center to its edge at the coarsest level
MAX_REFINE = 4
CELL_BUDGET = 400
MAX_CYCLE_PERIOD = 64
R_MIN = 1e-8
# grid axes are turned off the coordinate axes so that invariant real lines of
# symmetric parameters do not run along a row of cells; negation symmetry is kept
GRID_TURN = cmath.exp(0.3j)


@dataclass(frozen=True)
class Escape:
    n: int
    code = "E"


@dataclass(frozen=True)
class TypeA:
    code = "A"


@dataclass(frozen=True)
class TypeB:
    k: int
    code = "B"


@dataclass(frozen=True)
class TypeC:
    l: int
    kappa: int
    code = "C"


@dataclass(frozen=True)
class TypeD:
    q: int
    multiplier: complex
    code = "D"


@dataclass(frozen=True)
class Undecided:
    budget: int
    reason: str = ""
    code = "U"


def verdict_fields(v):
    """The (k, l, kappa, q, multiplier) record used in exports; blanks as None."""
    return {
        "k": getattr(v, "k", None),
        "l": getattr(v, "l", None),
        "kappa": getattr(v, "kappa", None),
        "q": getattr(v, "q", None),
        "multiplier": getattr(v, "multiplier", None),
        "n": getattr(v, "n", None),
    }


def trap_radius(param, cycle, samples=64, r0=None):
    """Radius r with f^p(disk(c, r)) inside disk(c, r/2) on sampled boundary points.

    Halves from r0 until the sampled test passes, then halves once more as a
    safety margin.
    """
    c, p = param.c, cycle.period
    r = r0 if r0 is not None else max(1.0, abs(c))
    ring = np.exp(2j * np.pi * np.arange(samples) / samples)
    while r >= R_MIN:
        u = c + r * ring
        image = u
        for _ in range(p):
            image = image * image * image - 3 * c * c * image + param.a
        if np.all(np.isfinite(image)) and np.max(np.abs(image - c)) < r / 2:
            return r / 2
        r /= 2
    raise NoTrapFound(f"no contracting disk above {R_MIN}")


def _phases(param, p, trap, zs, budget):
    """Cycle phase of each point: j if the orbit settles in the component of f^j(c),
    -1 if it escapes or is not captured by the trap within budget."""
    c, a = param.c, param.a
    c2 = 3 * c * c
    R = escape_bound(param).radius
    z = np.array(zs, dtype=complex)
    out = np.full(z.shape, -1, dtype=np.int16)
    idx = np.arange(z.size)
    zl = z.ravel().copy()
    res = out.ravel()
    for n in range(budget + 1):
        hit = np.abs(zl - c) < trap
        if hit.any():
            res[idx[hit]] = (-n) % p
        gone = hit | ~(np.abs(zl) < R)
        if gone.any():
            keep = ~gone
            zl, idx = zl[keep], idx[keep]
        if zl.size == 0 or n == budget:
            break
        zl = zl * zl * zl - c2 * zl + a
    return res.reshape(z.shape)


@dataclass
class MembershipGrid:
    w: complex
    h: float
    half: int
    phase: np.ndarray  # -2 unevaluated, -1 outside the critical basin, else phase
    region: np.ndarray  # flood region of w
    target: int

    def cell_of(self, z):
        d = (complex(z) - self.w) / (self.h * GRID_TURN)
        i, j = int(round(d.imag)) + self.half, int(round(d.real)) + self.half
        n = 2 * self.half + 1
        if 0 <= i < n and 0 <= j < n:
            return i, j
        return None

    def point(self, i, j):
        return self.w + self.h * GRID_TURN * complex(j - self.half, i - self.half)


class _Flood:
    def __init__(self, param, p, trap, w, target, h, half, budget):
        self.param, self.p, self.trap, self.budget = param, p, trap, budget
        self.w, self.h, self.half = w, h, half
        n = 2 * half + 1
        self.n = n
        self.phase = np.full((n, n), -2, dtype=np.int16)
        self.region = np.zeros((n, n), dtype=bool)
        self.target = target

    def coords(self, flat):
        i, j = np.divmod(flat, self.n)
        return self.w + self.h * GRID_TURN * ((j - self.half) + 1j * (i - self.half))

    def ensure(self, flat):
        ph = self.phase.ravel()
        need = flat[ph[flat] == -2]
        if need.size:
            need = np.unique(need)
            ph[need] = _phases(self.param, self.p, self.trap, self.coords(need), self.budget)
        return ph[flat]

    def neighbours(self, flat):
        i, j = np.divmod(flat, self.n)
        out, src = [], []
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, j + dj
            ok = (ii >= 0) & (ii < self.n) & (jj >= 0) & (jj < self.n)
            out.append(ii[ok] * self.n + jj[ok])
            src.append(flat[ok])
        return np.concatenate(out), np.concatenate(src)

    def run(self):
        start = np.array([self.half * self.n + self.half])
        if self.ensure(start)[0] != self.target:
            return
        reg = self.region.ravel()
        reg[start] = True
        frontier = start
        while frontier.size:
            nb, src = self.neighbours(frontier)
            fresh = ~reg[nb]
            nb, src = nb[fresh], src[fresh]
            if nb.size == 0:
                break
            same = self.ensure(nb) == self.target
            nb, src = nb[same], src[same]
            if nb.size == 0:
                break
            mids = 0.5 * (self.coords(nb) + self.coords(src))
            ok = _phases(self.param, self.p, self.trap, mids, self.budget) == self.target
            nb = np.unique(nb[ok])
            nb = nb[~reg[nb]]
            reg[nb] = True
            frontier = nb


@lru_cache(maxsize=64)
def _flood_cached(c, a, p, w, level, budget, h0, trap):
    param = CubicParam(c, a)
    R = escape_bound(param).radius
    half = BASE_CELLS * 2 ** level
    h = (h0 if h0 else 2 * R / BASE_CELLS) / 2 ** level
    target = _phases(param, p, trap, np.array([w]), budget)[0]
    fl = _Flood(param, p, trap, w, int(target), h, half, budget)
    fl.run()
    return MembershipGrid(w, h, half, fl.phase, fl.region, int(target)), fl


def _boundary_adjacent(fl, cell):
    i, j = cell
    flat = np.array([i * fl.n + j])
    nb, _ = fl.neighbours(flat)
    if nb.size < 4:
        return True
    return bool(np.any(fl.ensure(np.concatenate([flat, nb])) != fl.target))


def flood_membership(param, w, z, h=None, p=None, trap=None, budget=CELL_BUDGET):
    """Does z lie in the Fatou component of the critical cycle point w?

    Returns (verdict, MembershipGrid).  The grid is centred at w and reaches
    2*R_esc in each direction; it is refined by halving h (at most 4 times) while
    z's cell touches cells of another fate.
    """
    if p is None:
        p = _period_of(param)
    cycle = critical_cycle(param, p)
    if trap is None:
        trap = trap_radius(param, cycle)
    z = complex(z)
    zphase = _phases(param, p, trap, np.array([z]), budget)[0]
    for level in range(MAX_REFINE + 1):
        grid, fl = _flood_cached(param.c, param.a, p, complex(w), level, budget, h, trap)
        if zphase != grid.target or grid.target < 0:
            return False, grid
        cell = grid.cell_of(z)
        if cell is None:
            return False, grid
        if not _boundary_adjacent(fl, cell):
            return bool(grid.region[cell]), grid
    raise ResolutionExhausted(f"cell of {z} stays on a boundary at h={grid.h:.3g}")


def _period_of(param):
    for q in range(1, MAX_CYCLE_PERIOD + 1):
        if abs(forward(param, param.c, q) - param.c) < 1e-9 * max(1.0, abs(param.c)):
            return q
    raise WrongPeriod("c is not periodic")


def _attracting_cycle(param, z, crit_orbit):
    """Newton-certified attracting cycle near the settled orbit point z, or None."""
    samples = [z]
    for _ in range(MAX_CYCLE_PERIOD):
        samples.append(evaluate(param, samples[-1]))
    scale = max(1.0, abs(z))
    for q in range(1, MAX_CYCLE_PERIOD + 1):
        if abs(samples[q] - z) < 1e-6 * scale:
            try:
                cyc = find_cycle(param, z, q)
            except (NoConvergence, WrongPeriod):
                continue
            if min(abs(u - v) for u in cyc.points for v in crit_orbit) <= DELTA_SEP:
                return None
            return cyc
    return None


def classify(c, a, p, budget=2000, h=None, trap_scale=1.0):
    """Verdict for the free critical point -c of the parameter (c, a) on S_p."""
    param = CubicParam(c, a)
    cycle = critical_cycle(param, p)
    crit_orbit = cycle.points
    R = escape_bound(param).radius
    try:
        trap = trap_radius(param, cycle) * trap_scale
    except NoTrapFound:
        return Undecided(budget, "no trap")
    z = -param.c
    captured = None
    for n in range(budget + 1):
        if not abs(z) < R:
            return Escape(n)
        if abs(z - param.c) < trap:
            captured = n
            break
        if n >= 16 and n % 16 == 0:
            cyc = _attracting_cycle(param, z, crit_orbit)
            if cyc is not None:
                if abs(cyc.multiplier) < 1:
                    return TypeD(cyc.period, cyc.multiplier)
                return Undecided(budget, "non-attracting cycle")
        z = evaluate(param, z)
    if captured is None:
        return Undecided(budget, "orbit undecided")
    try:
        k = (-captured) % p
        inside, _ = flood_membership(param, crit_orbit[k], -param.c, h=h, p=p, trap=trap)
        if inside:
            return TypeA() if k == 0 else TypeB(k)
        z = -param.c
        for l in range(1, captured + 1):
            z = evaluate(param, z)
            kappa = (k + l) % p
            inside, _ = flood_membership(param, crit_orbit[kappa], z, h=h, p=p, trap=trap)
            if inside:
                return TypeC(l, kappa)
    except ResolutionExhausted:
        return Undecided(budget, "resolution")
    return Undecided(budget, "no entry found")
