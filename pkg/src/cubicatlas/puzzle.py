"""Support graphs, finite-depth puzzles and the admissible-puzzle selection.

A depth-n puzzle is the face set of a planar map whose edges are the traced
rays of f^-n(graph), the outer equipotential and the small inner equipotentials
around each basin component center.  Faces keep both combinatorial labels and
closed polylines; labels decide equality and containment, polylines locate points.
"""

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import (
    CubicParam, basin_chart, critical_cycle, evaluate, forward_with_derivative, local_degree,
)
from .errors import (
    ArrangementAmbiguous, GraphInvalid, NoConvergence, OnGraph, ParabolicSuspect, RayBifurcates,
    SelectionFailed,
    ValidationError,
)
from .rays import (
    TOP_LEVEL, Component, Internal, Landed, RayAngle, TracedRay, chart_inverse, _inverse_bottcher_far,
    _newton_iterate, angle_double_orbit, angle_set_preimages, certify_periodic,
    colanding_external_angles, cycle_components, extend_tail, landing_point, trace_external_rays,
    trace_internal_rays,
)

MAX_COLANDING_PERIOD = 6
TAIL_GAP = 1e-4  # ray ends farther than this from their vertex get their tail extended
CANDIDATES = ("BOTH", "G17", "G37")
ONE_SEVENTH = RayAngle(1, 7)
THREE_SEVENTHS = RayAngle(3, 7)
LAND_LEVEL = 1e-6  # potential (after mapping to the graph) where rays hand over to Newton
GRAPH_TOL = 1e-7  # closer than this to an arc counts as on the graph
ARC_SAMPLES = 8
VERTEX_BIN = 1e-6


def candidate_angles(candidate):
    if candidate == "G17":
        return angle_double_orbit(ONE_SEVENTH)
    if candidate == "G37":
        return angle_double_orbit(THREE_SEVENTHS)
    if candidate == "BOTH":
        return angle_double_orbit(ONE_SEVENTH) + angle_double_orbit(THREE_SEVENTHS)
    raise ValidationError(f"unknown candidate {candidate!r}")


# ---------------------------------------------------------------------------
# boundary labels

@dataclass(frozen=True)
class ExternalRay:
    angle: RayAngle


@dataclass(frozen=True)
class InternalRay:
    component: int
    angle: RayAngle


@dataclass(frozen=True)
class OuterEquipotential:
    level: Fraction


@dataclass(frozen=True)
class InnerEquipotential:
    component: int
    level: Fraction


@dataclass(frozen=True)
class Vertex:
    id: int


RAY_LABELS = (ExternalRay, InternalRay)


def label_str(lab):
    if isinstance(lab, ExternalRay):
        return f"E({lab.angle})"
    if isinstance(lab, InternalRay):
        return f"I({lab.component},{lab.angle})"
    if isinstance(lab, OuterEquipotential):
        return f"O({lab.level})"
    if isinstance(lab, InnerEquipotential):
        return f"Q({lab.component},{lab.level})"
    return f"V({lab.id})"


# ---------------------------------------------------------------------------
# registries shared by all depths of one graph

class _Vertices:
    """Landing points identified up to a small distance; ids are stable."""

    def __init__(self):
        self.points = []
        self.bins = {}

    def key(self, z):
        return int(math.floor(z.real / VERTEX_BIN)), int(math.floor(z.imag / VERTEX_BIN))

    def find(self, z, tol=1e-8):
        kx, ky = self.key(z)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for vid in self.bins.get((kx + dx, ky + dy), ()):
                    if abs(self.points[vid] - z) <= tol * max(1.0, abs(z)):
                        return vid
        return None

    def add(self, z):
        z = complex(z)
        vid = self.find(z)
        if vid is None:
            vid = len(self.points)
            self.points.append(z)
            self.bins.setdefault(self.key(z), []).append(vid)
        return vid


class _Components:
    """Basin components of the critical cycle, generated by first-hit time m."""

    def __init__(self, param, cycle):
        self.param, self.cycle = param, cycle
        self.p = cycle.period
        self.items = cycle_components(cycle)
        self.image = {j: (j + 1) % self.p for j in range(self.p)}
        self.by_m = [list(self.items)]

    def upto(self, m):
        while len(self.by_m) <= m:
            self._grow()
        return [cp for level in self.by_m[: m + 1] for cp in level]

    def _grow(self):
        param = self.param
        c2 = 3 * param.c * param.c
        prev = self.by_m[-1]
        fresh = []
        scale = max(1.0, abs(param.c))
        for cp in prev:
            roots = np.roots([1, 0, -c2, param.a - cp.center])
            for z in roots:
                z = complex(z)
                for _ in range(3):
                    z -= (z ** 3 - c2 * z + param.a - cp.center) / (3 * z * z - c2)
                if len(self.by_m) == 1 and min(abs(z - w) for w in self.cycle.points) < 1e-6 * scale:
                    continue
                if abs(3 * z * z - c2) < 1e-8 * scale:
                    raise ValidationError("free critical point lies in the critical cycle basin")
                new = Component(len(self.items), z, cp.m + 1, cp.j)
                self.items.append(new)
                self.image[new.id] = cp.id
                fresh.append(new)
        self.by_m.append(fresh)

    def get(self, cid):
        return self.items[cid]


def _passes(j, s, p):
    """Visits to the critical component among s steps starting at cycle index j."""
    return sum(1 for i in range(s) if (j + i) % p == 0)


# ---------------------------------------------------------------------------
# support graph

@dataclass
class GraphVertex:
    id: int
    point: complex
    period: int
    multiplier: complex
    rotation: tuple  # incident ray labels, counter-clockwise


@dataclass
class SupportGraph:
    param: CubicParam
    p: int
    candidate: str
    thetas: tuple
    degree: int
    cycle: object = field(repr=False)
    external: dict = field(repr=False)  # RayAngle -> TracedRay
    internal: dict = field(repr=False)  # (component id, RayAngle) -> TracedRay
    vertices: dict = field(repr=False)  # vertex id -> GraphVertex
    valid: bool = True
    reason: str = ""
    ctx: object = field(default=None, repr=False)

    @property
    def external_angles(self):
        return frozenset(self.external)

    @property
    def internal_labels(self):
        return frozenset(self.internal)

    def label_images(self):
        """Angle dynamics on the label set: tripling outside, doubling through U(c)."""
        ext = {t: t.triple() for t in self.external}
        inn = {}
        for (j, t) in self.internal:
            inn[(j, t)] = ((j + 1) % self.p, t.times(self.degree) if j == 0 else t)
        return ext, inn

    def arc_count(self):
        return {"internal": len(self.internal), "external": len(self.external),
                "equipotentials": 1 + self.p}


class _Context:
    """Per-graph state: registries, ray caches and built puzzles."""

    def __init__(self, param, cycle, degree, thetas):
        self.param, self.cycle, self.degree = param, cycle, degree
        self.p = cycle.period
        self.thetas = frozenset(thetas)
        self.vertices = _Vertices()
        self.components = _Components(param, cycle)
        self.ext_rays = {}
        self.int_rays = {}
        self.ext_landing = {}  # RayAngle -> vertex id
        self.int_landing = {}  # (component id, RayAngle) -> vertex id
        self.ext_vertex = {}  # depth-0 external angle -> vertex id
        self.int_vertex = {}  # depth-0 (j, theta) -> vertex id
        self.puzzles = {}
        self.graph = None


def _polyline_distance(z, pts):
    """Distance from z to the polyline through pts."""
    a, b = pts[:-1], pts[1:]
    ab = b - a
    den = np.abs(ab) ** 2
    s = np.where(den > 0, ((z - a) * ab.conjugate()).real / np.where(den > 0, den, 1), 0.0)
    s = np.clip(s, 0.0, 1.0)
    return float(np.min(np.abs(a + s * ab - z))) if len(a) else float(abs(pts[0] - z))


def _inside(z, poly):
    """Even-odd rule for a closed polygon given as an array of vertices."""
    x, y = z.real, z.imag
    a = poly
    b = np.roll(poly, -1)
    cond = (a.imag > y) != (b.imag > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
    return bool(np.count_nonzero(cond & (x < xc)) % 2)


def _far_arc(t0, t1, samples=ARC_SAMPLES):
    """Points of the top equipotential from angle t0 counter-clockwise to t1."""
    gap = (t1 - t0) % 1.0 or 1.0
    phis = t0 + gap * np.arange(1, samples) / samples
    return np.exp(TOP_LEVEL + 2j * np.pi * phis)


def _sector_contains(z, zeta, ray0, ray1, param):
    poly = np.concatenate([
        [zeta], ray0.samples[::-1],
        _inverse_bottcher_far(param, _far_arc(ray0.kind.angle.value, ray1.kind.angle.value)),
        ray1.samples,
    ])
    return _inside(complex(z), poly)


def _orbit_points(param, z, count):
    out = [complex(z)]
    for _ in range(count - 1):
        out.append(evaluate(param, out[-1]))
    return out


def build_support_graph(param, candidate, p=None, orbit_budget=64):
    """The graph Γ(θ) for θ in {1/7}, {3/7} or both, with its validity report.

    Raises GraphInvalid(HitsCriticalOrbit) when an orbit point of -c lies on a
    traced arc and GraphInvalid(ParabolicVertex) for a non-repelling vertex.
    """
    if p is None:
        from .classifier import _period_of
        p = _period_of(param)
    cycle = critical_cycle(param, p)
    d = local_degree(param, cycle)
    thetas = candidate_angles(candidate)
    ctx = _Context(param, cycle, d, thetas)
    comps = ctx.components.upto(0)
    labels = [(cp, t) for cp in comps for t in thetas]
    rays = trace_internal_rays(param, cycle, [cp for cp, _ in labels], [t for _, t in labels],
                               max_level=-LAND_LEVEL)
    vertices = {}
    internal = {}
    for (cp, t), ray in zip(labels, rays):
        try:
            land = landing_point(param, ray, p=p, degree=d)
        except ParabolicSuspect as exc:
            raise GraphInvalid("ParabolicVertex", f"internal ray {t} of component {cp.id}") from exc
        except NoConvergence as exc:
            raise ArrangementAmbiguous(f"internal ray {t} of component {cp.id} does not land") from exc
        if abs(land.multiplier) <= 1:
            raise GraphInvalid("ParabolicVertex", f"landing point of {t} is not repelling")
        vid = ctx.vertices.add(land.point)
        internal[(cp.id, t)] = ray
        ctx.int_rays[(cp.id, t)] = ray
        ctx.int_landing[(cp.id, t)] = vid
        ctx.int_vertex[(cp.id, t)] = vid
        if abs(ray.end - land.point) > TAIL_GAP:
            s_ = t.period(d)
            extend_tail(param, ray, s_ * p, float(d) ** s_, land.point)
        vertices.setdefault(vid, land)
    external = {}
    ext_at = {}
    for vid, land in vertices.items():
        # internal angles have doubling period 3, so the landing period is 3p; the
        # co-landing external rays are fixed by f^(3p) unless the point rotates
        # them, then by f^(6p) (searched only while 3^(6p) angles stay affordable)
        angles = colanding_external_angles(param, land.point, 3 * p)
        if not angles and 6 * p <= MAX_COLANDING_PERIOD:
            angles = colanding_external_angles(param, land.point, 6 * p)
        if not angles:
            raise ArrangementAmbiguous(f"no external ray found landing at {land.point}")
        ext_at[vid] = sorted(angles)
    new = sorted({t for v in ext_at.values() for t in v})
    for t, ray in zip(new, trace_external_rays(param, new, min_level=LAND_LEVEL)):
        external[t] = ray
        ctx.ext_rays[t] = ray
    for vid, angles in ext_at.items():
        for t in angles:
            land = vertices[vid]
            if abs(external[t].end - land.point) > TAIL_GAP:
                n = t.period(3)
                extend_tail(param, external[t], n, 3.0 ** n, land.point)
            external[t].landing = Landed(land.point, t.period(3), complex("nan"), 0.0)
            ctx.ext_landing[t] = vid
            ctx.ext_vertex[t] = vid
    gverts = {}
    for vid, land in vertices.items():
        rot = _depth0_rotation(param, ctx, vid, ext_at[vid], internal)
        gverts[vid] = GraphVertex(vid, land.point, land.period, land.multiplier, rot)
    graph = SupportGraph(param, p, candidate, tuple(thetas), d, cycle, external, internal, gverts,
                         ctx=ctx)
    ctx.graph = graph
    # forward invariance of the label set
    ext_img, int_img = graph.label_images()
    if not set(ext_img.values()) <= set(external) or not set(int_img.values()) <= set(internal):
        raise ArrangementAmbiguous("graph label set is not forward invariant")
    # orbit avoidance
    polylines = [np.append(r.samples, r.landing.point if r.landing else r.end)
                 for r in internal.values()]
    polylines += [np.append(r.samples, vertices[ctx.ext_landing[t]].point)
                  for t, r in external.items()]
    for k, z in enumerate(_orbit_points(param, -param.c, orbit_budget)):
        dist = min(_polyline_distance(z, pl) for pl in polylines)
        if dist < GRAPH_TOL * max(1.0, abs(z)):
            raise GraphInvalid("HitsCriticalOrbit", f"orbit point {k} at distance {dist:.3g}")
    return graph


def _depth0_rotation(param, ctx, vid, ext_angles, internal):
    """Counter-clockwise order of the rays landing at a depth-0 vertex."""
    zeta = ctx.vertices.points[vid]
    ext = sorted(ext_angles)
    ints = [lab for lab, v in ctx.int_vertex.items() if v == vid]
    if len(ext) == 1:
        return tuple([ExternalRay(ext[0])] + [InternalRay(c, t) for c, t in ints])
    gaps = {g: [] for g in range(len(ext))}
    for (cid, t) in ints:
        center = ctx.components.get(cid).center
        hits = [g for g in range(len(ext))
                if _sector_contains(center, zeta, ctx.ext_rays[ext[g]],
                                    ctx.ext_rays[ext[(g + 1) % len(ext)]], param)]
        if len(hits) != 1:
            raise ArrangementAmbiguous(f"component {cid} is not in a unique sector at vertex {vid}")
        gaps[hits[0]].append(InternalRay(cid, t))
    rot = []
    for g, t in enumerate(ext):
        rot.append(ExternalRay(t))
        if len(gaps[g]) > 1:
            raise ArrangementAmbiguous(f"two internal rays share a sector at vertex {vid}")
        rot.extend(gaps[g])
    return tuple(rot)


# ---------------------------------------------------------------------------
# puzzles

@dataclass
class PuzzlePiece:
    depth: int
    id: int
    labels: frozenset
    polygon: np.ndarray = field(repr=False)
    bbox: tuple = field(repr=False)

    def contains(self, z):
        x0, x1, y0, y1 = self.bbox
        if not (x0 <= z.real <= x1 and y0 <= z.imag <= y1):
            return False
        return _inside(z, self.polygon)

    @property
    def ray_labels(self):
        return frozenset(lab for lab in self.labels if isinstance(lab, RAY_LABELS))

    @property
    def vertex_labels(self):
        return frozenset(lab for lab in self.labels if isinstance(lab, Vertex))


@dataclass
class Puzzle:
    graph: SupportGraph = field(repr=False)
    depth: int
    pieces: list = field(repr=False)
    ray_universe: frozenset = field(repr=False)
    edges: list = field(repr=False)

    def locate(self, z):
        """Piece containing z; OnGraph if z is within resolution of a boundary arc."""
        z = complex(z)
        hits = [pc for pc in self.pieces if pc.contains(z)]
        if len(hits) != 1:
            if not hits:
                raise OnGraph(f"{z} lies in no depth-{self.depth} piece")
            raise ArrangementAmbiguous(f"{z} lies in {len(hits)} depth-{self.depth} pieces")
        pc = hits[0]
        if _polyline_distance(z, np.append(pc.polygon, pc.polygon[:1])) < GRAPH_TOL * max(1.0, abs(z)):
            raise OnGraph(f"{z} is within resolution of the depth-{self.depth} graph")
        return pc

    def piece(self, pid):
        return self.pieces[pid]


def _internal_cut_angles(ctx, cp, n):
    """Cut angles and disk level of component cp at depth n (None if uncut)."""
    if cp.m > n:
        return None, None
    N = _passes(cp.j, n - cp.m, ctx.p)
    return sorted(angle_set_preimages(ctx.thetas, ctx.degree, N)), -Fraction(1, ctx.degree ** N)


def _ext_handover(ctx, t):
    """Steps q until the external angle enters the depth-0 set."""
    q = 0
    while t not in ctx.ext_vertex:
        t, q = t.triple(), q + 1
        if q > 64:
            raise ArrangementAmbiguous("external angle never reaches the graph")
    return q, t


def _int_handover(ctx, cp, t):
    """(steps, depth-0 label) after which the internal ray lies on the graph."""
    s, j = 0, cp.j
    ang = t
    while (j, ang) not in ctx.int_vertex:
        if j == 0:
            ang = ang.times(ctx.degree)
        j = (j + 1) % ctx.p
        s += 1
        if s > 64 * ctx.p:
            raise ArrangementAmbiguous("internal angle never reaches the graph")
    return cp.m + s, (j, ang), _passes(cp.j, s, ctx.p)


def _ensure_external(ctx, angles):
    param = ctx.param
    need = [t for t in angles if t not in ctx.ext_rays]
    groups = {}
    for t in need:
        q, base = _ext_handover(ctx, t)
        groups.setdefault(q, []).append((t, base))
    for q, items in sorted(groups.items()):
        rays = trace_external_rays(param, [t for t, _ in items], min_level=LAND_LEVEL * 3.0 ** -q)
        ends = np.array([r.end for r in rays])
        targets = np.array([ctx.vertices.points[ctx.ext_vertex[b]] for _, b in items])
        land = _newton_iterate(param, ends, q, targets)
        for (t, b), ray, z in zip(items, rays, land):
            if np.isfinite(z) and abs(z - ray.end) > TAIL_GAP:
                _pullback_tail(param, ray, ctx.ext_rays[b], q)
        for (t, _), ray, z in zip(items, rays, land):
            e = ray.end
            if not np.isfinite(z) or abs(z - e) > 1e-2:
                raise ArrangementAmbiguous(f"external ray {t} has no clear landing point")
            ray.landing = Landed(complex(z), 0, complex("nan"), 0.0)
            ctx.ext_rays[t] = ray
            ctx.ext_landing[t] = ctx.vertices.add(z)


def _pullback_tail(param, ray, base, q):
    """Extend a preperiodic ray by the f^q-pullback, point by point, of the part
    of its periodic image ray beyond its current end."""
    lv_end = ray.levels[-1] * 3.0 ** q
    mask = base.levels < lv_end
    w = ray.end
    pts = []
    for y in base.samples[mask]:
        wn = complex(_newton_iterate(param, [w], q, [y])[0])
        if not cmath.isfinite(wn):
            raise ArrangementAmbiguous("preperiodic ray tail pullback fails")
        pts.append(wn)
        w = wn
    if pts:
        ray.samples = np.append(ray.samples, pts)
        ray.levels = np.append(ray.levels, base.levels[mask] / 3.0 ** q)


def _pullback_rays(ctx, items, bases):
    """Rays in non-cycle components: f^m-pullbacks, sample by sample, of the rays
    with the same angle in the cycle component f^m(W)."""
    out = [None] * len(items)
    groups = {}
    for r, b in enumerate(bases):
        groups.setdefault(len(b.samples), []).append(r)
    for idx in groups.values():
        rays = _pullback_group(ctx, [items[r] for r in idx], [bases[r] for r in idx])
        for r, ray in zip(idx, rays):
            out[r] = ray
    return out


def _pullback_group(ctx, items, bases):
    """Vectorised pullback for base rays with equally many samples."""
    param = ctx.param
    Y = np.stack([b.samples for b in bases], axis=1)
    ms = np.array([cp.m for cp, _ in items])
    z = np.empty(len(items), dtype=complex)
    for r, (cp, _) in enumerate(items):
        _, dcm = forward_with_derivative(param, cp.center, cp.m)
        z[r] = cp.center + (Y[0, r] - ctx.cycle.points[cp.j]) / dcm
    z = _newton_iterate(param, z, ms, Y[0])
    out = np.empty_like(Y)
    out[0] = z
    prev = np.full(len(items), np.inf)
    for i in range(1, len(Y)):
        guess = z + (z - out[i - 2]) if i >= 2 else z
        znew = _newton_iterate(param, guess, ms, Y[i])
        step = np.abs(znew - z)
        bad = ~np.isfinite(znew) | (step > 6 * prev + 1e-9)
        if bad.any():
            idx = np.flatnonzero(bad)
            zz = z[idx]
            for s in range(1, 9):
                zz = _newton_iterate(param, zz, ms[idx], Y[i - 1, idx] + s / 8 * (Y[i, idx] - Y[i - 1, idx]))
            if not np.all(np.isfinite(zz)) or np.any(np.abs(zz - z[idx]) > 6 * prev[idx] + 1e-9):
                cp, t = items[idx[0]]
                raise RayBifurcates(f"pullback of internal ray {t} into component {cp.id} jumps")
            znew[idx] = zz
            step = np.abs(znew - z)
        prev = np.maximum(step, 1e-300)
        z = znew
        out[i] = z
    return [TracedRay(Internal(cp.id, t), out[:, r].copy(), b.levels.copy(), b.landing)
            for r, ((cp, t), b) in enumerate(zip(items, bases))]


def _ensure_internal(ctx, labels):
    param = ctx.param
    need = [(cp, t) for cp, t in labels if (cp.id, t) not in ctx.int_rays]
    cycle_comps = ctx.components.upto(0)
    bases = [(cycle_comps[cp.j], t) for cp, t in need if cp.m > 0]
    if bases:
        _ensure_internal(ctx, list(dict.fromkeys(bases)))
    groups = {}
    for cp, t in need:
        s, base, N = _int_handover(ctx, cp, t)
        groups.setdefault((N, cp.m > 0), []).append((cp, t, s, base))
    for (N, pulled), items in sorted(groups.items()):
        if pulled:
            rays = _pullback_rays(ctx, [(cp, t) for cp, t, *_ in items],
                                  [ctx.int_rays[(cp.j, t)] for cp, t, *_ in items])
        else:
            rays = trace_internal_rays(param, ctx.cycle, [cp for cp, *_ in items],
                                       [t for _, t, *_ in items],
                                       max_level=-LAND_LEVEL * float(ctx.degree) ** -N)
        ends = np.array([r.end for r in rays])
        steps = np.array([s for *_, s, _ in items])
        targets = np.array([ctx.vertices.points[ctx.int_vertex[b]] for *_, b in items])
        land = _newton_iterate(param, ends, steps, targets)
        for (cp, t, _, _), ray, z, e in zip(items, rays, land, ends):
            if not np.isfinite(z) or abs(z - e) > 1e-2:
                raise ArrangementAmbiguous(f"internal ray {t} of component {cp.id} has no landing")
            ray.landing = Landed(complex(z), 0, complex("nan"), 0.0)
            ctx.int_rays[(cp.id, t)] = ray
            ctx.int_landing[(cp.id, t)] = ctx.vertices.add(z)


def _inner_arc(ctx, cp, t0, t1, level_g):
    """Points of the small equipotential (potential level_g) of component cp
    between internal angles t0 and t1, counter-clockwise."""
    chart = basin_chart(ctx.param, ctx.cycle, cp.j)
    gap = (t1 - t0) % 1.0 or 1.0
    phis = t0 + gap * np.arange(1, ARC_SAMPLES) / ARC_SAMPLES
    ys = chart_inverse(chart, np.exp(level_g + 2j * np.pi * phis))
    if cp.m == 0:
        return ys
    _, dcm = forward_with_derivative(ctx.param, cp.center, cp.m)
    seed = cp.center + (ys - chart.w) / dcm
    return _newton_iterate(ctx.param, seed, cp.m, ys)


def _image_label(ctx, lab, n):
    """Label of the depth-0 ray that f^n carries the depth-n ray onto."""
    if isinstance(lab, ExternalRay):
        return ExternalRay(lab.angle.times(3 ** n))
    cp = ctx.components.get(lab.component)
    N = _passes(cp.j, n - cp.m, ctx.p)
    return InternalRay((cp.j + n - cp.m) % ctx.p, lab.angle.times(ctx.degree ** N))


def puzzle_pieces(param, graph, n):
    return build_puzzle(graph, n).pieces


def build_puzzle(graph, n):
    """Depth-n puzzle of a support graph (cached on the graph)."""
    ctx = graph.ctx
    if n in ctx.puzzles:
        return ctx.puzzles[n]
    param = ctx.param
    A = set(graph.external)
    ext_angles = sorted(angle_set_preimages(A, 3, n))
    comps = ctx.components.upto(n)
    cuts = {}
    int_labels = []
    for cp in comps:
        angs, level = _internal_cut_angles(ctx, cp, n)
        cuts[cp.id] = (angs, level)
        int_labels.extend((cp, t) for t in angs)
    _ensure_external(ctx, ext_angles)
    _ensure_internal(ctx, int_labels)

    # incident rays per vertex and their counter-clockwise order
    incident = {}
    for t in ext_angles:
        incident.setdefault(ctx.ext_landing[t], []).append(ExternalRay(t))
    for cp, t in int_labels:
        incident.setdefault(ctx.int_landing[(cp.id, t)], []).append(InternalRay(cp.id, t))
    rotation = {}
    for vid, labs in incident.items():
        images = [_image_label(ctx, lab, n) for lab in labs]
        base_vid = {ctx.ext_vertex[im.angle] if isinstance(im, ExternalRay)
                    else ctx.int_vertex[(im.component, im.angle)] for im in images}
        if len(base_vid) != 1:
            raise ArrangementAmbiguous(f"rays at vertex {vid} map to different graph vertices")
        base = graph.vertices[base_vid.pop()].rotation
        if sorted(map(label_str, images)) != sorted(map(label_str, base)):
            raise ArrangementAmbiguous(f"vertex {vid} does not carry a pullback of its image star")
        pos = {label_str(b): i for i, b in enumerate(base)}
        rotation[vid] = [lab for _, lab in sorted(zip([pos[label_str(im)] for im in images], labs),
                                                  key=lambda x: x[0])]

    # planar map: nodes and edges with polylines from the first to the second node
    edges = []  # (label, node_a, node_b, polyline)
    rot_nodes = {}
    outer = OuterEquipotential(Fraction(1, 3 ** n))
    ray_edge = {}
    for t in ext_angles:
        ray = ctx.ext_rays[t]
        vid = ctx.ext_landing[t]
        e = len(edges)
        edges.append((ExternalRay(t), ("o", t), ("v", vid),
                      np.append(ray.samples, ctx.vertices.points[vid])))
        ray_edge[ExternalRay(t)] = e
    k = len(ext_angles)
    outer_edges = []
    for i, t in enumerate(ext_angles):
        t1 = ext_angles[(i + 1) % k]
        a0, a1 = ctx.ext_rays[t].samples[0], ctx.ext_rays[t1].samples[0]
        arc = _inverse_bottcher_far(param, _far_arc(t.value, t1.value))
        outer_edges.append(len(edges))
        edges.append((outer, ("o", t), ("o", t1), np.concatenate([[a0], arc, [a1]])))
    for i, t in enumerate(ext_angles):
        rot_nodes[("o", t)] = [(outer_edges[i], True), (ray_edge[ExternalRay(t)], True),
                               (outer_edges[i - 1], False)]
    inner_arc_edges = set()
    for cp in comps:
        angs, level = cuts[cp.id]
        if not angs:
            continue
        inner = InnerEquipotential(cp.id, level)
        g0 = ctx.int_rays[(cp.id, angs[0])].levels[0]
        arc_ids = []
        for i, t in enumerate(angs):
            ray = ctx.int_rays[(cp.id, t)]
            vid = ctx.int_landing[(cp.id, t)]
            e = len(edges)
            edges.append((InternalRay(cp.id, t), ("i", cp.id, t), ("v", vid),
                          np.append(ray.samples, ctx.vertices.points[vid])))
            ray_edge[InternalRay(cp.id, t)] = e
        for i, t in enumerate(angs):
            t1 = angs[(i + 1) % len(angs)]
            a0 = ctx.int_rays[(cp.id, t)].samples[0]
            a1 = ctx.int_rays[(cp.id, t1)].samples[0]
            arc = _inner_arc(ctx, cp, t.value, t1.value, g0)
            arc_ids.append(len(edges))
            inner_arc_edges.add(len(edges))
            edges.append((inner, ("i", cp.id, t), ("i", cp.id, t1), np.concatenate([[a0], arc, [a1]])))
        for i, t in enumerate(angs):
            rot_nodes[("i", cp.id, t)] = [(ray_edge[InternalRay(cp.id, t)], True),
                                          (arc_ids[i], True), (arc_ids[i - 1], False)]
    for vid, labs in rotation.items():
        rot_nodes[("v", vid)] = [(ray_edge[lab], False) for lab in labs]

    # faces: walk with the face on the left, turning clockwise at each node
    position = {}
    for node, hes in rot_nodes.items():
        for i, he in enumerate(hes):
            position[he] = (node, i)

    def head(he):
        e, fwd = he
        return edges[e][2] if fwd else edges[e][1]

    seen = set()
    faces = []
    for e in range(len(edges)):
        for fwd in (True, False):
            start = (e, fwd)
            if start in seen:
                continue
            cyc = []
            he = start
            while he not in seen:
                seen.add(he)
                cyc.append(he)
                rev = (he[0], not he[1])
                node, i = position[rev]
                ring = rot_nodes[node]
                he = ring[(i - 1) % len(ring)]
            if he != start:
                raise ArrangementAmbiguous("face walk did not close")
            faces.append(cyc)
    V = len(rot_nodes)
    if V - len(edges) + len(faces) != 2:
        raise ArrangementAmbiguous(
            f"Euler characteristic {V - len(edges) + len(faces)} at depth {n}: map is not connected")
    pieces = []
    outer_set = set(outer_edges)
    for cyc in faces:
        if any(e in outer_set and not fwd for e, fwd in cyc):
            continue
        if any(e in inner_arc_edges and fwd for e, fwd in cyc):
            continue
        labels = set()
        parts = []
        for e, fwd in cyc:
            lab, na, nb, pl = edges[e]
            labels.add(lab)
            for node in (na, nb):
                if node[0] == "v":
                    labels.add(Vertex(node[1]))
            parts.append(pl if fwd else pl[::-1])
        poly = np.concatenate(parts)
        bbox = (poly.real.min(), poly.real.max(), poly.imag.min(), poly.imag.max())
        pieces.append(PuzzlePiece(n, len(pieces), frozenset(labels), poly, bbox))
    universe = frozenset(ray_edge)
    puzzle = Puzzle(graph, n, pieces, universe, edges)
    ctx.puzzles[n] = puzzle
    return puzzle


# ---------------------------------------------------------------------------
# label dynamics and containment

def image_labels(graph, labels):
    """Labels of f(∂P) given the labels of ∂P."""
    ctx = graph.ctx
    out = set()
    for lab in labels:
        if isinstance(lab, ExternalRay):
            out.add(ExternalRay(lab.angle.triple()))
        elif isinstance(lab, InternalRay):
            crit = lab.component == 0
            out.add(InternalRay(ctx.components.image[lab.component],
                                lab.angle.times(ctx.degree) if crit else lab.angle))
        elif isinstance(lab, OuterEquipotential):
            out.add(OuterEquipotential(lab.level * 3))
        elif isinstance(lab, InnerEquipotential):
            crit = lab.component == 0
            out.add(InnerEquipotential(ctx.components.image[lab.component],
                                       lab.level * ctx.degree if crit else lab.level))
        else:
            z = evaluate(ctx.param, ctx.vertices.points[lab.id])
            vid = ctx.vertices.find(z, tol=1e-7)
            if vid is None:
                raise ArrangementAmbiguous(f"image of vertex {lab.id} is not a vertex")
            out.add(Vertex(vid))
    return frozenset(out)


def compact_containment(Q, P):
    """closure(Q) inside P, decided by disjoint ray and vertex labels."""
    if Q.depth <= P.depth:
        raise ValidationError("Q must be deeper than P")
    return not (Q.ray_labels & P.ray_labels) and not (Q.vertex_labels & P.vertex_labels)


def labels_nested(Q, P, universe):
    """Depth-n rays on the boundary of a deeper piece Q inside P lie on ∂P."""
    return {lab for lab in Q.ray_labels if lab in universe} <= P.ray_labels


def true_boundary(graph, piece):
    """Dense samples of the actual boundary of a piece: ray segments cut at the
    piece's equipotential levels and the equipotential arcs at those levels."""
    ctx = graph.ctx
    param = ctx.param
    pts = []
    outer = [lab for lab in piece.labels if isinstance(lab, OuterEquipotential)]
    inner = {lab.component: lab.level for lab in piece.labels if isinstance(lab, InnerEquipotential)}
    lam = float(outer[0].level) if outer else None
    ext = sorted(lab.angle for lab in piece.labels if isinstance(lab, ExternalRay))
    for t in ext:
        ray = ctx.ext_rays[t]
        keep = ray.levels <= lam if lam is not None else np.ones(len(ray.levels), dtype=bool)
        pts.append(ray.samples[keep])
        pts.append([ray.landing.point])
    for lab in piece.labels:
        if isinstance(lab, InternalRay):
            ray = ctx.int_rays[(lab.component, lab.angle)]
            g = float(inner.get(lab.component, -1.0))
            pts.append(ray.samples[ray.levels >= g])
            pts.append([ray.landing.point])
    # outer arcs: the piece's arcs run between consecutive depth-n angles
    if outer:
        pz = build_puzzle(graph, piece.depth)
        for lab, na, nb, _ in pz.edges:
            if lab == outer[0] and ExternalRay(na[1]) in piece.labels and ExternalRay(nb[1]) in piece.labels:
                t0, t1 = na[1].fraction, nb[1].fraction
                gap = (t1 - t0) % 1 or Fraction(1)
                sample = [RayAngle.of(t0 + gap * Fraction(i, ARC_SAMPLES)) for i in range(1, ARC_SAMPLES)]
                for r in trace_external_rays(param, sample, min_level=lam, steps=6):
                    pts.append([r.end])
    for cid, g in inner.items():
        cp = ctx.components.get(cid)
        angs = sorted(lab.angle for lab in piece.labels
                      if isinstance(lab, InternalRay) and lab.component == cid)
        allang, _ = _internal_cut_angles(ctx, cp, piece.depth)
        for i, t in enumerate(allang):
            t1 = allang[(i + 1) % len(allang)]
            if t in angs and t1 in angs:
                gap = (t1.fraction - t.fraction) % 1 or Fraction(1)
                sample = [RayAngle.of(t.fraction + gap * Fraction(k, ARC_SAMPLES))
                          for k in range(1, ARC_SAMPLES)]
                rays = trace_internal_rays(param, ctx.cycle, [cp] * len(sample), sample,
                                           max_level=float(g), steps=6)
                pts.append([r.end for r in rays])
    return np.concatenate([np.asarray(x, dtype=complex) for x in pts if len(x)])


def boundary_distance(graph, Q, P):
    """Geometric oracle: minimum distance between sampled ∂Q and ∂P."""
    a = true_boundary(graph, Q)
    b = true_boundary(graph, P)
    best = np.inf
    for chunk in np.array_split(a, max(1, len(a) // 2000)):
        best = min(best, float(np.min(np.abs(chunk[:, None] - b[None, :]))))
    return best


# ---------------------------------------------------------------------------
# selection

@dataclass
class Selection:
    candidate: str
    witness: tuple  # (orbit index n0, Q id, P id)
    graph: SupportGraph = field(repr=False)
    distance: float = 0.0
    rejected: dict = field(default_factory=dict)


SECTORS = {
    "S*(9/14,1/14)": (Fraction(9, 14), Fraction(1, 14)),
    "S*(1/14,5/14)": (Fraction(1, 14), Fraction(5, 14)),
    "S(5/14,9/14)": (Fraction(5, 14), Fraction(9, 14)),
}


def _sector_memberships(graph, orbit):
    """For each orbit point, the sectors of U(c) (by its depth-1 internal angles)
    that its depth-1 piece touches."""
    out = []
    try:
        pz = build_puzzle(graph, 1)
    except ArrangementAmbiguous:
        return out
    for z in orbit:
        try:
            pc = pz.locate(z)
        except (OnGraph, ArrangementAmbiguous):
            out.append(None)
            continue
        angs = [lab.angle.fraction for lab in pc.ray_labels
                if isinstance(lab, InternalRay) and lab.component == 0]
        mem = []
        for name, (lo, hi) in SECTORS.items():
            if any(((x - lo) % 1) <= ((hi - lo) % 1) for x in angs):
                mem.append(name)
        out.append(tuple(mem))
    return out


def select_admissible(param, p=None, orbit_budget=None, candidates=CANDIDATES):
    """First candidate graph with an orbit point of -c whose depth-p piece is
    compactly contained in its depth-0 piece, verified by labels and geometry."""
    if p is None:
        from .classifier import _period_of
        p = _period_of(param)
    if orbit_budget is None:
        orbit_budget = max(3 * p, 12)
    orbit = _orbit_points(param, -param.c, orbit_budget)
    rejected = {}
    diagnostics = {}
    for cand in candidates:
        try:
            graph = build_support_graph(param, cand, p)
        except GraphInvalid as exc:
            rejected[cand] = f"{exc.reason}: {exc.detail}"
            continue
        deep = build_puzzle(graph, p)
        base = build_puzzle(graph, 0)
        for n0, z in enumerate(orbit):
            try:
                Q, P = deep.locate(z), base.locate(z)
            except OnGraph:
                continue
            if not compact_containment(Q, P):
                continue
            dist = boundary_distance(graph, Q, P)
            if not dist > 0:
                raise ArrangementAmbiguous(f"labels disjoint but boundaries meet ({dist:.3g})")
            return Selection(cand, (n0, Q.id, P.id), graph, dist, rejected)
        diagnostics[cand] = _sector_memberships(graph, orbit)
        rejected[cand] = "no compactly contained witness"
    raise SelectionFailed("no candidate graph produced a witness",
                          {"rejected": rejected, "sectors": diagnostics})


def verify_selection(param, sel):
    """Witness re-check: some of the first max(3p, n0+1) orbit points lies in Q,
    Q is compactly inside P by labels and by the distance oracle."""
    graph = sel.graph
    n0, qid, pid = sel.witness
    deep, base = build_puzzle(graph, graph.p), build_puzzle(graph, 0)
    Q, P = deep.piece(qid), base.piece(pid)
    orbit = _orbit_points(param, -param.c, max(3 * graph.p, n0 + 1))
    inside = any(deep.locate(z).id == qid for z in orbit)
    return inside and compact_containment(Q, P) and boundary_distance(graph, Q, P) > 0


# ---------------------------------------------------------------------------
# touching points of cycle components

@dataclass(frozen=True)
class TouchingPoint:
    point: complex
    multiplier: complex
    parabolic_suspect: bool


def touching_point_check(param, i1, i2, p=None):
    """Common landing point of the 0-internal rays of cycle components i1 and i2."""
    if p is None:
        from .classifier import _period_of
        p = _period_of(param)
    cycle = critical_cycle(param, p)
    comps = cycle_components(cycle)
    zero = RayAngle(0, 1)
    r1, r2 = trace_internal_rays(param, cycle, [comps[i1], comps[i2]], [zero, zero], max_level=-1e-9)
    if abs(r1.end - r2.end) > 1e-6 * max(1.0, abs(r1.end)):
        return None
    try:
        land = certify_periodic(param, 0.5 * (r1.end + r2.end), p)
        return TouchingPoint(land.point, land.multiplier, False)
    except ParabolicSuspect as exc:
        return TouchingPoint(exc.point, exc.multiplier, True)
    except NoConvergence:
        return None
