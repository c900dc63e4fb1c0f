"""Batch front end: curve statistics, fibers, classification, tiled renders of the
parameter and dynamical planes, rays, puzzle reports and component charts."""

import hashlib
import json
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .classifier import classify, verdict_fields
from .curve import branch_continue, curve_stats, euler_characteristic, fiber_solve, on_curve_residual
from .dynamics import CubicParam, escape_bound, find_cycle
from .errors import BranchJump, NumericalFailure, StepUnderflow, ValidationError

FORMAT_VERSION = 1
TILE = 64
CODES = {"E": 0, "A": 1, "B": 2, "C": 3, "D": 4, "U": 5, "J": 6}
PALETTE = {
    0: (255, 255, 255),  # escape, shaded by escape index
    1: (214, 39, 40),
    2: (44, 160, 44),
    3: (31, 119, 180),
    4: (255, 187, 0),
    5: (0, 0, 0),
    6: (255, 0, 255),  # branch jump sentinel
}
CODE_NAMES = {0: "escape", 1: "type A", 2: "type B", 3: "type C", 4: "type D", 5: "undecided",
              6: "branch jump"}
DYN_PALETTE = [(214, 39, 40), (44, 160, 44), (31, 119, 180), (148, 103, 189), (140, 86, 75),
               (227, 119, 194), (188, 189, 34), (23, 190, 207)]


def fmt(x):
    return format(float(x), ".17g")


def parse_complex(s):
    s = str(s).strip().replace(" ", "").replace("i", "j")
    if "," in s:
        re_, im = s.split(",")
        return complex(float(re_), float(im))
    try:
        return complex(s)
    except ValueError as exc:
        raise ValidationError(f"cannot read complex number {s!r}") from exc


# ---------------------------------------------------------------------------
# cache

def resolve_cache_dir(override=None):
    d = override or os.environ.get("ATLAS_CACHE_DIR") or os.path.join(Path.home(), ".cache", "cubicatlas")
    return Path(d)


def _encode(x):
    if isinstance(x, complex):
        return {"re": float(x.real).hex(), "im": float(x.imag).hex()}
    if isinstance(x, float):
        return {"f": x.hex()}
    if isinstance(x, (list, tuple)):
        return [_encode(v) for v in x]
    if isinstance(x, dict):
        return {"d": {k: _encode(v) for k, v in x.items()}}
    return x


def _decode(x):
    if isinstance(x, list):
        return [_decode(v) for v in x]
    if isinstance(x, dict):
        if "re" in x:
            return complex(float.fromhex(x["re"]), float.fromhex(x["im"]))
        if "f" in x:
            return float.fromhex(x["f"])
        if "d" in x:
            return {k: _decode(v) for k, v in x["d"].items()}
    return x


@dataclass
class CacheRecord:
    key: str
    payload: object
    version: int = FORMAT_VERSION


def cache_key(kind, **params):
    blob = json.dumps({"version": FORMAT_VERSION, "kind": kind, "params": _encode(params)},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_get(root, key):
    if root is None:
        return None
    path = Path(root) / f"{key}.json"
    try:
        rec = json.loads(path.read_text())
    except (OSError, ValueError):
        return None
    if rec.get("version") != FORMAT_VERSION or rec.get("key") != key:
        return None
    return CacheRecord(key, _decode(rec["payload"]), rec["version"])


def cache_put(root, key, payload):
    if root is None:
        return
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    body = json.dumps({"version": FORMAT_VERSION, "key": key, "payload": _encode(payload)})
    fd, tmp = tempfile.mkstemp(dir=root, prefix=".tmp-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        fh.write(body)
    os.replace(tmp, root / f"{key}.json")


# ---------------------------------------------------------------------------
# images

@dataclass
class ImageGrid:
    width: int
    height: int
    codes: np.ndarray  # uint8 class codes
    values: np.ndarray  # escape index, or -1

    def rgb(self, shade_escape=True):
        img = np.zeros((self.height, self.width, 3), dtype=np.uint8)
        for code, col in PALETTE.items():
            img[self.codes == code] = col
        if shade_escape:
            esc = self.codes == CODES["E"]
            n = self.values[esc]
            level = np.clip(255 - 24 * np.minimum(n, 8), 40, 255).astype(np.uint8)
            img[esc] = np.stack([level] * 3, axis=-1)
        return img


def ppm_bytes(rgb):
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.chmod(tmp, 0o666 & ~_umask())
    os.replace(tmp, path)


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def pixel_grid(center, width, pixels):
    W, H = pixels
    height = width * H / W
    xs = center.real + width * ((np.arange(W) + 0.5) / W - 0.5)
    ys = center.imag + height * (0.5 - (np.arange(H) + 0.5) / H)
    return xs[None, :] + 1j * ys[:, None]


def tiles(pixels):
    W, H = pixels
    return [(r, q) for r in range(0, H, TILE) for q in range(0, W, TILE)]


# ---------------------------------------------------------------------------
# parameter plane

@dataclass(frozen=True)
class RenderJob:
    mode: str
    center: complex
    width: float
    pixels: tuple
    p: int = 1
    seed: tuple = None
    budget: int = 500
    palette: str = "classes"
    workers: int = 1


def _branch_values(job, cs, root):
    """On-curve a for each pixel of a tile, continued from the seed in a
    serpentine order; None where the continuation jumps or stalls."""
    key = cache_key("branch", p=job.p, seed=list(job.seed), cs=[complex(c) for c in cs.ravel()])
    hit = cache_get(root, key)
    if hit is not None:
        return np.array([np.nan if v is None else v for v in hit.payload], dtype=complex).reshape(cs.shape)
    out = np.full(cs.shape, np.nan + 0j, dtype=complex)
    if job.p == 1:
        out = cs + 2 * cs ** 3
    else:
        base = (complex(job.seed[0]), complex(job.seed[1]))
        rows, cols = cs.shape
        for i in range(rows):
            order = range(cols) if i % 2 == 0 else range(cols - 1, -1, -1)
            for j in order:
                c = complex(cs[i, j])
                try:
                    path = branch_continue(base, job.p, [base[0], c])
                    base = (complex(path.end[0]), complex(path.end[1]))
                    out[i, j] = base[1]
                except (BranchJump, StepUnderflow):
                    try:
                        path = branch_continue(job.seed, job.p, [job.seed[0], c])
                        base = (complex(path.end[0]), complex(path.end[1]))
                        out[i, j] = base[1]
                    except (BranchJump, StepUnderflow):
                        out[i, j] = np.nan
    cache_put(root, key, [None if np.isnan(v) else complex(v) for v in out.ravel()])
    return out


def _param_tile(args):
    job, r0, q0, root = args
    cs = pixel_grid(job.center, job.width, job.pixels)[r0:r0 + TILE, q0:q0 + TILE]
    avals = _branch_values(job, cs, root)
    codes = np.zeros(cs.shape, dtype=np.uint8)
    vals = np.full(cs.shape, -1, dtype=np.int64)
    for idx in np.ndindex(cs.shape):
        a = avals[idx]
        if np.isnan(a):
            codes[idx] = CODES["J"]
            continue
        try:
            v = classify(complex(cs[idx]), complex(a), job.p, budget=job.budget)
        except NumericalFailure:
            codes[idx] = CODES["U"]
            continue
        codes[idx] = CODES[v.code]
        if v.code == "E":
            vals[idx] = v.n
    return r0, q0, codes, vals


def _run_tiles(fn, job, root):
    W, H = job.pixels
    codes = np.zeros((H, W), dtype=np.uint8)
    vals = np.zeros((H, W), dtype=np.int64)
    work = [(job, r, q, root) for r, q in tiles(job.pixels)]
    if job.workers <= 1:
        results = map(fn, work)
    else:
        pool = ProcessPoolExecutor(max_workers=job.workers)
        results = pool.map(fn, work)
    for r0, q0, tc, tv in results:  # map preserves the row-major tile order
        codes[r0:r0 + tc.shape[0], q0:q0 + tc.shape[1]] = tc
        vals[r0:r0 + tv.shape[0], q0:q0 + tv.shape[1]] = tv
    if job.workers > 1:
        pool.shutdown()
    return ImageGrid(W, H, codes, vals)


def render_parameter(job, root=None):
    if job.seed is None:
        raise ValidationError("parameter render needs a branch seed")
    res, _ = on_curve_residual(job.seed[0], job.seed[1], job.p)
    if abs(res) >= 1e-10:
        raise ValidationError(f"branch seed is off the curve (residual {abs(res):.3g})")
    return _run_tiles(_param_tile, job, root)


def legend_text(grid, job):
    lines = ["code\tname\tr\tg\tb\tpixels"]
    for code, name in CODE_NAMES.items():
        r, g, b = PALETTE[code]
        lines.append(f"{code}\t{name}\t{r}\t{g}\t{b}\t{int(np.sum(grid.codes == code))}")
    lines.append(f"# escape pixels are grey, darker with larger escape index; p={job.p}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dynamical plane

def _dyn_tile(args):
    job, r0, q0, _ = args
    zs = pixel_grid(job.center, job.width, job.pixels)[r0:r0 + TILE, q0:q0 + TILE]
    c, a = complex(job.seed[0]), complex(job.seed[1])
    R = escape_bound(CubicParam(c, a)).radius
    attractors = _attractors(c, a)
    z = zs.copy()
    codes = np.full(zs.shape, 5, dtype=np.uint8)
    vals = np.full(zs.shape, -1, dtype=np.int64)
    live = np.ones(zs.shape, dtype=bool)
    c2 = 3 * c * c
    for n in range(job.budget):
        esc = live & ~(np.abs(z) < R)
        codes[esc], vals[esc] = 0, n
        live &= ~esc
        for k, (w, rad) in enumerate(attractors):
            hit = live & (np.abs(z - w) < rad)
            codes[hit] = 1 + k % 4
            vals[hit] = k
            live &= ~hit
        if not live.any():
            break
        z = np.where(live, z * z * z - c2 * z + a, z)
    return r0, q0, codes, vals


def _attractors(c, a):
    """Attracting cycle points of (c, a) with capture radii, from both critical orbits."""
    P = CubicParam(c, a)
    out = []
    for z0 in (c, -c):
        z = z0
        for _ in range(3000):
            z = z * z * z - 3 * c * c * z + a
            if not abs(z) < 1e6:
                break
        else:
            for q in range(1, 65):
                w = z
                for _ in range(q):
                    w = w * w * w - 3 * c * c * w + a
                if abs(w - z) < 1e-8:
                    try:
                        cyc = find_cycle(P, z, q)
                    except NumericalFailure:
                        break
                    if abs(cyc.multiplier) < 1:
                        for pt in cyc.points:
                            if all(abs(pt - o[0]) > 1e-8 for o in out):
                                out.append((pt, 1e-6))
                    break
    return out


def render_dynamical(job):
    return _run_tiles(_dyn_tile, job, None)


def _dyn_rgb(grid):
    img = np.zeros((grid.height, grid.width, 3), dtype=np.uint8)
    esc = grid.codes == 0
    level = np.clip(255 - 12 * np.minimum(grid.values, 18), 30, 255).astype(np.uint8)
    img[esc] = np.stack([level[esc]] * 3, axis=-1)
    for code in range(1, 5):
        img[grid.codes == code] = DYN_PALETTE[(code - 1) % len(DYN_PALETTE)]
    return img


def _draw_polyline(img, pts, job, color):
    W, H = job.pixels
    height = job.width * H / W
    pts = np.asarray(pts, dtype=complex)
    if len(pts) < 2:
        return
    half = 0.5 * complex(job.width, height)
    lo, hi = job.center - half, job.center + half
    dense = [pts[0]]
    for z0, z1 in zip(pts[:-1], pts[1:]):
        if (max(z0.real, z1.real) < lo.real or min(z0.real, z1.real) > hi.real
                or max(z0.imag, z1.imag) < lo.imag or min(z0.imag, z1.imag) > hi.imag):
            continue
        k = min(4 * (W + H), max(1, int(abs(z1 - z0) / job.width * W * 2)))
        dense.extend(z0 + (z1 - z0) * np.arange(1, k + 1) / k)
    dense = np.array(dense)
    x = ((dense.real - job.center.real) / job.width + 0.5) * W
    y = (0.5 - (dense.imag - job.center.imag) / height) * H
    ok = (x >= 0) & (x < W) & (y >= 0) & (y < H)
    img[y[ok].astype(int), x[ok].astype(int)] = color


def overlay(img, job, kinds, p, angles=()):
    """Draw traced rays / support graph / puzzle pieces; failures become warnings."""
    from .puzzle import build_puzzle, build_support_graph
    from .rays import RayAngle, trace_external_ray
    c, a = job.seed
    P = CubicParam(c, a)
    for kind in kinds:
        try:
            if kind == "rays":
                for t in angles:
                    ray = trace_external_ray(P, RayAngle.of(t))
                    _draw_polyline(img, ray.samples, job, (255, 0, 0))
            elif kind.startswith("graph"):
                g = build_support_graph(P, kind.split(":")[1] if ":" in kind else "BOTH", p)
                for ray in list(g.external.values()) + list(g.internal.values()):
                    _draw_polyline(img, ray.samples, job, (255, 0, 0))
            elif kind.startswith("puzzle"):
                depth = int(kind.split(":")[1]) if ":" in kind else 1
                if depth > 2 * p:
                    raise ValidationError(f"puzzle overlay depth {depth} exceeds 2p")
                g = build_support_graph(P, "BOTH", p)
                pz = build_puzzle(g, depth)
                for piece in pz.pieces:
                    poly = list(piece.polygon) + [piece.polygon[0]]
                    _draw_polyline(img, poly, job, (0, 0, 0))
            else:
                raise ValidationError(f"unknown overlay {kind!r}")
        except (NumericalFailure, ValidationError) as exc:
            warnings.warn(f"overlay {kind} skipped: {exc}")
            click.echo(f"warning: overlay {kind} skipped: {exc}", err=True)
    return img


# ---------------------------------------------------------------------------
# commands

def _exit_on_errors(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"validation error: {exc}", err=True)
            sys.exit(2)
        except NumericalFailure as exc:
            click.echo(f"numerical failure: {type(exc).__name__}: {exc}", err=True)
            sys.exit(3)
    return wrapper


def curve_stats_table(p_max):
    rows = ["p\td\tchi"]
    for p in range(1, p_max + 1):
        s = curve_stats(p)
        # recursion check: d(p) = 3^(p-1) - sum of d(k) over proper divisors
        assert s.d == 3 ** (p - 1) - sum(curve_stats(k).d for k in range(1, p) if p % k == 0)
        assert s.chi == euler_characteristic(p) == (2 - p) * s.d
        rows.append(f"{p}\t{s.d}\t{s.chi}")
    return "\n".join(rows) + "\n"


@click.group()
def main():
    """Atlas of the critically marked cubic family z^3 - 3c^2 z + a."""


@main.command("curve-stats")
@click.option("--p", "p_max", default=4, show_default=True, help="largest period")
@_exit_on_errors
def cmd_curve_stats(p_max):
    """Degree d(p) and Euler characteristic of the period-p curve."""
    if p_max < 1:
        raise ValidationError("p must be >= 1")
    click.echo(curve_stats_table(p_max), nl=False)


@main.command("fiber")
@click.option("--c", "c", required=True, help="critical point c (complex, e.g. 0.1+0.2j)")
@click.option("--p", default=2, show_default=True)
@_exit_on_errors
def cmd_fiber(c, p):
    """All a with f^p(c) = c, labelled by exact period."""
    sol = fiber_solve(parse_complex(c), p)
    click.echo("a_re\ta_im\texact_period\tresidual")
    for r in sol.roots:
        click.echo(f"{fmt(r.a.real)}\t{fmt(r.a.imag)}\t{r.exact_period}\t{fmt(r.residual)}")


@main.command("classify")
@click.option("--c", "c", required=True)
@click.option("--a", "a", required=True)
@click.option("--p", default=1, show_default=True)
@click.option("--budget", default=2000, show_default=True)
@_exit_on_errors
def cmd_classify(c, a, p, budget):
    """Fate of the free critical point: E, A, B, C, D or U."""
    c, a = parse_complex(c), parse_complex(a)
    res, _ = on_curve_residual(c, a, p)
    if abs(res) >= 1e-8:
        raise ValidationError(f"(c, a) is off the period-{p} curve (residual {abs(res):.3g})")
    v = classify(c, a, p, budget=budget)
    fields = {k: val for k, val in verdict_fields(v).items() if val is not None}
    extra = "\t".join(f"{k}={fmt(val.real) + ('+' if val.imag >= 0 else '') + fmt(val.imag) + 'j' if isinstance(val, complex) else val}"
                      for k, val in fields.items())
    click.echo(v.code + (("\t" + extra) if extra else ""))


def _render_common(center, width, pixels, budget, workers):
    W, H = (int(x) for x in pixels.lower().split("x"))
    if W < 1 or H < 1 or width <= 0:
        raise ValidationError("bad region")
    return parse_complex(center), float(width), (W, H), budget, workers


@main.command("render-param")
@click.option("--p", default=1, show_default=True)
@click.option("--center", default="0", show_default=True, help="center of the c-window")
@click.option("--width", default=2.4, show_default=True, help="width of the c-window")
@click.option("--pixels", default="128x128", show_default=True)
@click.option("--budget", default=500, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--seed-branch", default=None, help="on-curve (c,a) seed as 'c;a'; default a = c + 2c^3 or a = i at c = 0")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--cache-dir", default=None, help="cache directory (default $ATLAS_CACHE_DIR)")
@_exit_on_errors
def cmd_render_param(p, center, width, pixels, budget, workers, seed_branch, out, cache_dir):
    """Classification image of a window of the period-p curve (P6 + legend)."""
    center, width, pixels, budget, workers = _render_common(center, width, pixels, budget, workers)
    if seed_branch:
        sc, sa = (parse_complex(x) for x in seed_branch.split(";"))
    elif p == 1:
        sc = 0j
        sa = 0j
    else:
        sc = 0j
        sa = next(r.a for r in fiber_solve(0j, p).roots if r.exact_period == p)
    job = RenderJob("parameter", center, width, pixels, p, (sc, sa), budget, "classes", workers)
    root = resolve_cache_dir(cache_dir)
    grid = render_parameter(job, root)
    write_atomic(out, ppm_bytes(grid.rgb()))
    write_atomic(str(out) + ".legend.tsv", legend_text(grid, job).encode())
    undecided = int(np.sum(grid.codes == CODES["U"]) + np.sum(grid.codes == CODES["J"]))
    click.echo(f"wrote {out} ({pixels[0]}x{pixels[1]}, {undecided} undecided or jumped pixels)")


@main.command("render-dyn")
@click.option("--c", "c", required=True)
@click.option("--a", "a", required=True)
@click.option("--p", default=1, show_default=True)
@click.option("--center", default="0", show_default=True)
@click.option("--width", default=4.0, show_default=True)
@click.option("--pixels", default="256x256", show_default=True)
@click.option("--budget", default=200, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--overlay", "overlays", multiple=True, help="rays, graph[:BOTH|G17|G37] or puzzle:<depth>")
@click.option("--angles", default="", help="external ray angles for the rays overlay, e.g. 1/7,2/7")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_exit_on_errors
def cmd_render_dyn(c, a, p, center, width, pixels, budget, workers, overlays, angles, out):
    """Escape and basin image of the dynamical plane (P6)."""
    from fractions import Fraction
    center, width, pixels, budget, workers = _render_common(center, width, pixels, budget, workers)
    job = RenderJob("dynamical", center, width, pixels, p, (parse_complex(c), parse_complex(a)),
                    budget, "basins", workers)
    grid = render_dynamical(job)
    img = _dyn_rgb(grid)
    angs = [Fraction(x) for x in angles.split(",") if x]
    if overlays:
        img = overlay(img, job, overlays, p, angs)
    write_atomic(out, ppm_bytes(img))
    click.echo(f"wrote {out}")


@main.command("rays")
@click.option("--c", "c", required=True)
@click.option("--a", "a", required=True)
@click.option("--angles", required=True, help="comma-separated rationals, e.g. 1/7,2/7,4/7")
@click.option("--cache-dir", default=None)
@_exit_on_errors
def cmd_rays(c, a, angles, cache_dir):
    """Trace external rays and report their landing points."""
    from .rays import Landed, RayAngle, landing_point, trace_external_ray
    from fractions import Fraction
    c, a = parse_complex(c), parse_complex(a)
    P = CubicParam(c, a)
    root = resolve_cache_dir(cache_dir)
    click.echo("angle\tend_re\tend_im\tlanding_re\tlanding_im\tperiod\tmultiplier_abs")
    for s in angles.split(","):
        t = RayAngle.of(Fraction(s))
        key = cache_key("ray", c=c, a=a, angle=str(t))
        hit = cache_get(root, key)
        if hit is None:
            ray = trace_external_ray(P, t)
            row = [complex(ray.end), None, None, None]
            try:
                land = landing_point(P, ray)
                if isinstance(land, Landed):
                    row = [complex(ray.end), complex(land.point), land.period, abs(land.multiplier)]
            except NumericalFailure:
                pass
            cache_put(root, key, row)
        else:
            row = hit.payload
        end, pt, per, mult = row
        if pt is None:
            click.echo(f"{t}\t{fmt(end.real)}\t{fmt(end.imag)}\t\t\t\t")
        else:
            click.echo(f"{t}\t{fmt(end.real)}\t{fmt(end.imag)}\t{fmt(pt.real)}\t{fmt(pt.imag)}\t{per}\t{fmt(mult)}")


@main.command("puzzle-report")
@click.option("--c", "c", required=True)
@click.option("--a", "a", required=True)
@click.option("--p", default=None, type=int)
@_exit_on_errors
def cmd_puzzle_report(c, a, p):
    """Admissible candidate graph and its witness for a type-D parameter."""
    from .puzzle import select_admissible, verify_selection
    c, a = parse_complex(c), parse_complex(a)
    P = CubicParam(c, a)
    sel = select_admissible(P, p)
    n0, q, pc = sel.witness
    click.echo(f"candidate\t{sel.candidate}")
    click.echo(f"witness\t{n0}\t{q}\t{pc}")
    click.echo(f"boundary_distance\t{fmt(sel.distance)}")
    click.echo(f"verified\t{verify_selection(P, sel)}")
    for name, why in sel.rejected.items():
        click.echo(f"rejected\t{name}\t{why}")


@main.command("component")
@click.option("--p", default=1, show_default=True)
@click.option("--type", "kind", type=click.Choice(["A", "B", "C", "D"]), required=True)
@click.option("--center", "center", default=None, help="c near the wanted center")
@click.option("--action", "actions", multiple=True, default=("center",),
              help="center, rho, count, rays, boundary")
@click.option("--rays", "n_rays", default=8, show_default=True)
@_exit_on_errors
def cmd_component(p, kind, center, actions, n_rays):
    """Center, chart and boundary experiments for one hyperbolic component."""
    from .paramspace import (boundary_trace_D, center_search, component_chart, count_phi_preimages,
                             landing_separation_experiment, rho_eval)
    cands = center_search(p, kind)
    if not cands:
        raise NumericalFailure(f"no type-{kind} center found for p={p}")
    target = parse_complex(center) if center else 0j
    cen = min(cands, key=lambda s: (abs(s.c - target), s.c.real, s.c.imag))
    chart = component_chart(cen)
    for act in actions:
        if act == "center":
            click.echo(f"center\t{fmt(cen.c.real)}\t{fmt(cen.c.imag)}\t{fmt(cen.a.real)}\t{fmt(cen.a.imag)}\t"
                       f"{fmt(cen.curve_residual)}\t{fmt(cen.relation_residual)}")
        elif act == "rho":
            click.echo(f"rho_at_center\t{fmt(abs(rho_eval(cen.c, cen.a, p)))}")
        elif act == "count":
            r = count_phi_preimages(chart)
            click.echo(f"preimages\t{r.count}\texpected\t{r.expected}\t{r.erratum_note}")
        elif act == "rays":
            ok, rows = landing_separation_experiment(chart, [k / n_rays for k in range(n_rays)])
            click.echo("t1\tt2\tdistance\tbound\tstatus\tnote")
            for row in rows:
                click.echo(f"{row['t1']}\t{row['t2']}\t{fmt(row['distance'])}\t{fmt(row['bound'])}\t"
                           f"{row['status']}\t{row['note']}")
            click.echo(f"experiment\t{'PASS' if ok else 'FAIL'}")
        elif act == "boundary":
            b = boundary_trace_D(chart)
            click.echo(f"closure_defect\t{fmt(b.closure_defect)}\ndiameter\t{fmt(b.diameter)}\n"
                       f"winding\t{b.winding}\nsimple\t{b.simple}")
        else:
            raise ValidationError(f"unknown action {act!r}")


@main.group("cache")
def cmd_cache():
    """Inspect or clear the result cache."""


@cmd_cache.command("info")
@click.option("--cache-dir", default=None)
def cmd_cache_info(cache_dir):
    root = resolve_cache_dir(cache_dir)
    files = list(root.glob("*.json")) if root.exists() else []
    click.echo(f"dir\t{root}\nrecords\t{len(files)}\nbytes\t{sum(f.stat().st_size for f in files)}")


@cmd_cache.command("clear")
@click.option("--cache-dir", default=None)
def cmd_cache_clear(cache_dir):
    root = resolve_cache_dir(cache_dir)
    n = 0
    if root.exists():
        for f in root.glob("*.json"):
            f.unlink()
            n += 1
    click.echo(f"removed\t{n}")


if __name__ == "__main__":
    main()
