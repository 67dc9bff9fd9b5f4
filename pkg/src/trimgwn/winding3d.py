"""Winding numbers of trimmed NURBS patches via a boundary integral plus jump corrections.

For each patch the query is classified:

* far field: a coordinate axis (or an OBB axis) through the query misses the
  patch, so the winding number is a pure boundary integral;
* near field: a line along the patch's mean normal is cast through the query,
  each crossing contributes +-1/2, and the boundary integral is evaluated with
  the line as the antiderivative's singular set;
* edge cases: crossings close to a trimming curve, at cusps or tangencies are
  handled by cutting a small parameter disk out of the patch (and evaluating
  the disk on its own) or by retrying with a random line.

Boundary integrals use adaptive Gauss-Legendre quadrature on each Bezier span
of each trimming curve. Node positions and tangents are model-space data and
are memoized per curve segment, so every later query only translates/rotates them.
"""

from __future__ import annotations

import math
import threading
import time
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .intersect import (
    CUSP,
    INTERIOR,
    NEAR_BOUNDARY,
    TANGENT,
    Thresholds,
    UnresolvedIntersection,
    line_patch_intersections,
)
from .kernel import BezierCurve, TrimmedPatch, extend_patch, gauss_legendre, restrict, rotation_to_z
from .model import Model
from .winding2d import clip_loops_to_circle

INV_4PI = 1.0 / (4.0 * math.pi)

FAR_Z = "FarFieldZ"
FAR_X = "FarFieldX"
FAR_Y = "FarFieldY"
FAR_OBB = "FarFieldObbRotated"
NEAR = "NearField"
EDGE_DISK = "EdgeDisk"
EDGE_ROTATE = "EdgeTangentRotate"
COINCIDENT_SURFACE = "CoincidentSurface"
COINCIDENT_BOUNDARY = "CoincidentBoundary"

FAR_TAGS = (FAR_Z, FAR_X, FAR_Y, FAR_OBB)
NEAR_TAGS = (NEAR, COINCIDENT_SURFACE)
EDGE_TAGS = (EDGE_DISK, EDGE_ROTATE, COINCIDENT_BOUNDARY)


class QuadratureFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class GwnConfig:
    eps_quad: float = 1e-6
    eps_ls: float = 1e-6
    disk_radius_pct: float = 1.0
    coincident_disk_factor: float = 0.1
    quad_order: int = 15
    max_quad_depth: int = 40
    min_quad_depth: int = 1
    max_edge_recursion: int = 10
    coincident_tol: float = 1e-10
    seed: int = 0
    use_cache: bool = True
    tangent_tol: float = 1e-3
    cusp_tol: float = 1e-8
    dedup_tol: float = 1e-6

    def __post_init__(self):
        for name in ("eps_quad", "eps_ls", "disk_radius_pct", "coincident_disk_factor", "coincident_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.quad_order < 2:
            raise ValueError("quad_order must be at least 2")

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.tangent_tol, self.cusp_tol, self.dedup_tol)


@dataclass
class GwnCase:
    tag: str
    children: list["GwnCase"] = field(default_factory=list)

    def tags(self) -> list[str]:
        out = [self.tag]
        for c in self.children:
            out.extend(c.tags())
        return out


@dataclass
class GwnResult:
    value: float
    case: GwnCase
    surface_evals: int = 0
    correction: float = 0.0
    boundary: float = 0.0
    coincident: bool = False
    unresolved: bool = False
    elapsed: float = 0.0

    @property
    def tag(self) -> str:
        return self.case.tag


class QuadratureCache:
    """Append-only map (curve key, span, subdivision path) -> model-space nodes.

    Inserts of one key always carry identical data, so concurrent use needs
    no more than the dict's own atomicity.
    """

    def __init__(self):
        self._data: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            return self._data.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key) -> bool:
        return key in self._data


# ---------------------------------------------------------------------------
# antiderivative fields


def antiderivative_field(x, axis: str = "Z") -> np.ndarray:
    """Vector field whose curl is x / (4 pi |x|^3), singular along the chosen axis."""
    x = np.asarray(x, dtype=float)
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    r = np.sqrt(a * a + b * b + c * c)
    zero = np.zeros_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _field(a, b, c, r, zero, axis)


def _field(a, b, c, r, zero, axis):
    if axis == "Z":
        den = (a * a + b * b) * r
        f = (b * c / den, -a * c / den, zero)
    elif axis == "X":
        den = (b * b + c * c) * r
        f = (zero, c * a / den, -b * a / den)
    elif axis == "Y":
        den = (a * a + c * c) * r
        f = (-c * b / den, zero, a * b / den)
    else:
        raise ValueError(f"unknown axis {axis!r}")
    if np.any(den == 0):
        raise ZeroDivisionError("point on the singular axis")
    return np.stack(f, axis=-1) * INV_4PI


def _rotate(v: np.ndarray, rot) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Components of ``rot @ v`` computed elementwise (same bits for any batch size)."""
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    if rot is None:
        return x, y, z
    return (
        rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z,
        rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z,
        rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z,
    )


def _integrand_sum(pos, tan, wts, queries, axis: str, rot) -> np.ndarray:
    """Sum_k w_k F(pos_k - q) . tan_k for each query, summed in node order."""
    px, py, pz = _rotate(pos, rot)
    tx, ty, tz = _rotate(tan, rot)
    qx, qy, qz = _rotate(queries, rot)
    x = px[None, :] - qx[:, None]
    y = py[None, :] - qy[:, None]
    z = pz[None, :] - qz[:, None]
    r = np.sqrt(x * x + y * y + z * z)
    if axis == "Z":
        f = (y * tx[None, :] - x * ty[None, :]) * z / ((x * x + y * y) * r)
    elif axis == "X":
        f = (z * ty[None, :] - y * tz[None, :]) * x / ((y * y + z * z) * r)
    else:
        f = (x * tz[None, :] - z * tx[None, :]) * y / ((x * x + z * z) * r)
    acc = f[:, 0] * wts[0]
    for k in range(1, f.shape[1]):
        acc = acc + f[:, k] * wts[k]
    return acc * INV_4PI


# ---------------------------------------------------------------------------
# boundary quadrature


@dataclass
class _Frame:
    axis: str = "Z"
    rot: np.ndarray | None = None


class _Quadrature:
    """Adaptive boundary integration of one patch for a batch of queries."""

    def __init__(self, patch: TrimmedPatch, cfg: GwnConfig, cache: QuadratureCache | None):
        self.patch = patch
        self.cfg = cfg
        self.cache = cache if cfg.use_cache else None
        self.nodes, self.weights = gauss_legendre(cfg.quad_order)

    def _nodes(self, seg: BezierCurve, a: float, b: float, key, idx, evals):
        full = None
        if key is not None and self.cache is not None:
            full = self.cache.get(key)
            if full is None:
                full = self.cache.put(key, self._trace(seg, a, b))
                evals[idx[0]] += len(self.nodes)
            return full
        evals[idx] += len(self.nodes)
        return self._trace(seg, a, b)

    def _trace(self, seg: BezierCurve, a: float, b: float):
        s = a + (b - a) * self.nodes
        uv, duv = seg.evaluate(s)
        pos, su, sv = self.patch.evaluate(uv[:, 0], uv[:, 1])
        tan = su * duv[:, :1] + sv * duv[:, 1:]
        return pos, tan, (b - a) * self.weights

    def integrate(self, queries: np.ndarray, frame: _Frame, evals: np.ndarray):
        """Boundary integral per query, and a flag for queries that hit the depth cap."""
        m = len(queries)
        total = np.zeros(m)
        failed = np.zeros(m, dtype=bool)
        everyone = np.arange(m)
        for curve, ckey in zip(self.patch.loops, self.patch.curve_keys):
            for si, seg in enumerate(curve.segments):
                base = None if ckey is None else (*ckey, si)
                total += self._segment(seg, base, queries, everyone, frame, evals, failed, m)
        return total, failed

    def _segment(self, seg, base, queries, idx, frame, evals, failed, m):
        key = lambda path: None if base is None else (*base, path)  # noqa: E731
        pos, tan, w = self._nodes(seg, 0.0, 1.0, key(""), idx, evals)
        whole = _integrand_sum(pos, tan, w, queries[idx], frame.axis, frame.rot)
        out = np.zeros(m)
        stack = [("", 0.0, 1.0, idx, whole)]
        while stack:
            path, a, b, ids, prev = stack.pop()
            mid = 0.5 * (a + b)
            halves = []
            for bit, (lo, hi) in (("0", (a, mid)), ("1", (mid, b))):
                pos, tan, w = self._nodes(seg, lo, hi, key(path + bit), ids, evals)
                halves.append(_integrand_sum(pos, tan, w, queries[ids], frame.axis, frame.rot))
            both = halves[0] + halves[1]
            done = np.abs(prev - both) < self.cfg.eps_quad
            if len(path) < self.cfg.min_quad_depth:
                done[:] = False
            if len(path) + 1 >= self.cfg.max_quad_depth:
                failed[ids[~done]] = True
                done[:] = True
            out[ids[done]] += both[done]
            if not np.all(done):
                rest = ~done
                stack.append((path + "1", mid, b, ids[rest], halves[1][rest]))
                stack.append((path + "0", a, mid, ids[rest], halves[0][rest]))
        return out


def evaluate_line_integral(
    patch: TrimmedPatch,
    curve_index: int,
    q,
    axis: str = "Z",
    cfg: GwnConfig = GwnConfig(),
    cache: QuadratureCache | None = None,
    rot=None,
) -> float:
    """Boundary-integral contribution of one trimming curve at one query."""
    one = patch.with_loops([patch.loops[curve_index]], [patch.curve_keys[curve_index]])
    evals = np.zeros(1, dtype=np.int64)
    val, failed = _Quadrature(one, cfg, cache).integrate(np.asarray(q, dtype=float)[None, :], _Frame(axis, rot), evals)
    if failed[0]:
        raise QuadratureFailure(f"quadrature depth exceeded (partial value {val[0]})")
    return float(val[0])


# ---------------------------------------------------------------------------
# per-patch preparation


@dataclass
class _Prepared:
    patch: TrimmedPatch  # extended copy
    r: float
    direction: np.ndarray
    rot: np.ndarray
    coincident_tol: float


def _prepare(patch: TrimmedPatch, cfg: GwnConfig) -> _Prepared:
    store = patch.__dict__.setdefault("_prepared", {})
    key = (cfg.disk_radius_pct, cfg.coincident_tol, cfg.seed)
    prep = store.get(key)
    if prep is None:
        r = 0.01 * cfg.disk_radius_pct * patch.uv_box.diagonal
        ext = extend_patch(patch, r)
        # share the caches of the original patch object where valid
        seed = (cfg.seed * 1_000_003 + zlib.crc32(patch.id.encode())) % 2**63
        direction, _ = ext.mean_normal(seed)
        prep = _Prepared(ext, r, direction, rotation_to_z(direction), cfg.coincident_tol * ext.aabb.diagonal)
        store[key] = prep
    return prep


def _query_rng(cfg: GwnConfig, patch_id: str, q: np.ndarray) -> np.random.Generator:
    words = [int(w) for w in np.ascontiguousarray(q, dtype=np.float64).view(np.uint64)]
    return np.random.default_rng([cfg.seed, zlib.crc32(patch_id.encode()), *words])


def _far_frames(prep: _Prepared, queries: np.ndarray):
    """Per query: (tag, frame) for the far field, or None when the query needs a line cast."""
    patch = prep.patch
    box = patch.aabb
    gap = np.maximum(box.lo - queries, queries - box.hi)  # >0 where that coordinate is excluded
    obb = patch.obb
    loc = np.abs(obb.local(queries)) - obb.half
    out = []
    for i in range(len(queries)):
        g = gap[i]
        if np.any(g > 0):
            # the axis line misses the box by the larger gap among the other two coordinates
            margins = {"Z": max(g[0], g[1]), "X": max(g[1], g[2]), "Y": max(g[0], g[2])}
            axis = max(("Z", "X", "Y"), key=lambda a: margins[a])
            out.append(({"Z": FAR_Z, "X": FAR_X, "Y": FAR_Y}[axis], _Frame(axis, None)))
            continue
        l = loc[i]
        if np.any(l > 0):
            margins = {"Z": max(l[0], l[1]), "X": max(l[1], l[2]), "Y": max(l[0], l[2])}
            axis = max(("Z", "X", "Y"), key=lambda a: margins[a])
            out.append((FAR_OBB, _Frame(axis, obb.axes)))
            continue
        out.append(None)
    return out


# ---------------------------------------------------------------------------
# disk extraction


def extract_parameter_disk(patch: TrimmedPatch, center, radius: float) -> tuple[TrimmedPatch, TrimmedPatch]:
    """Split a patch into the part outside a parameter disk and the part inside it."""
    clip = clip_loops_to_circle(patch.loops, center, radius, keys=patch.curve_keys)
    outer = patch.with_loops(clip.outer, clip.outer_keys)
    disk = replace(patch.with_loops(clip.inner, clip.inner_keys), id=f"{patch.id}/disk")
    return outer, disk


def _correction(rec, direction) -> float:
    """Jump correction of one crossing: +1/2 when the query sits behind the surface."""
    nz = float(rec.normal @ direction)
    return 0.5 if nz * rec.z0 > 0 else -0.5


# ---------------------------------------------------------------------------
# single-query algorithm (edge cases and nested disks)


def _alg1(patch: TrimmedPatch, q: np.ndarray, cfg: GwnConfig, cache, rng, depth: int, direction=None) -> GwnResult:
    t0 = time.perf_counter()
    prep = _prepare(patch, cfg)
    evals = np.zeros(1, dtype=np.int64)
    quad = _Quadrature(prep.patch, cfg, cache)
    if direction is None:
        far = _far_frames(prep, q[None, :])[0]
        if far is not None:
            tag, frame = far
            val, failed = quad.integrate(q[None, :], frame, evals)
            return GwnResult(float(val[0]), GwnCase(tag), int(evals[0]), 0.0, float(val[0]), False, bool(failed[0]), time.perf_counter() - t0)
        direction = prep.direction
        rot = prep.rot
    else:
        rot = rotation_to_z(direction)
    try:
        recs = line_patch_intersections(prep.patch, q, direction, cfg.eps_ls, prep.r, cfg.thresholds)
    except UnresolvedIntersection:
        recs = None
    if recs is None or any(rec.kind == TANGENT for rec in recs):
        return _retry_rotated(patch, q, cfg, cache, rng, depth, t0)
    return _resolve(prep, q, recs, direction, rot, cfg, cache, rng, depth, t0)


def _retry_rotated(patch, q, cfg, cache, rng, depth, t0) -> GwnResult:
    if depth >= cfg.max_edge_recursion:
        return GwnResult(0.0, GwnCase(EDGE_ROTATE), unresolved=True, elapsed=time.perf_counter() - t0)
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    child = _alg1(patch, q, cfg, cache, rng, depth + 1, direction=d)
    return GwnResult(
        child.value,
        GwnCase(EDGE_ROTATE, [child.case]),
        child.surface_evals,
        child.correction,
        child.boundary,
        child.coincident,
        child.unresolved,
        time.perf_counter() - t0,
    )


def _resolve(prep: _Prepared, q, recs, direction, rot, cfg, cache, rng, depth, t0, removed=None) -> GwnResult:
    """Corrections, disk extractions and the final boundary integral for one cast line.

    ``removed`` is an already extracted coincident disk ``(outer, center, radius)``.
    """
    outer = prep.patch
    correction = 0.0
    children: list[GwnResult] = []
    disks: list[tuple[tuple[float, float], float]] = []
    coincident = False
    unresolved = False
    tag = NEAR
    if removed is not None:
        outer, center, rad = removed
        disks.append((center, rad * (1 + 1e-9)))
        coincident = True
        tag = COINCIDENT_BOUNDARY
    inside_disk = lambda uv: any(math.dist(uv, c) < rad for c, rad in disks)  # noqa: E731
    for rec in recs:
        if rec.kind not in (NEAR_BOUNDARY, CUSP) or inside_disk(rec.uv):
            continue
        if depth >= cfg.max_edge_recursion:
            unresolved = True
            continue
        if abs(rec.z0) < prep.coincident_tol:
            outer, _ = extract_parameter_disk(outer, rec.uv, cfg.coincident_disk_factor * prep.r)
            disks.append((rec.uv, cfg.coincident_disk_factor * prep.r))
            coincident = True
            tag = COINCIDENT_BOUNDARY
            continue
        outer, disk = extract_parameter_disk(outer, rec.uv, prep.r)
        disks.append((rec.uv, prep.r))
        child = _alg1(disk, q, cfg, cache, rng, depth + 1)
        children.append(child)
        if tag == NEAR:
            tag = EDGE_DISK
    for rec in recs:
        if rec.kind != INTERIOR or inside_disk(rec.uv):
            continue
        if abs(rec.z0) < prep.coincident_tol:
            coincident = True
            if tag == NEAR:
                tag = COINCIDENT_SURFACE
            continue
        correction += _correction(rec, direction)
    evals = np.zeros(1, dtype=np.int64)
    boundary, failed = _Quadrature(outer, cfg, cache).integrate(q[None, :], _Frame("Z", rot), evals)
    value = float(boundary[0]) + correction + sum(c.value for c in children)
    return GwnResult(
        value,
        GwnCase(tag, [c.case for c in children]),
        int(evals[0]) + sum(c.surface_evals for c in children),
        correction + sum(c.correction for c in children),
        float(boundary[0]) + sum(c.boundary for c in children),
        coincident or any(c.coincident for c in children),
        unresolved or bool(failed[0]) or any(c.unresolved for c in children),
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# batched evaluation


def patch_gwn_batch(patch: TrimmedPatch, queries, cfg: GwnConfig = GwnConfig(), cache: QuadratureCache | None = None) -> list[GwnResult]:
    """Winding number of one patch at many queries.

    Far-field and clean near-field queries share vectorized quadrature; edge
    cases go through the recursive single-query path. Each query's value is
    independent of which other queries are in the batch.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    m = len(queries)
    results: list[GwnResult | None] = [None] * m
    if m == 0:
        return []
    t_start = time.perf_counter()
    prep = _prepare(patch, cfg)
    quad = _Quadrature(prep.patch, cfg, cache)
    evals = np.zeros(m, dtype=np.int64)
    groups: dict = {}
    t_class = time.perf_counter()
    frames = _far_frames(prep, queries)
    per_query_class = (time.perf_counter() - t_class) / m
    near_meta = {}
    for i, far in enumerate(frames):
        if far is not None:
            tag, frame = far
            gkey = (tag, frame.axis)
            groups.setdefault(gkey, (tag, frame, []))[2].append(i)
            continue
        t0 = time.perf_counter()
        q = queries[i]
        try:
            recs = line_patch_intersections(prep.patch, q, prep.direction, cfg.eps_ls, prep.r, cfg.thresholds)
        except UnresolvedIntersection:
            recs = None
        clean = recs is not None and all(rec.kind == INTERIOR for rec in recs)
        if not clean:
            rng = _query_rng(cfg, patch.id, q)
            if recs is None or any(rec.kind == TANGENT for rec in recs):
                results[i] = _retry_rotated(patch, q, cfg, cache, rng, 0, t0)
            else:
                results[i] = _resolve(prep, q, recs, prep.direction, prep.rot, cfg, cache, rng, 0, t0)
            continue
        correction = 0.0
        coincident = False
        for rec in recs:
            if abs(rec.z0) < prep.coincident_tol:
                coincident = True
            else:
                correction += _correction(rec, prep.direction)
        near_meta[i] = (correction, coincident, time.perf_counter() - t0)
        tag = COINCIDENT_SURFACE if coincident else NEAR
        groups.setdefault(("near", "Z"), (NEAR, _Frame("Z", prep.rot), []))[2].append(i)

    for _, (tag, frame, members) in groups.items():
        idx = np.array(members)
        t0 = time.perf_counter()
        sub_evals = np.zeros(len(idx), dtype=np.int64)
        vals, failed = quad.integrate(queries[idx], frame, sub_evals)
        share = (time.perf_counter() - t0) / len(idx)
        for k, i in enumerate(members):
            boundary = float(vals[k])
            if i in near_meta:
                correction, coincident, spent = near_meta[i]
                results[i] = GwnResult(
                    boundary + correction,
                    GwnCase(COINCIDENT_SURFACE if coincident else NEAR),
                    int(sub_evals[k]),
                    correction,
                    boundary,
                    coincident,
                    bool(failed[k]),
                    spent + share + per_query_class,
                )
            else:
                results[i] = GwnResult(boundary, GwnCase(tag), int(sub_evals[k]), 0.0, boundary, False, bool(failed[k]), share + per_query_class)
    del t_start
    return results  # type: ignore[return-value]


def patch_gwn(patch: TrimmedPatch, q, cfg: GwnConfig = GwnConfig(), cache: QuadratureCache | None = None) -> GwnResult:
    return patch_gwn_batch(patch, np.asarray(q, dtype=float)[None, :], cfg, cache)[0]


def coincident_boundary_gwn(patch: TrimmedPatch, q, uv, cfg: GwnConfig = GwnConfig(), cache=None) -> GwnResult:
    """Winding number for a query lying on the patch boundary at parameter ``uv``.

    A small disk around ``uv`` is removed and counted as zero; the rest is evaluated normally.
    """
    q = np.asarray(q, dtype=float)
    prep = _prepare(patch, cfg)
    rad = cfg.coincident_disk_factor * prep.r
    outer, _ = extract_parameter_disk(prep.patch, uv, rad)
    t0 = time.perf_counter()
    try:
        recs = line_patch_intersections(prep.patch, q, prep.direction, cfg.eps_ls, prep.r, cfg.thresholds)
    except UnresolvedIntersection:
        recs = []
    recs = [rec for rec in recs if rec.kind != TANGENT]
    rng = _query_rng(cfg, patch.id, q)
    return _resolve(prep, q, recs, prep.direction, prep.rot, cfg, cache, rng, 0, t0, removed=(outer, tuple(uv), rad))


class CacheSet:
    """One quadrature cache per patch id."""

    def __init__(self):
        self._caches: dict[str, QuadratureCache] = {}
        self._lock = threading.Lock()

    def for_patch(self, pid: str) -> QuadratureCache:
        with self._lock:
            return self._caches.setdefault(pid, QuadratureCache())


def model_gwn_batch(model: Model, queries, cfg: GwnConfig = GwnConfig(), caches: CacheSet | None = None):
    """Summed winding numbers (m,) and the per-patch results (one list per patch)."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    caches = caches if caches is not None else CacheSet()
    total = np.zeros(len(queries))
    per_patch = []
    for patch in model.patches:
        res = patch_gwn_batch(patch, queries, cfg, caches.for_patch(patch.id))
        total = total + np.array([r.value for r in res])
        per_patch.append(res)
    return total, per_patch


def model_gwn(model: Model, q, cfg: GwnConfig = GwnConfig(), caches: CacheSet | None = None):
    total, per_patch = model_gwn_batch(model, np.asarray(q, dtype=float)[None, :], cfg, caches)
    return float(total[0]), [res[0] for res in per_patch]
