"""Line / trimmed-patch intersection by Bezier subdivision down to bilinear leaves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import BezierPatch, TrimmedPatch, dehomogenize, rotation_to_z
from .winding2d import loops_enter_disk, trim_contains

INTERIOR = "Interior"
NEAR_BOUNDARY = "NearBoundary"
CUSP = "Cusp"
TANGENT = "Tangent"


class UnresolvedIntersection(RuntimeError):
    pass


@dataclass
class IntersectionRecord:
    z0: float
    uv: tuple[float, float]
    normal: np.ndarray
    kind: str
    point: np.ndarray | None = None


# ---------------------------------------------------------------------------
# bilinear leaves


def _vertical_bilinear(p00, p10, p01, p11, x: float, y: float, slack: float = 1e-12):
    """Intersections of the vertical line through (x, y) with a bilinear patch.

    Corners are 3-sequences; returns ``(z, u, v)`` with z the height of the hit.
    """
    ax, ay = p10[0] - p00[0], p10[1] - p00[1]
    bx, by = p01[0] - p00[0], p01[1] - p00[1]
    cx = p11[0] - p10[0] - p01[0] + p00[0]
    cy = p11[1] - p10[1] - p01[1] + p00[1]
    wx, wy = x - p00[0], y - p00[1]
    # (w - u a) x (b + u c) = 0, quadratic in u
    k2 = cx * ay - cy * ax
    k1 = (wx * cy - wy * cx) - (ax * by - ay * bx)
    k0 = wx * by - wy * bx
    scale = max(abs(ax), abs(ay), abs(bx), abs(by), abs(cx), abs(cy), 1e-300)
    s2 = scale * scale
    if abs(k2) <= 1e-14 * s2 and abs(k1) <= 1e-14 * s2 and abs(k0) <= 1e-14 * s2:
        return _degenerate_hit(p00, p10, p01, p11, ax, ay, bx, by, cx, cy, wx, wy, slack)
    if abs(k2) <= 1e-13 * s2:
        roots = [] if k1 == 0 else [-k0 / k1]
    else:
        disc = k1 * k1 - 4.0 * k2 * k0
        if disc < 0:
            if disc > -1e-14 * k1 * k1:
                disc = 0.0
            else:
                return []
        sq = math.sqrt(disc)
        k = -0.5 * (k1 + math.copysign(sq, k1))
        roots = [k / k2]
        if k != 0:
            roots.append(k0 / k)
        elif disc == 0:
            roots = [-k1 / (2 * k2)]
    out = []
    lo, hi = -slack, 1.0 + slack
    for u in roots:
        if not lo <= u <= hi:
            continue
        ex, ey = bx + u * cx, by + u * cy
        rx, ry = wx - u * ax, wy - u * ay
        if abs(ex) >= abs(ey):
            if ex == 0:
                continue
            v = rx / ex
        else:
            v = ry / ey
        if not lo <= v <= hi:
            continue
        z = (1 - u) * (1 - v) * p00[2] + u * (1 - v) * p10[2] + (1 - u) * v * p01[2] + u * v * p11[2]
        out.append((z, u, v))
    return out


def _degenerate_hit(p00, p10, p01, p11, ax, ay, bx, by, cx, cy, wx, wy, slack):
    """Every u solves the quadratic: either the line runs through a collapsed
    edge (all solutions are one 3D point) or it lies in the patch."""
    zs = []
    v = None
    for u in (0.0, 0.5, 1.0):
        ex, ey = bx + u * cx, by + u * cy
        rx, ry = wx - u * ax, wy - u * ay
        if max(abs(ex), abs(ey)) == 0.0:
            raise UnresolvedIntersection("line lies in the bilinear patch")
        v = rx / ex if abs(ex) >= abs(ey) else ry / ey
        if not -slack <= v <= 1.0 + slack:
            return []
        zs.append((1 - u) * (1 - v) * p00[2] + u * (1 - v) * p10[2] + (1 - u) * v * p01[2] + u * v * p11[2])
    span = max(abs(p[2]) for p in (p00, p10, p01, p11)) + 1e-300
    if max(zs) - min(zs) > 1e-12 * span:
        raise UnresolvedIntersection("line lies in the bilinear patch")
    return [(zs[1], 0.5, v)]


def garp(corners, origin, direction, slack: float = 1e-12) -> list[tuple[float, float, float]]:
    """Line / bilinear patch intersections along the full line.

    ``corners`` are P00, P10, P01, P11. Returns ``(z0, u, v)`` with the hit at
    ``origin + z0 * direction``.
    """
    rot = rotation_to_z(direction)
    pts = (np.asarray(corners, dtype=float) - np.asarray(origin, dtype=float)) @ rot.T
    return [(z, u, v) for z, u, v in _vertical_bilinear(*pts.tolist(), 0.0, 0.0, slack)]


def bilinear_deviation2(pts: np.ndarray) -> float:
    """Largest squared distance of a control net from the bilinear through its corners."""
    p, q = pts.shape[0] - 1, pts.shape[1] - 1
    s = np.linspace(0.0, 1.0, p + 1)[:, None, None]
    t = np.linspace(0.0, 1.0, q + 1)[None, :, None]
    c00, c10, c01, c11 = pts[0, 0], pts[-1, 0], pts[0, -1], pts[-1, -1]
    bl = (1 - s) * (1 - t) * c00 + s * (1 - t) * c10 + (1 - s) * t * c01 + s * t * c11
    return float(np.max(np.sum((pts - bl) ** 2, axis=-1)))


def is_approximately_bilinear(bez: BezierPatch | np.ndarray, eps_ls: float) -> bool:
    pts = bez.points if isinstance(bez, BezierPatch) else np.asarray(bez)
    if pts.shape[0] <= 2 and pts.shape[1] <= 2:
        return True
    return bilinear_deviation2(pts) <= eps_ls


# ---------------------------------------------------------------------------
# subdivision tree in a line-aligned frame


class _Node:
    __slots__ = ("h", "ur", "vr", "box", "leaf", "corners", "children", "depth")

    def __init__(self, h: np.ndarray, ur, vr, eps_ls: float, depth: int):
        self.h = h
        self.ur = ur
        self.vr = vr
        self.depth = depth
        pts = dehomogenize(h)
        self.box = (pts[..., 0].min(), pts[..., 0].max(), pts[..., 1].min(), pts[..., 1].max())
        self.leaf = is_approximately_bilinear(pts, eps_ls)
        self.corners = [pts[0, 0].tolist(), pts[-1, 0].tolist(), pts[0, -1].tolist(), pts[-1, -1].tolist()]
        self.children = None

    def split(self, eps_ls: float) -> list["_Node"]:
        if self.children is None:
            (u0, u1), (v0, v1) = self.ur, self.vr
            um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
            kids = BezierPatch(self.h).split4()
            ranges = [((u0, um), (v0, vm)), ((u0, um), (vm, v1)), ((um, u1), (v0, vm)), ((um, u1), (vm, v1))]
            self.children = [_Node(k.h, ur, vr, eps_ls, self.depth + 1) for k, (ur, vr) in zip(kids, ranges)]
        return self.children


class LineSearch:
    """All subdivision state for lines of one direction against one patch region.

    The tree depends only on the direction, so it is shared by every query
    whose line has that direction; each query only translates.
    """

    def __init__(self, patch: TrimmedPatch, direction, eps_ls: float, region, max_depth: int = 50):
        self.direction = np.asarray(direction, dtype=float)
        self.rot = rotation_to_z(self.direction)
        self.eps_ls = eps_ls
        self.max_depth = max_depth
        u0, u1, v0, v1 = region
        self.roots = []
        if u1 > u0 and v1 > v0:
            for tile, ur, vr in patch.surface.pieces_over(u0, u1, v0, v1):
                self.roots.append(_Node(tile.transformed(self.rot).h, ur, vr, eps_ls, 0))
        scale = max((max(n.box[1] - n.box[0], n.box[3] - n.box[2]) for n in self.roots), default=1.0)
        self.pad = 1e-12 * scale

    def raw_hits(self, origin) -> list[tuple[float, float]]:
        """Parent-parameter (u, v) of every leaf hit for the line through ``origin``."""
        x, y, _ = self.rot @ np.asarray(origin, dtype=float)
        pad = self.pad
        out = []
        stack = list(self.roots)
        while stack:
            node = stack.pop()
            xlo, xhi, ylo, yhi = node.box
            if x < xlo - pad or x > xhi + pad or y < ylo - pad or y > yhi + pad:
                continue
            if node.leaf:
                (u0, u1), (v0, v1) = node.ur, node.vr
                for _, s, t in _vertical_bilinear(*node.corners, x, y):
                    out.append((u0 + s * (u1 - u0), v0 + t * (v1 - v0)))
                continue
            if node.depth >= self.max_depth:
                raise UnresolvedIntersection("subdivision depth exceeded")
            stack.extend(node.split(self.eps_ls))
        return out


def dedup_intersections(raw, tol: float) -> list[tuple[float, float]]:
    """Merge parameter pairs closer than ``tol`` (to their mean)."""
    groups: list[list[tuple[float, float]]] = []
    for u, v in raw:
        for g in groups:
            gu = sum(p[0] for p in g) / len(g)
            gv = sum(p[1] for p in g) / len(g)
            if abs(u - gu) <= tol and abs(v - gv) <= tol:
                g.append((u, v))
                break
        else:
            groups.append([(u, v)])
    return [(sum(p[0] for p in g) / len(g), sum(p[1] for p in g) / len(g)) for g in groups]


def search_region(patch: TrimmedPatch, r: float) -> tuple[float, float, float, float]:
    lo, hi = patch.uv_box.lo, patch.uv_box.hi
    e0, e1, e2, e3 = patch.extended_domain
    return max(lo[0] - r, e0), min(hi[0] + r, e1), max(lo[1] - r, e2), min(hi[1] + r, e3)


def line_search(patch: TrimmedPatch, direction, eps_ls: float, r: float) -> LineSearch:
    """Cached :class:`LineSearch` stored on the patch object."""
    store = patch.__dict__.setdefault("_line_search", {})
    key = (np.asarray(direction, dtype=float).tobytes(), eps_ls, r, patch.extension)
    found = store.get(key)
    if found is None:
        found = LineSearch(patch, direction, eps_ls, search_region(patch, r))
        store[key] = found
    return found


@dataclass(frozen=True)
class Thresholds:
    tangent: float = 1e-3
    cusp: float = 1e-8
    dedup: float = 1e-6


def polish_hit(patch: TrimmedPatch, uv, origin, direction, iters: int = 8) -> tuple[float, float]:
    """Newton refinement of a leaf hit on the exact surface; falls back to ``uv`` on failure."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    e0, e1, e2, e3 = patch.extended_domain
    size = max(e1 - e0, e3 - e2)
    u, v = float(uv[0]), float(uv[1])
    t = None
    for _ in range(iters):
        p, su, sv = patch.evaluate(u, v)
        if t is None:
            t = float((p[0] - o) @ d)
        res = p[0] - o - t * d
        jac = np.column_stack([su[0], sv[0], -d])
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            return float(uv[0]), float(uv[1])
        if not np.all(np.isfinite(step)):
            return float(uv[0]), float(uv[1])
        u, v, t = u + step[0], v + step[1], t + step[2]
        if not (e0 <= u <= e1 and e2 <= v <= e3):
            return float(uv[0]), float(uv[1])
        if abs(step[0]) + abs(step[1]) < 1e-13 * size:
            break
    if max(abs(u - uv[0]), abs(v - uv[1])) > 1e-2 * size:
        return float(uv[0]), float(uv[1])
    return u, v


def classify_intersection(patch: TrimmedPatch, uv, origin, direction, r: float, th: Thresholds = Thresholds()):
    """Record for one raw hit, or ``None`` when it falls in a trimmed-away area far from the boundary."""
    inside, coincident = trim_contains(uv, patch.loops)
    near = coincident or loops_enter_disk(patch.loops, uv, r)
    if not (inside or near):
        return None
    pt, su, sv = patch.evaluate(uv[0], uv[1])
    point = pt[0]
    n = np.cross(su[0], sv[0])
    d = np.asarray(direction, dtype=float)
    z0 = float((point - np.asarray(origin, dtype=float)) @ d)
    nn = float(np.linalg.norm(n))
    scale = patch.aabb.diagonal
    if nn < th.cusp * scale * scale:
        kind = CUSP
    elif abs(n @ d) < th.tangent * nn:
        kind = TANGENT
    elif near:
        kind = NEAR_BOUNDARY
    else:
        kind = INTERIOR
    return IntersectionRecord(z0, (float(uv[0]), float(uv[1])), n, kind, point)


def line_patch_intersections(
    patch: TrimmedPatch,
    origin,
    direction,
    eps_ls: float = 1e-6,
    r: float | None = None,
    th: Thresholds = Thresholds(),
    polish: bool = True,
) -> list[IntersectionRecord]:
    """Classified intersections of the full line ``origin + t * direction`` with the patch, sorted by z0."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if r is None:
        r = 0.01 * patch.uv_box.diagonal
    search = line_search(patch, d, eps_ls, r)
    raw = search.raw_hits(origin)
    hits = dedup_intersections(raw, th.dedup)
    if polish:
        # hits from neighbouring leaves can converge onto the same crossing
        hits = dedup_intersections([polish_hit(patch, uv, origin, d) for uv in hits], th.dedup)
    recs = []
    for uv in hits:
        rec = classify_intersection(patch, uv, origin, d, r, th)
        if rec is not None:
            recs.append(rec)
    return sorted(recs, key=lambda rec: rec.z0)
