"""2D generalized winding numbers of unstructured trimming-curve collections.

Also hosts the parameter-space helpers the 3D algorithm needs: the trim test,
disk proximity, and clipping of curve collections against a circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .kernel import BezierCurve, NurbsCurve, circle_arc, circle_loop, dehomogenize, restrict

TWO_PI = 2.0 * math.pi
MAX_DEPTH = 64


class DegenerateCurveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Winding2D:
    value: float
    coincident: bool = False


def segment_winding(a, b) -> float:
    """Signed angle subtended by segment ab at the origin, over 2 pi."""
    ax, ay = a
    bx, by = b
    return math.atan2(ax * by - ay * bx, ax * bx + ay * by) / TWO_PI


def _linear_winding(x0, y0, x1, y1, tol):
    cross = x0 * y1 - y0 * x1
    dot = x0 * x1 + y0 * y1
    dx, dy = x1 - x0, y1 - y0
    length2 = dx * dx + dy * dy
    on = False
    if abs(cross) <= tol * math.sqrt(length2) and dot <= tol * tol:
        on = True
    elif x0 * x0 + y0 * y0 <= tol * tol or x1 * x1 + y1 * y1 <= tol * tol:
        on = True
    if on:
        return math.atan2(cross, dot) / TWO_PI if dot > 0 else 0.0, True
    return math.atan2(cross, dot) / TWO_PI, False


def _segment_gwn(h: np.ndarray, q, tol: float, depth: int = 0):
    pts = h[:, :2] / h[:, 2:]
    x = pts[:, 0] - q[0]
    y = pts[:, 1] - q[1]
    if len(pts) == 2:
        return _linear_winding(x[0], y[0], x[1], y[1], tol)
    xmin, xmax, ymin, ymax = x.min(), x.max(), y.min(), y.max()
    if xmin > 0 or xmax < 0 or ymin > 0 or ymax < 0:
        return math.atan2(x[0] * y[-1] - y[0] * x[-1], x[0] * x[-1] + y[0] * y[-1]) / TWO_PI, False
    if math.hypot(xmax - xmin, ymax - ymin) < tol:
        return math.atan2(x[0] * y[-1] - y[0] * x[-1], x[0] * x[-1] + y[0] * y[-1]) / TWO_PI, True
    if depth >= MAX_DEPTH:
        raise DegenerateCurveError("2D winding recursion too deep")
    n = len(h) - 1
    left = np.empty_like(h)
    right = np.empty_like(h)
    work = h
    left[0] = h[0]
    right[n] = h[n]
    for k in range(1, n + 1):
        work = 0.5 * (work[:-1] + work[1:])
        left[k] = work[0]
        right[n - k] = work[-1]
    a, ca = _segment_gwn(left, q, tol, depth + 1)
    b, cb = _segment_gwn(right, q, tol, depth + 1)
    return a + b, ca or cb


def default_edge_tolerance(loops) -> float:
    if not loops:
        return 1e-10
    pts = np.concatenate([c.control for c in loops])
    return 1e-10 * max(float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))), 1e-300)


def gwn2d(q, loops, edge_tol: float | None = None) -> Winding2D:
    """Winding number of a point against any collection of (possibly open) curves."""
    if edge_tol is None:
        edge_tol = default_edge_tolerance(loops)
    q = (float(q[0]), float(q[1]))
    total = 0.0
    coincident = False
    for curve in loops:
        for seg in curve.segments:
            w, c = _segment_gwn(seg.h, q, edge_tol)
            total += w
            coincident = coincident or c
    return Winding2D(total, coincident)


def trim_contains(uv, loops, edge_tol: float | None = None) -> tuple[bool, bool]:
    """Nonzero-rule trim test; returns ``(inside, coincident)``."""
    res = gwn2d(uv, loops, edge_tol)
    return round(res.value) != 0, res.coincident


# ---------------------------------------------------------------------------
# proximity


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a[0] - p[0], a[1] - p[1]
    dx, dy = b[0] - a[0], b[1] - a[1]
    l2 = dx * dx + dy * dy
    t = 0.0 if l2 == 0 else min(1.0, max(0.0, -(ax * dx + ay * dy) / l2))
    return math.hypot(ax + t * dx, ay + t * dy)


def _segment_enters(h: np.ndarray, c, r: float, depth: int) -> bool:
    pts = h[:, :2] / h[:, 2:]
    if len(pts) == 2:
        return _point_segment_distance(c, pts[0], pts[1]) <= r
    d = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    if d[0] <= r or d[-1] <= r or d.max() <= r:
        return True
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    gap = np.maximum(0.0, np.maximum(lo - c, c - hi))
    if math.hypot(gap[0], gap[1]) > r:
        return False
    if float(np.linalg.norm(hi - lo)) < 1e-6 * r or depth >= MAX_DEPTH:
        return bool(d.min() <= r * (1 + 1e-6))
    left, right = BezierCurve(h).split()
    return _segment_enters(left.h, c, r, depth + 1) or _segment_enters(right.h, c, r, depth + 1)


def loops_enter_disk(loops, center, radius: float) -> bool:
    """True when any curve passes within ``radius`` of ``center``."""
    c = np.asarray(center, dtype=float)
    return any(_segment_enters(seg.h, c, radius, 0) for curve in loops for seg in curve.segments)


# ---------------------------------------------------------------------------
# clipping against a circle


def _level_crossings(seg: BezierCurve, level, excluded) -> list[float]:
    """Parameters in (0, 1) where ``level(point)`` changes sign along the segment.

    ``level`` maps (n, 2) points to values; ``excluded(pts, g)`` is true when
    a control polygon ``pts`` with level values ``g`` cannot contain a zero.
    """

    def f(s: float) -> float:
        p, _ = seg.evaluate(s)
        return float(level(p)[0])

    found: list[float] = []

    def rec(h: np.ndarray, s0: float, s1: float, depth: int):
        pts = dehomogenize(h)
        g = level(pts)
        if excluded(pts, g):
            return
        changes = int(np.count_nonzero(np.diff(np.sign(g)) != 0))
        if depth < 30 and (depth < 2 or changes > 1):
            mid = 0.5 * (s0 + s1)
            left, right = BezierCurve(h).split()
            rec(left.h, s0, mid, depth + 1)
            rec(right.h, mid, s1, depth + 1)
            return
        f0, f1 = f(s0), f(s1)
        if f0 == 0.0 and 0.0 < s0 < 1.0:
            found.append(s0)
        elif f0 * f1 < 0:
            found.append(brentq(f, s0, s1, xtol=1e-15, rtol=1e-15))

    rec(seg.h, 0.0, 1.0, 0)
    return sorted(s for s in set(found) if 0.0 < s < 1.0)


def _circle_crossings(seg: BezierCurve, c: np.ndarray, r: float) -> list[float]:
    """Parameters in (0, 1) where the segment crosses the circle (sign changes only)."""
    if seg.degree == 1:
        a, b = seg.points
        d = b - a
        f = a - c
        qa, qb, qc = d @ d, 2 * (f @ d), f @ f - r * r
        disc = qb * qb - 4 * qa * qc
        if qa == 0 or disc <= 0:
            return []
        sq = math.sqrt(disc)
        k = -0.5 * (qb + math.copysign(sq, qb))
        roots = sorted({k / qa, qc / k if k != 0 else -1.0})
        return [s for s in roots if 0.0 < s < 1.0]

    def excluded(pts, g):
        # inside the (convex) disk, a control box that misses it, or an arc of the circle itself
        if np.all(g < 0) or np.all(np.abs(g) <= 1e-12 * r * r):
            return True
        gap = np.maximum(0.0, np.maximum(pts.min(axis=0) - c, c - pts.max(axis=0)))
        return gap @ gap > r * r

    return _level_crossings(seg, lambda p: np.sum((p - c) ** 2, axis=1) - r * r, excluded)


def _vline_crossings(seg: BezierCurve, t: float) -> list[float]:
    """Parameters in (0, 1) where the segment crosses the line u = t."""
    if seg.degree == 1:
        (a, _), (b, _) = seg.points
        if (a - t) * (b - t) >= 0:
            return []
        return [(t - a) / (b - a)]
    return _level_crossings(seg, lambda p: p[:, 0] - t, lambda pts, g: bool(np.all(g > 0) or np.all(g < 0)))


@dataclass
class ClippedLoops:
    outer: list
    inner: list
    outer_keys: list
    inner_keys: list
    crossings: list  # crossing points on the circle (2D)


def _inside_disk(curve_piece: BezierCurve, c, r) -> bool:
    p, _ = curve_piece.evaluate(0.5)
    return float(np.hypot(*(p[0] - c))) < r


def clip_loops_to_circle(loops, center, radius: float, keys=None) -> ClippedLoops:
    """Split a curve collection by a circle into the parts outside and inside.

    The circle itself is added (clockwise to the outer set, counterclockwise to
    the inner set) only along the arcs that lie inside the visible region, so
    both sets bound genuine regions and together reproduce the original.
    Curves that do not cross the circle are passed through with their key.
    """
    c = np.asarray(center, dtype=float)
    keys = list(keys) if keys is not None else [None] * len(loops)
    out = ClippedLoops([], [], [], [], [])
    for curve, key in zip(loops, keys):
        cuts = [(seg, _circle_crossings(seg, c, radius)) for seg in curve.segments]
        if not any(s for _, s in cuts):
            inside = _inside_disk(curve.segments[len(curve.segments) // 2], c, radius)
            (out.inner if inside else out.outer).append(curve)
            (out.inner_keys if inside else out.outer_keys).append(key)
            continue
        for seg, params in cuts:
            bounds = [0.0, *params, 1.0]
            for s0, s1 in zip(bounds[:-1], bounds[1:]):
                piece = BezierCurve(restrict(seg.h, s0, s1))
                inside = _inside_disk(piece, c, radius)
                (out.inner if inside else out.outer).append(NurbsCurve.from_bezier(piece))
                (out.inner_keys if inside else out.outer_keys).append(None)
            for s in params:
                p, _ = seg.evaluate(s)
                out.crossings.append(p[0])

    angles = sorted({math.atan2(p[1] - c[1], p[0] - c[0]) for p in out.crossings})
    if not angles:
        probe = c + np.array([radius, 0.0])
        if trim_contains(probe, loops)[0]:
            out.outer.extend(circle_loop(c, radius, -1))
            out.inner.extend(circle_loop(c, radius, 1))
            out.outer_keys.extend([None] * 4)
            out.inner_keys.extend([None] * 4)
        return out
    spans = list(zip(angles, angles[1:] + [angles[0] + 2 * math.pi]))
    for a0, a1 in spans:
        if a1 - a0 < 1e-14:
            continue
        mid = 0.5 * (a0 + a1)
        if not trim_contains(c + radius * np.array([math.cos(mid), math.sin(mid)]), loops)[0]:
            continue
        arcs = circle_arc(c, radius, a0, a1)
        out.inner.extend(arcs)
        out.outer.extend(a.reversed() for a in reversed(arcs))
        out.inner_keys.extend([None] * len(arcs))
        out.outer_keys.extend([None] * len(arcs))
    return out


def split_loops_at_u(loops, t: float, keys=None) -> tuple[list, list, list, list]:
    """Split a curve collection by the line u = t into the parts left and right of it.

    Returns ``(left, right, left_keys, right_keys)``; the line itself is added
    along the stretches that lie inside the visible region, upward for the
    left part and downward for the right part.
    """
    keys = list(keys) if keys is not None else [None] * len(loops)
    left, right, lkeys, rkeys = [], [], [], []
    hits = []
    for curve, key in zip(loops, keys):
        cuts = [(seg, _vline_crossings(seg, t)) for seg in curve.segments]
        if not any(s for _, s in cuts):
            p, _ = curve.segments[len(curve.segments) // 2].evaluate(0.5)
            side = p[0][0] < t
            (left if side else right).append(curve)
            (lkeys if side else rkeys).append(key)
            continue
        for seg, params in cuts:
            bounds = [0.0, *params, 1.0]
            for s0, s1 in zip(bounds[:-1], bounds[1:]):
                piece = BezierCurve(restrict(seg.h, s0, s1))
                p, _ = piece.evaluate(0.5)
                side = p[0][0] < t
                (left if side else right).append(NurbsCurve.from_bezier(piece))
                (lkeys if side else rkeys).append(None)
            for s in params:
                p, _ = seg.evaluate(s)
                hits.append(float(p[0][1]))
    vs = sorted(set(hits))
    for v0, v1 in zip(vs[:-1], vs[1:]):
        if v1 - v0 < 1e-14 or not trim_contains((t, 0.5 * (v0 + v1)), loops)[0]:
            continue
        left.append(NurbsCurve.line((t, v0), (t, v1)))
        right.append(NurbsCurve.line((t, v1), (t, v0)))
        lkeys.append(None)
        rkeys.append(None)
    return left, right, lkeys, rkeys


def split_trimmed_patch(patch, t: float):
    """Two trimmed patches covering ``patch``, split at the interior knot value u = t."""
    from .kernel import TrimmedPatch

    sa, sb = patch.surface.split_u(t)
    left, right, _, _ = split_loops_at_u(patch.loops, t)
    return TrimmedPatch(sa, tuple(left), id=f"{patch.id}.a"), TrimmedPatch(sb, tuple(right), id=f"{patch.id}.b")
