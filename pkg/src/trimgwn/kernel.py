"""Rational Bezier and NURBS curves and surfaces.

Everything here works on homogeneous control points ``(w*x, ..., w)`` so that
subdivision and knot insertion are plain affine operations. NURBS objects are
decomposed into Bezier pieces once (lazily) and evaluated piecewise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

SQRT1_2 = math.sqrt(0.5)


class DomainError(ValueError):
    """Parameter outside the (possibly extended) domain."""


# ---------------------------------------------------------------------------
# Bernstein machinery


def _binomials(n: int) -> np.ndarray:
    row = _BINOM.get(n)
    if row is None:
        row = _BINOM[n] = np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)
    return row


_BINOM: dict[int, np.ndarray] = {}


def _basis(n: int, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    k = np.arange(n + 1)
    return _binomials(n) * (s[:, None] ** k) * (t[:, None] ** (n - k))


def bernstein(n: int, s) -> tuple[np.ndarray, np.ndarray]:
    """Bernstein basis of degree ``n`` and its derivative at each ``s``.

    Works for ``s`` outside [0, 1] too, which is how domain extension is done.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = 1.0 - s
    basis = _basis(n, s, t)
    deriv = np.zeros_like(basis)
    if n > 0:
        lower = _basis(n - 1, s, t)
        deriv[:, :n] -= n * lower
        deriv[:, 1:] += n * lower
    return basis, deriv


def de_casteljau_split(h: np.ndarray, s: float, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split homogeneous control points along ``axis`` at parameter ``s``.

    The left piece covers [0, s] and the right piece [s, 1]; ``s`` may lie
    outside [0, 1], giving an extrapolated piece.
    """
    pts = np.moveaxis(np.asarray(h, dtype=float), axis, 0)
    n = pts.shape[0] - 1
    left = np.empty_like(pts)
    right = np.empty_like(pts)
    work = pts.copy()
    left[0] = work[0]
    right[n] = work[n]
    for k in range(1, n + 1):
        work = (1.0 - s) * work[:-1] + s * work[1:]
        left[k] = work[0]
        right[n - k] = work[-1]
    return np.moveaxis(left, 0, axis), np.moveaxis(right, 0, axis)


def restrict(h: np.ndarray, a: float, b: float, axis: int = 0) -> np.ndarray:
    """Control points of the piece over [a, b] of a Bezier along ``axis``."""
    if b != 1.0:
        h, _ = de_casteljau_split(h, b, axis)
        a = a / b
    if a != 0.0:
        _, h = de_casteljau_split(h, a, axis)
    return h


def homogenize(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return np.concatenate([points * weights[..., None], weights[..., None]], axis=-1)


def dehomogenize(h: np.ndarray) -> np.ndarray:
    return h[..., :-1] / h[..., -1:]


# ---------------------------------------------------------------------------
# Bezier pieces


@dataclass(frozen=True, eq=False)
class BezierCurve:
    """Rational Bezier curve on [0, 1], homogeneous control points ``(n+1, d+1)``."""

    h: np.ndarray

    @property
    def degree(self) -> int:
        return self.h.shape[0] - 1

    @cached_property
    def points(self) -> np.ndarray:
        return dehomogenize(self.h)

    @property
    def weights(self) -> np.ndarray:
        return self.h[:, -1]

    def evaluate(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Points and first derivatives at parameters ``s`` (array in, arrays out)."""
        basis, deriv = bernstein(self.degree, s)
        hp = basis @ self.h
        hd = deriv @ self.h
        w = hp[:, -1:]
        pt = hp[:, :-1] / w
        return pt, (hd[:, :-1] - pt * hd[:, -1:]) / w

    def split(self, s: float = 0.5) -> tuple["BezierCurve", "BezierCurve"]:
        left, right = de_casteljau_split(self.h, s)
        return BezierCurve(left), BezierCurve(right)

    def reversed(self) -> "BezierCurve":
        return BezierCurve(self.h[::-1].copy())

    def is_linear(self) -> bool:
        return self.degree == 1


@dataclass(frozen=True, eq=False)
class BezierPatch:
    """Rational tensor-product Bezier patch on [0,1]^2, homogeneous grid ``(p+1, q+1, 4)``."""

    h: np.ndarray

    @property
    def degrees(self) -> tuple[int, int]:
        return self.h.shape[0] - 1, self.h.shape[1] - 1

    @cached_property
    def points(self) -> np.ndarray:
        return dehomogenize(self.h)

    def evaluate(self, u, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p, q = self.degrees
        bu, dbu = bernstein(p, u)
        bv, dbv = bernstein(q, v)
        flat = self.h.reshape(p + 1, -1)
        rows = (bu @ flat).reshape(-1, q + 1, 4)
        drows = (dbu @ flat).reshape(-1, q + 1, 4)
        hp = np.einsum("mj,mjk->mk", bv, rows)
        hu = np.einsum("mj,mjk->mk", bv, drows)
        hv = np.einsum("mj,mjk->mk", dbv, rows)
        w = hp[:, 3:]
        pt = hp[:, :3] / w
        return pt, (hu[:, :3] - pt * hu[:, 3:]) / w, (hv[:, :3] - pt * hv[:, 3:]) / w

    def split_u(self, s: float = 0.5) -> tuple["BezierPatch", "BezierPatch"]:
        a, b = de_casteljau_split(self.h, s, axis=0)
        return BezierPatch(a), BezierPatch(b)

    def split_v(self, s: float = 0.5) -> tuple["BezierPatch", "BezierPatch"]:
        a, b = de_casteljau_split(self.h, s, axis=1)
        return BezierPatch(a), BezierPatch(b)

    def split4(self) -> list["BezierPatch"]:
        """Quadrants in order (u-low,v-low), (u-low,v-high), (u-high,v-low), (u-high,v-high)."""
        lo, hi = self.split_u()
        return [*lo.split_v(), *hi.split_v()]

    def restricted(self, u0: float, u1: float, v0: float, v1: float) -> "BezierPatch":
        h = restrict(self.h, u0, u1, axis=0)
        return BezierPatch(restrict(h, v0, v1, axis=1))

    def transformed(self, rot: np.ndarray, shift=None) -> "BezierPatch":
        pts = self.points @ rot.T
        if shift is not None:
            pts = pts + shift
        return BezierPatch(homogenize(pts, self.h[..., 3]))


# ---------------------------------------------------------------------------
# knot vectors and Bezier extraction


def _insert_knot(degree: int, knots: np.ndarray, ctrl: np.ndarray, t: float):
    k = int(np.searchsorted(knots, t, side="right")) - 1
    n = ctrl.shape[0]
    out = np.empty((n + 1,) + ctrl.shape[1:])
    out[: k - degree + 1] = ctrl[: k - degree + 1]
    for i in range(k - degree + 1, k + 1):
        a = (t - knots[i]) / (knots[i + degree] - knots[i])
        out[i] = a * ctrl[i] + (1.0 - a) * ctrl[i - 1]
    out[k + 1 :] = ctrl[k:]
    return np.insert(knots, k + 1, t), out


def check_knots(degree: int, knots, count: int) -> np.ndarray:
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size != count + degree + 1:
        raise ValueError(f"need {count + degree + 1} knots for {count} control points of degree {degree}")
    if np.any(np.diff(knots) < 0):
        raise ValueError("knot vector must be non-decreasing")
    if not (np.all(knots[: degree + 1] == knots[0]) and np.all(knots[-degree - 1 :] == knots[-1])):
        raise ValueError("knot vector must be clamped")
    if knots[-1] <= knots[0]:
        raise ValueError("knot vector has an empty domain")
    return knots


def extract_bezier(degree: int, knots: np.ndarray, ctrl: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Bezier pieces of a clamped spline along axis 0 plus the span breakpoints."""
    knots = np.asarray(knots, dtype=float)
    ctrl = np.asarray(ctrl, dtype=float)
    lo, hi = knots[degree], knots[-degree - 1]
    interior = knots[degree + 1 : -degree - 1]
    for value in np.unique(interior):
        mult = int(np.count_nonzero(knots == value))
        for _ in range(degree - mult):
            knots, ctrl = _insert_knot(degree, knots, ctrl, value)
    breaks = np.concatenate([[lo], np.unique(interior), [hi]])
    pieces = [ctrl[j * degree : j * degree + degree + 1] for j in range(len(breaks) - 1)]
    return pieces, breaks


def _span_index(breaks: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(breaks, t, side="right") - 1
    return np.clip(idx, 0, len(breaks) - 2)


# ---------------------------------------------------------------------------
# NURBS curve (trimming curves live in 2D parameter space)


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    degree: int
    knots: np.ndarray
    control: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        control = np.asarray(self.control, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "knots", check_knots(self.degree, self.knots, control.shape[0]))
        if weights.shape != control.shape[:1]:
            raise ValueError("one weight per control point")

    @classmethod
    def bezier(cls, control, weights=None) -> "NurbsCurve":
        control = np.asarray(control, dtype=float)
        p = control.shape[0] - 1
        if weights is None:
            weights = np.ones(p + 1)
        return cls(p, np.r_[np.zeros(p + 1), np.ones(p + 1)], control, weights)

    @classmethod
    def from_bezier(cls, piece: BezierCurve) -> "NurbsCurve":
        return cls.bezier(piece.points, piece.weights)

    @classmethod
    def line(cls, a, b) -> "NurbsCurve":
        return cls.bezier(np.array([a, b], dtype=float))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    @cached_property
    def _extraction(self):
        pieces, breaks = extract_bezier(self.degree, self.knots, homogenize(self.control, self.weights))
        return [BezierCurve(h) for h in pieces], breaks

    @property
    def segments(self) -> list[BezierCurve]:
        return self._extraction[0]

    @property
    def breaks(self) -> np.ndarray:
        return self._extraction[1]

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.domain
        tol = 1e-12 * (hi - lo)
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise DomainError(f"curve parameter outside [{lo}, {hi}]")
        breaks = self.breaks
        idx = _span_index(breaks, t)
        dim = self.control.shape[1]
        pts = np.empty((t.size, dim))
        ders = np.empty((t.size, dim))
        for k in np.unique(idx):
            sel = idx == k
            a, b = breaks[k], breaks[k + 1]
            p, d = self.segments[k].evaluate((t[sel] - a) / (b - a))
            pts[sel] = p
            ders[sel] = d / (b - a)
        return pts, ders

    def reversed(self) -> "NurbsCurve":
        lo, hi = self.domain
        return NurbsCurve(self.degree, (lo + hi) - self.knots[::-1], self.control[::-1].copy(), self.weights[::-1].copy())

    def transformed(self, mat: np.ndarray, shift=None) -> "NurbsCurve":
        pts = self.control @ np.asarray(mat).T
        if shift is not None:
            pts = pts + shift
        return NurbsCurve(self.degree, self.knots, pts, self.weights)

    def elevated(self) -> "NurbsCurve":
        """Same curve, one degree higher (Bezier-wise, then re-joined as a broken-knot spline)."""
        pieces = []
        for seg in self.segments:
            h = seg.h
            n = h.shape[0] - 1
            up = np.empty((n + 2, h.shape[1]))
            up[0], up[-1] = h[0], h[-1]
            for i in range(1, n + 1):
                a = i / (n + 1)
                up[i] = a * h[i - 1] + (1 - a) * h[i]
            pieces.append(up)
        p = self.degree + 1
        breaks = self.breaks
        hs = [pieces[0]] + [pc[1:] for pc in pieces[1:]]
        hall = np.concatenate(hs)
        knots = np.concatenate([[breaks[0]] * (p + 1)] + [[b] * p for b in breaks[1:-1]] + [[breaks[-1]] * (p + 1)])
        return NurbsCurve(p, knots, dehomogenize(hall), hall[:, -1])


def circle_arc(center, radius: float, a0: float, a1: float) -> list[NurbsCurve]:
    """Exact arc from angle ``a0`` to ``a1`` as rational quadratics of at most 90 degrees each."""
    center = np.asarray(center, dtype=float)
    n = max(1, int(math.ceil(abs(a1 - a0) / (math.pi / 2) - 1e-12)))
    angles = np.linspace(a0, a1, n + 1)
    arcs = []
    for s, e in zip(angles[:-1], angles[1:]):
        half = 0.5 * (e - s)
        mid = 0.5 * (s + e)
        w = math.cos(half)
        pts = np.array(
            [
                center + radius * np.array([math.cos(s), math.sin(s)]),
                center + radius / w * np.array([math.cos(mid), math.sin(mid)]),
                center + radius * np.array([math.cos(e), math.sin(e)]),
            ]
        )
        arcs.append(NurbsCurve.bezier(pts, np.array([1.0, w, 1.0])))
    return arcs


def circle_loop(center, radius: float, orientation: int = 1) -> list[NurbsCurve]:
    """Closed circle as four rational quadratic quarter arcs (middle weights sqrt(2)/2).

    ``orientation`` +1 is counterclockwise, -1 clockwise.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float)
    corners = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)]
    arcs = []
    for k in range(4):
        pts = c + radius * np.array(corners[2 * k : 2 * k + 3], dtype=float)
        arcs.append(NurbsCurve.bezier(pts, np.array([1.0, SQRT1_2, 1.0])))
    if orientation < 0:
        arcs = [a.reversed() for a in reversed(arcs)]
    return arcs


# ---------------------------------------------------------------------------
# bounding volumes


@dataclass(frozen=True, eq=False)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def of(cls, points) -> "Aabb":
        pts = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, pts, pad: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.all((pts >= self.lo - pad) & (pts <= self.hi + pad), axis=-1)

    def expanded(self, pad: float) -> "Aabb":
        return Aabb(self.lo - pad, self.hi + pad)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))


@dataclass(frozen=True, eq=False)
class Obb:
    center: np.ndarray
    axes: np.ndarray  # rows are orthonormal axes
    half: np.ndarray

    @classmethod
    def of(cls, points) -> "Obb":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        mean = pts.mean(axis=0)
        cov = np.cov((pts - mean).T) if len(pts) > 1 else np.zeros((3, 3))
        _, vecs = np.linalg.eigh(cov)
        axes = vecs.T[::-1].copy()
        if np.linalg.det(axes) < 0:
            axes[2] = -axes[2]
        local = (pts - mean) @ axes.T
        lo, hi = local.min(axis=0), local.max(axis=0)
        return cls(mean + 0.5 * (lo + hi) @ axes, axes, 0.5 * (hi - lo))

    def local(self, pts) -> np.ndarray:
        return (np.asarray(pts, dtype=float) - self.center) @ self.axes.T

    def contains(self, pts, pad: float = 0.0) -> np.ndarray:
        return np.all(np.abs(self.local(pts)) <= self.half + pad, axis=-1)

    def volume(self) -> float:
        return float(np.prod(2 * self.half))


def rotation_to_z(direction) -> np.ndarray:
    """Proper rotation (rows = new axes) taking the unit ``direction`` to +z.

    Returns the identity for +z itself.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(d)))] = 1.0
    e1 = helper - (helper @ d) * d
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return np.array([e1, e2, d])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation matrix (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# NURBS surface


@dataclass(frozen=True, eq=False)
class NurbsPatch:
    degrees: tuple[int, int]
    knots_u: np.ndarray
    knots_v: np.ndarray
    control: np.ndarray  # (nu, nv, 3)
    weights: np.ndarray  # (nu, nv)
    id: str = ""

    def __post_init__(self):
        control = np.asarray(self.control, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        p, q = (int(d) for d in self.degrees)
        object.__setattr__(self, "degrees", (p, q))
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "weights", weights)
        if control.ndim != 3 or control.shape[2] != 3 or weights.shape != control.shape[:2]:
            raise ValueError("control grid must be (nu, nv, 3) with matching (nu, nv) weights")
        object.__setattr__(self, "knots_u", check_knots(p, self.knots_u, control.shape[0]))
        object.__setattr__(self, "knots_v", check_knots(q, self.knots_v, control.shape[1]))

    @classmethod
    def bezier(cls, control, weights=None, id: str = "") -> "NurbsPatch":
        control = np.asarray(control, dtype=float)
        p, q = control.shape[0] - 1, control.shape[1] - 1
        if weights is None:
            weights = np.ones(control.shape[:2])
        ku = np.r_[np.zeros(p + 1), np.ones(p + 1)]
        kv = np.r_[np.zeros(q + 1), np.ones(q + 1)]
        return cls((p, q), ku, kv, control, weights, id)

    @property
    def domain(self) -> tuple[float, float, float, float]:
        p, q = self.degrees
        return (
            float(self.knots_u[p]),
            float(self.knots_u[-p - 1]),
            float(self.knots_v[q]),
            float(self.knots_v[-q - 1]),
        )

    @cached_property
    def _extraction(self):
        p, q = self.degrees
        h = homogenize(self.control, self.weights)
        upieces, ubreaks = extract_bezier(p, self.knots_u, h)
        tiles = []
        vbreaks = None
        for piece in upieces:
            vp, vbreaks = extract_bezier(q, self.knots_v, np.swapaxes(piece, 0, 1))
            tiles.append([BezierPatch(np.swapaxes(x, 0, 1).copy()) for x in vp])
        return tiles, ubreaks, vbreaks

    @property
    def tiles(self) -> list[list[BezierPatch]]:
        return self._extraction[0]

    @property
    def ubreaks(self) -> np.ndarray:
        return self._extraction[1]

    @property
    def vbreaks(self) -> np.ndarray:
        return self._extraction[2]

    def bezier_pieces(self) -> list[tuple[BezierPatch, tuple[float, float], tuple[float, float]]]:
        ub, vb = self.ubreaks, self.vbreaks
        return [
            (self.tiles[i][j], (ub[i], ub[i + 1]), (vb[j], vb[j + 1]))
            for i in range(len(ub) - 1)
            for j in range(len(vb) - 1)
        ]

    def evaluate(self, u, v, slack: float = 0.0):
        """Point, S_u and S_v at parameter arrays; ``slack`` allows evaluating the extension."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        u0, u1, v0, v1 = self.domain
        tol = slack + 1e-12 * max(u1 - u0, v1 - v0)
        if np.any(u < u0 - tol) or np.any(u > u1 + tol) or np.any(v < v0 - tol) or np.any(v > v1 + tol):
            raise DomainError("surface parameter outside the extended domain")
        ub, vb = self.ubreaks, self.vbreaks
        iu = _span_index(ub, u)
        iv = _span_index(vb, v)
        if len(ub) == 2 and len(vb) == 2:
            du, dv = ub[1] - ub[0], vb[1] - vb[0]
            pt, su, sv = self.tiles[0][0].evaluate((u - ub[0]) / du, (v - vb[0]) / dv)
            return pt, su / du, sv / dv
        pt = np.empty((u.size, 3))
        su = np.empty((u.size, 3))
        sv = np.empty((u.size, 3))
        key = iu * (len(vb) - 1) + iv
        for k in np.unique(key):
            i, j = divmod(int(k), len(vb) - 1)
            sel = key == k
            du, dv = ub[i + 1] - ub[i], vb[j + 1] - vb[j]
            a, b, c = self.tiles[i][j].evaluate((u[sel] - ub[i]) / du, (v[sel] - vb[j]) / dv)
            pt[sel], su[sel], sv[sel] = a, b / du, c / dv
        return pt, su, sv

    def pieces_over(self, u0: float, u1: float, v0: float, v1: float):
        """Bezier pieces covering a rectangle that may reach past the domain (extrapolated end spans)."""
        ub, vb = self.ubreaks, self.vbreaks
        out = []
        nu, nv = len(ub) - 1, len(vb) - 1
        for i in range(nu):
            a = u0 if i == 0 else max(u0, ub[i])
            b = u1 if i == nu - 1 else min(u1, ub[i + 1])
            if b <= a:
                continue
            for j in range(nv):
                c = v0 if j == 0 else max(v0, vb[j])
                d = v1 if j == nv - 1 else min(v1, vb[j + 1])
                if d <= c:
                    continue
                du, dv = ub[i + 1] - ub[i], vb[j + 1] - vb[j]
                tile = self.tiles[i][j].restricted(
                    (a - ub[i]) / du, (b - ub[i]) / du, (c - vb[j]) / dv, (d - vb[j]) / dv
                )
                out.append((tile, (a, b), (c, d)))
        return out

    def transformed(self, rot: np.ndarray, shift=None) -> "NurbsPatch":
        pts = self.control @ np.asarray(rot).T
        if shift is not None:
            pts = pts + shift
        return replace(self, control=pts)

    def split_u(self, t: float) -> tuple["NurbsPatch", "NurbsPatch"]:
        """Split at an interior u value by knot insertion (both halves keep the parent parameters)."""
        p = self.degrees[0]
        u0, u1 = self.domain[:2]
        if not u0 < t < u1:
            raise DomainError("split value must be interior")
        knots = self.knots_u
        h = homogenize(self.control, self.weights)
        for _ in range(p - int(np.count_nonzero(knots == t))):
            knots, h = _insert_knot(p, knots, h, t)
        k = int(np.searchsorted(knots, t, side="left"))
        left_k = np.r_[knots[: k + p], [t]]
        right_k = np.r_[[t], knots[k:]]
        nl = len(left_k) - p - 1
        hl, hr = h[:nl], h[nl - 1 :]
        make = lambda kk, hh, tag: replace(  # noqa: E731
            self, knots_u=kk, control=dehomogenize(hh), weights=hh[..., 3].copy(), id=self.id + tag
        )
        return make(left_k, hl, ".a"), make(right_k, hr, ".b")

    def swapped(self) -> "NurbsPatch":
        """Exchange the u and v directions (flips the S_u x S_v normal)."""
        return NurbsPatch(
            (self.degrees[1], self.degrees[0]),
            self.knots_v,
            self.knots_u,
            np.swapaxes(self.control, 0, 1).copy(),
            self.weights.T.copy(),
            self.id,
        )


def domain_loop(u0: float, u1: float, v0: float, v1: float) -> list[NurbsCurve]:
    """Counterclockwise rectangle of four line segments."""
    c = [(u0, v0), (u1, v0), (u1, v1), (u0, v1), (u0, v0)]
    return [NurbsCurve.line(c[k], c[k + 1]) for k in range(4)]


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    if n not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GAUSS_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GAUSS_CACHE[n]


@dataclass(frozen=True, eq=False)
class TrimmedPatch:
    """A NURBS surface with an unordered collection of 2D trimming curves.

    Counterclockwise loops bound the visible region and the surface normal is
    S_u x S_v. ``extension`` is how far (parameter units) the untrimmed surface
    may be evaluated past its knot domain. ``curve_keys`` name each trimming
    curve for the quadrature cache; ``None`` marks a curve that must not be cached.
    """

    surface: NurbsPatch
    loops: tuple[NurbsCurve, ...] = ()
    extension: float = 0.0
    curve_keys: tuple | None = None
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))
        if not self.id:
            object.__setattr__(self, "id", self.surface.id)
        if self.curve_keys is None:
            object.__setattr__(self, "curve_keys", tuple((self.id, k) for k in range(len(self.loops))))
        elif len(self.curve_keys) != len(self.loops):
            raise ValueError("one cache key per trimming curve")

    @classmethod
    def untrimmed(cls, surface: NurbsPatch, id: str | None = None) -> "TrimmedPatch":
        return cls(surface, tuple(domain_loop(*surface.domain)), id=id or surface.id)

    @property
    def extended_domain(self) -> tuple[float, float, float, float]:
        u0, u1, v0, v1 = self.surface.domain
        r = self.extension
        return u0 - r, u1 + r, v0 - r, v1 + r

    @cached_property
    def uv_box(self) -> Aabb:
        """Parameter box of the trimming curves, clipped to the extended domain."""
        u0, u1, v0, v1 = self.extended_domain
        if not self.loops:
            return Aabb(np.array([u0, v0]), np.array([u1, v1]))
        box = Aabb.of(np.concatenate([c.control for c in self.loops]))
        lo = np.maximum(box.lo, [u0, v0])
        hi = np.minimum(box.hi, [u1, v1])
        return Aabb(lo, np.maximum(lo, hi))

    @cached_property
    def pieces(self):
        """Bezier pieces of the surface over ``uv_box``."""
        lo, hi = self.uv_box.lo, self.uv_box.hi
        if hi[0] <= lo[0] or hi[1] <= lo[1]:
            return []
        return self.surface.pieces_over(lo[0], hi[0], lo[1], hi[1])

    @cached_property
    def control_points(self) -> np.ndarray:
        if not self.pieces:
            return np.zeros((1, 3))
        return np.concatenate([t.points.reshape(-1, 3) for t, _, _ in self.pieces])

    @cached_property
    def aabb(self) -> Aabb:
        return Aabb.of(self.control_points)

    @cached_property
    def obb(self) -> Obb:
        return Obb.of(self.control_points)

    def evaluate(self, u, v):
        return self.surface.evaluate(u, v, slack=self.extension)

    def with_loops(self, loops, keys) -> "TrimmedPatch":
        return TrimmedPatch(self.surface, tuple(loops), self.extension, tuple(keys), self.id)

    def mean_normal(self, seed: int = 0) -> tuple[np.ndarray, bool]:
        """Gauss average of S_u x S_v over the trimmed parameter box.

        Returns ``(direction, degenerate)``; degenerate directions are drawn from ``seed``.
        """
        total = np.zeros(3)
        mags = 0.0
        for tile, (a, b), (c, d) in self.pieces:
            p, q = tile.degrees
            xu, wu = gauss_legendre(p + 1)
            xv, wv = gauss_legendre(q + 1)
            uu, vv = np.meshgrid(xu, xv, indexing="ij")
            _, su, sv = tile.evaluate(uu.ravel(), vv.ravel())
            n = np.cross(su, sv)  # tile-parameter normals already carry the tile's Jacobian
            w = np.outer(wu, wv).ravel()
            total += w @ n
            mags += w @ np.linalg.norm(n, axis=1)
        norm = float(np.linalg.norm(total))
        if mags == 0.0 or norm < 1e-6 * mags:
            rng = np.random.default_rng(seed)
            d = rng.standard_normal(3)
            return d / np.linalg.norm(d), True
        return total / norm, False


def rotate_to_z(patch: TrimmedPatch, origin, direction) -> tuple[TrimmedPatch, np.ndarray]:
    """Rigidly move the surface so that ``origin`` goes to 0 and ``direction`` to +z."""
    rot = rotation_to_z(direction)
    moved = patch.surface.transformed(rot, -rot @ np.asarray(origin, dtype=float))
    return replace(patch, surface=moved), rot


def extend_patch(patch: TrimmedPatch, r: float) -> TrimmedPatch:
    if r < 0:
        raise ValueError("extension must be non-negative")
    return replace(patch, extension=max(patch.extension, r))
