"""Test and demo geometry: sphere, torus, box, flat and random patches."""

from __future__ import annotations

import math

import numpy as np

from .kernel import NurbsCurve, NurbsPatch, TrimmedPatch, circle_loop, domain_loop, rotation_to_z
from .model import Model


def _binom(n: int) -> np.ndarray:
    return np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)


def bernstein_product(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Bernstein coefficients of the product of two tensor-product polynomials."""
    (m1, n1), (m2, n2) = (s - 1 for s in f.shape), (s - 1 for s in g.shape)
    bm1, bn1, bm2, bn2 = _binom(m1), _binom(n1), _binom(m2), _binom(n2)
    bm, bn = _binom(m1 + m2), _binom(n1 + n2)
    out = np.zeros((m1 + m2 + 1, n1 + n2 + 1))
    fs = f * np.outer(bm1, bn1)
    gs = g * np.outer(bm2, bn2)
    for i in range(m1 + 1):
        for j in range(n1 + 1):
            out[i : i + m2 + 1, j : j + n2 + 1] += fs[i, j] * gs
    return out / np.outer(bm, bn)


def _cube_face_patch() -> tuple[np.ndarray, np.ndarray]:
    """Biquartic control net of the unit-sphere region above the cube face z > max(|x|, |y|).

    A biquadratic planar patch whose four edges are exact circular arcs is
    pushed through the inverse stereographic projection from the south pole,
    which is quadratic, so the result is an exact rational biquartic.
    """
    a = 1.0 / (math.sqrt(3.0) + 1.0)  # stereographic image of the cube corner
    half = math.radians(15.0)  # half the opening angle of each edge arc
    w = math.cos(half)
    m = math.sqrt(2.0) / w - 1.0
    s = np.array([[-a, -m, -a], [0.0, 0.0, 0.0], [a, m, a]])
    t = np.array([[-a, 0.0, a], [-m, 0.0, m], [-a, 0.0, a]])
    wt = np.array([[1.0, w, 1.0], [w, w * w, w], [1.0, w, 1.0]])
    S, T, W = s * wt, t * wt, wt
    ww, ss, tt = bernstein_product(W, W), bernstein_product(S, S), bernstein_product(T, T)
    hx, hy = 2 * bernstein_product(S, W), 2 * bernstein_product(T, W)
    hz, hw = ww - ss - tt, ww + ss + tt
    weights = hw
    pts = np.stack([hx, hy, hz], axis=-1) / weights[..., None]
    return pts, weights


def sphere_patches(center=(0.0, 0.0, 0.0), radius: float = 1.0) -> list[NurbsPatch]:
    """Six biquartic rational patches tiling a sphere, outward normals."""
    pts, weights = _cube_face_patch()
    center = np.asarray(center, dtype=float)
    names = ["+z", "-z", "+x", "-x", "+y", "-y"]
    normals = [(0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
    out = []
    for name, n in zip(names, normals):
        rot = rotation_to_z(np.array(n, dtype=float)).T
        out.append(NurbsPatch.bezier(center + radius * pts @ rot.T, weights, id=f"sphere{name}"))
    return out


def sphere_model(center=(0.0, 0.0, 0.0), radius: float = 1.0) -> Model:
    return Model([TrimmedPatch.untrimmed(s) for s in sphere_patches(center, radius)])


def _circle_nurbs() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit circle as a 4-span rational quadratic: knots, 2D points, weights."""
    h = math.sqrt(0.5)
    pts = np.array([(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)], dtype=float)
    wts = np.array([1, h, 1, h, 1, h, 1, h, 1], dtype=float)
    knots = np.array([0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 4], dtype=float) / 4
    return knots, pts, wts


def torus_patches(major: float = 1.0, minor: float = 0.4) -> list[NurbsPatch]:
    """Torus around the z axis as four rational biquadratic patches (half x half turns)."""
    knots, circ, wts = _circle_nurbs()
    patches = []
    halves = [(slice(0, 5), np.array([0, 0, 0, 1, 1, 2, 2, 2]) / 2.0), (slice(4, 9), np.array([0, 0, 0, 1, 1, 2, 2, 2]) / 2.0)]
    for iu, (su, ku) in enumerate(halves):
        for iv, (sv, kv) in enumerate(halves):
            cu, wu = circ[su], wts[su]
            cv, wv = circ[sv], wts[sv]
            # u sweeps around z, v around the tube; (u, v) order gives outward S_u x S_v
            ctrl = np.empty((5, 5, 3))
            for i in range(5):
                for j in range(5):
                    rad = major + minor * cv[j, 0]
                    ctrl[i, j] = (rad * cu[i, 0], rad * cu[i, 1], minor * cv[j, 1])
            weights = np.outer(wu, wv)
            patches.append(NurbsPatch((2, 2), ku, kv, ctrl, weights, id=f"torus{iu}{iv}"))
    return patches


def torus_model(major: float = 1.0, minor: float = 0.4) -> Model:
    return Model([TrimmedPatch.untrimmed(s) for s in torus_patches(major, minor)])


def bilinear_patch(p00, p10, p01, p11, id: str = "") -> NurbsPatch:
    ctrl = np.array([[p00, p01], [p10, p11]], dtype=float)
    return NurbsPatch.bezier(ctrl, id=id)


def box_patches(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> list[NurbsPatch]:
    """Six flat faces of an axis-aligned box, outward normals."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    c = lambda x, y, z: (x, y, z)  # noqa: E731
    faces = {
        "-z": (c(x0, y0, z0), c(x0, y1, z0), c(x1, y0, z0), c(x1, y1, z0)),
        "+z": (c(x0, y0, z1), c(x1, y0, z1), c(x0, y1, z1), c(x1, y1, z1)),
        "-y": (c(x0, y0, z0), c(x1, y0, z0), c(x0, y0, z1), c(x1, y0, z1)),
        "+y": (c(x0, y1, z0), c(x0, y1, z1), c(x1, y1, z0), c(x1, y1, z1)),
        "-x": (c(x0, y0, z0), c(x0, y0, z1), c(x0, y1, z0), c(x0, y1, z1)),
        "+x": (c(x1, y0, z0), c(x1, y1, z0), c(x1, y0, z1), c(x1, y1, z1)),
    }
    return [bilinear_patch(*v, id=f"box{k}") for k, v in faces.items()]


def box_model(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> Model:
    return Model([TrimmedPatch.untrimmed(s) for s in box_patches(lo, hi)])


def flat_square(size: float = 1.0, z: float = 0.0, id: str = "square") -> TrimmedPatch:
    s = size
    return TrimmedPatch.untrimmed(bilinear_patch((0, 0, z), (s, 0, z), (0, s, z), (s, s, z), id=id))


def flat_square_with_hole(center=(0.5, 0.5), radius: float = 0.2, id: str = "holed") -> TrimmedPatch:
    surf = bilinear_patch((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), id=id)
    loops = domain_loop(0, 1, 0, 1) + circle_loop(center, radius, -1)
    return TrimmedPatch(surf, tuple(loops), id=id)


def triangle_patch(a, b, c, id: str = "tri") -> TrimmedPatch:
    """Triangle abc as a bilinear patch with the v = 1 edge collapsed onto c."""
    return TrimmedPatch.untrimmed(bilinear_patch(a, b, c, c, id=id))


def random_bicubic(rng: np.random.Generator, id: str = "bicubic", spans: int = 1, rational: bool = False) -> NurbsPatch:
    """Height-field-like random bicubic patch over the unit square."""
    n = 3 + spans
    g = np.linspace(0.0, 1.0, n)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    ctrl = np.stack([uu + 0.08 * rng.standard_normal(uu.shape), vv + 0.08 * rng.standard_normal(uu.shape), 0.4 * rng.standard_normal(uu.shape)], axis=-1)
    inner = np.linspace(0, 1, spans + 1)[1:-1]
    knots = np.r_[np.zeros(4), inner, np.ones(4)]
    weights = rng.uniform(0.5, 2.0, uu.shape) if rational else np.ones(uu.shape)
    return NurbsPatch((3, 3), knots, knots, ctrl, weights, id=id)


def spherical_cap(height: float = 0.5, id: str = "cap") -> TrimmedPatch:
    """Unit-circle-bounded spherical cap through (0, 0, height), trimmed by the unit circle.

    The cap lies on the sphere through the unit circle in z=0 and the apex; the
    surface is a flat-square-to-sphere map (inverse stereographic projection)
    so the trim is an exact circle in the parameter plane.
    """
    rad = (1.0 + height * height) / (2.0 * height)
    c = height - rad
    # parameter radius whose image is the unit circle in z = 0
    k = math.sqrt((rad + c) / (rad - c))
    s = np.array([[-k, -k, -k], [0.0, 0.0, 0.0], [k, k, k]])
    t = np.array([[-k, 0.0, k], [-k, 0.0, k], [-k, 0.0, k]])
    W = np.ones((3, 3))
    S, T = s, t
    ww, ss, tt = bernstein_product(W, W), bernstein_product(S, S), bernstein_product(T, T)
    hx, hy = 2 * bernstein_product(S, W) * rad, 2 * bernstein_product(T, W) * rad
    hw = ww + ss + tt
    hz = (ww - ss - tt) * rad + c * hw
    pts = np.stack([hx, hy, hz], axis=-1) / hw[..., None]
    surf = NurbsPatch((4, 4), np.r_[[-1.0] * 5, [1.0] * 5], np.r_[[-1.0] * 5, [1.0] * 5], pts, hw, id=id)
    return TrimmedPatch(surf, tuple(circle_loop((0.0, 0.0), 1.0, 1)), id=id)


def unit_disk(id: str = "disk") -> TrimmedPatch:
    surf = bilinear_patch((-1, -1, 0), (1, -1, 0), (-1, 1, 0), (1, 1, 0), id=id)
    surf = NurbsPatch((1, 1), [-1, -1, 1, 1], [-1, -1, 1, 1], surf.control, surf.weights, id=id)
    return TrimmedPatch(surf, tuple(circle_loop((0.0, 0.0), 1.0, 1)), id=id)


def wiggle_curve(curve: NurbsCurve, rng: np.random.Generator, amount: float) -> NurbsCurve:
    """Cubic copy of a trimming curve with its interior control points jittered."""
    c = curve
    while c.degree < 3:
        c = c.elevated()
    ctrl = c.control.copy()
    ctrl[1:-1] += amount * rng.standard_normal(ctrl[1:-1].shape)
    return NurbsCurve(c.degree, c.knots, ctrl, c.weights)


def cylinder_patch(a0: float, a1: float, radius: float = 1.0, height: float = 1.0, id: str = "cylinder") -> TrimmedPatch:
    """Cylinder strip x = r cos t, z = r sin t (t from a0 to a1), y in [0, height].

    The normal S_u x S_v points away from the axis.
    """
    from .kernel import circle_arc

    arcs = circle_arc((0.0, 0.0), radius, a0, a1)
    pts = [arcs[0].control[0]]
    wts = [arcs[0].weights[0]]
    for arc in arcs:
        pts.extend(arc.control[1:])
        wts.extend(arc.weights[1:])
    n = len(arcs)
    knots = np.r_[[0.0] * 3, np.repeat(np.arange(1, n), 2), [float(n)] * 3] / n
    ctrl = np.zeros((len(pts), 2, 3))
    weights = np.zeros((len(pts), 2))
    for i, ((x, z), w) in enumerate(zip(pts, wts)):
        ctrl[i, 0] = (x, height, z)
        ctrl[i, 1] = (x, 0.0, z)
        weights[i] = w
    surf = NurbsPatch((2, 1), knots, [0.0, 0.0, 1.0, 1.0], ctrl, weights, id=id)
    return TrimmedPatch.untrimmed(surf)
