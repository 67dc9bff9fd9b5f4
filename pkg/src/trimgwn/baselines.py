"""Reference and comparison methods: triangle, mesh, point-cloud and surface-quadrature GWN."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import TrimmedPatch, gauss_legendre
from .winding2d import trim_contains

INV_4PI = 1.0 / (4.0 * math.pi)


class SingularSampleError(ValueError):
    pass


def triangle_gwn(a, b, c, q) -> float:
    """Closed-form winding number of triangle abc at q (half the solid-angle tangent identity)."""
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float) - q
    b = np.asarray(b, dtype=float) - q
    c = np.asarray(c, dtype=float) - q
    la, lb, lc = (float(np.linalg.norm(x)) for x in (a, b, c))
    det = float(a @ np.cross(b, c))
    den = la * lb * lc + float(a @ b) * lc + float(b @ c) * la + float(c @ a) * lb
    if det == 0.0:
        return 0.0
    return math.atan2(det, den) / (2.0 * math.pi)


def triangles_gwn(tris: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Vectorized mesh winding number: ``tris`` (t, 3, 3), ``queries`` (m, 3) -> (m,)."""
    tris = np.asarray(tris, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.zeros(len(queries))
    for k, q in enumerate(queries):
        a = tris[:, 0] - q
        b = tris[:, 1] - q
        c = tris[:, 2] - q
        la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, c))
        det = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = la * lb * lc + np.einsum("ij,ij->i", a, b) * lc + np.einsum("ij,ij->i", b, c) * la + np.einsum("ij,ij->i", c, a) * lb
        ang = np.where(det == 0.0, 0.0, np.arctan2(det, den))
        out[k] = ang.sum() / (2.0 * math.pi)
    return out


@dataclass
class TriangleSoup:
    triangles: np.ndarray  # (t, 3, 3)

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def area(self) -> float:
        t = self.triangles
        return 0.5 * float(np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1).sum())

    @staticmethod
    def concat(soups) -> "TriangleSoup":
        soups = [s.triangles for s in soups if len(s)]
        return TriangleSoup(np.concatenate(soups) if soups else np.zeros((0, 3, 3)))


def mesh_gwn(soup: TriangleSoup, q) -> float:
    if len(soup) == 0:
        return 0.0
    return float(triangles_gwn(soup.triangles, np.asarray(q, dtype=float)[None, :])[0])


@dataclass
class OrientedPointCloud:
    points: np.ndarray  # (n, 3)
    normals: np.ndarray  # (n, 3) unit
    areas: np.ndarray  # (n,)


def cloud_gwn(cloud: OrientedPointCloud, q) -> float:
    """Dipole-sum winding number of an oriented, area-weighted point cloud."""
    d = cloud.points - np.asarray(q, dtype=float)
    r = np.linalg.norm(d, axis=1)
    if np.any(r < 1e-12):
        raise SingularSampleError("query coincides with a sample point")
    return float(INV_4PI * np.sum(cloud.areas * np.einsum("ij,ij->i", d, cloud.normals) / r**3))


def sample_cloud(patches, n: int, rng: np.random.Generator | None = None) -> OrientedPointCloud:
    """About ``n`` samples in total, stratified in each patch's parameter box, jittered by ``rng``.

    Area weights are the surface Jacobian times the stratum area; samples
    outside the trimmed region are dropped.
    """
    patches = list(patches)
    per = max(1, int(round(math.sqrt(n / max(len(patches), 1)))))
    pts, nrm, areas = [], [], []
    for patch in patches:
        lo, hi = patch.uv_box.lo, patch.uv_box.hi
        du, dv = (hi[0] - lo[0]) / per, (hi[1] - lo[1]) / per
        off = rng.uniform(0, 1, (per, per, 2)) if rng is not None else np.full((per, per, 2), 0.5)
        ii, jj = np.meshgrid(np.arange(per), np.arange(per), indexing="ij")
        u = lo[0] + (ii + off[..., 0]) * du
        v = lo[1] + (jj + off[..., 1]) * dv
        u, v = u.ravel(), v.ravel()
        keep = np.array([trim_contains((a, b), patch.loops)[0] for a, b in zip(u, v)])
        if not keep.any():
            continue
        p, su, sv = patch.evaluate(u[keep], v[keep])
        nv = np.cross(su, sv)
        jac = np.linalg.norm(nv, axis=1)
        good = jac > 0
        pts.append(p[good])
        nrm.append(nv[good] / jac[good, None])
        areas.append(jac[good] * du * dv)
    if not pts:
        return OrientedPointCloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    return OrientedPointCloud(np.concatenate(pts), np.concatenate(nrm), np.concatenate(areas))


# ---------------------------------------------------------------------------
# direct surface quadrature


class QuadratureDepthError(RuntimeError):
    pass


def _surface_rule(patch: TrimmedPatch, q, box, order: int, trimmed: bool):
    u0, u1, v0, v1 = box
    x, w = gauss_legendre(order)
    uu, vv = np.meshgrid(u0 + (u1 - u0) * x, v0 + (v1 - v0) * x, indexing="ij")
    ww = np.outer(w, w).ravel() * ((u1 - u0) * (v1 - v0))
    u, v = uu.ravel(), vv.ravel()
    p, su, sv = patch.evaluate(u, v)
    d = p - np.asarray(q, dtype=float)
    r = np.linalg.norm(d, axis=1)
    f = np.einsum("ij,ij->i", d, np.cross(su, sv)) / r**3
    if trimmed:
        mask = np.array([trim_contains((a, b), patch.loops)[0] for a, b in zip(u, v)], dtype=float)
        f = f * mask
    return INV_4PI * float(f @ ww), len(u)


def surface_quadrature_gwn(
    patch: TrimmedPatch,
    q,
    order: int = 20,
    adaptive: bool = False,
    eps_quad: float = 1e-6,
    max_depth: int = 20,
    trimmed: bool | None = None,
) -> tuple[float, int]:
    """Winding number by tensor Gauss-Legendre quadrature of the solid-angle integrand.

    Returns ``(value, surface evaluations)``. The fixed rule covers the
    parameter box of the trimming loops; with ``trimmed`` the integrand is
    masked by the trim test.
    """
    lo, hi = patch.uv_box.lo, patch.uv_box.hi
    box = (lo[0], hi[0], lo[1], hi[1])
    if trimmed is None:
        trimmed = not _is_untrimmed(patch)
    whole, count = _surface_rule(patch, q, box, order, trimmed)
    if not adaptive:
        return whole, count
    total = 0.0
    stack = [(box, whole, 0)]
    while stack:
        (u0, u1, v0, v1), prev, depth = stack.pop()
        um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        quads = [(u0, um, v0, vm), (u0, um, vm, v1), (um, u1, v0, vm), (um, u1, vm, v1)]
        parts = []
        for b in quads:
            val, c = _surface_rule(patch, q, b, order, trimmed)
            parts.append(val)
            count += c
        if abs(prev - sum(parts)) < eps_quad:
            total += sum(parts)
            continue
        if depth + 1 >= max_depth:
            raise QuadratureDepthError("surface quadrature depth exceeded")
        stack.extend((b, val, depth + 1) for b, val in zip(quads, parts))
    return total, count


def _is_untrimmed(patch: TrimmedPatch) -> bool:
    from .kernel import domain_loop

    ref = domain_loop(*patch.surface.domain)
    if len(patch.loops) != len(ref):
        return False
    return all(c.degree == 1 and np.allclose(c.control, r.control) for c, r in zip(patch.loops, ref))


def boundary_fixed_gwn(patch: TrimmedPatch, q, order: int = 20, axis: str | None = None, rot=None) -> tuple[float, int]:
    """Pure boundary integral with one fixed rule per curve span (no adaptivity, no corrections).

    Only valid when the singular line of the chosen field misses the patch.
    Without ``axis`` the far-field frame selection picks one, and a query
    whose every axis line hits the bounding boxes raises ``ValueError``.
    Returns (value, evaluations).
    """
    from .winding3d import _far_frames, _Prepared, antiderivative_field

    q = np.asarray(q, dtype=float)
    if axis is None:
        far = _far_frames(_Prepared(patch, 0.0, np.zeros(3), np.eye(3), 0.0), q[None, :])[0]
        if far is None:
            raise ValueError("every axis line through the query meets the patch bounds")
        axis, rot = far[1].axis, far[1].rot
    rot = np.eye(3) if rot is None else np.asarray(rot, dtype=float)
    x, w = gauss_legendre(order)
    total, count = 0.0, 0
    for curve in patch.loops:
        for seg in curve.segments:
            uv, duv = seg.evaluate(x)
            p, su, sv = patch.evaluate(uv[:, 0], uv[:, 1])
            tan = (su * duv[:, :1] + sv * duv[:, 1:]) @ rot.T
            f = antiderivative_field((p - q) @ rot.T, axis)
            total += float(np.einsum("ij,ij->i", f, tan) @ w)
            count += order
    return total, count


# ---------------------------------------------------------------------------
# tessellation


def tessellate_trimmed(patch: TrimmedPatch, n: int) -> TriangleSoup:
    """n x n parameter grid over the trim box, two triangles per kept cell (cell center inside)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    lo, hi = patch.uv_box.lo, patch.uv_box.hi
    us = np.linspace(lo[0], hi[0], n + 1)
    vs = np.linspace(lo[1], hi[1], n + 1)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    p, _, _ = patch.evaluate(uu.ravel(), vv.ravel())
    grid = p.reshape(n + 1, n + 1, 3)
    tris = []
    for i in range(n):
        for j in range(n):
            c = (0.5 * (us[i] + us[i + 1]), 0.5 * (vs[j] + vs[j + 1]))
            if not trim_contains(c, patch.loops)[0]:
                continue
            p00, p10, p01, p11 = grid[i, j], grid[i + 1, j], grid[i, j + 1], grid[i + 1, j + 1]
            # counterclockwise in (u, v), so the triangle normal follows S_u x S_v
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    return TriangleSoup(np.array(tris, dtype=float).reshape(-1, 3, 3))


def tessellate_model(model, n: int) -> TriangleSoup:
    return TriangleSoup.concat(tessellate_trimmed(p, n) for p in model.patches)
