import numpy as np
import pytest

from trimgwn.intersect import (
    CUSP,
    INTERIOR,
    NEAR_BOUNDARY,
    TANGENT,
    UnresolvedIntersection,
    dedup_intersections,
    garp,
    is_approximately_bilinear,
    line_patch_intersections,
)
from trimgwn.kernel import BezierPatch, homogenize
from trimgwn.shapes import flat_square, flat_square_with_hole, sphere_model, triangle_patch


def test_garp_flat_patch():
    hits = garp([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], (0.3, 0.7, -1.0), (0, 0, 1))
    assert len(hits) == 1
    z, u, v = hits[0]
    assert (z, u, v) == pytest.approx((1.0, 0.3, 0.7), abs=1e-15)


def test_garp_saddle_matches_direct_solve():
    # S(u, v) = (u, v, uv); tilted line solved independently as a polynomial in t
    corners = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 1)]
    o = np.array([0.2, 0.1, -1.0])
    d = np.array([0.3, 0.4, 1.0])
    d /= np.linalg.norm(d)
    # (o_x + t d_x)(o_y + t d_y) = o_z + t d_z
    coeffs = [d[0] * d[1], o[0] * d[1] + o[1] * d[0] - d[2], o[0] * o[1] - o[2]]
    roots = [t.real for t in np.roots(coeffs) if abs(t.imag) < 1e-12]
    expect = sorted(t for t in roots if 0 <= o[0] + t * d[0] <= 1 and 0 <= o[1] + t * d[1] <= 1)
    got = sorted(z for z, _, _ in garp(corners, o, d))
    assert got == pytest.approx(expect, abs=1e-12)


def test_garp_miss():
    assert garp([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], (2.0, 2.0, -1.0), (0, 0, 1)) == []


def test_garp_line_in_plane_is_unresolved():
    with pytest.raises(UnresolvedIntersection):
        garp([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], (0.5, 0.5, 0.0), (1, 0, 0))


def test_bilinear_flatness_test():
    h = np.zeros((3, 3, 3))
    g = np.linspace(0, 1, 3)
    h[..., 0], h[..., 1] = np.meshgrid(g, g, indexing="ij")
    assert is_approximately_bilinear(BezierPatch(homogenize(h, np.ones((3, 3)))), 1e-12)
    h[1, 1, 2] = 0.1
    assert not is_approximately_bilinear(BezierPatch(homogenize(h, np.ones((3, 3)))), 1e-3)


def test_dedup():
    raw = [(0.5, 0.5), (0.5 + 1e-9, 0.5), (0.2, 0.3)]
    assert len(dedup_intersections(raw, 1e-6)) == 2


def test_flat_square_interior_and_near_boundary():
    sq = flat_square()
    (rec,) = line_patch_intersections(sq, (0.3, 0.7, -1.0), (0, 0, 1))
    assert rec.kind == INTERIOR and rec.z0 == pytest.approx(1.0) and rec.uv == pytest.approx((0.3, 0.7))
    (rec,) = line_patch_intersections(sq, (0.3, 0.005, 2.0), (0, 0, 1))
    assert rec.kind == NEAR_BOUNDARY and rec.z0 == pytest.approx(-2.0)
    assert line_patch_intersections(sq, (3.0, 3.0, 1.0), (0, 0, 1)) == []


def test_trimmed_hole_is_skipped():
    holed = flat_square_with_hole()
    assert line_patch_intersections(holed, (0.5, 0.5, 1.0), (0, 0, 1)) == []
    (rec,) = line_patch_intersections(holed, (0.5, 0.705, 1.0), (0, 0, 1))
    assert rec.kind == NEAR_BOUNDARY


def test_sphere_line_through_center():
    rng = np.random.default_rng(0)
    model = sphere_model()
    for _ in range(10):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        z0s = []
        for p in model.patches:
            z0s += [r.z0 for r in line_patch_intersections(p, np.zeros(3), d) if r.kind in (INTERIOR, NEAR_BOUNDARY)]
        z0s = sorted(z0s)
        # hits on a shared edge may be reported by both neighbours
        assert z0s[0] == pytest.approx(-1.0, abs=1e-12) and z0s[-1] == pytest.approx(1.0, abs=1e-12)


def test_tangent_and_cusp_classification():
    # crossing the plane at a very shallow angle (|n . d| < 1e-3)
    d = np.array([1.0, 0.0, 5e-4])
    (rec,) = line_patch_intersections(flat_square(), (0.5, 0.5, 0.0), d / np.linalg.norm(d))
    assert rec.kind == TANGENT
    d = np.array([1.0, 0.0, 5e-3])
    (rec,) = line_patch_intersections(flat_square(), (0.5, 0.5, 0.0), d / np.linalg.norm(d))
    assert rec.kind == INTERIOR
    tri = triangle_patch((0, 0, 0), (1, 0, 0), (0, 1, 0))
    (rec,) = line_patch_intersections(tri, (0.0, 1.0, -1.0), (0, 0, 1))
    assert rec.kind == CUSP


def test_records_sorted_by_z0():
    model = sphere_model()
    top = model.patches[0]
    d = np.array([0.0, 0.2, 1.0])
    d /= np.linalg.norm(d)
    recs = line_patch_intersections(top.with_loops(top.loops, top.curve_keys), (0.0, -0.3, 0.0), d)
    assert [r.z0 for r in recs] == sorted(r.z0 for r in recs)
