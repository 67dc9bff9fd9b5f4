import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from trimgwn.kernel import (
    Aabb,
    DomainError,
    NurbsCurve,
    NurbsPatch,
    Obb,
    TrimmedPatch,
    bernstein,
    circle_arc,
    circle_loop,
    extract_bezier,
    gauss_legendre,
    random_rotation,
    rotation_to_z,
)
from trimgwn.shapes import random_bicubic, sphere_patches, torus_patches


def test_bernstein_partition_and_derivative():
    s = np.linspace(-0.3, 1.4, 23)
    for n in range(0, 6):
        b, d = bernstein(n, s)
        assert np.allclose(b.sum(axis=1), 1.0, atol=1e-13)
        h = 1e-6
        fd = (bernstein(n, s + h)[0] - bernstein(n, s - h)[0]) / (2 * h)
        assert np.allclose(d, fd, atol=1e-7)


def test_nonrational_curve_matches_scipy():
    rng = np.random.default_rng(3)
    knots = np.r_[[0.0] * 4, 0.2, 0.5, 0.5, 0.8, [1.0] * 4]
    ctrl = rng.normal(size=(8, 2))
    c = NurbsCurve(3, knots, ctrl, np.ones(8))
    ref = BSpline(knots, ctrl, 3)
    t = np.linspace(0, 1, 41)
    p, d = c.evaluate(t)
    assert np.allclose(p, ref(t), atol=1e-13)
    assert np.allclose(d, ref.derivative()(t), atol=1e-11)


def test_rational_curve_matches_homogeneous_scipy():
    rng = np.random.default_rng(4)
    knots = np.r_[[0.0] * 3, 0.3, 0.6, [1.0] * 3]
    ctrl = rng.normal(size=(5, 2))
    w = rng.uniform(0.5, 2.0, 5)
    c = NurbsCurve(2, knots, ctrl, w)
    num = BSpline(knots, ctrl * w[:, None], 2)
    den = BSpline(knots, w, 2)
    t = np.linspace(0, 1, 17)
    p, _ = c.evaluate(t)
    assert np.allclose(p, num(t) / den(t)[:, None], atol=1e-13)


def test_curve_domain_error():
    c = NurbsCurve.line((0, 0), (1, 1))
    with pytest.raises(DomainError):
        c.evaluate(1.5)


def test_extraction_reproduces_curve():
    rng = np.random.default_rng(5)
    knots = np.r_[[0.0] * 4, 0.25, 0.7, [1.0] * 4]
    ctrl = rng.normal(size=(6, 2))
    c = NurbsCurve(3, knots, ctrl, rng.uniform(0.5, 2, 6))
    assert len(c.segments) == 3
    for seg, (a, b) in zip(c.segments, zip(c.breaks[:-1], c.breaks[1:])):
        s = np.linspace(0, 1, 7)
        p_seg, _ = seg.evaluate(s)
        p_full, _ = c.evaluate(a + (b - a) * s)
        assert np.allclose(p_seg, p_full, atol=1e-13)
    pieces, breaks = extract_bezier(3, knots, ctrl)
    assert len(pieces) == 3 and np.allclose(breaks, [0, 0.25, 0.7, 1])


def test_circle_arcs_are_exact():
    for a0, a1 in [(0.0, 2 * math.pi), (0.3, 1.1), (-2.0, 2.5)]:
        for arc in circle_arc((0.2, -0.1), 0.7, a0, a1):
            p, _ = arc.evaluate(np.linspace(*arc.domain, 11))
            assert np.allclose(np.hypot(p[:, 0] - 0.2, p[:, 1] + 0.1), 0.7, atol=1e-14)


def test_circle_loop_orientation():
    ccw = circle_loop((0, 0), 1.0, 1)
    p, d = ccw[0].evaluate(np.array([0.5]))
    assert p[0][0] * d[0][1] - p[0][1] * d[0][0] > 0
    cw = circle_loop((0, 0), 1.0, -1)
    p, d = cw[0].evaluate(np.array([0.5]))
    assert p[0][0] * d[0][1] - p[0][1] * d[0][0] < 0


def test_patch_matches_tensor_scipy():
    rng = np.random.default_rng(6)
    ku = np.r_[[0.0] * 4, 0.4, [1.0] * 4]
    kv = np.r_[[0.0] * 3, 0.5, [1.0] * 3]
    ctrl = rng.normal(size=(5, 4, 3))
    s = NurbsPatch((3, 2), ku, kv, ctrl, np.ones((5, 4)))
    u = rng.uniform(0, 1, 20)
    v = rng.uniform(0, 1, 20)
    p, su, sv = s.evaluate(u, v)
    for k in range(20):
        rows = BSpline(ku, ctrl, 3)(u[k])  # (4, 3)
        ref = BSpline(kv, rows, 2)(v[k])
        assert np.allclose(p[k], ref, atol=1e-13)
        drows = BSpline(ku, ctrl, 3).derivative()(u[k])
        assert np.allclose(su[k], BSpline(kv, drows, 2)(v[k]), atol=1e-11)
        assert np.allclose(sv[k], BSpline(kv, rows, 2).derivative()(v[k]), atol=1e-11)


def test_patch_domain_error_and_extension():
    s = random_bicubic(np.random.default_rng(1))
    with pytest.raises(DomainError):
        s.evaluate(1.2, 0.5)
    p, _, _ = s.evaluate(1.05, 0.5, slack=0.1)
    assert np.all(np.isfinite(p))


def test_split_u_preserves_geometry():
    rng = np.random.default_rng(7)
    s = random_bicubic(rng, spans=2, rational=True)
    a, b = s.split_u(0.3)
    assert a.domain[:2] == (0.0, 0.3) and b.domain[:2] == (0.3, 1.0)
    v = rng.uniform(0, 1, 10)
    for half, lo, hi in ((a, 0.0, 0.3), (b, 0.3, 1.0)):
        u = rng.uniform(lo, hi, 10)
        assert np.allclose(half.evaluate(u, v)[0], s.evaluate(u, v)[0], atol=1e-13)


def test_sphere_patches_are_exact_and_outward():
    rng = np.random.default_rng(8)
    for s in sphere_patches():
        u, v = rng.uniform(0, 1, (2, 50))
        p, su, sv = s.evaluate(u, v)
        assert np.allclose(np.linalg.norm(p, axis=1), 1.0, atol=1e-14)
        n = np.cross(su, sv)
        assert np.all(np.einsum("ij,ij->i", n, p) > 0)
        assert np.all(s.weights > 0)


def test_torus_is_on_torus_and_outward():
    rng = np.random.default_rng(9)
    for s in torus_patches(1.0, 0.4):
        u, v = rng.uniform(0, 1, (2, 30))
        p, su, sv = s.evaluate(u, v)
        rho = np.hypot(p[:, 0], p[:, 1])
        assert np.allclose((rho - 1.0) ** 2 + p[:, 2] ** 2, 0.16, atol=1e-13)
        center = np.stack([p[:, 0] / rho, p[:, 1] / rho, np.zeros_like(rho)], axis=1)
        assert np.all(np.einsum("ij,ij->i", np.cross(su, sv), p - center) > 0)


def test_rotation_to_z():
    rng = np.random.default_rng(10)
    for _ in range(20):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        r = rotation_to_z(d)
        assert np.allclose(r @ d, [0, 0, 1], atol=1e-15)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-15)
        assert np.isclose(np.linalg.det(r), 1.0)
    assert np.array_equal(rotation_to_z([0.0, 0.0, 1.0]), np.eye(3))
    r = random_rotation(rng)
    assert np.allclose(r @ r.T, np.eye(3)) and np.isclose(np.linalg.det(r), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_bounding_volumes_contain_patch(seed):
    rng = np.random.default_rng(seed)
    patch = TrimmedPatch.untrimmed(random_bicubic(rng, rational=True))
    u, v = rng.uniform(0, 1, (2, 40))
    p, _, _ = patch.evaluate(u, v)
    assert np.all(patch.aabb.contains(p, pad=1e-12))
    assert np.all(patch.obb.contains(p, pad=1e-12))


def test_aabb_and_obb_basics():
    pts = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [2, 1, 3.0]])
    box = Aabb.of(pts)
    assert np.isclose(box.diagonal, math.sqrt(14))
    assert box.contains(np.array([[1, 0.5, 1.0]]))[0]
    obb = Obb.of(pts)
    assert np.all(obb.contains(pts, pad=1e-12))
    assert np.isclose(np.linalg.det(obb.axes), 1.0)


def test_gauss_legendre_exactness():
    x, w = gauss_legendre(15)
    assert np.isclose(w.sum(), 1.0)
    assert np.isclose(w @ x**29, 1 / 30, rtol=1e-13)


def test_mean_normal_flat_and_degenerate():
    from trimgwn.shapes import flat_square

    d, degenerate = flat_square().mean_normal()
    assert not degenerate and np.allclose(d, [0, 0, 1])
    # a patch folded back onto itself has a vanishing mean normal
    ctrl = np.array([[[0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]], [[0, 0, 0], [0, 1, 0]]], dtype=float)
    folded = TrimmedPatch.untrimmed(NurbsPatch.bezier(ctrl))
    d, degenerate = folded.mean_normal(seed=3)
    assert degenerate and np.isclose(np.linalg.norm(d), 1.0)
    assert np.allclose(d, folded.mean_normal(seed=3)[0])
