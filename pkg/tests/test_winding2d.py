import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimgwn.kernel import NurbsCurve, circle_arc, circle_loop, domain_loop
from trimgwn.winding2d import (
    clip_loops_to_circle,
    gwn2d,
    loops_enter_disk,
    segment_winding,
    split_loops_at_u,
    trim_contains,
)


def polygon(pts):
    return [NurbsCurve.line(a, b) for a, b in zip(pts, pts[1:] + pts[:1])]


def crossing_parity(q, pts):
    """Independent even-odd ray cast (oracle for simple polygons)."""
    x, y = q
    inside = False
    for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
        if (y0 > y) != (y1 > y):
            if x < x0 + (y - y0) * (x1 - x0) / (y1 - y0):
                inside = not inside
    return inside


def test_segment_winding_quarter():
    assert math.isclose(segment_winding((1, 0), (0, 1)), 0.25)
    assert math.isclose(segment_winding((0, 1), (1, 0)), -0.25)


def test_circle_inside_outside_and_on():
    loop = circle_loop((0, 0), 1.0, 1)
    assert gwn2d((0.3, -0.2), loop).value == pytest.approx(1.0, abs=1e-12)
    assert gwn2d((1.5, 0.0), loop).value == pytest.approx(0.0, abs=1e-12)
    on = gwn2d((1.0, 0.0), loop)
    assert on.coincident and on.value == pytest.approx(0.5, abs=1e-9)
    cw = circle_loop((0, 0), 1.0, -1)
    assert gwn2d((0.0, 0.0), cw).value == pytest.approx(-1.0, abs=1e-12)


def test_open_curve_half_turn():
    # half circle seen from its center subtends half a turn
    arcs = circle_arc((0, 0), 1.0, 0.0, math.pi)
    assert gwn2d((0, 0), arcs).value == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_star_polygon_matches_ray_cast(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(3, 12))
    ang = np.sort(rng.uniform(0, 2 * math.pi, k))
    rad = rng.uniform(0.3, 1.0, k)
    pts = [(float(r * math.cos(a)), float(r * math.sin(a))) for r, a in zip(rad, ang)]
    loops = polygon(pts)
    for q in rng.uniform(-1.1, 1.1, (20, 2)):
        w = gwn2d(q, loops)
        if w.coincident:
            continue
        assert abs(w.value - round(w.value)) < 1e-9
        assert (round(w.value) != 0) == crossing_parity(tuple(q), pts)


def test_rational_loop_winding_is_integer():
    rng = np.random.default_rng(2)
    loop = circle_loop((0.1, 0.2), 0.5, 1)
    wiggled = []
    for c in loop:
        ctrl = c.control.copy()
        ctrl[1] += 0.05 * rng.normal(size=2)
        wiggled.append(NurbsCurve(c.degree, c.knots, ctrl, c.weights))
    for q in rng.uniform(-0.5, 0.7, (50, 2)):
        w = gwn2d(q, wiggled)
        assert abs(w.value - round(w.value)) < 1e-10


def test_trim_contains_nonzero_rule():
    loops = domain_loop(0, 1, 0, 1) + circle_loop((0.5, 0.5), 0.2, -1)
    assert trim_contains((0.1, 0.1), loops) == (True, False)
    assert trim_contains((0.5, 0.5), loops) == (False, False)
    assert trim_contains((0.5, 0.7), loops)[1]


def test_loops_enter_disk():
    loops = domain_loop(0, 1, 0, 1)
    assert loops_enter_disk(loops, (0.5, 0.05), 0.06)
    assert not loops_enter_disk(loops, (0.5, 0.5), 0.3)
    arc = circle_loop((0, 0), 1.0, 1)
    assert loops_enter_disk(arc, (0.0, 0.0), 1.0 + 1e-9)
    assert not loops_enter_disk(arc, (0.0, 0.0), 0.99)


def _additivity(original, clip, rng, box=(-0.2, 1.2)):
    for q in rng.uniform(*box, (200, 2)):
        a = gwn2d(q, original)
        b = gwn2d(q, clip.outer)
        c = gwn2d(q, clip.inner)
        if a.coincident or b.coincident or c.coincident:
            continue
        assert b.value + c.value == pytest.approx(a.value, abs=1e-9)
        assert abs(b.value - round(b.value)) < 1e-9 and abs(c.value - round(c.value)) < 1e-9


def test_clip_interior_disk():
    loops = domain_loop(0, 1, 0, 1)
    clip = clip_loops_to_circle(loops, (0.5, 0.5), 0.1)
    assert len(clip.outer) == 8 and len(clip.inner) == 4
    assert gwn2d((0.5, 0.5), clip.inner).value == pytest.approx(1.0)
    assert gwn2d((0.5, 0.5), clip.outer).value == pytest.approx(0.0, abs=1e-12)
    _additivity(loops, clip, np.random.default_rng(0))


def test_clip_across_boundary_keeps_uncut_keys():
    loops = domain_loop(0, 1, 0, 1)
    keys = [("p", k) for k in range(4)]
    clip = clip_loops_to_circle(loops, (0.5, 0.02), 0.1, keys)
    assert ("p", 1) in clip.outer_keys and ("p", 2) in clip.outer_keys and ("p", 3) in clip.outer_keys
    assert ("p", 0) not in clip.outer_keys + clip.inner_keys
    assert len(clip.crossings) == 2
    _additivity(loops, clip, np.random.default_rng(1))


def test_clip_disk_outside_domain_corner():
    loops = domain_loop(0, 1, 0, 1)
    clip = clip_loops_to_circle(loops, (-0.01, -0.01), 0.05)
    _additivity(loops, clip, np.random.default_rng(2), box=(-0.1, 0.2))


def test_clip_holed_region():
    loops = domain_loop(0, 1, 0, 1) + circle_loop((0.5, 0.5), 0.2, -1)
    rng = np.random.default_rng(3)
    for center, rad in [((0.5, 0.72), 0.05), ((0.5, 0.5), 0.3), ((0.1, 0.1), 0.05), ((0.5, 0.5), 0.1)]:
        _additivity(loops, clip_loops_to_circle(loops, center, rad), rng)


def test_split_loops_at_u_additive():
    loops = domain_loop(0, 1, 0, 1) + circle_loop((0.5, 0.5), 0.2, -1)
    left, right, _, _ = split_loops_at_u(loops, 0.45)
    rng = np.random.default_rng(4)
    for q in rng.uniform(-0.1, 1.1, (200, 2)):
        a = gwn2d(q, loops)
        b, c = gwn2d(q, left), gwn2d(q, right)
        if a.coincident or b.coincident or c.coincident:
            continue
        assert b.value + c.value == pytest.approx(a.value, abs=1e-9)
        if round(b.value):
            assert q[0] < 0.45
