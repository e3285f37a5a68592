import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exradon.geometry import (AffineMap, ConvexRegion, DegenerateMapError, Direction, EmptyRegionError,
                              ExteriorScanSet, Line, NotNormalizableError, classify_region, epsilon_offset,
                              halfstrip, line_intersects, map_region, normalizing_affine, parse_region,
                              polyhedral, quadrant, transport_line, wedge)

SQ = math.sqrt(0.5)


# -- line_intersects ------------------------------------------------------------

def test_quadrant_misses_line_below():
    line = Line(Direction.from_vector((-SQ, -SQ)), SQ)
    assert not line_intersects(quadrant(), line)


def test_quadrant_meets_line_through_axes_points():
    line = Line(Direction.from_vector((SQ, SQ)), SQ)
    assert line_intersects(quadrant(), line)


def test_tangent_line_counts_as_meeting():
    assert line_intersects(quadrant(), Line.at(0.0, 0.0))


def test_empty_region_meets_nothing():
    assert not line_intersects(None, Line.at(0.3, 0.1))


def test_line_interval_endpoints_lie_in_region():
    line = Line(Direction.from_vector((SQ, SQ)), SQ)
    lo, hi = quadrant().line_interval(line)
    for u in (lo, hi):
        x = line.points(u)
        assert quadrant().contains(x, tol=1e-12)


# -- classification -------------------------------------------------------------

def test_quadrant_is_hyperbolic():
    assert classify_region(quadrant()) == "hyperbolic"


def test_halfstrip_is_parabolic():
    strip = ConvexRegion([[-1, 0], [0, -1], [0, 1]], [0, 0, 1])
    assert classify_region(strip) == "parabolic"


def test_halfplane_contains_line():
    assert classify_region(ConvexRegion([[-1, 0]], [0])) == "contains-line"


def test_triangle_is_compact():
    tri = ConvexRegion([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])
    assert classify_region(tri) == "compact"


def test_empty_intersection_raises():
    with pytest.raises(EmptyRegionError):
        classify_region(ConvexRegion([[1, 0], [-1, 0]], [-1, -1]))


def test_presets_classify():
    assert classify_region(wedge(67.5, 180)) == "hyperbolic"
    assert classify_region(halfstrip(1.0, 180)) == "parabolic"
    assert classify_region(parse_region("polyhedral([[180, 0], [270, 0]])")) == "hyperbolic"


def _ray_shoot_class(region, n=720):
    # Independent oracle: directions d with <n_i, d> <= 0 for all i, sampled on the circle.
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ok = np.all(d @ region.normals.T <= 1e-12, axis=1)
    if not ok.any():
        return "compact"
    hits = ang[ok]
    for a in hits:
        if np.any(np.abs(np.angle(np.exp(1j * (hits - a - np.pi)))) < 1e-9):
            return "contains-line"
    return "parabolic" if ok.sum() == 1 else "hyperbolic"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 359), st.integers(1, 89))
def test_classification_matches_ray_shooting(axis, half):
    # Wedges use integer degrees so the recession rays lie on the sampled circle.
    k = wedge(float(half), float(axis))
    assert classify_region(k) == _ray_shoot_class(k) == "hyperbolic"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 359))
def test_halfstrip_classification_matches_ray_shooting(axis):
    k = halfstrip(1.0, float(axis))
    assert classify_region(k) == _ray_shoot_class(k) == "parabolic"


# -- epsilon_offset ---------------------------------------------------------------

def test_quadrant_offset_half():
    k = epsilon_offset(quadrant(), 0.5)
    np.testing.assert_allclose(k.offsets, [0.5, 0.5])
    assert k.contains([-0.5, -0.5])
    assert not k.contains([-0.51, 0.0])


def test_zero_offset_is_identity():
    k = wedge(30, 45)
    np.testing.assert_allclose(epsilon_offset(k, 0.0).offsets, k.offsets)


def test_strip_offset_width_matches_point_distance_sampling():
    eps = 0.3
    strip = ConvexRegion([[-1, 0], [0, -1], [0, 1]], [0, 0, 1])
    k = epsilon_offset(strip, eps)
    # Brute force: sample a vertical segment at x=5 far from the corners and
    # keep the points within eps of the original strip.
    ys = np.linspace(-1, 2, 30001)
    dist = np.maximum(0.0, np.maximum(-ys, ys - 1.0))
    inside = ys[dist <= eps]
    ours = ys[k.contains(np.stack([np.full_like(ys, 5.0), ys], 1))]
    assert abs((inside.max() - inside.min()) - (1 + 2 * eps)) < 1e-3
    assert abs((ours.max() - ours.min()) - (1 + 2 * eps)) < 1e-3


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(-5, 5), st.floats(-5, 5))
def test_offset_is_monotone(e1, e2, x, y):
    lo, hi = sorted((e1, e2))
    k = wedge(40, 100)
    if k.contains([x, y]):
        assert epsilon_offset(k, lo).contains([x, y])
    if epsilon_offset(k, lo).contains([x, y]):
        assert epsilon_offset(k, hi).contains([x, y])


def test_negative_offset_rejected():
    with pytest.raises(ValueError):
        epsilon_offset(quadrant(), -0.1)


# -- normalizing_affine --------------------------------------------------------

def test_normalizing_reflected_wedge_is_rotation_by_pi():
    k = wedge(45, 180)
    a = normalizing_affine(k)
    np.testing.assert_allclose(a.linear, [[-1, 0], [0, -1]], atol=1e-12)
    for t in np.linspace(0, 10, 11):
        hx = a(np.array([-t, 0.0]))
        assert abs(hx[1]) < 1e-12 and hx[0] >= -1e-12
    for t in np.linspace(-10, 10, 11):
        sx = a(np.array([0.0, t]))
        assert abs(sx[0]) < 1e-12


def test_normalized_region_is_identity():
    # Half-plane x1 >= 0 cut to a parabolic set along the positive x1 axis.
    k = ConvexRegion([[-1, 0], [0, 1], [0, -1]], [0, 1, 1])
    a = normalizing_affine(k)
    np.testing.assert_allclose(a.linear, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(a.translation, 0, atol=1e-12)


def test_quadrant_with_x_axis_is_nondegenerate():
    a = normalizing_affine(quadrant(), choice="h")
    assert abs(a.det) > 0.5
    for t in np.linspace(0, 5, 6):
        y = a(np.array([t, 0.0]))
        assert abs(y[1]) < 1e-12 and y[0] >= -1e-12


def test_compact_region_not_normalizable():
    tri = ConvexRegion([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])
    with pytest.raises(NotNormalizableError):
        normalizing_affine(tri)


# -- transport_line ---------------------------------------------------------------

def test_identity_keeps_line():
    line = Line.at(0.7, 1.3)
    out = transport_line(AffineMap.identity(), line)
    assert math.isclose(out.theta, line.theta) and math.isclose(out.p, line.p)


def test_rotation_shifts_angle():
    line = Line.at(0.2, 1.5)
    out = transport_line(AffineMap.rotation(0.9), line)
    assert math.isclose(out.theta, 1.1, abs_tol=1e-12) and math.isclose(out.p, 1.5, abs_tol=1e-12)


def test_scaling_moves_vertical_line():
    out = transport_line(AffineMap(np.diag([2.0, 1.0])), Line.at(0.0, 1.0))
    assert math.isclose(out.theta, 0.0, abs_tol=1e-12) and math.isclose(out.p, 2.0, abs_tol=1e-12)


def test_singular_map_rejected():
    with pytest.raises(DegenerateMapError):
        AffineMap(np.array([[1.0, 2.0], [2.0, 4.0]]))


_maps = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
                  st.floats(-3, 3), st.floats(-3, 3)).filter(lambda m: abs(m[0] * m[3] - m[1] * m[2]) > 0.2)


def _amap(m):
    return AffineMap(np.array([[m[0], m[1]], [m[2], m[3]]]), np.array([m[4], m[5]]))


@settings(max_examples=60, deadline=None)
@given(_maps, _maps, st.floats(0, 2 * math.pi), st.floats(-4, 4))
def test_transport_composes(m1, m2, theta, p):
    a, b = _amap(m1), _amap(m2)
    line = Line.at(theta, p)
    one = transport_line(a @ b, line)
    two = transport_line(a, transport_line(b, line))
    assert math.isclose(one.p, two.p, abs_tol=1e-8)
    assert abs(math.remainder(one.theta - two.theta, 2 * math.pi)) < 1e-8


@settings(max_examples=60, deadline=None)
@given(_maps, st.floats(0, 2 * math.pi), st.floats(-4, 4), st.floats(-5, 5))
def test_transported_points_stay_on_image(m, theta, p, u):
    a = _amap(m)
    line = Line.at(theta, p)
    img = transport_line(a, line)
    y = a(line.points(u))
    assert abs(y @ img.omega - img.p) < 1e-8 * max(1.0, np.linalg.norm(y))


@settings(max_examples=40, deadline=None)
@given(_maps, st.floats(0, 2 * math.pi), st.floats(-6, 6))
def test_map_region_preserves_incidence(m, theta, p):
    a = _amap(m)
    k = wedge(30, 200)
    line = Line.at(theta, p)
    assert line_intersects(k, line) == line_intersects(map_region(a, k), transport_line(a, line))


@settings(max_examples=60, deadline=None)
@given(st.floats(-10, 10), st.floats(-6, 6))
def test_reversed_line_is_same_point_set(theta, p):
    line = Line.at(theta, p)
    rev = line.reversed()
    x = line.points(np.array([-2.0, 0.5, 3.0]))
    np.testing.assert_allclose(x @ rev.omega, rev.p, atol=1e-12)
    assert line_intersects(quadrant(), line) == line_intersects(quadrant(), rev)


def test_scan_set_membership():
    scan = ExteriorScanSet.around(0.0, 0.2, 1.0)
    assert scan.contains(Line.at(0.1, 2.0))
    assert not scan.contains(Line.at(0.1, 0.5))
    assert not scan.contains(Line.at(0.5, 2.0))
    assert all(-0.2 < t < 0.2 for t in scan.sample_thetas(5))


def test_region_parsing():
    assert parse_region(None) is None
    assert parse_region("quadrant").contains([1, 1])
    assert parse_region("wedge(67.5, 180)").contains([-5, 0])
    assert parse_region("halfstrip(1, 180)").contains([-3, 0.4])
    assert polyhedral([[180, 0], [270, 0]]).contains([1, 1])
    with pytest.raises(ValueError):
        parse_region("hexagon(3)")
