"""Domain predicates and the gridded polyline distance."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracrig.geometry import (
    INFINITE,
    BallSpec,
    CylinderSpec,
    TracePolyline,
    load_trace,
    save_trace,
)


def brute_distance(vertices, points):
    """Reference minimum point-to-segment distance, straight numpy."""
    a = vertices[:-1][None, :, :]
    b = vertices[1:][None, :, :]
    p = points[:, None, :]
    ab = b - a
    denom = np.maximum(np.sum(ab * ab, axis=2), 1e-300)
    tt = np.clip(np.sum((p - a) * ab, axis=2) / denom, 0.0, 1.0)
    closest = a + tt[:, :, None] * ab
    return np.sqrt(np.min(np.sum((p - closest) ** 2, axis=2), axis=1))


def random_trace(rng, n, scale=1.0):
    steps = rng.normal(scale=scale * 0.05, size=(n - 1, 3))
    return TracePolyline(np.vstack([np.zeros(3), np.cumsum(steps, axis=0)]),
                        1e-4)


# ---------------------------------------------------------------- domains


def test_cylinder_signed_distance_hand_cases():
    # min(lateral, axial): exact for interior points, where it serves as
    # the sphere-jump radius; outside it only needs the right sign
    c = CylinderSpec(1.0, 4.0)
    pts = np.array([
        [0.0, 0.0, 0.0],    # centre: caps at 2, wall at 1
        [1.5, 0.5, 0.0],    # inside, closer to the cap
        [0.0, 1.0, 0.0],    # on the lateral wall
        [3.0, 0.0, 0.0],    # beyond the cap, on the axis
        [0.0, 2.0, 0.0],    # radially outside
        [3.0, 2.0, 0.0],    # outside both ways
    ])
    d = c.boundary_distance(pts)
    assert d == pytest.approx([1.0, 0.5, 0.0, -1.0, -1.0, -1.0], abs=1e-15)
    inside = c.contains(pts)
    assert list(inside) == [True, True, False, False, False, False]


def test_cylinder_interior_distance_is_exact():
    c = CylinderSpec(1.0, 4.0)
    rng = np.random.default_rng(2)
    pts = rng.uniform([-2.0, -1.0, -1.0], [2.0, 1.0, 1.0], size=(500, 3))
    pts = pts[c.contains(pts)]
    d = c.boundary_distance(pts)
    ref = np.minimum(1.0 - np.hypot(pts[:, 1], pts[:, 2]),
                     2.0 - np.abs(pts[:, 0]))
    assert np.max(np.abs(d - ref)) < 1e-15


def test_infinite_cylinder_ignores_caps():
    c = CylinderSpec(1.0, INFINITE)
    assert not c.is_finite
    pts = np.array([[1e6, 0.0, 0.0], [1e6, 0.5, 0.0], [0.0, 3.0, 0.0]])
    assert c.boundary_distance(pts) == pytest.approx([1.0, 0.5, -2.0])
    assert list(c.contains(pts)) == [True, True, False]
    assert c.volume == math.inf


def test_ball_spec():
    b = BallSpec(2.0, center=(1.0, 0.0, 0.0))
    assert b.volume == pytest.approx(4.0 / 3.0 * math.pi * 8.0)
    pts = np.array([[1.0, 0.0, 0.0], [1.0, 2.0, 0.0], [4.0, 0.0, 0.0]])
    assert b.boundary_distance(pts) == pytest.approx([2.0, 0.0, -1.0])
    assert list(b.contains(pts)) == [True, False, False]


def test_domain_validation():
    with pytest.raises(ValueError):
        CylinderSpec(-1.0, 2.0)
    with pytest.raises(ValueError):
        CylinderSpec(1.0, 0.0)
    with pytest.raises(ValueError):
        BallSpec(0.0)


def test_boundary_points_count_as_outside():
    c = CylinderSpec(1.0, 2.0)
    on_wall = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    assert not c.contains(on_wall).any()
    b = BallSpec(1.0)
    assert not b.contains(np.array([[1.0, 0.0, 0.0]])).any()


# ----------------------------------------------------------- trace index


def test_grid_distance_equals_brute_force():
    rng = np.random.default_rng(11)
    trace = random_trace(rng, 400)
    lo, hi = trace.bbox()
    span = float(np.max(hi - lo))
    near = rng.uniform(lo - 0.05 * span, hi + 0.05 * span, size=(150, 3))
    far = rng.uniform(lo - 4.0 * span, hi + 4.0 * span, size=(50, 3))
    on_vertex = trace.vertices[rng.integers(0, len(trace.vertices), 20)]
    pts = np.vstack([near, far, on_vertex])
    got = trace.distance(pts)
    ref = brute_distance(trace.vertices, pts)
    assert np.max(np.abs(got - ref)) <= 1e-12
    assert got[-20:].max() == 0.0


def test_single_point_query_returns_scalar():
    trace = random_trace(np.random.default_rng(3), 50)
    d = trace.distance(np.array([0.3, 0.2, 0.1]))
    assert isinstance(d, float)
    batch = trace.distance(np.array([[0.3, 0.2, 0.1]]))
    assert d == batch[0]


def test_degenerate_traces():
    single = TracePolyline(np.array([[0.5, 0.0, 0.0]]), 1e-4)
    assert single.n_segments == 0
    assert single.distance(np.array([1.5, 0.0, 0.0])) == pytest.approx(1.0)
    repeated = TracePolyline(np.tile([[1.0, 2.0, 3.0]], (5, 1)), 1e-4)
    d = repeated.distance(np.array([[1.0, 2.0, 4.0]]))
    assert d[0] == pytest.approx(1.0, abs=1e-15)


def test_trace_validation():
    with pytest.raises(ValueError):
        TracePolyline(np.zeros((0, 3)), 1e-4)
    with pytest.raises(ValueError):
        TracePolyline(np.zeros((4, 2)), 1e-4)
    with pytest.raises(ValueError):
        TracePolyline(np.zeros((4, 3)), -1.0)
    bad = np.zeros((4, 3))
    bad[2, 1] = np.nan
    with pytest.raises(ValueError):
        TracePolyline(bad, 1e-4)


def test_trace_geometry_summaries():
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 2.0, 0.0]])
    t = TracePolyline(v, 1e-4)
    assert t.n_segments == 2
    lo, hi = t.bbox()
    assert np.array_equal(lo, [0.0, 0.0, 0.0])
    assert np.array_equal(hi, [1.0, 2.0, 0.0])
    assert t.circumradius() == pytest.approx(math.sqrt(5.0))
    assert t.axial_extent() == (0.0, 1.0)


def test_coarse_tier_brackets_exact_distance():
    """The decimated-vertex scan used inside compiled kernels must give a
    certified bracket: coarse - gap <= exact <= coarse."""
    rng = np.random.default_rng(7)
    for n in (3, 50, 2000, 6000):
        trace = random_trace(rng, n)
        (*_, coarse, gap) = trace.index_arrays()
        pts = rng.normal(scale=2.0, size=(80, 3))
        exact = trace.distance(pts)
        dc = np.sqrt(np.min(np.sum(
            (pts[:, None, :] - coarse[None, :, :]) ** 2, axis=2), axis=1))
        assert np.all(exact <= dc + 1e-12)
        assert np.all(dc - gap <= exact + 1e-12)
        assert len(coarse) <= 385


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_grid_distance_property(data):
    seed = data.draw(st.integers(0, 2 ** 31))
    n = data.draw(st.integers(2, 60))
    rng = np.random.default_rng(seed)
    trace = random_trace(rng, n, scale=data.draw(st.floats(0.1, 10.0)))
    pts = rng.normal(scale=3.0, size=(20, 3))
    got = trace.distance(pts)
    ref = brute_distance(trace.vertices, pts)
    assert np.max(np.abs(got - ref)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 2.0))
def test_distance_is_lipschitz(seed, shift):
    rng = np.random.default_rng(seed)
    trace = random_trace(rng, 30)
    p = rng.normal(size=(10, 3))
    q = p + shift * rng.normal(size=(10, 3)) / math.sqrt(3.0)
    dp = trace.distance(p)
    dq = trace.distance(q)
    gap = np.linalg.norm(p - q, axis=1)
    assert np.all(np.abs(dp - dq) <= gap + 1e-12)


# ------------------------------------------------------------ round trip


def test_save_load_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(19)
    trace = random_trace(rng, 257)
    path = tmp_path / "trace.txt"
    save_trace(path, trace)
    back = load_trace(path)
    assert back.step_dt == trace.step_dt
    assert np.array_equal(back.vertices, trace.vertices)
    # and the rebuilt index answers identically
    pts = rng.normal(size=(40, 3))
    assert np.array_equal(back.distance(pts), trace.distance(pts))


def test_load_rejects_malformed_records(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("not a header\n0 0 0\n")
    with pytest.raises(ValueError):
        load_trace(bad)
    empty = tmp_path / "empty.txt"
    empty.write_text("dt 1e-4\n")
    with pytest.raises(ValueError):
        load_trace(empty)
