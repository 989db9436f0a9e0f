import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energy_suff.errors import DegenerateSegment, HeadMismatch, IndexOutOfRange, KappaOutOfRange, TooFewWaypoints
from energy_suff.geometry import (
    SmoothParams,
    breakpoint_rates,
    build_path,
    double_sigmoid,
    format_path,
    parse_path,
    path_time_derivative,
    remaining_length,
    rise_fall,
    smooth_point,
    smooth_tangent,
    spc_update,
    turn_angle,
)

from . import oracles

coord = st.floats(-50, 50, allow_nan=False)


@st.composite
def polylines(draw, min_n=2, max_n=7, min_seg=0.05):
    n = draw(st.integers(min_n, max_n))
    pts = [(draw(coord), draw(coord))]
    for _ in range(n - 1):
        length = draw(st.floats(min_seg, 20.0))
        heading = draw(st.floats(-math.pi, math.pi))
        x, y = pts[-1]
        pts.append((x + length * math.cos(heading), y + length * math.sin(heading)))
    return pts


def random_paths(count, seed, n_range=(2, 7), span=20.0, min_seg=0.5):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        pts = rng.uniform(-span, span, size=(n, 2))
        if np.min(np.linalg.norm(np.diff(pts, axis=0), axis=1)) >= min_seg:
            out.append([tuple(p) for p in pts])
    return out


# build_path


def test_three_four_five():
    p = build_path([(0, 0), (3, 4)])
    assert p.total_length == 5
    assert p.breakpoints == (0.0, 1.0)


def test_collinear_proportions():
    p = build_path([(0, 0), (1, 0), (3, 0)])
    assert p.breakpoints == pytest.approx((0.0, 1 / 3, 1.0))
    assert p.rem_lengths == (3.0, 2.0, 0.0)


def test_duplicate_point_names_segment():
    with pytest.raises(DegenerateSegment) as exc:
        build_path([(0, 0), (1, 0), (1, 0)])
    assert exc.value.index == 1  # zero based: the segment from w_1 to w_2


def test_too_few_waypoints():
    with pytest.raises(TooFewWaypoints):
        build_path([(0, 0)])


@given(polylines())
def test_breakpoints_monotone_and_pinned(pts):
    p = build_path(pts)
    assert p.breakpoints[0] == 0.0 and p.breakpoints[-1] == 1.0
    assert all(b > a for a, b in zip(p.breakpoints, p.breakpoints[1:]))
    assert p.total_length == pytest.approx(sum(p.seg_lengths))
    assert p.rem_lengths[0] == pytest.approx(p.total_length)


# turn angles


def test_turn_angle_collinear():
    assert turn_angle(build_path([(0, 0), (1, 0), (2, 0)]), 1) == 0.0


def test_turn_angle_right():
    assert turn_angle(build_path([(0, 0), (1, 0), (1, 1)]), 1) == pytest.approx(math.pi / 2, abs=1e-15)


def test_turn_angle_near_reversal():
    # dot-product oracle, frozen
    expected = 3.14059265392309
    assert oracles.turn_angle_dot((0, 0), (1, 0), (0, 0.001)) == pytest.approx(expected, abs=1e-13)
    got = turn_angle(build_path([(0, 0), (1, 0), (0, 0.001)]), 1)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(math.pi - math.atan(0.001), abs=1e-14)


def test_turn_angle_index_range():
    p = build_path([(0, 0), (1, 0), (1, 1)])
    for i in (0, 2):
        with pytest.raises(IndexOutOfRange):
            turn_angle(p, i)


@given(polylines(min_n=3))
def test_turn_angles_match_dot_product(pts):
    p = build_path(pts)
    for i in range(1, p.n - 1):
        ref = oracles.turn_angle_dot(pts[i - 1], pts[i], pts[i + 1])
        assert 0.0 <= turn_angle(p, i) <= math.pi
        assert turn_angle(p, i) == pytest.approx(ref, abs=1e-6)


# sigmoids


def test_edges_sum_to_one_at_interior_breakpoints():
    p = build_path([(0, 0), (1, 0), (1, 2), (4, 2)])
    sp = SmoothParams()
    for i in range(1, p.n - 1):
        s = p.breakpoints[i]
        _, fall_prev = rise_fall(sp, p, i - 1, s)
        rise_next, _ = rise_fall(sp, p, i, s)
        assert fall_prev + rise_next == 1.0


def test_first_segment_pinned_at_start():
    p = build_path([(0, 0), (1, 0), (1, 1)])
    assert double_sigmoid(SmoothParams(500.0), p, 0, 0.0) >= 0.9999


def test_mid_segment_sigmoid_near_one():
    p = build_path([(0, 0), (10, 0), (10, 10), (20, 10)])
    sp = SmoothParams(500.0)
    for i in range(p.n - 1):
        s0, s1 = p.breakpoints[i], p.breakpoints[i + 1]
        assert s1 - s0 > 20 / sp.beta
        assert double_sigmoid(sp, p, i, 0.5 * (s0 + s1)) >= 1 - 1e-6


def test_smoothing_rejects_unpinned_endpoints():
    with pytest.raises(ValueError):
        SmoothParams(500.0, eps_end=0.001)


# smooth point and tangents


def test_single_segment_midpoint():
    assert smooth_point(build_path([(0, 0), (2, 0)]), SmoothParams(), 0.5) == pytest.approx((1.0, 0.0), abs=1e-9)


def test_second_segment_midpoint():
    got = smooth_point(build_path([(0, 0), (1, 0), (3, 0)]), SmoothParams(), 2 / 3)
    assert got == pytest.approx((2.0, 0.0), abs=1e-9)


def test_simplified_tangent_of_straight_segment():
    p = build_path([(0, 0), (2, 0)])
    for s in (0.1, 0.4, 0.9):
        assert smooth_tangent(p, SmoothParams(), s, "simplified") == pytest.approx((2.0, 0.0), abs=1e-9)


def test_unknown_tangent_mode():
    with pytest.raises(ValueError):
        smooth_tangent(build_path([(0, 0), (2, 0)]), SmoothParams(), 0.5, "bogus")


def test_smooth_point_matches_vectorised_oracle():
    sp = SmoothParams(300.0)
    for pts in random_paths(30, seed=11):
        p = build_path(pts)
        for s in np.linspace(-0.01, 1.01, 23):
            ref = oracles.smooth_point(pts, s, sp.beta)
            got = smooth_point(p, sp, float(s))
            assert np.allclose(got, ref, atol=1e-9 * p.total_length + 1e-12)


def test_endpoints_pinned():
    for pts in random_paths(50, seed=3):
        p = build_path(pts)
        L = p.total_length
        sp = SmoothParams(500.0)
        assert math.dist(smooth_point(p, sp, 0.0), p.head) <= 1e-4 * L
        assert math.dist(smooth_point(p, sp, 1.0), p.end) <= 1e-4 * L


def test_full_tangent_matches_finite_differences():
    sp = SmoothParams(200.0)
    rng = np.random.default_rng(5)
    for pts in random_paths(30, seed=7):
        p = build_path(pts)
        for s in rng.uniform(0.01, 0.99, 10):
            ref = oracles.fd_tangent(pts, s, sp.beta)
            got = np.array(smooth_tangent(p, sp, float(s), "full"))
            assert np.linalg.norm(got - ref) <= 1e-4 * max(np.linalg.norm(ref), 1e-12)


def test_simplified_close_to_full_away_from_breakpoints():
    sp = SmoothParams(500.0)
    for pts in random_paths(30, seed=9, min_seg=2.0):
        p = build_path(pts)
        bp = np.array(p.breakpoints)
        for s in np.linspace(0.0, 1.0, 201):
            if np.min(np.abs(bp - s)) < 10 / sp.beta:
                continue
            full = np.array(smooth_tangent(p, sp, float(s), "full"))
            simple = np.array(smooth_tangent(p, sp, float(s), "simplified"))
            assert np.linalg.norm(full - simple) <= 1e-3 * p.total_length


def test_remaining_length():
    p = build_path([(0, 0), (10, 0)])
    assert remaining_length(p, 0.0) == 10
    assert remaining_length(p, 1.0) == 0
    assert remaining_length(p, 0.25) == 7.5


# path time derivative


def test_frozen_head_gives_zero_dynamics():
    dyn = path_time_derivative(build_path([(0, 0), (3, 4), (6, 0)]), SmoothParams(), 0.3, (0.0, 0.0))
    assert dyn.l_dot == 0 and all(v == 0 for v in dyn.s_dot_breakpoints) and dyn.xr_partial_t == (0, 0)


def test_length_rate_of_moving_head():
    dyn = path_time_derivative(build_path([(0, 0), (3, 4)]), SmoothParams(), 0.5, (0.3, 0.4))
    assert dyn.l_dot == pytest.approx(-0.5, abs=1e-15)


def test_breakpoint_rate_arithmetic():
    p = build_path([(0, 0), (5, 0), (10, 0)])  # L = 10, remaining length at w_1 is 5
    rates = breakpoint_rates(p, -0.5)
    assert rates[0] == 0.0 and rates[-1] == 0.0
    assert rates[1] == pytest.approx(-0.025, abs=1e-15)


def test_breakpoint_rates_match_finite_differences():
    pts = [(0.0, 0.0), (4.0, 1.0), (6.0, 5.0), (1.0, 7.0)]
    xi = np.array([0.7, -0.2])
    h = 1e-7
    plus = build_path([tuple(np.add(pts[0], h * xi))] + pts[1:])
    minus = build_path([tuple(np.subtract(pts[0], h * xi))] + pts[1:])
    p = build_path(pts)
    l_dot = (plus.total_length - minus.total_length) / (2 * h)
    fd = (np.array(plus.breakpoints) - np.array(minus.breakpoints)) / (2 * h)
    dyn = path_time_derivative(p, SmoothParams(), 0.4, xi)
    assert dyn.l_dot == pytest.approx(l_dot, rel=1e-6)
    assert np.allclose(dyn.s_dot_breakpoints, fd, atol=1e-7)


def test_reference_time_derivative_matches_finite_differences():
    sp = SmoothParams(200.0)
    rng = np.random.default_rng(21)
    for pts in random_paths(25, seed=13, n_range=(2, 5), min_seg=1.0):
        p = build_path(pts)
        xi = rng.normal(size=2)
        for s in rng.uniform(0.0, 1.0, 6):
            ref = oracles.fd_time_derivative(pts, s, xi, sp.beta)
            got = np.array(path_time_derivative(p, sp, float(s), xi).xr_partial_t)
            assert np.linalg.norm(got - ref) <= 1e-5 * max(1.0, np.linalg.norm(ref))


# sequential path construction


def test_spc_inserts_collinear_point():
    new = spc_update(build_path([(0, 0), (1, 0), (2, 0)]), (0, 0), 0.5)
    assert new.waypoints == ((0, 0), (0.5, 0), (1, 0), (2, 0))
    assert new.total_length == 2
    assert sum(new.turn_angles) == 0 and new.turn_angles[0] == 0


def test_spc_argument_checks():
    p = build_path([(0, 0), (1, 0), (2, 0)])
    with pytest.raises(KappaOutOfRange):
        spc_update(p, (0, 0), 1.0)
    with pytest.raises(HeadMismatch):
        spc_update(p, (0.5, 0.5), 0.5)


@settings(max_examples=200)
@given(polylines(), st.floats(0.01, 0.99))
def test_spc_preserves_length_and_turning(pts, kappa):
    p = build_path(pts)
    new = spc_update(p, p.head, kappa)
    assert new.total_length == pytest.approx(p.total_length, rel=1e-9)
    assert sum(new.turn_angles) == pytest.approx(sum(p.turn_angles), rel=1e-9, abs=1e-9)
    assert new.turn_angles[0] <= 1e-9


# text form


@given(polylines())
def test_format_parse_round_trip(pts):
    p = build_path(pts)
    assert parse_path(format_path(p)).waypoints == p.waypoints
