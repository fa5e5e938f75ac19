import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stdmap_lab.torus import (CircleArc, DomainError, TorusPoint, arc_clip, arc_minus_strips,
                              circle_distance, torus_distance, wrap)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
unit = st.floats(0, 1, exclude_max=True, allow_nan=False)


@pytest.mark.parametrize("x, expected", [(2.75, 0.75), (-0.25, 0.75), (0.0, 0.0)])
def test_wrap_examples(x, expected):
    assert wrap(x) == expected


def test_wrap_rounding_to_one_folds_to_zero():
    assert wrap(-1e-18) == 0.0
    assert wrap(np.array([-1e-18]))[0] == 0.0


def test_wrap_rejects_nonfinite():
    with pytest.raises(DomainError):
        wrap(math.inf)
    with pytest.raises(DomainError):
        wrap(np.array([0.1, math.nan]))


def test_wrap_idempotent_on_a_million_points():
    x = np.random.default_rng(0).uniform(-10, 10, 10**6)
    w = wrap(x)
    assert np.array_equal(wrap(w), w)
    assert np.all((w >= 0) & (w < 1))


@pytest.mark.parametrize("a, b, d", [(0.1, 0.9, 0.2), (0.3, 0.3, 0.0), (0.0, 0.5, 0.5)])
def test_circle_distance_examples(a, b, d):
    assert circle_distance(a, b) == pytest.approx(d, abs=1e-15)


@given(finite, finite, finite)
def test_circle_distance_rotation_invariant(a, b, c):
    assert abs(circle_distance(a, b) - circle_distance(wrap(a + c), wrap(b + c))) <= 1e-14


@given(finite, finite, finite)
def test_circle_distance_metric(a, b, c):
    dab, dbc, dac = circle_distance(a, b), circle_distance(b, c), circle_distance(a, c)
    assert 0 <= dab <= 0.5
    assert dab == circle_distance(b, a)
    assert dac <= dab + dbc + 1e-15


def test_torus_distance_and_point():
    p = TorusPoint(1.25, -0.5)
    assert (p.x, p.y) == (0.25, 0.5)
    assert torus_distance((0.1, 0.1), (0.9, 0.9)) == pytest.approx(math.hypot(0.2, 0.2))


def test_arc_clip_examples():
    out = arc_clip(CircleArc(0.0, 0.5), CircleArc(0.2, 0.6))
    assert len(out) == 1 and out[0].anchor == pytest.approx(0.2) and out[0].length == pytest.approx(0.3)
    out = arc_clip(CircleArc(0.0, 1.0), CircleArc(0.1, 0.3))
    assert len(out) == 1 and out[0].anchor == pytest.approx(0.1) and out[0].length == pytest.approx(0.3)
    assert arc_clip(CircleArc(0.0, 0.3), CircleArc(0.5, 0.4)) == []


def test_arc_clip_two_pieces():
    out = arc_clip(CircleArc(0.0, 0.9), CircleArc(0.8, 0.4))  # allowed wraps through 0
    assert sorted(round(a.length, 12) for a in out) == [0.1, 0.2]


def test_arc_rejects_bad_length():
    with pytest.raises(DomainError):
        CircleArc(0.0, 1.5)


@settings(max_examples=60, deadline=None)
@given(unit, st.floats(0, 1), unit, st.floats(0, 1))
def test_arc_clip_pieces_disjoint_and_inside(a0, l0, b0, l1):
    arc, allowed = CircleArc(a0, l0), CircleArc(b0, l1)
    out = arc_clip(arc, allowed)
    assert len(out) <= 2
    assert sum(p.length for p in out) <= arc.length + 1e-12
    t = (np.arange(4000) + 0.5) / 4000
    cover = np.zeros(t.size, int)
    for p in out:
        m = p.contains(t)
        cover += m
        # points well inside a piece lie in both inputs
        inner = m & p.contains(t - 1e-9) & p.contains(t + 1e-9)
        assert np.all(arc.contains(t[inner]) & allowed.contains(t[inner]))
    assert cover.max(initial=0) <= 1


def test_arc_minus_strips():
    good = arc_minus_strips(0.0, 1.0, [0.25, 0.75], 0.05)
    assert good == pytest.approx([(0.0, 0.2), (0.3, 0.7), (0.8, 1.0)])
    assert arc_minus_strips(0.0, 1.0, [0.25, 0.75], 0.3) == []
    assert arc_minus_strips(0.0, 0.5, [], 0.1) == [(0.0, 0.5)]
