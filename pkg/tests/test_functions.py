import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singcov.functions import PiecewiseFn, PlanarStepFn, indicator, parse_fn


def test_indicator_values():
    f = indicator(0.2, 0.5)
    assert f(0.1) == 0.0 and f(0.2) == 1.0 and f(0.49) == 1.0 and f(0.5) == 0.0


def test_step_constant_after_last_and_zero_before_first():
    f = PiecewiseFn([0.25, 0.5], [2.0, 3.0])
    assert f(0.0) == 0.0 and f(0.3) == 2.0 and f(7.0) == 3.0


def test_linear_kind():
    f = PiecewiseFn([0.0, 1.0], [0.0, 2.0], "linear")
    assert f(0.25) == pytest.approx(0.5)
    assert f(3.0) == 2.0
    assert f.total_variation() == pytest.approx(2.0)


def test_jumps_and_total_variation():
    f = PiecewiseFn([0.0, 0.25, 0.625], [1.0, -2.0, 0.5])
    pos, sizes = f.jumps(1.0)
    assert pos.tolist() == [0.25, 0.625]
    assert sizes.tolist() == [-3.0, 2.5]
    assert f.total_variation(1.0) == pytest.approx(5.5)
    assert f.left_limit(1.0) == 0.5


def test_bad_inputs():
    with pytest.raises(ValueError):
        PiecewiseFn([0.5, 0.2], [1.0, 2.0])
    with pytest.raises(ValueError):
        PiecewiseFn([0.1], [1.0], "cubic")
    with pytest.raises(ValueError):
        indicator(0.5, 0.5)
    with pytest.raises(ValueError):
        parse_fn("wiggle:1")


def test_parse_specs():
    assert parse_fn("indicator:0,0.5") == indicator(0.0, 0.5)
    assert parse_fn("const:2")(10.0) == 2.0
    f = parse_fn("linear:0,1;0,1")
    assert f.kind == "linear" and f(0.5) == 0.5
    g = parse_fn('{"kind": "step", "breakpoints": [0, 1], "values": [1, 0]}')
    assert g == indicator(0.0, 1.0)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=6))
def test_json_round_trip(vals):
    bp = np.linspace(0.0, 1.0, len(vals))
    f = PiecewiseFn(bp, vals)
    assert PiecewiseFn.from_json(f.to_json()) == f
    assert json.loads(f.to_json())["kind"] == "step"


def test_from_dict_rejects_unknown_key():
    with pytest.raises(ValueError):
        PiecewiseFn.from_dict({"breakpoints": [0], "values": [1], "colour": "red"})


def test_arithmetic():
    f = indicator(0.0, 0.5) + 2 * indicator(0.25, 0.75)
    assert f(0.3) == 3.0 and f(0.6) == 2.0
    assert (f - f)(0.3) == 0.0


def test_planar_rectangle_weights():
    h = PlanarStepFn.rectangle(0.5, 0.25)
    w = h.corner_weights()
    assert w.tolist() == [[1.0, -1.0], [-1.0, 1.0]]
    assert h.planar_variation() == 4.0
    assert h(0.3, 0.1) == 1.0 and h(0.6, 0.1) == 0.0


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_planar_increments_sum_to_h(c):
    h = PlanarStepFn([0.0, 0.3, 0.7], [0.0, 0.5, 1.0], [c[:2], c[2:]])
    xs = np.linspace(0.0, 1.0, 11)
    inc = h.planar_increments(xs, xs)
    # summing increments over ]0,x] x ]0,y] recovers h(x, y)
    cum = np.cumsum(np.cumsum(inc, axis=0), axis=1)
    ref = h(xs[1:, None], xs[None, 1:])
    assert np.allclose(cum, ref, atol=1e-12)
    assert np.sum(np.abs(inc)) <= h.planar_variation() + 1e-12


def test_planar_round_trip():
    h = PlanarStepFn([0.0, 0.25, 0.75], [0.125, 0.5, 1.0], [[1.0, -2.0], [0.5, 1.5]])
    assert PlanarStepFn.from_dict(h.to_dict()) == h
