import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singcov.quadrature import (
    InadmissibleSingularityError,
    NonConvergenceError,
    NonFiniteError,
    QuadResult,
    gk15,
    integrate_1d,
    integrate_2d_offdiag,
)


def test_constant_1d():
    r = integrate_1d(lambda x: np.ones_like(x), 0.0, 1.0)
    assert isinstance(r, QuadResult)
    assert r.value == pytest.approx(1.0, rel=1e-14)
    assert r.err_estimate >= 0 and r.cells >= 1


def test_inverse_sqrt_singular_left():
    r = integrate_1d(lambda x: x ** -0.5, 0.0, 1.0, singular="left")
    assert r.value == pytest.approx(2.0, rel=1e-6)


def test_square_exact():
    r = integrate_1d(lambda x: x ** 2, 0.0, 1.0)
    assert r.value == pytest.approx(1.0 / 3.0, rel=1e-14)


@pytest.mark.parametrize("deg", range(6))
def test_single_cell_polynomial_exactness(deg):
    val, _ = gk15(lambda x: x ** deg, np.array([0.0]), np.array([1.0]))
    assert float(val[0]) == pytest.approx(1.0 / (deg + 1), rel=1e-14)


def test_singular_right_and_breakpoints():
    r = integrate_1d(lambda x: (1.0 - x) ** -0.3, 0.0, 1.0, singular="right")
    assert r.value == pytest.approx(1.0 / 0.7, rel=1e-6)
    r = integrate_1d(lambda x: np.where(x < 0.3, 1.0, 2.0), 0.0, 1.0, breakpoints=[0.3])
    assert r.value == pytest.approx(0.3 + 1.4, rel=1e-12)


def test_nonfinite_raises():
    with pytest.raises(NonFiniteError):
        integrate_1d(lambda x: np.where(x > 0.5, np.nan, 1.0), 0.0, 1.0)


def test_nonconvergence_raises():
    with pytest.raises(NonConvergenceError):
        integrate_1d(lambda x: np.sin(1.0 / (x + 1e-9)), 0.0, 1.0, rel_tol=1e-14, abs_tol=0.0, max_cells=20)


def test_empty_interval_and_bad_order():
    assert integrate_1d(lambda x: x, 1.0, 1.0).value == 0.0
    with pytest.raises(ValueError):
        integrate_1d(lambda x: x, 1.0, 0.0)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(c, alpha, beta):
    f = lambda x: c[0] + c[1] * x + c[2] * x ** 3
    g = lambda x: c[3] * x ** 2 + np.cos(x)
    lhs = integrate_1d(lambda x: alpha * f(x) + beta * g(x), 0.0, 2.0).value
    rhs = alpha * integrate_1d(f, 0.0, 2.0).value + beta * integrate_1d(g, 0.0, 2.0).value
    tol = 2 * (1e-10 + 1e-6 * (abs(lhs) + abs(rhs)))
    assert abs(lhs - rhs) <= tol


def test_2d_area():
    r = integrate_2d_offdiag(lambda a, b: np.ones_like(a), 1.0, 0.0)
    assert r.value == pytest.approx(1.0, rel=1e-8)


def test_2d_inverse_sqrt_distance():
    r = integrate_2d_offdiag(lambda a, b: np.abs(a - b) ** -0.5, 1.0, -0.5)
    assert r.value == pytest.approx(8.0 / 3.0, rel=1e-5)


def test_2d_fbm_profile_squared_increment():
    # squared indicator increment times |d|^(2H-2): 2 int_0^.5 int_.5^1 (s2 - s1)^(2H-2)
    H = 0.3
    F = lambda a, b: ((a < 0.5) != (b < 0.5)) * np.abs(a - b) ** (2 * H - 2)
    r = integrate_2d_offdiag(F, 1.0, 2 * H - 2, breaks=[0.5])
    a = 2 * H - 1
    closed = 2 * (1.0 - 2 * 0.5 ** (a + 1)) / (a * (a + 1))
    assert r.value == pytest.approx(closed, rel=1e-5)


def test_2d_rotated_matches_plain():
    F = lambda a, b: np.abs(a - b) ** -0.4 * (1 + a * b)
    plain = integrate_2d_offdiag(F, 1.0, -0.4).value
    rot = integrate_2d_offdiag(lambda v, u: u ** -0.4 * (1 + v * (v + u)), 1.0, -0.4, rotated=True).value
    assert rot == pytest.approx(plain, rel=1e-6)


def test_2d_inadmissible_exponent():
    with pytest.raises(InadmissibleSingularityError):
        integrate_2d_offdiag(lambda a, b: np.abs(a - b) ** -2.5, 1.0, -2.5)


def test_refinement_does_not_worsen():
    ref = 8.0 / 3.0
    errs = []
    for tol in (1e-4, 5e-5, 2.5e-5):
        r = integrate_2d_offdiag(lambda a, b: np.abs(a - b) ** -0.5, 1.0, -0.5, rel_tol=tol)
        errs.append(abs(r.value - ref))
    assert all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(errs, errs[1:]))
