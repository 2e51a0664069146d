import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singcov.functions import PiecewiseFn, indicator
from singcov.integrals import (
    SMOOTH_FUNCTIONS,
    eps_steps,
    gauss_expect,
    gauss_expect_2d,
    hermite,
    hermite_all,
    paley_wiener,
    parse_eps_ladder,
    quadratic_variation_eps,
    reg_integral,
    skorohod_estimate,
    smooth_fn,
    trace_F_eps,
)
from singcov.models import FBm, StatInc
from singcov.simulation import SimGrid, sample_paths

GRID = SimGrid(1.0, 64)


@pytest.fixture(scope="module")
def paths():
    return sample_paths(FBm(0.3), GRID, 200, 3).paths


def test_paley_wiener_examples(paths):
    X = paths
    assert np.array_equal(paley_wiener(X, indicator(0.0, 0.5), GRID), X[:, 32])
    assert np.allclose(paley_wiener(X, PiecewiseFn([0.0], [1.0]), GRID), X[:, -1], atol=1e-15)
    got = paley_wiener(X, indicator(0.25, 0.75, 3.0), GRID)
    assert np.allclose(got, 3.0 * (X[:, 48] - X[:, 16]), atol=1e-14)


@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_paley_wiener_linear(a, b):
    X = sample_paths(FBm(0.3), GRID, 5, 1).paths
    f = PiecewiseFn([0.0, 0.3, 0.6], [1.0, -2.0, 0.5])
    g = PiecewiseFn([0.0, 1.0], [0.0, 2.0], "linear")
    lhs = paley_wiener(X, PiecewiseFn([0.0, 0.3, 0.6], [a, -2 * a, 0.5 * a]), GRID) + b * paley_wiener(X, g, GRID)
    rhs = a * paley_wiener(X, f, GRID) + b * paley_wiener(X, g, GRID)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_paley_wiener_linear_integrand_by_parts():
    # f(t) = t: int f dX = X_T - int_0^T X ds, trapezoid on the grid
    X = sample_paths(FBm(0.5), GRID, 3, 2).paths
    f = PiecewiseFn([0.0, 1.0], [0.0, 1.0], "linear")
    ref = X[:, -1] - 0.5 * (X[:, :-1] + X[:, 1:]) @ np.diff(GRID.times)
    assert np.allclose(paley_wiener(X, f, GRID), ref, atol=1e-14)


def test_reg_integral_examples(paths):
    X = paths
    h = GRID.h
    assert np.all(reg_integral(np.zeros_like(X), X, h, "symmetric", 1.0, GRID) == 0.0)
    # Y = X, eps = h: the midpoint sum telescopes to X_{N-1} X_N / 2
    N = 40
    got = reg_integral(X, X, h, "symmetric", N * h, GRID)
    assert np.allclose(got, X[:, N - 1] * X[:, N] / 2, atol=1e-13)
    ones = reg_integral(np.ones_like(X), X, h, "symmetric", 1.0, GRID)
    assert np.allclose(ones, (X[:, -1] + X[:, -2]) / 2 - X[:, 0] / 2, atol=1e-13)


def test_forward_backward_average_is_symmetric(paths):
    X = paths
    eps = 4 * GRID.h
    Y = np.sin(X)
    f = reg_integral(Y, X, eps, "forward", 0.5, GRID)
    b = reg_integral(Y, X, eps, "backward", 0.5, GRID)
    s = reg_integral(Y, X, eps, "symmetric", 0.5, GRID)
    assert np.allclose((f + b) / 2, s, atol=1e-13)


def test_reg_integral_rejects():
    X = np.zeros((1, 65))
    with pytest.raises(ValueError):
        reg_integral(X, X, GRID.h / 2, "symmetric", 1.0, GRID)
    with pytest.raises(ValueError):
        reg_integral(X, X, GRID.h, "sideways", 1.0, GRID)
    with pytest.raises(ValueError):
        eps_steps(1.5 * GRID.h, GRID)


def test_boundary_error_linear_in_eps_for_smooth_path():
    grid = SimGrid(1.0, 1024)
    X = np.sin(3 * grid.times)[None, :]
    eps = parse_eps_ladder("T/16..T/256")
    err = [abs(reg_integral(np.ones_like(X), X, e, "symmetric", 1.0, grid)[0] - X[0, -1]) for e in eps]
    C = max(e / h for e, h in zip(err, eps))
    assert all(e <= C * h for e, h in zip(err, eps))
    assert C < 5.0


def test_boundary_error_rough_path_scales_like_eps_to_H():
    # the symmetric integral of 1 misses X_T by averages of X over the first
    # and last eps; for FBm that is of size eps^H in mean square
    H = 0.3
    grid = SimGrid(1.0, 1024)
    X = sample_paths(FBm(H), grid, 400, 8).paths
    eps = parse_eps_ladder("T/16..T/256")
    rms = [np.sqrt(np.mean((reg_integral(np.ones_like(X), X, e, "symmetric", 1.0, grid) - X[:, -1]) ** 2))
           for e in eps]
    slope = np.polyfit(np.log(eps), np.log(rms), 1)[0]
    assert slope == pytest.approx(H, abs=0.06)


def test_skorohod_examples():
    model = FBm(0.3)
    grid = SimGrid(1.0, 256)
    X = sample_paths(model, grid, 20000, 5, antithetic=True).paths
    h = grid.h
    S1 = skorohod_estimate(X, "const", model, h, 1.0, grid)
    sym1 = reg_integral(np.ones_like(X), X, h, "symmetric", 1.0, grid)
    assert np.array_equal(S1, sym1)
    Sx = skorohod_estimate(X, "x", model, h, 0.5, grid)
    N = grid.index(0.5)
    ref = X[:, N - 1] * X[:, N] / 2 - model.gamma(0.5) / 2
    assert np.allclose(Sx, ref, atol=1e-12)
    se = np.std(Sx, ddof=1) / np.sqrt(Sx.size)
    assert abs(np.mean(Sx)) <= 3 * se + 0.5 * abs(model.gamma(0.5) - model.cov(0.5 - h, 0.5))


def test_quadratic_variation_brownian():
    grid = SimGrid(1.0, 1024)
    X = sample_paths(FBm(0.5), grid, 400, 6).paths
    qv = quadratic_variation_eps(X, 1 / 64, 0.5, grid)
    assert np.mean(qv) == pytest.approx(0.5, rel=0.05)


def test_quadratic_variation_rough_grows():
    grid = SimGrid(1.0, 1024)
    X = sample_paths(FBm(0.3), grid, 2000, 6).paths
    m = [np.mean(quadratic_variation_eps(X, e, 0.5, grid)) for e in parse_eps_ladder("T/16..T/128")]
    assert all(b / a > 1.3 for a, b in zip(m, m[1:]))


def test_parse_eps_ladder():
    assert parse_eps_ladder("T/16..T/128") == [1 / 16, 1 / 32, 1 / 64, 1 / 128]
    assert parse_eps_ladder("T/4", 2.0) == [0.5]
    assert parse_eps_ladder([0.1, 0.05]) == [0.1, 0.05]
    with pytest.raises(ValueError):
        parse_eps_ladder("T/128..T/16")


def test_hermite_examples():
    x = np.linspace(-2, 2, 9)
    assert np.allclose(hermite(1, x), x)
    assert hermite(2, 1.0) == 0.0
    assert hermite(3, 0.0) == 0.0
    assert np.allclose(hermite(2, x), (x ** 2 - 1) / 2)
    assert np.allclose(hermite(3, x), (x ** 3 - 3 * x) / 6)


def test_hermite_recurrence_and_derivative():
    x = np.random.default_rng(0).uniform(-3, 3, 20)
    H = hermite_all(8, x)
    for n in range(2, 9):
        assert np.allclose(n * H[n], x * H[n - 1] - H[n - 2], atol=1e-12)
    d = 1e-5
    for n in range(1, 7):
        fd = (hermite(n, x + d) - hermite(n, x - d)) / (2 * d)
        assert np.max(np.abs(fd - hermite(n - 1, x))) <= 1e-6


def test_hermite_orthogonality():
    for n in range(7):
        for m in range(7):
            e = gauss_expect(lambda z: hermite(n, z) * hermite(m, z))
            assert e == pytest.approx((n == m) / math.factorial(n), abs=1e-8)


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.8])
def test_wick_identity(rho):
    for n in range(1, 5):
        lhs = n * gauss_expect_2d(lambda a, b: np.sin(a) * hermite(n, b), 1.0, rho)
        rhs = gauss_expect_2d(lambda a, b: np.cos(a) * hermite(n - 1, b), 1.0, rho) * rho
        assert lhs == pytest.approx(rhs, abs=1e-6)


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.8])
def test_chaos_projection(rho):
    f = smooth_fn("gauss_bump")
    for n in range(4):
        lhs = math.factorial(n) * gauss_expect_2d(lambda a, b: f(a) * hermite(n, b), 1.0, rho)
        rhs = gauss_expect(f.d(n)) * rho ** n
        assert lhs == pytest.approx(rhs, abs=1e-6)


def test_gauss_expect_closed_forms():
    for v in (0.3, 1.0, 2.0):
        assert gauss_expect(lambda z: np.cos(np.sqrt(v) * z)) == pytest.approx(math.exp(-v / 2), abs=1e-12)
    assert gauss_expect_2d(lambda a, b: a * b, 2.0, 0.7) == pytest.approx(0.7, abs=1e-12)
    assert gauss_expect_2d(lambda a, b: a * a, 2.0, 0.7) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("name", sorted(SMOOTH_FUNCTIONS))
def test_smooth_derivatives(name):
    f = smooth_fn(name)
    x = np.linspace(-1.5, 1.5, 7)
    d = 1e-5
    for k in range(len(f.derivs) - 1):
        fd = (f.d(k)(x + d) - f.d(k)(x - d)) / (2 * d)
        assert np.allclose(fd, f.d(k + 1)(x), atol=1e-6)
    assert np.allclose(f.derivative()(x), f.d(1)(x))


def test_unknown_smooth_function():
    with pytest.raises(ValueError):
        smooth_fn("tanh")


def test_trace_examples():
    assert trace_F_eps(FBm(0.5), 2 ** -10, 1.0) == pytest.approx(0.5, rel=0.02)
    g = FBm(0.3).gamma(0.5) / 2
    assert trace_F_eps(FBm(0.3), 2 ** -10, 0.5) == pytest.approx(g, rel=0.02)
    assert trace_F_eps(FBm(0.3), 2 ** -10, 0.0) == 0.0


def test_trace_brownian_closed_form():
    # for Brownian motion F_eps(tau) = tau/2 - eps/4 exactly when eps < tau
    for eps in (1 / 16, 1 / 64):
        assert trace_F_eps(FBm(0.5), eps, 1.0) == pytest.approx(0.5 - eps / 4, rel=1e-9)


def test_trace_log_kernel_approaches_limit():
    m = StatInc.log()
    vals = [trace_F_eps(m, e, 0.5) for e in (2 ** -6, 2 ** -10)]
    target = m.gamma(0.5) / 2
    assert abs(vals[1] - target) < abs(vals[0] - target)
