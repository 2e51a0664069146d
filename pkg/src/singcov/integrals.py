"""Pathwise integral estimators and Hermite-polynomial utilities.

Paths are arrays whose last axis runs over the grid ``t_0 = 0, ..., t_n = T``;
leading axes (usually the ensemble) are broadcast. Regularization integrals
take ``eps = k h`` with an integer ``k >= 1`` so that shifted values land on
grid nodes, and extend the path by ``0`` before ``0`` and by ``X_T`` after
``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .functions import PiecewiseFn
from .models import CovModel, load_model
from .quadrature import integrate_1d
from .simulation import SimGrid

__all__ = [
    "SmoothFn",
    "SMOOTH_FUNCTIONS",
    "smooth_fn",
    "paley_wiener",
    "eps_steps",
    "reg_integral",
    "skorohod_estimate",
    "quadratic_variation_eps",
    "hermite",
    "hermite_all",
    "gauss_expect",
    "gauss_expect_2d",
    "trace_F_eps",
    "parse_eps_ladder",
]


# ---------------------------------------------------------------------------
# Smooth test functions with derivatives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothFn:
    """A named smooth function with its first few derivatives."""

    name: str
    derivs: tuple  # derivs[k] is the k-th derivative

    def __call__(self, x):
        return self.derivs[0](np.asarray(x, dtype=float))

    def d(self, k: int = 1) -> Callable:
        if k >= len(self.derivs):
            raise ValueError(f"{self.name}: derivative of order {k} not available")
        return self.derivs[k]

    def derivative(self) -> "SmoothFn":
        """``f'`` as a smooth function in its own right."""
        return SmoothFn(self.name + "'", self.derivs[1:])


def _gauss_bump():
    def f0(x):
        return np.exp(-x * x / 4.0)

    return (
        f0,
        lambda x: -0.5 * x * f0(x),
        lambda x: (0.25 * x * x - 0.5) * f0(x),
        lambda x: (-x ** 3 / 8.0 + 0.75 * x) * f0(x),
        lambda x: (x ** 4 / 16.0 - 0.75 * x * x + 0.75) * f0(x),
    )


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


SMOOTH_FUNCTIONS = {
    "sin": SmoothFn("sin", (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin)),
    "cos": SmoothFn("cos", (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin, np.cos)),
    "x": SmoothFn("x", (lambda x: np.asarray(x, dtype=float), _one, _zero, _zero, _zero)),
    "x2half": SmoothFn("x2half", (lambda x: 0.5 * np.asarray(x, dtype=float) ** 2,
                                  lambda x: np.asarray(x, dtype=float), _one, _zero, _zero)),
    "const": SmoothFn("const", (_one, _zero, _zero, _zero, _zero)),
    "zero": SmoothFn("zero", (_zero, _zero, _zero, _zero, _zero)),
    "gauss_bump": SmoothFn("gauss_bump", _gauss_bump()),
    "x1mx": SmoothFn("x1mx", (lambda x: np.asarray(x, dtype=float) * (1.0 - np.asarray(x, dtype=float)),
                              lambda x: 1.0 - 2.0 * np.asarray(x, dtype=float),
                              lambda x: np.full_like(np.asarray(x, dtype=float), -2.0), _zero, _zero)),
}


def smooth_fn(name) -> SmoothFn:
    """Look up a registered smooth function by name (or pass one through)."""
    if isinstance(name, SmoothFn):
        return name
    try:
        return SMOOTH_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown smooth function {name!r}; known: {sorted(SMOOTH_FUNCTIONS)}") from None


# ---------------------------------------------------------------------------
# Paley-Wiener integral of a bounded-variation function
# ---------------------------------------------------------------------------


def _interp_paths(X: np.ndarray, times: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Linear interpolation of every path at ``pts``; shape ``(..., len(pts))``."""
    idx = np.clip(np.searchsorted(times, pts, side="right") - 1, 0, times.size - 2)
    w = (pts - times[idx]) / (times[idx + 1] - times[idx])
    return X[..., idx] * (1.0 - w) + X[..., idx + 1] * w


def _path_integral(X: np.ndarray, times: np.ndarray, a: float, b: float) -> np.ndarray:
    """``int_a^b X ds`` for the piecewise-linear interpolant of each path."""
    inner = times[(times > a) & (times < b)]
    pts = np.concatenate([[a], inner, [b]])
    vals = _interp_paths(X, times, pts)
    return np.sum(0.5 * (vals[..., 1:] + vals[..., :-1]) * np.diff(pts), axis=-1)


def paley_wiener(X, f: PiecewiseFn, grid: SimGrid):
    """``int f dX = f(T-) X_T - int_{]0,T[} X df`` on a simulated path (or ensemble).

    Jumps of ``f`` off the grid and the density part use linear interpolation
    of the path; the density part is integrated by the trapezoidal rule.
    """
    X = np.asarray(X, dtype=float)
    T = grid.T
    times = grid.times
    out = f.left_limit(T) * X[..., -1]
    pos, sizes = f.jumps(T)
    if pos.size:
        out = out - _interp_paths(X, times, pos) @ sizes
    lo, hi, _, c1 = f.pieces(T)
    for a, b, sl in zip(lo, hi, c1):
        if sl != 0.0:
            out = out - sl * _path_integral(X, times, a, b)
    return out


# ---------------------------------------------------------------------------
# Regularization integrals
# ---------------------------------------------------------------------------


def eps_steps(eps: float, grid: SimGrid) -> int:
    """``eps / h`` as an integer; rejects ``eps`` below the grid spacing or off the lattice."""
    k = eps / grid.h
    kr = int(round(k))
    if kr < 1:
        raise ValueError(f"eps={eps} is smaller than the grid spacing {grid.h}")
    if abs(k - kr) > 1e-9 * max(1.0, k):
        raise ValueError(f"eps={eps} is not an integer multiple of the grid spacing {grid.h}")
    return kr


def _shift(X: np.ndarray, k: int) -> np.ndarray:
    """``X_{i+k}`` for ``i = 0..n`` with ``X = 0`` below 0 and ``X_T`` above ``T``."""
    n1 = X.shape[-1]
    idx = np.arange(n1) + k
    below = idx < 0
    idx = np.clip(idx, 0, n1 - 1)
    out = X[..., idx]
    if np.any(below):
        out = np.where(below, 0.0, out)
    return out


def reg_integral(Y, X, eps: float, kind: str, t: float, grid: SimGrid):
    """Riemann sum (left points) of the ``eps``-regularized integral of ``Y`` against ``X`` on ``[0, t]``.

    ``kind='forward'``:   ``int Y_s (X_{s+eps} - X_s) / eps ds``
    ``kind='backward'``:  ``int Y_s (X_s - X_{s-eps}) / eps ds``
    ``kind='symmetric'``: ``int Y_s (X_{s+eps} - X_{s-eps}) / (2 eps) ds``
    """
    X = np.asarray(X, dtype=float)
    Y = np.broadcast_to(np.asarray(Y, dtype=float), X.shape)
    k = eps_steps(eps, grid)
    N = grid.index(t)
    if kind == "forward":
        incr, denom = _shift(X, k) - X, k
    elif kind == "backward":
        incr, denom = X - _shift(X, -k), k
    elif kind == "symmetric":
        incr, denom = _shift(X, k) - _shift(X, -k), 2 * k
    else:
        raise ValueError(f"kind must be forward, backward or symmetric, got {kind!r}")
    return np.sum(Y[..., :N] * incr[..., :N], axis=-1) / denom


def skorohod_estimate(X, g, model, eps: float, t: float, grid: SimGrid):
    """Symmetric integral of ``g(X)`` minus the trace correction ``1/2 sum g'(X_{t_i}) d gamma``."""
    g = smooth_fn(g)
    model = load_model(model)
    X = np.asarray(X, dtype=float)
    N = grid.index(t)
    sym = reg_integral(g(X), X, eps, "symmetric", t, grid)
    dgam = np.diff(np.asarray(model.gamma(grid.times[: N + 1]), dtype=float))
    corr = np.asarray(g.d(1)(X[..., :N]), dtype=float) @ dgam
    return sym - 0.5 * corr


def quadratic_variation_eps(X, eps: float, t: float, grid: SimGrid):
    """``int_0^t (X_{s+eps} - X_s)^2 / eps ds`` by left-point Riemann sum."""
    X = np.asarray(X, dtype=float)
    k = eps_steps(eps, grid)
    N = grid.index(t)
    d = _shift(X, k) - X
    return np.sum(d[..., :N] ** 2, axis=-1) / k


def parse_eps_ladder(spec, T: float = 1.0) -> list:
    """``"T/16..T/512"`` -> ``[T/16, T/32, ..., T/512]`` (ratio 2); lists pass through."""
    if isinstance(spec, (list, tuple)):
        return [float(e) for e in spec]
    spec = str(spec).strip()
    if ".." not in spec:
        return [_parse_eps(spec, T)]
    a, b = (_parse_eps(x, T) for x in spec.split(".."))
    if b > a:
        raise ValueError("eps ladder must decrease")
    out = [a]
    while out[-1] / 2.0 >= b * (1 - 1e-12):
        out.append(out[-1] / 2.0)
    return out


def _parse_eps(tok: str, T: float) -> float:
    tok = tok.strip()
    if tok.startswith("T/"):
        return T / float(tok[2:])
    return float(tok)


# ---------------------------------------------------------------------------
# Hermite polynomials and Gaussian quadrature
# ---------------------------------------------------------------------------


def hermite_all(n: int, x):
    """``[H_0(x), ..., H_n(x)]`` from ``k H_k = x H_{k-1} - H_{k-2}``."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    out = [np.ones_like(x)]
    prev = np.zeros_like(x)
    for k in range(1, n + 1):
        nxt = (x * out[-1] - prev) / k
        prev = out[-1]
        out.append(nxt)
    return out


def hermite(n: int, x):
    """``H_n(x)`` with ``H_0 = 1``, ``H_n' = H_{n-1}``, ``E[H_n(N)^2] = 1/n!``."""
    val = hermite_all(n, x)[-1]
    return val if np.ndim(val) else float(val)


def gauss_expect(f: Callable, order: int = 80) -> float:
    """``E f(N)`` for a standard normal ``N`` by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite_e.hermegauss(order)
    return float(np.dot(w, f(x)) / math.sqrt(2.0 * math.pi))


def gauss_expect_2d(f: Callable, var1: float, cov12: float, order: int = 60) -> float:
    """``E f(G1, G2)`` for a centred Gaussian pair with ``Var G2 = 1``."""
    if var1 < cov12 ** 2 - 1e-15:
        raise ValueError("covariance matrix is not positive semi-definite")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    z1, z2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w) / (2.0 * math.pi)
    g2 = z2
    g1 = cov12 * z2 + math.sqrt(max(var1 - cov12 ** 2, 0.0)) * z1
    return float(np.sum(W * f(g1, g2)))


# ---------------------------------------------------------------------------
# Symmetric trace
# ---------------------------------------------------------------------------


def trace_F_eps(model, eps: float, tau: float) -> float:
    """``F_eps(tau) = (1 / 2 eps) int_0^tau [R(t, t + eps) - R(t, (t - eps)^+)] dt``."""
    model = load_model(model)
    if not eps > 0:
        raise ValueError("eps must be positive")
    if tau <= 0:
        return 0.0

    def integrand(t):
        return model.cov(t, t + eps) - model.cov(t, np.maximum(t - eps, 0.0))

    bps = [b for b in (eps, model.T - eps, model.T) if 0 < b < tau]
    res = integrate_1d(integrand, 0.0, tau, rel_tol=1e-10, abs_tol=1e-14, breakpoints=bps)
    return res.value / (2.0 * eps)
