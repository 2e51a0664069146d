"""Norms and inner products of bounded-variation functions.

For a model with boundary measure ``R(ds, inf)`` and off-diagonal measure
``mu`` the bilinear forms are

    <f, g>_H = int f g R(ds, inf) - 1/2 int int (f(s1) - f(s2)) (g(s1) - g(s2)) dmu
    <f, g>_R = int f g |R|(ds, inf) + 1/2 int int (f(s1) - f(s2)) (g(s1) - g(s2)) d|mu|

Evaluation route:

* the boundary term is a Stieltjes integral against the closed-form
  distribution function ``W(s) = R(s, T)``, integrated by parts piece by
  piece, so endpoint singularities of the density never reach a quadrature
  node;
* the homogeneous part ``m(|s1 - s2|)`` of ``mu`` is reduced to
  ``2 int m(u) D(u) du`` with ``D(u) = int (f(v+u) - f(v)) (g(v+u) - g(v)) dv``
  computed exactly (``D`` is a piecewise cubic in ``u``). On the first
  interval ``[0, delta]`` the cubic is fitted and integrated against the
  closed-form moments of ``m``, which covers profiles that are not power laws;
* the smooth bifractional remainder is the mixed derivative of a continuous
  potential ``A`` and is integrated as a double Stieltjes integral.
"""

from __future__ import annotations

import math

import numpy as np

from .functions import PiecewiseFn, PlanarStepFn
from .models import BifBm, CapabilityError, CovModel, load_model
from .quadrature import integrate_1d, integrate_2d_offdiag

__all__ = [
    "mu_sign",
    "is_formal",
    "inner_H",
    "inner_R",
    "norm_H_sq",
    "norm_R_sq",
    "norm_2R_sq_tensor",
    "norm_2R_sq_planar",
    "norm_report",
]

_REL = 1e-10
_ABS = 1e-14
# 3-point Gauss-Legendre rule, exact for the quadratic products in D(u).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


def _require(model: CovModel) -> None:
    if not (model.has_r_inf_density and model.has_mu_density):
        raise CapabilityError(
            f"{model.family} family has no closed-form measures; norms are not available"
        )


def mu_sign(model: CovModel) -> float:
    """Sign of the off-diagonal measure: -1, +1, 0 (vanishes) or nan (mixed)."""
    _require(model)
    prof = model.diag_profile()
    s = prof.sign
    for _, mass in prof.atoms:
        s_atom = float(np.sign(mass))
        if s == 0.0:
            s = s_atom
        elif s_atom not in (0.0, s):
            return math.nan
    if model.has_remainder:
        # bifractional remainder is non-positive for K < 1
        if s > 0:
            return math.nan
        s = -1.0
    return s


def is_formal(model: CovModel) -> bool:
    """True when the measures are not of the sign required for the displays to be rigorous."""
    return not mu_sign(model) <= 0.0


# ---------------------------------------------------------------------------
# Boundary term
# ---------------------------------------------------------------------------


def _boundary_term(f: PiecewiseFn, g: PiecewiseFn, model: CovModel) -> float:
    T = model.T
    knots = np.union1d(_knots(f, T), _knots(g, T))
    return _boundary_term_on(knots, f, g, model.r_inf_cdf)


def _boundary_term_on(knots: np.ndarray, f, g, W) -> float:
    lo, hi = knots[:-1], knots[1:]
    length = hi - lo
    # values of f, g at interior points determine each linear piece
    x1, x2 = lo + length / 3.0, lo + 2.0 * length / 3.0
    fa, fb = np.asarray(f(x1), float), np.asarray(f(x2), float)
    ga, gb = np.asarray(g(x1), float), np.asarray(g(x2), float)
    fs = (fb - fa) / (x2 - x1)
    gs = (gb - ga) / (x2 - x1)
    f_lo, g_lo = fa - fs * (x1 - lo), ga - gs * (x1 - lo)
    f_hi, g_hi = f_lo + fs * length, g_lo + gs * length
    W_lo = np.asarray(W(lo), float)
    W_hi = np.asarray(W(hi), float)
    terms = [math.fsum(f_hi * g_hi * W_hi - f_lo * g_lo * W_lo)]
    for i in np.nonzero((fs != 0.0) | (gs != 0.0))[0]:
        a, b = lo[i], hi[i]
        fl, fsl, gl, gsl = f_lo[i], fs[i], g_lo[i], gs[i]

        def dp(x, a=a, fl=fl, fsl=fsl, gl=gl, gsl=gsl):
            return fsl * (gl + gsl * (x - a)) + gsl * (fl + fsl * (x - a))

        res = integrate_1d(lambda x: dp(x) * W(x), a, b, rel_tol=_REL, abs_tol=_ABS)
        terms.append(-res.value)
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# Homogeneous off-diagonal part
# ---------------------------------------------------------------------------


def _interior_breaks(f: PiecewiseFn, g: PiecewiseFn, T: float) -> np.ndarray:
    p = np.union1d(f.breakpoints, g.breakpoints)
    return p[(p > 0.0) & (p < T)]


def _make_D(f: PiecewiseFn, g: PiecewiseFn, T: float):
    """Vectorized ``u -> int_0^{T-u} (f(v+u)-f(v)) (g(v+u)-g(v)) dv``."""
    P = _interior_breaks(f, g, T)

    def D(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        top = (T - u)[:, None]
        cand = np.concatenate(
            [np.zeros_like(top), top, np.broadcast_to(P, (u.size, P.size)), P[None, :] - u[:, None]],
            axis=1,
        )
        cand = np.sort(np.clip(cand, 0.0, top), axis=1)
        lo, hi = cand[:, :-1], cand[:, 1:]
        half = 0.5 * (hi - lo)
        x = (0.5 * (hi + lo))[..., None] + half[..., None] * _GL_X
        uu = u[:, None, None]
        prod = (f(x + uu) - f(x)) * (g(x + uu) - g(x))
        return np.sum((prod @ _GL_W) * half, axis=1)

    return D


def _u_kinks(f, g, T):
    pts = np.concatenate([[0.0, T], _interior_breaks(f, g, T)])
    d = np.abs(pts[:, None] - pts[None, :]).ravel()
    d = np.unique(np.round(d[(d > 0.0) & (d < T)], 14))
    return d


def _homogeneous_term(f, g, model: CovModel, prof=None) -> float:
    """``int int_{s1 != s2} (f1-f2)(g1-g2) m(|s1-s2|)`` including line atoms of ``m``."""
    T = model.T
    prof = model.diag_profile() if prof is None else prof
    D = _make_D(f, g, T)
    kinks = _u_kinks(f, g, T)
    atoms = [(c, m) for c, m in prof.atoms if 0.0 < c < T]
    firsts = [T] + ([kinks[0]] if kinks.size else []) + [c for c, _ in atoms]
    delta = min(firsts)
    # D is a cubic on [0, delta] with D(0) = 0.
    us = delta * np.array([1.0 / 3.0, 2.0 / 3.0, 1.0])
    V = np.vander(us, 4, increasing=True)[:, 1:]
    coef = np.linalg.solve(V, D(us))
    near = math.fsum(c * prof.moment(k + 1, delta) for k, c in enumerate(coef))
    parts = [near]
    if delta < T:
        bps = [k for k in kinks if k > delta] + [c for c, _ in atoms if c > delta]
        res = integrate_1d(lambda u: prof.density(u) * D(u), delta, T,
                           rel_tol=_REL, abs_tol=_ABS, breakpoints=bps)
        parts.append(res.value)
    for c, m in atoms:
        parts.append(m * float(D(c)[0]))
    return 2.0 * math.fsum(parts)


# ---------------------------------------------------------------------------
# Bifractional remainder via its potential
# ---------------------------------------------------------------------------


def _knots(fn: PiecewiseFn, T: float) -> np.ndarray:
    lo, hi, _, _ = fn.pieces(T)
    return np.append(lo, T)


class _Pieces:
    """Product of piecewise-linear factors as polynomial pieces on ``[0, T]``."""

    def __init__(self, factors, T: float):
        knots = np.unique(np.concatenate([_knots(fn, T) for fn in factors]))
        self.lo, self.hi = knots[:-1], knots[1:]
        length = self.hi - self.lo
        x1, x2 = self.lo + length / 3.0, self.lo + 2.0 * length / 3.0
        self.c0, self.c1 = [], []
        for fn in factors:
            y1, y2 = np.asarray(fn(x1), float), np.asarray(fn(x2), float)
            sl = (y2 - y1) / (x2 - x1)
            self.c0.append(y1 - sl * (x1 - self.lo))
            self.c1.append(sl)
        self.v_lo = np.prod(self.c0, axis=0)
        self.v_hi = np.prod([c0 + c1 * length for c0, c1 in zip(self.c0, self.c1)], axis=0)
        self.smooth = np.any([c1 != 0.0 for c1 in self.c1], axis=0)

    def deriv(self, i: int, y):
        a = self.lo[i]
        vals = [c0[i] + c1[i] * (y - a) for c0, c1 in zip(self.c0, self.c1)]
        out = np.zeros_like(y)
        for k, c1 in enumerate(self.c1):
            term = np.full_like(y, c1[i])
            for j, v in enumerate(vals):
                if j != k:
                    term = term * v
            out = out + term
        return out


def _stieltjes_1d(pc: _Pieces, G):
    """``x -> int_{(0,T)} p(y) d_y G(x, y)`` for continuous ``G``; vectorized in ``x``."""

    def B(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for i, (a, b) in enumerate(zip(pc.lo, pc.hi)):
            out += pc.v_hi[i] * G(x, np.full_like(x, b)) - pc.v_lo[i] * G(x, np.full_like(x, a))
            if pc.smooth[i]:
                for j, xj in enumerate(x):
                    r = integrate_1d(lambda y: pc.deriv(i, y) * G(np.full_like(y, xj), y), a, b,
                                     rel_tol=_REL, abs_tol=_ABS)
                    out[j] -= r.value
        return out

    return B


def _double_stieltjes(phi: _Pieces, psi: _Pieces, A) -> float:
    """``int int_{(0,T)^2} phi(s1) psi(s2) d^2 A(s1, s2)`` for continuous ``A``."""
    B = _stieltjes_1d(psi, A)
    terms = [math.fsum(phi.v_hi * B(phi.hi) - phi.v_lo * B(phi.lo))]
    for i, (a, b) in enumerate(zip(phi.lo, phi.hi)):
        if phi.smooth[i]:
            r = integrate_1d(lambda x: phi.deriv(i, x) * B(x), a, b, rel_tol=_REL, abs_tol=_ABS)
            terms.append(-r.value)
    return math.fsum(terms)


def _remainder_term(f, g, model: CovModel) -> float:
    """``int int (f1-f2)(g1-g2) d^2 A`` over ``(0,T)^2``; uses the symmetry of ``A``."""
    T = model.T
    A = model.remainder_potential
    one = _Pieces([PiecewiseFn([0.0], [1.0])], T)
    fg = _Pieces([f, g], T)
    return 2.0 * (_double_stieltjes(fg, one, A) - _double_stieltjes(_Pieces([f], T), _Pieces([g], T), A))


# ---------------------------------------------------------------------------
# Public forms
# ---------------------------------------------------------------------------


def _J(f, g, model: CovModel) -> float:
    """``int int_{s1 != s2} (f1-f2)(g1-g2) dmu`` (signed)."""
    J = _homogeneous_term(f, g, model)
    if model.has_remainder:
        J += _remainder_term(f, g, model)
    return J


def _abs_J(f, g, model: CovModel) -> float:
    s = mu_sign(model)
    if not math.isnan(s):
        return s * _J(f, g, model) if s != 0.0 else 0.0
    # Mixed sign: |mu| = mu + 2 mu^-. The negative part is bounded and
    # vanishes near the diagonal, where the positive profile dominates.
    T = model.T

    def F(v, u):
        s1, s2 = v, v + u
        neg = np.maximum(-model.mu_offdiag_density(s1, s2), 0.0)
        return (f(s2) - f(s1)) * (g(s2) - g(s1)) * neg

    bks = _interior_breaks(f, g, T)
    corr = integrate_2d_offdiag(F, T, 0.0, rel_tol=1e-7, abs_tol=1e-12, rotated=True,
                                breaks=bks, u_min=1e-6 * T)
    return _J(f, g, model) + 2.0 * corr.value


def _prep(f, g, model):
    model = load_model(model)
    _require(model)
    if not isinstance(f, PiecewiseFn) or not isinstance(g, PiecewiseFn):
        raise TypeError("norms are defined for PiecewiseFn inputs only")
    return model


def inner_H(f: PiecewiseFn, g: PiecewiseFn, model: CovModel) -> float:
    """``<f, g>_H`` for piecewise step or linear functions."""
    model = _prep(f, g, model)
    return _boundary_term(f, g, model) - 0.5 * _J(f, g, model)


def inner_R(f: PiecewiseFn, g: PiecewiseFn, model: CovModel) -> float:
    """``<f, g>_R``, built from ``|R|(ds, inf)`` and ``|mu|``."""
    model = _prep(f, g, model)
    # R(ds, inf) is non-negative for every family in the catalog.
    return _boundary_term(f, g, model) + 0.5 * _abs_J(f, g, model)


def norm_H_sq(f: PiecewiseFn, model: CovModel) -> float:
    """``||f||_H^2``; equals ``Var(int f dX)``."""
    return inner_H(f, f, model)


def norm_R_sq(f: PiecewiseFn, model: CovModel) -> float:
    """``||f||_R^2``; dominates ``||f||_H^2`` and equals it when ``mu <= 0``."""
    return inner_R(f, f, model)


def norm_2R_sq_tensor(f1, f2, g1, g2, model: CovModel) -> float:
    """``<f1 (x) f2, g1 (x) g2>_{2,R} = <f1, g1>_R <f2, g2>_R``."""
    return inner_R(f1, g1, model) * inner_R(f2, g2, model)


def norm_2R_sq_planar(h: PlanarStepFn, model: CovModel) -> float:
    """``int R(t1, s1) R(t2, s2) d^2h(t1, t2) d^2h(s1, s2)`` for a planar step ``h``."""
    model = load_model(model)
    w = h.corner_weights()
    xs = np.asarray(h.x_breaks)
    ys = np.asarray(h.y_breaks)
    Rx = model.cov(xs[:, None], xs[None, :])
    Ry = model.cov(ys[:, None], ys[None, :])
    return float(np.sum(w * (Rx @ w @ Ry)))


def norm_report(f: PiecewiseFn, model: CovModel) -> dict:
    """Both squared norms of ``f`` with a ``formal`` flag for non-signed models."""
    model = load_model(model)
    return {
        "model": model.to_dict(),
        "f": f.to_dict(),
        "norm_H_sq": norm_H_sq(f, model),
        "norm_R_sq": norm_R_sq(f, model),
        "formal": is_formal(model),
    }
