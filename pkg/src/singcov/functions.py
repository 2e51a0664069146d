"""Bounded-variation test functions: piecewise step/linear on the line, planar steps."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["PiecewiseFn", "PlanarStepFn", "indicator", "parse_fn"]


class PiecewiseFn:
    """Step (right-continuous) or piecewise-linear function on ``[0, inf)``.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing times ``t_0 < ... < t_n``, all ``>= 0``.
    values : sequence of float
        For ``kind='step'``: ``values[i]`` holds on ``[t_i, t_{i+1})`` and
        ``values[n]`` on ``[t_n, inf)``; a list one shorter is padded with a
        trailing zero. For ``kind='linear'``: node values, linear in between,
        constant after ``t_n``.
    kind : {'step', 'linear'}

    The function is zero before ``t_0``.
    """

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float], kind: str = "step"):
        bp = np.asarray(breakpoints, dtype=float).ravel()
        vals = np.asarray(values, dtype=float).ravel()
        if kind not in ("step", "linear"):
            raise ValueError(f"kind must be 'step' or 'linear', got {kind!r}")
        if bp.size == 0:
            raise ValueError("need at least one breakpoint")
        if np.any(bp < 0) or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be non-negative and strictly increasing")
        if kind == "step" and vals.size == bp.size - 1:
            vals = np.append(vals, 0.0)
        if vals.size != bp.size:
            raise ValueError(
                f"{kind} function with {bp.size} breakpoints needs {bp.size} values, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        self.breakpoints = bp
        self.values = vals
        self.kind = kind

    def __repr__(self) -> str:
        return f"PiecewiseFn({self.breakpoints.tolist()}, {self.values.tolist()}, kind={self.kind!r})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PiecewiseFn)
            and self.kind == other.kind
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        bp, vals = self.breakpoints, self.values
        if self.kind == "step":
            idx = np.searchsorted(bp, t, side="right") - 1
            out = np.where(idx >= 0, vals[np.clip(idx, 0, None)], 0.0)
        else:
            out = np.interp(t, bp, vals)
            out = np.where(t < bp[0], 0.0, out)
        return out if out.ndim else float(out)

    def __mul__(self, c: float) -> "PiecewiseFn":
        return PiecewiseFn(self.breakpoints, c * self.values, self.kind)

    __rmul__ = __mul__

    def __neg__(self) -> "PiecewiseFn":
        return self * -1.0

    def __add__(self, other: "PiecewiseFn") -> "PiecewiseFn":
        kind = "linear" if "linear" in (self.kind, other.kind) else "step"
        if kind == "linear" and (self.kind == "step" or other.kind == "step"):
            raise ValueError("cannot add a step function to a linear one")
        bp = np.union1d(self.breakpoints, other.breakpoints)
        return PiecewiseFn(bp, self(bp) + other(bp), kind)

    def __sub__(self, other: "PiecewiseFn") -> "PiecewiseFn":
        return self + (-other)

    # -- piece representation on a finite horizon ---------------------------

    def pieces(self, T: float):
        """Polynomial pieces on ``[0, T]``.

        Returns arrays ``lo, hi, c0, c1`` with ``f(x) = c0 + c1 * (x - lo)``
        on each open interval ``(lo, hi)``.
        """
        knots = np.unique(np.concatenate([[0.0, T], self.breakpoints[(self.breakpoints > 0) & (self.breakpoints < T)]]))
        lo, hi = knots[:-1], knots[1:]
        length = hi - lo
        x1 = lo + length / 3.0
        x2 = lo + 2.0 * length / 3.0
        y1 = np.asarray(self(x1), dtype=float)
        y2 = np.asarray(self(x2), dtype=float)
        c1 = (y2 - y1) / (x2 - x1)
        c0 = y1 - c1 * (x1 - lo)
        return lo, hi, c0, c1

    def jumps(self, T: float):
        """Atoms ``(position, size)`` of ``df`` inside ``(0, T)``."""
        lo, hi, c0, c1 = self.pieces(T)
        left_limits = c0[:-1] + c1[:-1] * (hi[:-1] - lo[:-1])
        sizes = c0[1:] - left_limits
        pos = lo[1:]
        keep = sizes != 0.0
        return pos[keep], sizes[keep]

    def left_limit(self, T: float) -> float:
        """``f(T-)``, the value seen by a process stopped at ``T``."""
        lo, hi, c0, c1 = self.pieces(T)
        return float(c0[-1] + c1[-1] * (hi[-1] - lo[-1]))

    def total_variation(self, T: float | None = None) -> float:
        """Total variation on ``(0, T)`` (default: the whole half line)."""
        if T is None:
            T = float(self.breakpoints[-1]) + 1.0
        lo, hi, c0, c1 = self.pieces(T)
        _, sizes = self.jumps(T)
        return float(np.sum(np.abs(sizes)) + np.sum(np.abs(c1) * (hi - lo)))

    @property
    def is_step(self) -> bool:
        return self.kind == "step"

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"kind": self.kind, "breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseFn":
        extra = set(d) - {"kind", "breakpoints", "values"}
        if extra:
            raise ValueError(f"unknown key(s) in function spec: {sorted(extra)}")
        return cls(d["breakpoints"], d["values"], d.get("kind", "step"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseFn":
        return cls.from_dict(json.loads(text))


def indicator(a: float, b: float, c: float = 1.0) -> PiecewiseFn:
    """``c * 1_[a, b)`` as a step function."""
    if not 0.0 <= a < b:
        raise ValueError(f"need 0 <= a < b, got a={a}, b={b}")
    return PiecewiseFn([a, b], [c, 0.0], "step")


def parse_fn(spec: str) -> PiecewiseFn:
    """Parse a short function spec.

    ``indicator:a,b`` , ``step:t0,t1,...;v0,v1,...``,
    ``linear:t0,t1,...;v0,v1,...``, ``const:c`` or a JSON object.
    """
    spec = spec.strip()
    if spec.startswith("{"):
        return PiecewiseFn.from_json(spec)
    head, _, body = spec.partition(":")
    if head == "indicator":
        a, b = (float(x) for x in body.split(","))
        return indicator(a, b)
    if head == "const":
        return PiecewiseFn([0.0], [float(body)], "step")
    if head in ("step", "linear"):
        bps, _, vals = body.partition(";")
        return PiecewiseFn(
            [float(x) for x in bps.split(",")], [float(x) for x in vals.split(",")], head
        )
    raise ValueError(f"cannot parse function spec {spec!r}")


@dataclass(frozen=True)
class PlanarStepFn:
    """``h = sum_ij c_ij 1_{]x_i, x_{i+1}] x ]y_j, y_{j+1}]}`` on the quarter plane."""

    x_breaks: tuple
    y_breaks: tuple
    coeffs: tuple

    def __init__(self, x_breaks, y_breaks, coeffs):
        xb = np.asarray(x_breaks, dtype=float)
        yb = np.asarray(y_breaks, dtype=float)
        c = np.asarray(coeffs, dtype=float).reshape(xb.size - 1, yb.size - 1)
        for b in (xb, yb):
            if b.size < 2 or np.any(b < 0) or np.any(np.diff(b) <= 0):
                raise ValueError("breaks must be non-negative, strictly increasing, length >= 2")
        object.__setattr__(self, "x_breaks", tuple(xb.tolist()))
        object.__setattr__(self, "y_breaks", tuple(yb.tolist()))
        object.__setattr__(self, "coeffs", tuple(map(tuple, c.tolist())))

    @classmethod
    def rectangle(cls, a: float, b: float, c: float = 1.0) -> "PlanarStepFn":
        """``c * 1_{]0,a] x ]0,b]}``."""
        return cls([0.0, a], [0.0, b], [[c]])

    @property
    def c(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def __call__(self, t1, t2):
        xb, yb = np.array(self.x_breaks), np.array(self.y_breaks)
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        i = np.searchsorted(xb, t1, side="left") - 1
        j = np.searchsorted(yb, t2, side="left") - 1
        inside = (i >= 0) & (i < xb.size - 1) & (j >= 0) & (j < yb.size - 1)
        c = self.c
        out = np.where(inside, c[np.clip(i, 0, c.shape[0] - 1), np.clip(j, 0, c.shape[1] - 1)], 0.0)
        return out if out.ndim else float(out)

    def corner_weights(self) -> np.ndarray:
        """Masses of the mixed derivative measure ``d^2 h`` at the grid corners.

        Entry ``[p, q]`` is the atom at ``(x_p, y_q)``.
        """
        c = self.c
        nx, ny = c.shape
        dx = np.zeros((nx + 1, nx))
        dy = np.zeros((ny + 1, ny))
        for i in range(nx):
            dx[i, i], dx[i + 1, i] = -1.0, 1.0
        for j in range(ny):
            dy[j, j], dy[j + 1, j] = -1.0, 1.0
        return dx @ c @ dy.T

    def planar_increments(self, xs, ys) -> np.ndarray:
        """``Delta_I h`` over every cell ``I = ]xs_k, xs_{k+1}] x ]ys_l, ys_{l+1}]``."""
        H = self(np.asarray(xs, dtype=float)[:, None], np.asarray(ys, dtype=float)[None, :])
        return H[1:, 1:] - H[:-1, 1:] - H[1:, :-1] + H[:-1, :-1]

    def planar_variation(self) -> float:
        """Total mass of ``|d^2 h|``; equals the sup of ``sum |Delta_I h|`` over grids."""
        return float(np.sum(np.abs(self.corner_weights())))

    def to_dict(self) -> dict:
        return {"x_breaks": list(self.x_breaks), "y_breaks": list(self.y_breaks), "coeffs": [list(r) for r in self.coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "PlanarStepFn":
        return cls(d["x_breaks"], d["y_breaks"], d["coeffs"])
