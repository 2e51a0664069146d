"""Exact-in-law Gaussian path simulation on uniform grids.

Path ``k`` of an ensemble draws its normals from its own generator seeded by
``SeedSequence(seed, spawn_key=(k,))``, so the ensemble does not depend on how
paths are split across workers.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import CovModel, Kappa, KernelModel, load_model

__all__ = [
    "NotPSDError",
    "JITTER_LADDER",
    "SimGrid",
    "PathEnsemble",
    "cov_matrix",
    "cholesky_psd",
    "path_normals",
    "sample_paths",
    "sample_kernel_path",
]

JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6)


class NotPSDError(np.linalg.LinAlgError):
    """No jitter on the ladder makes the matrix factorizable."""


@dataclass(frozen=True)
class SimGrid:
    """Uniform grid ``t_i = i T / n``, ``i = 0..n``."""

    T: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 steps, got {self.n}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def h(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * (self.T / self.n)

    def index(self, t: float) -> int:
        """Index of the grid point ``t`` (must lie on the grid)."""
        k = t / self.h
        i = int(round(k))
        if abs(k - i) > 1e-9 or not 0 <= i <= self.n:
            raise ValueError(f"t={t} is not a grid point of {self}")
        return i


@dataclass
class PathEnsemble:
    """``m`` paths on ``grid``; column 0 is ``X_0 = 0``."""

    grid: SimGrid
    paths: np.ndarray
    seed: int
    model: dict
    jitter: float = 0.0
    noise: np.ndarray | None = None  # driving increments dW, kernel family only

    @property
    def m(self) -> int:
        return self.paths.shape[0]

    def metadata(self) -> dict:
        return {"model": self.model, "seed": int(self.seed), "n": self.grid.n,
                "m": self.m, "jitter": self.jitter, "T": self.grid.T}

    def to_csv(self, path: str) -> None:
        """Write ``paths.csv`` (header ``t_0..t_n``) and a ``.json`` metadata sidecar."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"t_{i}" for i in range(self.grid.n + 1)])
            for row in self.paths:
                w.writerow([repr(float(x)) for x in row])
        with open(os.path.splitext(path)[0] + ".json", "w") as fh:
            json.dump(self.metadata(), fh, sort_keys=True, indent=2)

    @classmethod
    def from_csv(cls, path: str) -> "PathEnsemble":
        with open(os.path.splitext(path)[0] + ".json") as fh:
            meta = json.load(fh)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(SimGrid(meta["T"], meta["n"]), data, meta["seed"], meta["model"], meta["jitter"])


def cov_matrix(model, grid: SimGrid) -> np.ndarray:
    """``C[i, j] = R(t_i, t_j)`` for ``i, j = 1..n``."""
    model = load_model(model)
    t = grid.times[1:]
    C = np.asarray(model.cov(t[:, None], t[None, :]), dtype=float)
    return 0.5 * (C + C.T)


def cholesky_psd(C) -> tuple[np.ndarray, float]:
    """Lower factor of ``C + delta I`` with the smallest ``delta`` from the jitter ladder.

    Returns ``(L, delta)``. A zero matrix returns ``L = 0`` and ``delta = 0``.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("C must be square")
    if not np.allclose(C, C.T, rtol=0, atol=1e-14 * max(1.0, np.max(np.abs(C), initial=0.0))):
        raise ValueError("C must be symmetric")
    scale = float(np.mean(np.diag(C))) if C.size else 0.0
    if not np.any(C):
        return np.zeros_like(C), 0.0
    I = np.eye(C.shape[0])
    for rung in JITTER_LADDER:
        delta = rung * scale
        try:
            return np.linalg.cholesky(C + delta * I), delta
        except np.linalg.LinAlgError:
            continue
    raise NotPSDError(f"matrix not positive semi-definite up to jitter {JITTER_LADDER[-1]:g}*mean(diag)")


def path_normals(seed: int, k: int, size: int) -> np.ndarray:
    """Standard normals of path ``k`` from the substream ``(seed, k)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(k),))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(size)


def _normals_block(seed, start, stop, size, antithetic, offset=0):
    Z = np.empty((stop - start, size))
    for r, k in enumerate(range(start + offset, stop + offset)):
        if antithetic:
            z = path_normals(seed, k // 2, size)
            Z[r] = z if k % 2 == 0 else -z
        else:
            Z[r] = path_normals(seed, k, size)
    return Z


def _normals(seed: int, m: int, size: int, antithetic: bool, threads: int | None,
             offset: int = 0) -> np.ndarray:
    threads = max(1, int(threads or 1))
    if threads == 1 or m < 2 * threads:
        return _normals_block(seed, 0, m, size, antithetic, offset)
    bounds = np.linspace(0, m, threads + 1).astype(int)
    with ThreadPoolExecutor(threads) as ex:
        blocks = list(ex.map(lambda ab: _normals_block(seed, ab[0], ab[1], size, antithetic, offset),
                             zip(bounds[:-1], bounds[1:])))
    return np.vstack(blocks)


def sample_paths(model, grid: SimGrid, m: int, seed: int, *, antithetic: bool = False,
                 threads: int | None = None, offset: int = 0) -> PathEnsemble:
    """``m`` paths ``X = L z`` with ``z`` from per-path substreams.

    With ``antithetic=True`` paths ``2j`` and ``2j + 1`` use ``z`` and ``-z``.
    ``offset`` shifts the substream indices, so ``offset=m`` gives an
    ensemble independent of the default one under the same seed.
    """
    model = load_model(model)
    if m < 1:
        raise ValueError("m must be at least 1")
    if isinstance(model, KernelModel):
        return sample_kernel_path(model.kappa, grid, m, seed, antithetic=antithetic,
                                  threads=threads, model=model, offset=offset)
    L, delta = cholesky_psd(cov_matrix(model, grid))
    Z = _normals(seed, m, grid.n, antithetic, threads, offset)
    X = np.zeros((m, grid.n + 1))
    X[:, 1:] = Z @ L.T
    return PathEnsemble(grid, X, int(seed), model.to_dict(), float(delta))


def sample_kernel_path(kappa, grid: SimGrid, m: int, seed: int, *, antithetic: bool = False,
                       threads: int | None = None, model: KernelModel | None = None,
                       offset: int = 0) -> PathEnsemble:
    """``X_{t_i} = sum_{j<i} kappa(t_i - t_{j+1/2}) dW_j`` with ``dW_j ~ N(0, h)``.

    The midpoint rule never evaluates ``kappa`` at 0. The increments ``dW``
    are kept in ``PathEnsemble.noise``.
    """
    if isinstance(kappa, dict):
        kappa = Kappa(kappa["kind"], kappa.get("exponent"))
    if model is None:
        model = KernelModel(kappa, grid.T) if isinstance(kappa, Kappa) else None
    h = grid.h
    t = grid.times
    mid = t[:-1] + 0.5 * h
    lag = t[1:, None] - mid[None, :]  # (n, n): row i -> t_{i+1}
    K = np.where(lag > 0, np.asarray(kappa(np.where(lag > 0, lag, 1.0)), dtype=float), 0.0)
    dW = np.sqrt(h) * _normals(seed, m, grid.n, antithetic, threads, offset)
    X = np.zeros((m, grid.n + 1))
    X[:, 1:] = dW @ K.T
    desc = model.to_dict() if model is not None else {"family": "kernel", "T": grid.T}
    return PathEnsemble(grid, X, int(seed), desc, 0.0, noise=dW)
