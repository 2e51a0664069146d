"""Covariance model families with their boundary and off-diagonal measures.

Every model is a centred process started at zero and stopped at a horizon
``T`` (``X_t = X_T`` for ``t >= T``). Besides ``R(s, t)`` each family exposes
the density of ``R(ds, inf)`` and of the mixed derivative ``d^2 R / ds1 ds2``
off the diagonal. The off-diagonal measure is split into

* a diagonal profile ``m(|s1 - s2|)`` that carries the singularity, and
* for the bifractional family, a remainder that is the mixed derivative of a
  continuous potential ``A(s1, s2)`` and is smooth across the diagonal.

The norm code integrates the two parts by different routes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import integrate_1d

__all__ = [
    "ModelError",
    "CapabilityError",
    "QKernel",
    "Kappa",
    "PowerProfile",
    "QProfile",
    "CovModel",
    "FBm",
    "BifBm",
    "StatInc",
    "KernelModel",
    "cov",
    "gamma",
    "r_inf_density",
    "mu_offdiag_density",
    "model_from_dict",
    "model_from_json",
    "load_model",
]

LOG_KERNEL_CUTOFF = math.exp(-2.0)


class ModelError(ValueError):
    """Invalid model parameters."""


class CapabilityError(ValueError):
    """The model does not provide the requested quantity in closed form."""


# ---------------------------------------------------------------------------
# Variance kernels for processes with weakly stationary increments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QKernel:
    """Variance function ``Q`` of a process with weakly stationary increments.

    ``Q``, ``Qp`` and ``Qpp`` act on arrays of non-negative arguments and are
    already frozen after the horizon. ``atoms`` lists ``(position, mass)``
    pairs of the singular part of the measure ``Q''(dy)`` on ``]0, T[``
    (kinks of ``Q``).
    """

    Q: Callable[[np.ndarray], np.ndarray]
    Qp: Callable[[np.ndarray], np.ndarray]
    Qpp: Callable[[np.ndarray], np.ndarray]
    spec: dict
    atoms: tuple = ()
    concave: bool = True

    @classmethod
    def power(cls, H: float, T: float) -> "QKernel":
        """``Q(t) = (t ^ T)^(2H)``."""
        if not 0.0 < H < 1.0:
            raise ModelError(f"H must lie in ]0,1[, got {H}")
        a = 2.0 * H

        def Q(t):
            t = np.minimum(np.asarray(t, dtype=float), T)
            return t ** a

        def Qp(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(t < T, a * t ** (a - 1.0), 0.0)

        def Qpp(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(t < T, a * (a - 1.0) * t ** (a - 2.0), 0.0)

        return cls(Q, Qp, Qpp, {"kind": "power", "H": H}, (), H <= 0.5)

    @classmethod
    def log(cls, T: float = 1.0) -> "QKernel":
        """``Q(t) = 1 / log(1/t)`` for ``t < e^-2``, ``1/2`` afterwards.

        Rougher than every fractional scale. The kink at ``e^-2`` puts an
        atom of mass ``-e^2/4`` into ``Q''``.
        """
        c = min(LOG_KERNEL_CUTOFF, T)

        def _L(t):
            return -np.log(t)

        def Q(t):
            t = np.minimum(np.asarray(t, dtype=float), c)
            with np.errstate(divide="ignore"):
                return np.where(t > 0.0, 1.0 / _L(np.where(t > 0, t, 0.5)), 0.0)

        def Qp(t):
            t = np.asarray(t, dtype=float)
            inside = (t > 0.0) & (t < c)
            ts = np.where(inside, t, 0.5)
            return np.where(inside, 1.0 / (_L(ts) ** 2 * ts), 0.0)

        def Qpp(t):
            t = np.asarray(t, dtype=float)
            inside = (t > 0.0) & (t < c)
            ts = np.where(inside, t, 0.5)
            L = _L(ts)
            return np.where(inside, -(1.0 - 2.0 / L) / (L ** 2 * ts ** 2), 0.0)

        atoms = ()
        if c < T:
            atoms = ((c, -1.0 / (4.0 * c)),)  # Q'(c-) = 1/(4c), Q'(c+) = 0
        return cls(Q, Qp, Qpp, {"kind": "log"}, atoms, True)


# ---------------------------------------------------------------------------
# Diagonal profiles m(u): the homogeneous part of the off-diagonal measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerProfile:
    """``m(u) = coef * u**alpha`` on ``]0, T[`` (``alpha > -2``)."""

    coef: float
    alpha: float
    atoms: tuple = ()

    def density(self, u):
        u = np.asarray(u, dtype=float)
        if self.coef == 0.0:
            return np.zeros_like(u)
        return self.coef * u ** self.alpha

    def moment(self, k: int, delta: float) -> float:
        """``int_0^delta u^k m(u) du`` (``delta`` below every atom)."""
        if self.coef == 0.0:
            return 0.0
        p = self.alpha + k + 1.0
        return self.coef * delta ** p / p

    @property
    def sign(self) -> float:
        return float(np.sign(self.coef))


@dataclass(frozen=True)
class QProfile:
    """``m(u) = Q''(u) / 2`` for a stationary-increment variance ``Q``."""

    kernel: QKernel
    atoms: tuple = field(default=())

    def density(self, u):
        return 0.5 * self.kernel.Qpp(u)

    def moment(self, k: int, delta: float) -> float:
        # Integration by parts against Q' and Q; u^k Q'(u) -> 0 at 0.
        Q, Qp = self.kernel.Q, self.kernel.Qp
        d = float(delta)
        # left limit of Q' so that delta may sit on a kink of Q
        qp = float(Qp(np.nextafter(d, 0.0)))
        head = 0.5 * d ** k * qp - 0.5 * k * d ** (k - 1) * float(Q(d))
        if k < 2:
            return head
        rest = integrate_1d(lambda u: u ** (k - 2) * Q(u), 0.0, d, rel_tol=1e-12, abs_tol=1e-300)
        return head + 0.5 * k * (k - 1) * rest.value

    @property
    def sign(self) -> float:
        probe = self.kernel.Qpp(np.geomspace(1e-9, 1.0, 64))
        if np.all(probe <= 0):
            return -1.0
        if np.all(probe >= 0):
            return 1.0
        return 0.0


# ---------------------------------------------------------------------------
# Moving-average kernels kappa for X_t = int_0^t kappa(t - s) dW_s
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kappa:
    """Homogeneous Volterra kernel ``kappa(u)`` on ``u >= 0`` with derivative."""

    kind: str
    exponent: float | None = None

    def __post_init__(self):
        if self.kind not in ("indicator", "power", "tent"):
            raise ModelError(f"unknown kappa kind {self.kind!r}")
        if self.kind == "power":
            if self.exponent is None or not self.exponent > -0.5:
                raise ModelError("power kappa needs exponent > -1/2 (square integrable)")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "indicator":
            return np.where(u >= 0.0, 1.0, 0.0)
        if self.kind == "tent":
            return np.clip(1.0 - u, 0.0, None) * (u >= 0.0)
        with np.errstate(divide="ignore"):
            return np.where(u > 0.0, np.abs(u) ** self.exponent, 0.0)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "indicator":
            return np.zeros_like(u)
        if self.kind == "tent":
            return np.where((u > 0.0) & (u < 1.0), -1.0, 0.0)
        with np.errstate(divide="ignore"):
            return np.where(u > 0.0, self.exponent * np.abs(u) ** (self.exponent - 1.0), 0.0)

    @property
    def singular_at_zero(self) -> bool:
        return self.kind == "power" and self.exponent < 0

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.exponent is not None:
            d["exponent"] = self.exponent
        return d


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


class CovModel:
    """Base class of the covariance families.

    Subclasses implement :meth:`_cov_inside` for ``s, t <= T`` and whatever
    densities they support; stopping at ``T`` is applied here.
    """

    family: str = ""
    has_closed_R = True
    has_r_inf_density = True
    has_mu_density = True
    has_Q = False

    def __init__(self, T: float):
        T = float(T)
        if not (T > 0 and math.isfinite(T)):
            raise ModelError(f"horizon T must be positive, got {T}")
        self.T = T

    # capabilities as a dict, for reports
    @property
    def capabilities(self) -> dict:
        return {
            "has_closed_R": self.has_closed_R,
            "has_r_inf_density": self.has_r_inf_density,
            "has_mu_density": self.has_mu_density,
            "has_Q": self.has_Q,
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}({json.dumps(self.to_dict(), sort_keys=True)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, CovModel) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    # -- covariance ---------------------------------------------------------

    def cov(self, s, t):
        """``R(s, t)`` with the stopped convention ``R(s ^ T, t ^ T)``."""
        s = np.minimum(np.asarray(s, dtype=float), self.T)
        t = np.minimum(np.asarray(t, dtype=float), self.T)
        if np.any(s < 0) or np.any(t < 0):
            raise ValueError("times must be non-negative")
        lo = np.minimum(s, t)
        hi = np.maximum(s, t)
        # the process starts at 0: exact zeros on the axes, free of cancellation
        out = np.where(lo > 0.0, self._cov_inside(lo, hi), 0.0)
        return out if np.ndim(out) else float(out)

    def gamma(self, t):
        """Variance ``R(t ^ T, t ^ T)``."""
        t = np.asarray(t, dtype=float)
        return self.cov(t, t)

    def _cov_inside(self, lo, hi):
        raise NotImplementedError

    # -- measures -----------------------------------------------------------

    def r_inf_cdf(self, s):
        """Distribution function ``s -> R(s, inf) = R(s, T)`` of ``R(ds, inf)``."""
        s = np.asarray(s, dtype=float)
        return self.cov(s, np.full_like(s, self.T))

    def r_inf_density(self, s):
        """Density of ``R(ds, inf)``; zero beyond ``T``."""
        if not self.has_r_inf_density:
            raise CapabilityError(f"{self.family} has no closed-form r_inf density")
        s = np.asarray(s, dtype=float)
        inside = (s > 0) & (s < self.T)
        ss = np.where(inside, s, 0.5 * self.T)
        out = np.where(inside, self._r_inf_inside(ss), 0.0)
        return out if out.ndim else float(out)

    def _r_inf_inside(self, s):
        raise NotImplementedError

    def mu_offdiag_density(self, s1, s2):
        """Density of ``d^2 R / ds1 ds2`` off the diagonal, zero outside ``]0,T[^2``."""
        if not self.has_mu_density:
            raise CapabilityError(f"{self.family} has no closed-form off-diagonal density")
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        if np.any(s1 == s2):
            raise ValueError("mu_offdiag_density is undefined on the diagonal")
        inside = (s1 > 0) & (s1 < self.T) & (s2 > 0) & (s2 < self.T)
        a = np.where(inside, s1, 0.25 * self.T)
        b = np.where(inside, s2, 0.75 * self.T)
        out = self.diag_profile().density(np.abs(a - b))
        rem = self.remainder_density(a, b)
        if rem is not None:
            out = out + rem
        out = np.where(inside, out, 0.0)
        return out if out.ndim else float(out)

    def diag_profile(self):
        """Homogeneous part ``m(|s1 - s2|)`` of the off-diagonal measure."""
        raise CapabilityError(f"{self.family} has no closed-form off-diagonal density")

    def remainder_potential(self, s1, s2):
        """Continuous ``A`` whose mixed derivative is the non-homogeneous part, or None."""
        return None

    def remainder_density(self, s1, s2):
        return None

    @property
    def has_remainder(self) -> bool:
        return False

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class FBm(CovModel):
    """Fractional Brownian motion with Hurst index ``H`` stopped at ``T``."""

    family = "fbm"

    def __init__(self, H: float, T: float = 1.0):
        super().__init__(T)
        H = float(H)
        if not 0.0 < H < 1.0:
            raise ModelError(f"H must lie in ]0,1[, got {H}")
        self.H = H

    def _cov_inside(self, lo, hi):
        a = 2.0 * self.H
        return 0.5 * (lo ** a + hi ** a - (hi - lo) ** a)

    def _r_inf_inside(self, s):
        a = 2.0 * self.H - 1.0
        return self.H * (s ** a + (self.T - s) ** a)

    def diag_profile(self) -> PowerProfile:
        H = self.H
        return PowerProfile(H * (2.0 * H - 1.0), 2.0 * H - 2.0)

    has_Q = True

    @property
    def kernel(self) -> QKernel:
        return QKernel.power(self.H, self.T)

    def Q(self, t):
        return self.kernel.Q(t)

    def to_dict(self) -> dict:
        return {"family": "fbm", "T": self.T, "H": self.H}


class BifBm(CovModel):
    """Bifractional Brownian motion ``B^{H,K}`` stopped at ``T``."""

    family = "bifbm"

    def __init__(self, H: float, K: float, T: float = 1.0):
        super().__init__(T)
        H, K = float(H), float(K)
        if not 0.0 < H < 1.0:
            raise ModelError(f"H must lie in ]0,1[, got {H}")
        if not 0.0 < K <= 1.0:
            raise ModelError(f"K must lie in ]0,1], got {K}")
        self.H, self.K = H, K

    @property
    def HK(self) -> float:
        return self.H * self.K

    def _cov_inside(self, lo, hi):
        H, K = self.H, self.K
        return 2.0 ** -K * ((lo ** (2 * H) + hi ** (2 * H)) ** K - (hi - lo) ** (2 * H * K))

    def _r_inf_inside(self, s):
        H, K, T = self.H, self.K, self.T
        return 2 * H * K * 2.0 ** -K * (
            (s ** (2 * H) + T ** (2 * H)) ** (K - 1) * s ** (2 * H - 1) + (T - s) ** (2 * H * K - 1)
        )

    def diag_profile(self) -> PowerProfile:
        H, K = self.H, self.K
        c = 2 * H * K - 1
        if abs(c) < 1e-12:  # 2HK = 1 up to rounding of K = 1/(2H)
            c = 0.0
        return PowerProfile(2.0 ** -K * 2 * H * K * c, 2 * H * K - 2)

    @property
    def has_remainder(self) -> bool:
        return self.K != 1.0

    def remainder_potential(self, s1, s2):
        H, K, T = self.H, self.K, self.T
        s1 = np.clip(np.asarray(s1, dtype=float), 0.0, T)
        s2 = np.clip(np.asarray(s2, dtype=float), 0.0, T)
        return 2.0 ** -K * (s1 ** (2 * H) + s2 ** (2 * H)) ** K

    def remainder_density(self, s1, s2):
        H, K = self.H, self.K
        if K == 1.0:
            return None
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        return 2.0 ** -K * 4 * H * H * K * (K - 1) * (s1 ** (2 * H) + s2 ** (2 * H)) ** (K - 2) * (s1 * s2) ** (2 * H - 1)

    def to_dict(self) -> dict:
        return {"family": "bifbm", "T": self.T, "H": self.H, "K": self.K}


class StatInc(CovModel):
    """Process with weakly stationary increments and variance ``Q``, stopped at ``T``."""

    family = "statinc"
    has_Q = True

    def __init__(self, kernel: QKernel, T: float = 1.0, boundary_atoms=()):
        super().__init__(T)
        if len(boundary_atoms):
            raise ModelError("boundary measures with atoms are not supported")
        q0 = float(kernel.Q(np.array([0.0]))[0])
        if q0 != 0.0:
            raise ModelError(f"Q(0) must vanish, got {q0}")
        self.kernel = kernel

    @classmethod
    def power(cls, H: float, T: float = 1.0) -> "StatInc":
        return cls(QKernel.power(H, T), T)

    @classmethod
    def log(cls, T: float = 1.0) -> "StatInc":
        return cls(QKernel.log(T), T)

    def Q(self, t):
        return self.kernel.Q(t)

    def _cov_inside(self, lo, hi):
        Q = self.kernel.Q
        return 0.5 * (Q(lo) + Q(hi) - Q(hi - lo))

    def _r_inf_inside(self, s):
        Qp = self.kernel.Qp
        return 0.5 * (Qp(s) + Qp(self.T - s))

    def diag_profile(self) -> QProfile:
        atoms = tuple((c, 0.5 * m) for c, m in self.kernel.atoms if 0.0 < c < self.T)
        return QProfile(self.kernel, atoms)

    def to_dict(self) -> dict:
        d = {"family": "statinc", "T": self.T, "q_kernel": {"kind": self.kernel.spec["kind"]}}
        if self.kernel.spec["kind"] == "power":
            d["H"] = self.kernel.spec["H"]
        return d


class KernelModel(CovModel):
    """``X_t = int_0^t kappa(t - s) dW_s`` stopped at ``T``.

    Only ``R`` and ``gamma`` are available (by quadrature); the measures have
    no closed form and norm routines refuse this family.
    """

    family = "kernel"
    has_closed_R = False
    has_r_inf_density = False
    has_mu_density = False

    def __init__(self, kappa: Kappa, T: float = 1.0):
        super().__init__(T)
        self.kappa = kappa

    def _cov_pair(self, lo: float, hi: float) -> float:
        if lo <= 0.0:
            return 0.0
        k = self.kappa
        if k.kind == "indicator":
            return lo
        sing = "right" if k.singular_at_zero else None
        res = integrate_1d(lambda r: k(lo - r) * k(hi - r), 0.0, lo, rel_tol=1e-10,
                           abs_tol=1e-14, singular=sing, breakpoints=[lo - 1.0, hi - 1.0])
        return res.value

    def _cov_inside(self, lo, hi):
        lo_b, hi_b = np.broadcast_arrays(lo, hi)
        out = np.array([self._cov_pair(float(a), float(b)) for a, b in zip(lo_b.ravel(), hi_b.ravel())])
        return out.reshape(lo_b.shape)

    def gamma(self, t):
        t = np.minimum(np.asarray(t, dtype=float), self.T)
        k = self.kappa
        if k.kind == "indicator":
            out = t
        elif k.kind == "power":
            p = 2 * k.exponent + 1
            out = t ** p / p
        else:  # int_0^t (1-u)_+^2 du
            tc = np.minimum(t, 1.0)
            out = (1.0 - (1.0 - tc) ** 3) / 3.0
        return out if np.ndim(out) else float(out)

    def to_dict(self) -> dict:
        return {"family": "kernel", "T": self.T, "kappa": self.kappa.to_dict()}


# ---------------------------------------------------------------------------
# Module-level accessors and construction from JSON / presets
# ---------------------------------------------------------------------------


def cov(model: CovModel, s, t):
    return model.cov(s, t)


def gamma(model: CovModel, t):
    return model.gamma(t)


def r_inf_density(model: CovModel, s):
    return model.r_inf_density(s)


def mu_offdiag_density(model: CovModel, s1, s2):
    return model.mu_offdiag_density(s1, s2)


_ALLOWED = {
    "fbm": {"family", "T", "H"},
    "bifbm": {"family", "T", "H", "K"},
    "statinc": {"family", "T", "H", "q_kernel"},
    "kernel": {"family", "T", "kappa"},
}


def model_from_dict(d: dict) -> CovModel:
    """Build a model from its JSON object; unknown keys are rejected."""
    fam = d.get("family")
    if fam not in _ALLOWED:
        raise ModelError(f"unknown family {fam!r}")
    extra = set(d) - _ALLOWED[fam]
    if extra:
        raise ModelError(f"unknown key(s) for {fam}: {sorted(extra)}")
    T = float(d.get("T", 1.0))
    if fam == "fbm":
        return FBm(d["H"], T)
    if fam == "bifbm":
        return BifBm(d["H"], d["K"], T)
    if fam == "statinc":
        qk = d.get("q_kernel", {"kind": "power"})
        if set(qk) - {"kind"}:
            raise ModelError(f"unknown key(s) in q_kernel: {sorted(set(qk) - {'kind'})}")
        if qk["kind"] == "power":
            return StatInc.power(d["H"], T)
        if qk["kind"] == "log":
            return StatInc.log(T)
        raise ModelError(f"unknown q_kernel kind {qk['kind']!r}")
    kd = dict(d["kappa"])
    if set(kd) - {"kind", "exponent"}:
        raise ModelError(f"unknown key(s) in kappa: {sorted(set(kd) - {'kind', 'exponent'})}")
    return KernelModel(Kappa(kd["kind"], kd.get("exponent")), T)


def model_from_json(text: str) -> CovModel:
    return model_from_dict(json.loads(text))


def _preset(spec: str) -> CovModel:
    fam, _, rest = spec.partition(":")
    args = [a for a in rest.replace(":", ",").split(",") if a]
    if fam == "fbm":
        return FBm(float(args[0]) if args else 0.5)
    if fam == "bifbm":
        H = float(args[0]) if args else 0.6
        K = float(args[1]) if len(args) > 1 else 1.0 / (2.0 * H)
        return BifBm(H, K)
    if fam == "statinc":
        if not args or args[0] == "log":
            return StatInc.log()
        if args[0] == "power":
            return StatInc.power(float(args[1]) if len(args) > 1 else 0.4)
    if fam == "kernel":
        if not args or args[0] == "indicator":
            return KernelModel(Kappa("indicator"))
        if args[0] == "tent":
            return KernelModel(Kappa("tent"))
        if args[0] == "power":
            return KernelModel(Kappa("power", float(args[1]) if len(args) > 1 else -0.2))
    raise ModelError(f"unknown model preset {spec!r}")


def load_model(spec: str | dict | CovModel) -> CovModel:
    """Model from an instance, a dict, a JSON string, a JSON file or a preset.

    Presets: ``fbm:H``, ``bifbm:H,K`` (``K`` defaults to ``1/(2H)``),
    ``statinc:log``, ``statinc:power:H``, ``kernel:indicator``,
    ``kernel:tent``, ``kernel:power:exponent``.
    """
    if isinstance(spec, CovModel):
        return spec
    if isinstance(spec, dict):
        return model_from_dict(spec)
    spec = spec.strip()
    if spec.startswith("{"):
        return model_from_json(spec)
    if os.path.exists(spec):
        with open(spec) as fh:
            return model_from_json(fh.read())
    return _preset(spec)
