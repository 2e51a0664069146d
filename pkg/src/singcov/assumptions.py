"""Numerical checks of the structural assumptions and of the path-membership condition.

Verdicts are tri-state: ``"verified"``, ``"violated"`` or ``"not-checkable"``.
A violation always carries a witness with the offending point and value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import CapabilityError, CovModel, load_model
from .quadrature import QuadratureError, integrate_1d, integrate_2d_offdiag

__all__ = [
    "VERIFIED",
    "VIOLATED",
    "NOT_CHECKABLE",
    "AssumptionReport",
    "check_assumptions",
    "MembershipResult",
    "membership_condition",
    "dyadic_cutoffs",
    "ratio_verdict",
]

VERIFIED = "verified"
VIOLATED = "violated"
NOT_CHECKABLE = "not-checkable"


@dataclass
class AssumptionReport:
    """Verdicts for assumptions (A)-(D) with the sampled evidence."""

    a_holds: str
    b_holds: str
    c_holds: str
    d_holds: str
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in ("a", "b", "c", "d"):
            verdict = getattr(self, f"{key}_holds")
            if verdict not in (VERIFIED, VIOLATED, NOT_CHECKABLE):
                raise ValueError(f"bad verdict {verdict!r}")
            if verdict == VIOLATED and not self.evidence.get(key, {}).get("witness"):
                raise ValueError(f"violated assumption {key.upper()} needs a witness")

    def to_dict(self) -> dict:
        return {
            "a_holds": self.a_holds,
            "b_holds": self.b_holds,
            "c_holds": self.c_holds,
            "d_holds": self.d_holds,
            "evidence": self.evidence,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_a(model: CovModel, grid_n: int) -> tuple[str, dict]:
    # Total variation of t -> R(s, t) on refining grids; bounded means stable.
    T = model.T
    s = np.linspace(T / grid_n, T, grid_n)
    tv = []
    levels = (grid_n, 2 * grid_n, 4 * grid_n)
    for n in levels:
        t = np.linspace(0.0, T, n + 1)
        R = np.asarray(model.cov(s[:, None], t[None, :]), dtype=float)
        tv.append(float(np.max(np.sum(np.abs(np.diff(R, axis=1)), axis=1))))
    growth = tv[-1] / tv[-2] if tv[-2] > 0 else 1.0
    ev = {"grid_sizes": list(levels), "max_tv": tv, "growth": growth}
    if math.isfinite(tv[-1]) and growth < 1.05:
        return VERIFIED, ev
    ev["witness"] = {"s_grid_n": grid_n, "tv": tv[-1], "growth": growth}
    return VIOLATED, ev


def _abs_profile_mass(model: CovModel) -> float:
    """``int int |s1 - s2| |m(|s1 - s2|)|`` over the square, by moments of ``m``."""
    T = model.T
    prof = model.diag_profile()
    # 2 int_0^T u (T - u) |m(u)| du; m has one sign on ]0, T[
    val = 2.0 * abs(T * prof.moment(1, T) - prof.moment(2, T))
    for c, mass in prof.atoms:
        val += 2.0 * abs(mass) * c * (T - c)
    return val


def _check_bc(model: CovModel) -> tuple[str, str, dict]:
    T = model.T
    ev: dict = {}
    try:
        if model.has_remainder and model.diag_profile().sign > 0:
            # mixed sign: integrate |density| directly, singular like u^(2HK-1)
            alpha = model.diag_profile().alpha + 1.0
            res = integrate_2d_offdiag(
                lambda v, u: u * np.abs(model.mu_offdiag_density(v, v + u)),
                T, alpha, rel_tol=1e-5, abs_tol=1e-9, rotated=True,
            )
            mass = res.value
        else:
            mass = _abs_profile_mass(model)
            if model.has_remainder:
                res = integrate_2d_offdiag(
                    lambda v, u: u * np.abs(model.remainder_density(v, v + u)),
                    T, 0.0, rel_tol=1e-5, abs_tol=1e-9, rotated=True, edge_singular=True,
                    u_min=1e-6 * T,
                )
                mass += res.value
    except QuadratureError as exc:
        ev["b"] = {"error": str(exc), "witness": {"integral": "divergent"}}
        return VIOLATED, NOT_CHECKABLE, ev
    # |R|(ds, inf) has total mass sup W - inf W when the density has one sign
    s = np.linspace(0.0, T, 257)
    W = np.asarray(model.r_inf_cdf(s), dtype=float)
    tv_r = float(np.sum(np.abs(np.diff(W))))
    ev["b"] = {"abs_dist_mu_mass": mass}
    ev["c"] = {"abs_r_inf_mass": tv_r}
    b = VERIFIED if math.isfinite(mass) else VIOLATED
    c = VERIFIED if math.isfinite(tv_r) else VIOLATED
    if b == VIOLATED:
        ev["b"]["witness"] = {"integral": mass}
    if c == VIOLATED:
        ev["c"]["witness"] = {"mass": tv_r}
    return b, c, ev


def _check_d(model: CovModel, grid_n: int) -> tuple[str, dict]:
    T = model.T
    s = (np.arange(grid_n) + 0.5) * T / grid_n
    r = np.asarray(model.r_inf_density(s), dtype=float)
    i, j = np.meshgrid(np.arange(grid_n), np.arange(grid_n), indexing="ij")
    off = i != j
    s1, s2 = s[i[off]], s[j[off]]
    # add points close to the diagonal, where the profile dominates
    near = s[:-1] + 1e-3 * T / grid_n
    s1 = np.concatenate([s1, s[:-1]])
    s2 = np.concatenate([s2, near])
    mu = np.asarray(model.mu_offdiag_density(s1, s2), dtype=float)
    ev = {
        "min_r_inf_density": float(np.min(r)),
        "max_mu_density": float(np.max(mu)),
        "mu_atoms": [list(a) for a in model.diag_profile().atoms],
    }
    if np.min(r) < 0:
        k = int(np.argmin(r))
        ev["witness"] = {"kind": "r_inf_density", "s": float(s[k]), "value": float(r[k])}
        return VIOLATED, ev
    if np.max(mu) > 0:
        k = int(np.argmax(mu))
        ev["witness"] = {"kind": "mu_density", "s1": float(s1[k]), "s2": float(s2[k]),
                         "value": float(mu[k])}
        return VIOLATED, ev
    for c, mass in model.diag_profile().atoms:
        if mass > 0:
            ev["witness"] = {"kind": "mu_atom", "distance": c, "mass": mass}
            return VIOLATED, ev
    return VERIFIED, ev


def check_assumptions(model, grid_n: int = 32) -> AssumptionReport:
    """Sample-based verdicts for assumptions (A)-(D).

    (A): total variation of ``R(s, .)`` stays bounded under grid refinement.
    (B), (C): ``int int |s1 - s2| d|mu|`` and the mass of ``|R|(ds, inf)`` are finite.
    (D): ``R(ds, inf) >= 0`` and ``mu <= 0`` off the diagonal (atoms included).
    """
    if grid_n < 16:
        raise ValueError(f"grid_n must be at least 16, got {grid_n}")
    model = load_model(model)
    a, ev_a = _check_a(model, grid_n)
    evidence = {"a": ev_a}
    if not (model.has_r_inf_density and model.has_mu_density):
        reason = {"reason": f"{model.family} has no closed-form measures"}
        evidence.update(b=reason, c=reason, d=reason)
        return AssumptionReport(a, NOT_CHECKABLE, NOT_CHECKABLE, NOT_CHECKABLE, evidence)
    b, c, ev_bc = _check_bc(model)
    evidence.update(ev_bc)
    d, ev_d = _check_d(model, grid_n)
    evidence["d"] = ev_d
    return AssumptionReport(a, b, c, d, evidence)


# ---------------------------------------------------------------------------
# Membership condition int_0+ Q |Q''| < inf
# ---------------------------------------------------------------------------


@dataclass
class MembershipResult:
    """Truncated integrals along a cutoff ladder and the resulting verdict."""

    cutoffs: list
    integrals: list
    increment_ratios: list
    verdict: str

    def to_dict(self) -> dict:
        return {
            "cutoffs": self.cutoffs,
            "integrals": self.integrals,
            "increment_ratios": self.increment_ratios,
            "verdict": self.verdict,
        }


def dyadic_cutoffs(T: float = 1.0, k_min: int = 2, k_max: int = 24) -> list:
    """``c_k = 2^-k T`` for ``k = k_min .. k_max``."""
    return [T * 2.0 ** -k for k in range(k_min, k_max + 1)]


def ratio_verdict(values, last: int = 3) -> tuple[str, list]:
    """Classify a sequence of truncated integrals on a geometric ladder.

    The increments ``I_{k+1} - I_k`` of a convergent tail shrink
    geometrically; a divergent one has increments that stay level or grow.
    Returns the verdict and the increment ratios.
    """
    I = np.asarray(values, dtype=float)
    inc = np.diff(I)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = inc[1:] / inc[:-1]
    ratios = [float(r) for r in ratios]
    tail = ratios[-last:]
    if len(tail) < last:
        raise ValueError(f"need at least {last + 2} cutoffs")
    if all(abs(x) < 1.0 for x in tail if math.isfinite(x)) and all(math.isfinite(x) for x in tail):
        return "convergent", ratios
    if np.all(inc[-last:] == 0.0):
        return "convergent", ratios
    return "divergent", ratios


def membership_condition(model, cutoffs=None) -> MembershipResult:
    """``I_k = int_{c_k}^T Q(y) |Q''|(dy)`` along decreasing cutoffs, with a verdict."""
    model = load_model(model)
    if not model.has_Q:
        raise CapabilityError(f"{model.family} has no variance kernel Q")
    T = model.T
    cutoffs = dyadic_cutoffs(T) if cutoffs is None else [float(c) for c in cutoffs]
    if any(c <= 0 for c in cutoffs) or any(b >= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValueError("cutoffs must be positive and strictly decreasing")
    kern = model.kernel
    atoms = [(c, m) for c, m in kern.atoms if 0.0 < c < T]

    def integrand(y):
        return kern.Q(y) * np.abs(kern.Qpp(y))

    edges = [T] + cutoffs
    pieces = []
    for hi, lo in zip(edges[:-1], edges[1:]):
        bps = [c for c, _ in atoms if lo < c < hi]
        part = integrate_1d(integrand, lo, hi, rel_tol=1e-10, abs_tol=1e-14, breakpoints=bps).value
        part += sum(float(kern.Q(c)) * abs(m) for c, m in atoms if lo <= c < hi)
        pieces.append(part)
    integrals = [float(x) for x in np.cumsum(pieces)]
    verdict, ratios = ratio_verdict(integrals)
    return MembershipResult(cutoffs, integrals, ratios, verdict)
