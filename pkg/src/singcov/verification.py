"""Monte Carlo and quadrature experiments with structured, re-runnable reports.

Every experiment takes only JSON-friendly arguments (model specs, function
specs, names of smooth functions, numbers), stores them verbatim in the
report's ``params`` block and can be replayed with :meth:`ExperimentReport.rerun`.
Monte Carlo verdicts use a 3 standard-error rule; ladder limits use relative
tolerances. Each verdict records the tolerance it was judged against.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assumptions import check_assumptions, membership_condition, ratio_verdict
from .functions import PiecewiseFn, PlanarStepFn, indicator, parse_fn
from .integrals import (
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
    eps_steps,
)
from .models import BifBm, FBm, Kappa, KernelModel, StatInc, load_model
from .norms import inner_H, is_formal, norm_2R_sq_planar, norm_H_sq
from .quadrature import integrate_1d
from .simulation import SimGrid, sample_kernel_path, sample_paths

__all__ = [
    "ExperimentReport",
    "EXPERIMENTS",
    "exp_isometry",
    "exp_ito_symmetric",
    "exp_skorohod_mean_zero",
    "exp_qv",
    "exp_membership_probe",
    "exp_ll1_ratio",
    "exp_trace_convergence",
    "exp_duality",
    "exp_kernel_identity",
    "exp_double_integral",
    "exp_indicator_grid",
    "exp_hermite",
    "exp_assumption_check",
    "qv_regime",
    "suite_configs",
    "run_suite",
]

MC_SE = 3.0


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    """Result of one experiment.

    ``estimates`` rows hold ``label, estimate, se, reference, reference_source``;
    ``verdicts`` rows hold ``criterion, passed, tolerance`` plus the judged numbers.
    """

    name: str
    model: dict | None
    params: dict
    estimates: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    wall_seconds: float | None = None
    notes: list = field(default_factory=list)
    label: str = ""

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def add_estimate(self, label, estimate, se=None, reference=None, source=None):
        self.estimates.append({
            "label": label,
            "estimate": _num(estimate),
            "se": _num(se),
            "reference": _num(reference),
            "reference_source": source,
        })

    def add_verdict(self, criterion: str, passed: bool, tolerance: str, **numbers):
        row = {"criterion": criterion, "passed": bool(passed), "tolerance": tolerance}
        row.update({k: _num(v) for k, v in numbers.items()})
        self.verdicts.append(row)

    def to_dict(self, timestamps: bool = True) -> dict:
        return {
            "name": self.name,
            "label": self.label,
            "model": self.model,
            "params": self.params,
            "estimates": self.estimates,
            "verdicts": self.verdicts,
            "passed": self.passed,
            "wall_seconds": self.wall_seconds if timestamps else None,
            "notes": self.notes,
        }

    def to_json(self, timestamps: bool = True) -> str:
        return json.dumps(self.to_dict(timestamps), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(d["name"], d["model"], d["params"], d["estimates"], d["verdicts"],
                   d.get("wall_seconds"), d.get("notes", []), d.get("label", ""))

    def csv_rows(self) -> list:
        return [[self.label or self.name, e["label"], e["estimate"], e["se"], e["reference"],
                 e["reference_source"]] for e in self.estimates]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.csv_rows())
        return buf.getvalue()

    def rerun(self) -> "ExperimentReport":
        """Run the experiment again from the stored parameter block."""
        return EXPERIMENTS[self.name](**self.params)


CSV_HEADER = ["experiment", "label", "estimate", "se", "reference", "reference_source"]


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _mean_se(x, paired: bool = False):
    x = np.asarray(x, dtype=float)
    if paired:
        # antithetic pairs are adjacent; their means are independent
        x = 0.5 * (x[0::2] + x[1::2])
    if x.size < 2:
        return float(np.mean(x)), math.inf
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _var_se(x):
    x = np.asarray(x, dtype=float)
    d2 = (x - np.mean(x)) ** 2
    var = float(np.sum(d2) / (x.size - 1))
    se = float(np.std(d2, ddof=1) / math.sqrt(x.size))
    return var, se


def _within(diff: float, se: float, k: float = MC_SE) -> bool:
    return abs(diff) <= k * se if se > 0 else abs(diff) <= 1e-12


def _fn(spec) -> PiecewiseFn:
    if isinstance(spec, PiecewiseFn):
        return spec
    if isinstance(spec, dict):
        return PiecewiseFn.from_dict(spec)
    return parse_fn(spec)


def _fn_param(spec):
    return _fn(spec).to_dict()


def _ladder(spec, T) -> list:
    return parse_eps_ladder(spec, T)


_PATH_CACHE: dict = {}
_PATH_CACHE_SIZE = 4


def _ensemble(model, n, m, seed, antithetic=False, offset=0, threads=None):
    # the thread count never changes path content, so it is not part of the key
    key = (model.to_json(), int(n), int(m), int(seed), bool(antithetic), int(offset))
    ens = _PATH_CACHE.get(key)
    if ens is None:
        ens = sample_paths(model, SimGrid(model.T, n), m, seed, antithetic=antithetic,
                           offset=offset, threads=threads)
        ens.paths.setflags(write=False)
        if len(_PATH_CACHE) >= _PATH_CACHE_SIZE:
            _PATH_CACHE.pop(next(iter(_PATH_CACHE)))
        _PATH_CACHE[key] = ens
    return ens


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def exp_isometry(model, f, m: int = 20000, seed: int = 42, n: int = 256, threads=None) -> ExperimentReport:
    """Sample variance of the Paley-Wiener integral against ``||f||_H^2``."""
    with _Timer() as tm:
        model = load_model(model)
        f = _fn(f)
        rep = ExperimentReport("exp_isometry", model.to_dict(),
                               {"model": model.to_dict(), "f": f.to_dict(), "m": m, "seed": seed, "n": n})
        grid = SimGrid(model.T, n)
        Y = paley_wiener(_ensemble(model, n, m, seed, threads=threads).paths, f, grid)
        var, se = _var_se(Y)
        ref = norm_H_sq(f, model)
        rep.add_estimate("var_paley_wiener", var, se, ref, "norm_H_sq quadrature")
        rep.add_verdict("variance matches norm_H_sq", _within(var - ref, se), "3 SE",
                        diff=var - ref, se=se)
        if is_formal(model):
            rep.notes.append("formal: the off-diagonal measure is not non-positive for this model")
        off = [b for b in f.breakpoints if 0 < b < model.T and abs(b / grid.h - round(b / grid.h)) > 1e-9]
        if off:
            rep.notes.append("breakpoints off the grid are handled by path interpolation")
    rep.wall_seconds = tm.seconds
    return rep


def exp_ito_symmetric(model, f: str = "sin", m: int = 2000, eps_ladder="T/16..T/256", t=None,
                      seed: int = 42, n: int = 1024, rel_tol: float = 0.05, threads=None) -> ExperimentReport:
    """Residual of ``f(X_t) = f(0) + int f'(X) d0X`` along an eps ladder."""
    with _Timer() as tm:
        model = load_model(model)
        fs = smooth_fn(f)
        t = model.T if t is None else float(t)
        ladder = _ladder(eps_ladder, model.T)
        rep = ExperimentReport("exp_ito_symmetric", model.to_dict(), {
            "model": model.to_dict(), "f": fs.name, "m": m, "eps_ladder": ladder, "t": t,
            "seed": seed, "n": n, "rel_tol": rel_tol})
        grid = SimGrid(model.T, n)
        X = _ensemble(model, n, m, seed, threads=threads).paths
        N = grid.index(t)
        lhs = fs(X[:, N]) - float(fs(0.0))
        sd = float(np.std(fs(X[:, N]), ddof=1))
        dfX = fs.d(1)(X)
        rms = []
        for eps in ladder:
            r = lhs - reg_integral(dfX, X, eps, "symmetric", t, grid)
            rms.append(float(np.sqrt(np.mean(r ** 2))))
            rep.add_estimate(f"rms_residual eps={eps:.6g}", rms[-1], None, 0.0, "exact identity")
            rep.add_estimate(f"mean_abs_residual eps={eps:.6g}", float(np.mean(np.abs(r))))
        rep.add_estimate("sd_f_X_t", sd)
        if max(rms) <= 1e-12:
            mono = True
        else:
            mono = all(b < a for a, b in zip(rms, rms[1:]))
        rep.add_verdict("rms decreases along the ladder", mono, "strict monotone decrease")
        limit = rel_tol * sd if sd > 0 else 1e-12
        rep.add_verdict("finest rms within tolerance", rms[-1] <= limit,
                        f"{rel_tol:g} * sd(f(X_t))", finest_rms=rms[-1], limit=limit)
    rep.wall_seconds = tm.seconds
    return rep


def exp_skorohod_mean_zero(model, f: str = "cos", m: int = 20000, eps=None, t=None, seed: int = 42,
                           n: int = 256, antithetic: bool = True, threads=None) -> ExperimentReport:
    """Zero mean of the Skorohod integral of ``f'(X)`` and of the Ito-Skorohod combination."""
    with _Timer() as tm:
        model = load_model(model)
        fs = smooth_fn(f)
        g = fs.derivative()
        t = model.T if t is None else float(t)
        grid = SimGrid(model.T, n)
        eps = grid.h if eps is None else float(eps)
        if antithetic and m % 2:
            m += 1
        rep = ExperimentReport("exp_skorohod_mean_zero", model.to_dict(), {
            "model": model.to_dict(), "f": fs.name, "m": m, "eps": eps, "t": t, "seed": seed,
            "n": n, "antithetic": antithetic})
        X = _ensemble(model, n, m, seed, antithetic=antithetic, threads=threads).paths
        N = grid.index(t)
        S = skorohod_estimate(X, g, model, eps, t, grid)
        mS, seS = _mean_se(S, antithetic)
        rep.add_estimate("mean_skorohod_estimate", mS, seS, 0.0, "zero-mean divergence")
        rep.add_verdict("skorohod estimate has mean zero", _within(mS, seS), "3 SE", mean=mS, se=seS)
        gam = np.asarray(model.gamma(grid.times[: N + 1]), dtype=float)
        dgam = np.diff(gam)
        f2 = fs.d(2)(X[:, : N + 1])
        trap = 0.5 * (f2[:, :-1] + f2[:, 1:]) @ dgam
        Z = fs(X[:, N]) - float(fs(0.0)) - 0.5 * trap
        mZ, seZ = _mean_se(Z, antithetic)
        # Gaussian oracle for the same discretized functional
        Ef = [gauss_expect(lambda z, s=s: fs(math.sqrt(s) * z)) for s in (gam[-1],)]
        Ef2 = np.array([gauss_expect(lambda z, s=s: fs.d(2)(math.sqrt(max(s, 0.0)) * z)) for s in gam])
        oracle_Z = Ef[0] - float(fs(0.0)) - 0.5 * float(0.5 * (Ef2[:-1] + Ef2[1:]) @ dgam)
        rep.add_estimate("mean_ito_combination", mZ, seZ, oracle_Z, "Gaussian oracle E f(X_s)")
        rep.add_verdict("ito combination has mean zero", _within(mZ, seZ), "3 SE", mean=mZ, se=seZ)
        mf, sef = _mean_se(fs(X[:, N]), antithetic)
        rep.add_estimate("mean_f_X_t", mf, sef, Ef[0], "Gaussian oracle E f(sqrt(gamma) N)")
        rep.add_verdict("E f(X_t) matches Gaussian oracle", _within(mf - Ef[0], sef), "3 SE",
                        diff=mf - Ef[0], se=sef)
    rep.wall_seconds = tm.seconds
    return rep


def qv_regime(model, t: float):
    """Expected small-eps behaviour of the eps-quadratic variation at time ``t``."""
    model = load_model(model)
    t = min(t, model.T)
    if isinstance(model, FBm):
        H = model.H
    elif isinstance(model, BifBm):
        if abs(2 * model.HK - 1) < 1e-12:
            return "reference", 2.0 ** (1.0 - model.K) * t
        H = model.HK
    elif isinstance(model, StatInc):
        if model.kernel.spec["kind"] == "log":
            return "diverges", None
        H = model.kernel.spec["H"]
    elif isinstance(model, KernelModel) and model.kappa.kind == "indicator":
        return "reference", t
    else:
        return "unknown", None
    if abs(H - 0.5) < 1e-12:
        return "reference", t
    return ("diverges", None) if H < 0.5 else ("vanishes", None)


def exp_qv(model, eps_ladder="T/16..T/512", t: float = 0.5, m: int = 5000, seed: int = 42,
           n: int = 1024, rel_tol: float = 0.05, ratio_threshold: float = 1.3, threads=None) -> ExperimentReport:
    """Ensemble mean of the eps-quadratic variation along a ladder."""
    with _Timer() as tm:
        model = load_model(model)
        ladder = _ladder(eps_ladder, model.T)
        rep = ExperimentReport("exp_qv", model.to_dict(), {
            "model": model.to_dict(), "eps_ladder": ladder, "t": t, "m": m, "seed": seed, "n": n,
            "rel_tol": rel_tol, "ratio_threshold": ratio_threshold})
        grid = SimGrid(model.T, n)
        X = _ensemble(model, n, m, seed, threads=threads).paths
        means = []
        regime, ref = qv_regime(model, t)
        for eps in ladder:
            mu, se = _mean_se(quadratic_variation_eps(X, eps, t, grid))
            means.append(mu)
            rep.add_estimate(f"qv eps={eps:.6g}", mu, se, ref, "closed-form limit" if ref else None)
        if len(means) >= 2:
            rich = 2.0 * means[-1] - means[-2]
            rep.add_estimate("qv richardson (last two rungs)", rich, None, ref)
        ratios = [b / a for a, b in zip(means, means[1:])]
        rep.notes.append(f"expected regime: {regime}")
        if regime == "reference":
            err = abs(means[-1] - ref) / abs(ref)
            rep.add_verdict("finest qv within tolerance of the limit", err <= rel_tol,
                            f"{rel_tol:g} relative", rel_error=err)
        elif regime == "diverges":
            rep.add_verdict("ladder ratios exceed threshold", all(r > ratio_threshold for r in ratios),
                            f"every ratio > {ratio_threshold:g}", min_ratio=min(ratios))
        elif regime == "vanishes":
            ok = all(r < 1.0 for r in ratios) and means[-1] / means[0] < 0.5
            rep.add_verdict("ladder decreases toward zero", ok,
                            "every ratio < 1 and finest/coarsest < 0.5", max_ratio=max(ratios),
                            finest_over_coarsest=means[-1] / means[0])
        else:
            rep.add_verdict("regime not classified", True, "none")
    rep.wall_seconds = tm.seconds
    return rep


def _lag_sums(X: np.ndarray) -> np.ndarray:
    """``A[:, l] = sum_i (X_{i+l} - X_i)^2`` for lags ``l = 0..n`` (per path)."""
    m, n1 = X.shape
    size = 1 << int(math.ceil(math.log2(2 * n1)))
    F = np.fft.rfft(X, size, axis=1)
    cross = np.fft.irfft(F * np.conj(F), size, axis=1)[:, :n1]
    P = np.concatenate([np.zeros((m, 1)), np.cumsum(X * X, axis=1)], axis=1)
    lags = np.arange(n1)
    head = P[:, n1 - lags]           # sum_{i=0}^{n-l} X_i^2
    tail = P[:, [n1]] - P[:, lags]  # sum_{i=l}^{n} X_i^2
    return np.maximum(head + tail - 2.0 * cross, 0.0)


def exp_membership_probe(model, cutoffs=None, m: int = 200, seed: int = 42, n: int = 1024,
                         threads=None) -> ExperimentReport:
    """Pathwise truncated norms ``int int_{|s1-s2|>c} (X_s1 - X_s2)^2 |mu| + int X^2 R(ds, inf)``."""
    with _Timer() as tm:
        model = load_model(model)
        T = model.T
        grid = SimGrid(T, n)
        h = grid.h
        if cutoffs is None:
            kmax = int(math.log2(n)) - 3  # keep at least 4 lags in the finest shell
            cutoffs = [T * 2.0 ** -k for k in range(2, kmax + 1)]
        cutoffs = [float(c) for c in cutoffs]
        rep = ExperimentReport("exp_membership_probe", model.to_dict(), {
            "model": model.to_dict(), "cutoffs": cutoffs, "m": m, "seed": seed, "n": n})
        X = np.asarray(_ensemble(model, n, m, seed, threads=threads).paths)
        A = _lag_sums(X) * h
        prof = model.diag_profile()
        lags = np.arange(1, n + 1) * h
        dens = np.abs(np.asarray(prof.density(lags), dtype=float))
        W = np.asarray(model.r_inf_cdf(grid.times), dtype=float)
        boundary = (0.5 * (X[:, :-1] ** 2 + X[:, 1:] ** 2)) @ np.diff(W)
        per_path = []
        for c in cutoffs:
            sel = lags > c * (1 + 1e-12)
            val = 2.0 * (A[:, 1:][:, sel] @ (dens[sel] * h))
            for c0, mass in prof.atoms:
                if c0 > c:
                    x = c0 / h
                    lo = int(math.floor(x))
                    w = x - lo
                    Ac = (1 - w) * A[:, lo] + w * A[:, min(lo + 1, n)]
                    val = val + 2.0 * abs(mass) * Ac
            per_path.append(val + boundary)
        per_path = np.array(per_path).T  # (m, len(cutoffs))
        mean_seq = per_path.mean(axis=0)
        for c, v in zip(cutoffs, mean_seq):
            rep.add_estimate(f"mean truncated norm c={c:.6g}", v, float(np.std(per_path[:, cutoffs.index(c)], ddof=1) / math.sqrt(m)))
        verdict, ratios = ratio_verdict(mean_seq)
        path_div = float(np.mean([ratio_verdict(row)[0] == "divergent" for row in per_path]))
        rep.add_estimate("fraction of paths classified divergent", path_div)
        rep.notes.append(f"ensemble-mean verdict: {verdict}; increment ratios {['%.4g' % r for r in ratios[-3:]]}")
        rep.notes.append("almost-sure membership is probed through the ensemble mean; it is not testable from finitely many paths")
        if model.has_Q:
            q = membership_condition(model)
            rep.add_verdict("pathwise probe agrees with the Q-criterion", verdict == q.verdict,
                            "same verdict", probe_ratio=ratios[-1], q_ratio=q.increment_ratios[-1])
            rep.notes.append(f"Q-criterion verdict: {q.verdict}")
        else:
            rep.add_verdict("probe verdict recorded", True, "none")
    rep.wall_seconds = tm.seconds
    return rep


def exp_ll1_ratio(model, eps_ladder="T/16..T/256", m: int = 20000, seed: int = 42, n: int = 256,
                  threads=None) -> ExperimentReport:
    """``Z_eps = Q(eps)^-1 int_eps^T (X_s - X_{s-eps})^2 ds``: mean ``T - eps`` and shrinking variance."""
    with _Timer() as tm:
        model = load_model(model)
        if not model.has_Q:
            raise ValueError("exp_ll1_ratio needs a model with a variance kernel Q")
        T = model.T
        ladder = _ladder(eps_ladder, T)
        rep = ExperimentReport("exp_ll1_ratio", model.to_dict(), {
            "model": model.to_dict(), "eps_ladder": ladder, "m": m, "seed": seed, "n": n})
        grid = SimGrid(T, n)
        X = _ensemble(model, n, m, seed, threads=threads).paths
        variances = []
        ok_mean = True
        for eps in ladder:
            k = eps_steps(eps, grid)
            if k >= n:
                Z = np.zeros(X.shape[0])
            else:
                d = X[:, k:n] - X[:, : n - k]
                Z = np.sum(d * d, axis=1) * grid.h / float(model.Q(eps))
            mu, se = _mean_se(Z)
            var, vse = _var_se(Z)
            variances.append(var)
            ref = T - eps
            ok = _within(mu - ref, se)
            ok_mean &= ok
            rep.add_estimate(f"mean Z eps={eps:.6g}", mu, se, ref, "T - eps")
            rep.add_estimate(f"var Z eps={eps:.6g}", var, vse)
        rep.add_verdict("means within 3 SE of T - eps", ok_mean, "3 SE at every rung")
        dec = all(b < a for a, b in zip(variances, variances[1:]))
        rep.add_verdict("variance decreases along the ladder", dec, "strict monotone decrease")
    rep.wall_seconds = tm.seconds
    return rep


def exp_trace_convergence(model, tau=None, eps_ladder="T/32..T/1024", rel_tol: float = 0.02) -> ExperimentReport:
    """``F_eps(tau)`` along the ladder against ``gamma(tau) / 2``."""
    with _Timer() as tm:
        model = load_model(model)
        tau = model.T if tau is None else float(tau)
        ladder = _ladder(eps_ladder, model.T)
        rep = ExperimentReport("exp_trace_convergence", model.to_dict(), {
            "model": model.to_dict(), "tau": tau, "eps_ladder": ladder, "rel_tol": rel_tol})
        ref = 0.5 * float(model.gamma(tau))
        vals = []
        for eps in ladder:
            vals.append(trace_F_eps(model, eps, tau))
            rep.add_estimate(f"F_eps eps={eps:.6g}", vals[-1], None, ref, "gamma(tau)/2")
        if len(vals) >= 2:
            rep.add_estimate("richardson (last two rungs)", 2 * vals[-1] - vals[-2], None, ref)
        if ref == 0.0:
            err = abs(vals[-1])
            rep.add_verdict("finest F_eps vanishes", err <= 1e-12, "1e-12 absolute", abs_error=err)
        else:
            err = abs(vals[-1] - ref) / abs(ref)
            rep.add_verdict("finest F_eps within tolerance", err <= rel_tol, f"{rel_tol:g} relative",
                            rel_error=err)
    rep.wall_seconds = tm.seconds
    return rep


def exp_duality(model, f: str, phi, h, m: int = 20000, seed: int = 42, n: int = 256,
                threads=None) -> ExperimentReport:
    """``E <DF, h>_H = E[F int h dX]`` for ``F = f(int phi dX)``."""
    with _Timer() as tm:
        model = load_model(model)
        fs = smooth_fn(f)
        phi, h = _fn(phi), _fn(h)
        rep = ExperimentReport("exp_duality", model.to_dict(), {
            "model": model.to_dict(), "f": fs.name, "phi": phi.to_dict(), "h": h.to_dict(),
            "m": m, "seed": seed, "n": n})
        grid = SimGrid(model.T, n)
        X = _ensemble(model, n, m, seed, threads=threads).paths
        G = paley_wiener(X, phi, grid)
        P = paley_wiener(X, h, grid)
        ip = inner_H(phi, h, model)
        lhs_i = fs.d(1)(G) * ip
        rhs_i = fs(G) * P
        lhs, lse = _mean_se(lhs_i)
        rhs, rse = _mean_se(rhs_i)
        d, dse = _mean_se(lhs_i - rhs_i)
        rep.add_estimate("lhs E f'(G) <phi,h>_H", lhs, lse)
        rep.add_estimate("rhs E f(G) int h dX", rhs, rse)
        rep.add_estimate("inner_H(phi, h)", ip, None, None, "norm quadrature")
        rep.add_verdict("duality holds", _within(d, dse), "3 SE of the paired difference",
                        diff=d, se=dse)
    rep.wall_seconds = tm.seconds
    return rep


def _phi_callable(phi):
    if isinstance(phi, (PiecewiseFn, dict)) or (isinstance(phi, str) and ":" in phi):
        fn = _fn(phi)
        return fn, fn.to_dict(), [float(b) for b in fn.breakpoints]
    s = smooth_fn(phi)
    return s, s.name, []


def exp_kernel_identity(kappa, phi="x1mx", m: int = 2000, grids=(128, 256), seed: int = 42,
                        T: float = 1.0, band=(1.7, 2.3)) -> ExperimentReport:
    """``int G*phi dW = phi(T) X_T - int X dphi`` on grids of increasing size."""
    with _Timer() as tm:
        if isinstance(kappa, str):
            kappa = load_model(kappa).kappa if kappa.startswith("kernel") else Kappa(kappa)
        if isinstance(kappa, dict):
            kappa = Kappa(kappa["kind"], kappa.get("exponent"))
        fphi, phi_param, phi_breaks = _phi_callable(phi)
        model = KernelModel(kappa, T)
        rep = ExperimentReport("exp_kernel_identity", model.to_dict(), {
            "kappa": kappa.to_dict(), "phi": phi_param, "m": m, "grids": list(grids), "seed": seed,
            "T": T, "band": list(band)})
        rms = []
        for n in grids:
            grid = SimGrid(T, n)
            ens = sample_kernel_path(kappa, grid, m, seed)
            t = grid.times
            s_mid = t[:-1] + 0.5 * grid.h
            phiT = float(fphi(T))
            G = np.empty(n)
            for j, s in enumerate(s_mid):
                ps = float(fphi(s))
                G[j] = ps * float(kappa(T - s))
                if kappa.kind != "indicator":
                    bps = [s + 1.0] + [b for b in phi_breaks if s < b < T]
                    res = integrate_1d(lambda x: (fphi(x) - ps) * kappa.derivative(x - s), s, T,
                                       rel_tol=1e-10, abs_tol=1e-13, breakpoints=bps,
                                       singular="left" if kappa.singular_at_zero else None)
                    G[j] += res.value
            lhs = ens.noise @ G
            phis = np.asarray(fphi(t), dtype=float)
            rhs = phiT * ens.paths[:, -1] - ens.paths[:, :-1] @ np.diff(phis)
            r = float(np.sqrt(np.mean((lhs - rhs) ** 2)))
            rms.append(r)
            rep.add_estimate(f"rms(lhs - rhs) n={n}", r, None, 0.0, "exact identity")
        if max(rms) <= 1e-12:
            rep.add_verdict("identity exact on every grid", True, "1e-12 absolute")
        else:
            ratios = [a / b if b > 0 else math.inf for a, b in zip(rms, rms[1:])]
            ok = all(band[0] <= q <= band[1] for q in ratios)
            rep.add_verdict("rms halves when the grid doubles", ok,
                            f"ratio in [{band[0]:g}, {band[1]:g}]", min_ratio=min(ratios),
                            max_ratio=max(ratios))
    rep.wall_seconds = tm.seconds
    return rep


def exp_double_integral(model, h, m: int = 20000, seed: int = 42, n: int = 256,
                        threads=None) -> ExperimentReport:
    """``E[I_2(h)^2]`` from two independent ensembles against ``||h||_{2,R}^2``."""
    with _Timer() as tm:
        model = load_model(model)
        if isinstance(h, dict):
            h = PlanarStepFn.from_dict(h)
        rep = ExperimentReport("exp_double_integral", model.to_dict(), {
            "model": model.to_dict(), "h": h.to_dict(), "m": m, "seed": seed, "n": n})
        grid = SimGrid(model.T, n)
        X1 = _ensemble(model, n, m, seed, threads=threads).paths
        X2 = _ensemble(model, n, m, seed, offset=m, threads=threads).paths
        t = grid.times
        xs, ys = np.asarray(h.x_breaks), np.asarray(h.y_breaks)
        A = np.stack([np.interp(np.minimum(xs, model.T), t, row) for row in X1])
        B = np.stack([np.interp(np.minimum(ys, model.T), t, row) for row in X2])
        w = h.corner_weights()
        I2 = np.einsum("ip,pq,iq->i", A, w, B)
        mu, se = _mean_se(I2 ** 2)
        ref = norm_2R_sq_planar(h, model)
        rep.add_estimate("E[I2^2]", mu, se, ref, "norm_2R_sq_planar")
        rep.add_verdict("second moment matches the planar norm", _within(mu - ref, se), "3 SE",
                        diff=mu - ref, se=se)
    rep.wall_seconds = tm.seconds
    return rep


# -- deterministic checks bundled as experiments ---------------------------


def exp_indicator_grid(model, grid_points: int = 10, rel_tol: float = 1e-3) -> ExperimentReport:
    """``<1_[0,s], 1_[0,t]>_H = R(s, t)`` on a grid of ``(s, t)``."""
    with _Timer() as tm:
        model = load_model(model)
        T = model.T
        rep = ExperimentReport("exp_indicator_grid", model.to_dict(), {
            "model": model.to_dict(), "grid_points": grid_points, "rel_tol": rel_tol})
        pts = T * np.arange(1, grid_points + 1) / grid_points
        worst = 0.0
        for s in pts:
            for t in pts:
                v = inner_H(indicator(0.0, s), indicator(0.0, t), model)
                worst = max(worst, abs(v - model.cov(s, t)) / abs(model.cov(s, t)))
        rep.add_estimate("max relative error", worst, None, 0.0, "covariance closed form")
        rep.add_verdict("indicator reproduction", worst <= rel_tol, f"{rel_tol:g} relative",
                        max_rel_error=worst)
    rep.wall_seconds = tm.seconds
    return rep


def exp_hermite(order: int = 6, tol_orth: float = 1e-8, tol_wick: float = 1e-6) -> ExperimentReport:
    """Recurrence, derivative, orthogonality, Wick and product identities by Gauss-Hermite quadrature."""
    with _Timer() as tm:
        rep = ExperimentReport("exp_hermite", None, {"order": order, "tol_orth": tol_orth,
                                                     "tol_wick": tol_wick})
        xs = np.linspace(-3.0, 3.0, 20)
        # closed forms of the first orders
        closed = [np.ones_like(xs), xs, (xs ** 2 - 1) / 2, (xs ** 3 - 3 * xs) / 6]
        err_closed = max(float(np.max(np.abs(hermite(k, xs) - c))) for k, c in enumerate(closed))
        rep.add_verdict("closed forms of H_0..H_3", err_closed <= 1e-14, "1e-14 absolute", err=err_closed)
        d = 1e-5
        err_der = max(float(np.max(np.abs((hermite(k, xs + d) - hermite(k, xs - d)) / (2 * d)
                                          - hermite(k - 1, xs)))) for k in range(1, order + 1))
        rep.add_verdict("H_n' = H_(n-1)", err_der <= 1e-6, "1e-6 absolute (central differences)",
                        err=err_der)
        err_orth = 0.0
        for i in range(order + 1):
            for j in range(order + 1):
                e = gauss_expect(lambda x: hermite(i, x) * hermite(j, x), 40)
                target = 1.0 / math.factorial(i) if i == j else 0.0
                err_orth = max(err_orth, abs(e - target))
        rep.add_estimate("max orthogonality error", err_orth, None, 0.0, "delta_nm / n!")
        rep.add_verdict("orthogonality", err_orth <= tol_orth, f"{tol_orth:g} absolute", err=err_orth)
        err_wick = 0.0
        err_prod = 0.0
        for rho in (-0.5, 0.0, 0.8):
            for k in range(1, 5):
                lhs = k * gauss_expect_2d(lambda a, b: np.sin(a) * hermite(k, b), 1.0, rho)
                rhs = gauss_expect_2d(lambda a, b: np.cos(a) * hermite(k - 1, b), 1.0, rho) * rho
                err_wick = max(err_wick, abs(lhs - rhs))
            bump = smooth_fn("gauss_bump")
            for k in range(0, 4):
                lhs = math.factorial(k) * gauss_expect_2d(lambda a, b: bump(a) * hermite(k, b), 1.0, rho)
                rhs = gauss_expect(bump.d(k)) * rho ** k
                err_prod = max(err_prod, abs(lhs - rhs))
        rep.add_estimate("max Wick identity error", err_wick, None, 0.0, "identity")
        rep.add_estimate("max n! E f(G1) H_n(G2) error", err_prod, None, 0.0, "identity")
        rep.add_verdict("Wick identity", err_wick <= tol_wick, f"{tol_wick:g} absolute", err=err_wick)
        rep.add_verdict("n! E f(G1) H_n(G2) = E f^(n)(G1) Cov^n", err_prod <= tol_wick,
                        f"{tol_wick:g} absolute", err=err_prod)
    rep.wall_seconds = tm.seconds
    return rep


def exp_assumption_check(model, expect_d: str, grid_n: int = 32) -> ExperimentReport:
    """Run :func:`check_assumptions` and compare the (D) verdict with ``expect_d``."""
    with _Timer() as tm:
        model = load_model(model)
        rep = ExperimentReport("exp_assumption_check", model.to_dict(), {
            "model": model.to_dict(), "expect_d": expect_d, "grid_n": grid_n})
        r = check_assumptions(model, grid_n)
        for key in "abcd":
            rep.notes.append(f"{key.upper()}: {getattr(r, key + '_holds')}")
        w = r.evidence["d"].get("witness")
        if w:
            rep.notes.append(f"D witness: {json.dumps(w, sort_keys=True)}")
        rep.add_verdict("assumption D verdict", r.d_holds == expect_d, f"equals {expect_d!r}")
    rep.wall_seconds = tm.seconds
    return rep


EXPERIMENTS = {
    "exp_isometry": exp_isometry,
    "exp_ito_symmetric": exp_ito_symmetric,
    "exp_skorohod_mean_zero": exp_skorohod_mean_zero,
    "exp_qv": exp_qv,
    "exp_membership_probe": exp_membership_probe,
    "exp_ll1_ratio": exp_ll1_ratio,
    "exp_trace_convergence": exp_trace_convergence,
    "exp_duality": exp_duality,
    "exp_kernel_identity": exp_kernel_identity,
    "exp_double_integral": exp_double_integral,
    "exp_indicator_grid": exp_indicator_grid,
    "exp_hermite": exp_hermite,
    "exp_assumption_check": exp_assumption_check,
}


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

ISOMETRY_FUNCTIONS = (
    "indicator:0,0.5",
    "step:0,0.25,0.625;1,-2,0.5",
    "step:0.125,0.5,0.875;2,-1,1.5",
)

ISOMETRY_MODELS = ("fbm:0.3", "fbm:0.7", "bifbm:0.6,0.8333333333333334", "statinc:log")

PLANAR_FUNCTIONS = (
    {"x_breaks": [0.0, 0.5], "y_breaks": [0.0, 0.5], "coeffs": [[1.0]]},
    {"x_breaks": [0.0, 0.25, 0.75], "y_breaks": [0.125, 0.5, 1.0], "coeffs": [[1.0, -2.0], [0.5, 1.5]]},
)


def suite_configs(preset: str = "paper", seed: int = 42) -> list:
    """``(label, experiment name, kwargs)`` triples of a named suite."""
    if preset not in ("paper", "quick"):
        raise ValueError(f"unknown suite preset {preset!r}")
    quick = preset == "quick"
    M = 2000 if quick else 20000
    cfg = []
    for mod in ("fbm:0.3", "fbm:0.5", "fbm:0.7", "bifbm:0.6,0.8333333333333334", "statinc:log"):
        cfg.append((f"c01 indicator {mod}", "exp_indicator_grid", {"model": mod}))
    for mod in ISOMETRY_MODELS:
        for f in ISOMETRY_FUNCTIONS:
            cfg.append((f"c02 isometry {mod} {f}", "exp_isometry",
                        {"model": mod, "f": f, "m": M, "seed": seed, "n": 256}))
    for mod in ("fbm:0.3", "fbm:0.5"):
        cfg.append((f"c03 ito-skorohod mean {mod}", "exp_skorohod_mean_zero",
                    {"model": mod, "f": "cos", "m": M, "seed": seed, "n": 256}))
    cfg.append(("c04 stratonovich ito fbm:0.3", "exp_ito_symmetric",
                {"model": "fbm:0.3", "f": "sin", "m": 500 if quick else 2000,
                 "eps_ladder": "T/16..T/256", "seed": seed, "n": 1024}))
    for mod in ("fbm:0.5", "bifbm:0.6,0.8333333333333334", "fbm:0.3", "fbm:0.7"):
        cfg.append((f"c05 qv {mod}", "exp_qv",
                    {"model": mod, "eps_ladder": "T/16..T/512", "t": 0.5, "m": 1000 if quick else 5000, "seed": seed,
                     "n": 1024}))
    for mod in ("statinc:power:0.4", "statinc:power:0.2", "statinc:log"):
        cfg.append((f"c06 membership {mod}", "exp_membership_probe",
                    {"model": mod, "m": 200, "seed": seed, "n": 1024}))
    for mod, tau in (("fbm:0.3", 0.5), ("fbm:0.5", 1.0)):
        cfg.append((f"c07 trace {mod}", "exp_trace_convergence",
                    {"model": mod, "tau": tau, "eps_ladder": "T/32..T/1024"}))
    for mod in ("fbm:0.3", "fbm:0.45"):
        cfg.append((f"c08 ll1 {mod}", "exp_ll1_ratio",
                    {"model": mod, "eps_ladder": "T/16..T/256", "m": M, "seed": seed, "n": 256}))
    cfg.append(("c09 hermite", "exp_hermite", {}))
    for f, phi, h in (("x", "indicator:0,0.5", "indicator:0,0.5"),
                      ("const", "indicator:0,0.5", "indicator:0.25,0.75"),
                      ("sin", "indicator:0,0.4", "indicator:0,0.8")):
        cfg.append((f"c10 duality {f} {phi} {h}", "exp_duality",
                    {"model": "fbm:0.3", "f": f, "phi": phi, "h": h, "m": M, "seed": seed, "n": 256}))
    for kappa in ("indicator", "tent"):
        cfg.append((f"c11 kernel identity {kappa}", "exp_kernel_identity",
                    {"kappa": {"kind": kappa}, "phi": "x1mx", "m": 2000, "grids": [128, 256],
                     "seed": seed}))
    for k, h in enumerate(PLANAR_FUNCTIONS):
        cfg.append((f"c12 double integral h{k}", "exp_double_integral",
                    {"model": "fbm:0.3", "h": h, "m": M, "seed": seed, "n": 256}))
    for mod, exp in (("fbm:0.3", "verified"), ("fbm:0.5", "verified"),
                     ("bifbm:0.6,0.8333333333333334", "verified"), ("bifbm:0.3,0.8", "verified"),
                     ("statinc:log", "verified"), ("fbm:0.7", "violated")):
        cfg.append((f"c13 assumptions {mod}", "exp_assumption_check", {"model": mod, "expect_d": exp}))
    return cfg


def run_suite(preset: str = "paper", seed: int = 42, only=None, progress=None) -> list:
    """Run every experiment of a suite; returns the reports in a fixed order."""
    reports = []
    for label, name, kwargs in suite_configs(preset, seed):
        if only and not any(label.startswith(o) for o in only):
            continue
        rep = EXPERIMENTS[name](**kwargs)
        rep.label = label
        reports.append(rep)
        if progress:
            progress(rep)
    return reports
