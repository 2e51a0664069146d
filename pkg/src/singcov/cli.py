"""Command-line interface: ``singcov <command> [options]``.

Commands: simulate, norm, inner, integrate, qv, check, verify, suite.
Exit status is 0 on success, 1 when a verify/suite verdict fails and 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .assumptions import check_assumptions, membership_condition
from .functions import parse_fn
from .integrals import parse_eps_ladder, reg_integral, skorohod_estimate, smooth_fn
from .models import CapabilityError, KernelModel, load_model
from .norms import inner_H, inner_R, is_formal, norm_report
from .simulation import SimGrid, sample_paths
from .verification import CSV_HEADER, EXPERIMENTS, ExperimentReport, exp_qv, suite_configs

__all__ = ["main", "build_parser", "UsageError"]


class UsageError(Exception):
    """Bad flag, config key or value; reported with exit status 2."""


# options shared by every command; the value is the argparse default
COMMON = {
    "model": None,
    "seed": 42,
    "paths": None,
    "grid": None,
    "eps": None,
    "out": None,
    "threads": None,
    "tol": None,
}

# command-specific options: name -> (default, help)
EXTRA = {
    "simulate": {},
    "norm": {"f": (None, "bounded-variation function spec, e.g. indicator:0,0.5")},
    "inner": {"f": (None, "first function spec"), "g": (None, "second function spec")},
    "integrate": {
        "f": ("sin", "registered smooth integrand name"),
        "kind": ("symmetric", "forward, backward, symmetric or skorohod"),
        "t": (None, "upper limit (grid point); default T"),
    },
    "qv": {"t": (0.5, "time at which the quadratic variation is taken")},
    "check": {"grid_n": (32, "sampling grid size for the assumption checks")},
    "verify": {
        "experiment": (None, "experiment name, e.g. exp_isometry"),
        "params": (None, "JSON object of extra experiment parameters"),
        "f": (None, "function parameter f"),
        "phi": (None, "function parameter phi"),
        "h": (None, "function parameter h"),
        "t": (None, "time parameter t"),
        "tau": (None, "time parameter tau"),
    },
    "suite": {
        "preset": ("paper", "suite preset: paper or quick"),
        "only": (None, "comma-separated label prefixes, e.g. c02,c05"),
    },
}

CMD_DEFAULTS = {
    "simulate": {"paths": 100, "grid": 256},
    "integrate": {"paths": 2000, "grid": 256, "eps": "T/16..T/256"},
    "qv": {"paths": 5000, "grid": 1024, "eps": "T/16..T/512"},
    "suite": {"out": "singcov-report"},
}

NUMERIC = {"seed": int, "paths": int, "grid": int, "threads": int, "grid_n": int, "t": float,
           "tau": float}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="singcov", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"singcov {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, extra in EXTRA.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--model", help="model JSON file, JSON string or preset (fbm:0.3, bifbm:0.6,0.8, "
                                        "statinc:log, statinc:power:0.4, kernel:tent, kernel:power:-0.2)")
        sp.add_argument("--seed", type=int, help="root seed (default 42)")
        sp.add_argument("--paths", type=int, help="number of paths m")
        sp.add_argument("--grid", type=int, help="grid steps n")
        sp.add_argument("--eps", help='eps ladder, e.g. "T/16..T/512"')
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="worker threads (default: available cores)")
        sp.add_argument("--tol", help="tolerance overrides, e.g. rel_tol=0.02")
        sp.add_argument("--config", help="JSON config file; keys are the long option names")
        sp.add_argument("--no-timestamp", action="store_true", help="omit wall-clock timings")
        if cmd == "simulate":
            sp.add_argument("--no-paths-csv", action="store_true", help="do not write paths.csv")
        for name, (_, hlp) in extra.items():
            kw = {"type": NUMERIC[name]} if name in NUMERIC else {}
            sp.add_argument("--" + name.replace("_", "-"), dest=name, help=hlp, **kw)
    return p


def _resolve(args) -> dict:
    """Merge defaults, config file and flags (flags win); unknown config keys are errors."""
    cmd = args.command
    allowed = set(COMMON) | set(EXTRA[cmd])
    cfg = {k: v for k, v in COMMON.items()}
    cfg.update({k: d for k, (d, _) in EXTRA[cmd].items()})
    cfg.update(CMD_DEFAULTS.get(cmd, {}))
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        for k, v in data.items():
            key = k.replace("-", "_")
            if key not in allowed:
                raise UsageError(f"unknown config key {k!r}")
            if key in NUMERIC and v is not None:
                try:
                    v = NUMERIC[key](v)
                except (TypeError, ValueError):
                    raise UsageError(f"bad value for config key {k!r}: {v!r}") from None
            cfg[key] = v
    for k in allowed:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["tol"] = _parse_tol(cfg["tol"])
    return cfg


def _parse_tol(spec) -> dict:
    if spec in (None, "", {}):
        return {}
    if isinstance(spec, dict):
        items = spec.items()
    else:
        items = []
        for tok in str(spec).split(","):
            k, sep, v = tok.partition("=")
            if not sep:
                raise UsageError(f"bad --tol entry {tok!r}; expected key=value")
            items.append((k.strip(), v))
    out = {}
    for k, v in items:
        try:
            out[k] = float(v)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for tolerance {k!r}: {v!r}") from None
    return out


def _need(cfg, key):
    if cfg.get(key) in (None, ""):
        raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _model(cfg):
    spec = _need(cfg, "model")
    try:
        return load_model(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad model {spec!r}: {exc}") from None


def _fn(cfg, key):
    spec = _need(cfg, key)
    try:
        return parse_fn(spec) if isinstance(spec, str) else parse_fn(json.dumps(spec))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad function for {key!r}: {exc}") from None


def _threads(cfg):
    return cfg["threads"] if cfg["threads"] else (os.cpu_count() or 1)


def _public_config(cfg) -> dict:
    # worker count and output location never change results; leaving them out
    # keeps reports comparable across machines and directories
    return {k: v for k, v in sorted(cfg.items()) if k not in ("threads", "out")}


# ---------------------------------------------------------------------------
# Commands; each returns (list of ExperimentReport, judged)
# ---------------------------------------------------------------------------


def cmd_simulate(cfg):
    model = _model(cfg)
    t0 = time.perf_counter()
    grid = SimGrid(model.T, cfg["grid"])
    ens = sample_paths(model, grid, cfg["paths"], cfg["seed"], threads=_threads(cfg))
    rep = ExperimentReport("simulate", model.to_dict(), {"m": cfg["paths"], "n": cfg["grid"],
                                                         "seed": cfg["seed"]})
    XT = ens.paths[:, -1]
    se = float(np.std((XT - XT.mean()) ** 2, ddof=1) / np.sqrt(XT.size)) if XT.size > 1 else None
    rep.add_estimate("var X_T", float(np.var(XT, ddof=1)) if XT.size > 1 else None, se,
                     float(model.gamma(model.T)), "gamma(T)")
    rep.add_estimate("jitter", ens.jitter)
    rep.wall_seconds = time.perf_counter() - t0
    return [rep], False, ens


def cmd_norm(cfg):
    model = _model(cfg)
    f = _fn(cfg, "f")
    t0 = time.perf_counter()
    try:
        r = norm_report(f, model)
    except CapabilityError as exc:
        raise UsageError(str(exc)) from None
    rep = ExperimentReport("norm", model.to_dict(), {"f": f.to_dict(), "formal": r["formal"]})
    rep.add_estimate("norm_H_sq", r["norm_H_sq"])
    rep.add_estimate("norm_R_sq", r["norm_R_sq"])
    if r["formal"]:
        rep.notes.append("formal: the off-diagonal measure is not non-positive for this model")
    rep.wall_seconds = time.perf_counter() - t0
    return [rep], False, None


def cmd_inner(cfg):
    model = _model(cfg)
    f, g = _fn(cfg, "f"), _fn(cfg, "g")
    t0 = time.perf_counter()
    rep = ExperimentReport("inner", model.to_dict(), {"f": f.to_dict(), "g": g.to_dict()})
    try:
        rep.params["formal"] = is_formal(model)
    except CapabilityError as exc:
        raise UsageError(str(exc)) from None
    try:
        rep.add_estimate("inner_H", inner_H(f, g, model))
        rep.add_estimate("inner_R", inner_R(f, g, model))
    except CapabilityError as exc:
        raise UsageError(str(exc)) from None
    rep.wall_seconds = time.perf_counter() - t0
    return [rep], False, None


def cmd_integrate(cfg):
    model = _model(cfg)
    try:
        g = smooth_fn(cfg["f"])
        ladder = parse_eps_ladder(cfg["eps"], model.T)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    kind = cfg["kind"]
    if kind not in ("forward", "backward", "symmetric", "skorohod"):
        raise UsageError(f"bad value for 'kind': {kind!r}")
    t = model.T if cfg["t"] is None else float(cfg["t"])
    t0 = time.perf_counter()
    grid = SimGrid(model.T, cfg["grid"])
    X = sample_paths(model, grid, cfg["paths"], cfg["seed"], threads=_threads(cfg)).paths
    rep = ExperimentReport("integrate", model.to_dict(), {
        "f": g.name, "kind": kind, "t": t, "eps_ladder": ladder, "m": cfg["paths"], "n": cfg["grid"],
        "seed": cfg["seed"]})
    try:
        for eps in ladder:
            if kind == "skorohod":
                v = skorohod_estimate(X, g, model, eps, t, grid)
            else:
                v = reg_integral(g(X), X, eps, kind, t, grid)
            rep.add_estimate(f"mean eps={eps:.6g}", float(np.mean(v)),
                             float(np.std(v, ddof=1) / np.sqrt(v.size)))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep.wall_seconds = time.perf_counter() - t0
    return [rep], False, None


def _tol_kwargs(fn, tol: dict, strict: bool) -> dict:
    params = inspect.signature(fn).parameters
    unknown = [k for k in tol if k not in params]
    if strict and unknown:
        raise UsageError(f"unknown tolerance key {unknown[0]!r}")
    return {k: v for k, v in tol.items() if k in params}


def cmd_qv(cfg):
    model = _model(cfg)
    kw = dict(eps_ladder=cfg["eps"], t=float(cfg["t"]), m=cfg["paths"], seed=cfg["seed"],
              n=cfg["grid"], threads=_threads(cfg))
    kw.update(_tol_kwargs(exp_qv, cfg["tol"], True))
    try:
        rep = exp_qv(model, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return [rep], False, None


def cmd_check(cfg):
    model = _model(cfg)
    t0 = time.perf_counter()
    try:
        r = check_assumptions(model, int(cfg["grid_n"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = ExperimentReport("check", model.to_dict(), {"grid_n": int(cfg["grid_n"])})
    for key in "abcd":
        rep.notes.append(f"assumption {key.upper()}: {getattr(r, key + '_holds')}")
    rep.notes.append("evidence: " + json.dumps(r.evidence, sort_keys=True))
    if model.has_Q:
        mc = membership_condition(model)
        for c, v in zip(mc.cutoffs, mc.integrals):
            rep.add_estimate(f"int_c^T Q|Q''| c={c:.6g}", v)
        rep.notes.append(f"membership condition: {mc.verdict}")
    rep.wall_seconds = time.perf_counter() - t0
    return [rep], False, None


# flag -> experiment parameter name(s), first accepted one wins
VERIFY_MAP = {
    "paths": ("m",),
    "grid": ("n",),
    "eps": ("eps_ladder", "eps"),
    "seed": ("seed",),
    "f": ("f",),
    "phi": ("phi",),
    "h": ("h",),
    "t": ("t",),
    "tau": ("tau",),
    "threads": ("threads",),
}


def cmd_verify(cfg):
    name = _need(cfg, "experiment")
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}; known: {', '.join(sorted(EXPERIMENTS))}")
    fn = EXPERIMENTS[name]
    params = inspect.signature(fn).parameters
    kw = {}
    extra = cfg["params"] or {}
    if isinstance(extra, str):
        try:
            extra = json.loads(extra)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad --params JSON: {exc}") from None
    for k, v in extra.items():
        if k not in params:
            raise UsageError(f"unknown parameter {k!r} for {name}")
        kw[k] = v
    if cfg["model"] is not None:
        key = "model" if "model" in params else "kappa" if "kappa" in params else None
        if key is None:
            raise UsageError(f"{name} takes no model")
        kw[key] = cfg["model"] if key == "model" else _kappa_spec(cfg["model"])
    for flag, targets in VERIFY_MAP.items():
        if cfg.get(flag) is None or (flag == "seed" and "seed" not in params):
            continue
        target = next((t for t in targets if t in params), None)
        if target is None:
            if flag == "threads":
                continue
            raise UsageError(f"option --{flag} does not apply to {name}")
        kw[target] = cfg[flag]
    if "threads" in params:
        kw["threads"] = _threads(cfg)
    kw.update(_tol_kwargs(fn, cfg["tol"], True))
    missing = [p for p, v in params.items() if v.default is inspect.Parameter.empty and p not in kw]
    if missing:
        raise UsageError(f"missing parameter {missing[0]!r} for {name}")
    try:
        rep = fn(**kw)
    except (ValueError, KeyError, TypeError, CapabilityError) as exc:
        raise UsageError(f"{name}: {exc}") from None
    return [rep], True, None


def _kappa_spec(spec):
    model = load_model(spec)
    if not isinstance(model, KernelModel):
        raise UsageError("exp_kernel_identity needs a kernel model, e.g. kernel:tent")
    return model.kappa.to_dict()


def cmd_suite(cfg):
    try:
        configs = suite_configs(cfg["preset"], cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    only = [o.strip() for o in cfg["only"].split(",")] if cfg["only"] else None
    tol = cfg["tol"]
    if tol:
        used = {k for _, name, _ in configs for k in tol if k in inspect.signature(EXPERIMENTS[name]).parameters}
        unknown = sorted(set(tol) - used)
        if unknown:
            raise UsageError(f"unknown tolerance key {unknown[0]!r}")
    reports = []
    for label, name, kwargs in configs:
        if only and not any(label.startswith(o) for o in only):
            continue
        fn = EXPERIMENTS[name]
        kw = dict(kwargs)
        kw.update(_tol_kwargs(fn, tol, False))
        if "threads" in inspect.signature(fn).parameters:
            kw["threads"] = _threads(cfg)
        rep = fn(**kw)
        rep.label = label
        reports.append(rep)
        print(f"{'PASS' if rep.passed else 'FAIL'}  {label}", file=sys.stderr, flush=True)
    return reports, True, None


COMMANDS = {
    "simulate": cmd_simulate,
    "norm": cmd_norm,
    "inner": cmd_inner,
    "integrate": cmd_integrate,
    "qv": cmd_qv,
    "check": cmd_check,
    "verify": cmd_verify,
    "suite": cmd_suite,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def bundle(command: str, cfg: dict, reports, timestamps: bool) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": _public_config(cfg),
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict(timestamps) for r in reports],
    }


def estimates_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerows(r.csv_rows())
    return buf.getvalue()


def _summary(reports) -> str:
    lines = []
    for r in reports:
        head = r.label or r.name
        status = "" if not r.verdicts else (" PASS" if r.passed else " FAIL")
        lines.append(f"{head}{status}")
        for e in r.estimates:
            ref = "" if e["reference"] is None else f"  ref={e['reference']}"
            se = "" if e["se"] is None else f"  se={e['se']}"
            lines.append(f"  {e['label']}: {e['estimate']}{se}{ref}")
        for v in r.verdicts:
            lines.append(f"  [{'ok' if v['passed'] else 'FAILED'}] {v['criterion']} ({v['tolerance']})")
        for n in r.notes:
            lines.append(f"  note: {n}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        reports, judged, ens = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"singcov {args.command}: error: {exc}", file=sys.stderr)
        return 2
    data = bundle(args.command, cfg, reports, not args.no_timestamp)
    text = json.dumps(data, sort_keys=True, indent=2) + "\n"
    if args.command in ("norm", "inner"):
        est = {e["label"]: e["estimate"] for e in reports[0].estimates}
        est["formal"] = reports[0].params["formal"]
        print(json.dumps(est, sort_keys=True))
    else:
        print(_summary(reports))
    if cfg["out"]:
        os.makedirs(cfg["out"], exist_ok=True)
        with open(os.path.join(cfg["out"], "report.json"), "w") as fh:
            fh.write(text)
        with open(os.path.join(cfg["out"], "estimates.csv"), "w") as fh:
            fh.write(estimates_csv(reports))
        if ens is not None and not getattr(args, "no_paths_csv", False):
            ens.to_csv(os.path.join(cfg["out"], "paths.csv"))
    if judged and not data["passed"]:
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
