"""Experiment runner: ``python -m fracgrad <subcommand> [--config FILE] [--key value ...]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import DataSpec
from .errors import DegenerateInput, InvalidArgument, NumericalFailure, SingularInput
from .exponents import check_order, critical_exponents
from .grid import build_grid

SUBCOMMANDS = ("solve", "scan", "validate-operator", "dirac", "nonexist", "compare")
SCHEMES = ("linear", "monotone", "fixed-point", "reaction", "newton", "regularized")
SCAN_KINDS = ("grad-integrability", "sobolev", "hardy", "nonexist")
REPORT_SCHEMA = "fracgrad/report"
REPORT_VERSION = 1

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class ConfigError(InvalidArgument):
    pass


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _int(text):
    return _ints(text)[0] if str(text).strip() else None


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


# key -> (parser, default)
KEYS = {
    "s": (_float, 0.75),
    "p": (_float, None),
    "m": (_float, 1.0),
    "lambda": (_float, 0.0),
    "beta": (_float, 0.0),
    "n_grid": (_int, 400),
    "refinements": (_ints, [200, 400, 800, 1600]),
    "f": (str, "const:1"),
    "g": (str, None),
    "f1": (str, None),
    "f2": (str, None),
    "scheme": (str, "linear"),
    "kind": (str, "grad-integrability"),
    "values": (_floats, None),
    "eps": (_floats, [0.2, 0.1, 0.05, 0.025]),
    "tol": (_float, None),
    "max_iter": (_int, 500),
    "damping": (_float, 0.5),
    "l": (_float, 1.0),
    "mass": (_float, 1.0),
    "w_exp": (_float, 0.0),
    "source": (str, "boundary"),
    "seed": (_int, 0),
    "out_dir": (str, None),
    "dump_matrix": (str, None),
}
ALIASES = {"a": "values", "q": "values", "t": "values", "p_values": "values", "n": "n_grid", "lam": "lambda"}


@dataclass
class ExperimentConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, **{k: self.values[k] for k in sorted(self.values)}}


def _canonical(key: str) -> str:
    key = key.strip().replace("-", "_")
    return ALIASES.get(key, key)


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment.  Unknown keys are errors."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _canonical(key)
        if key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = KEYS[key][0](value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracgrad", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value file; flags override it")
        for key in KEYS:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
        for alias, key in ALIASES.items():
            sp.add_argument("--" + alias.replace("_", "-"), dest=key, default=None, help=argparse.SUPPRESS)
    return parser


def parse_config(argv) -> ExperimentConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    merged = {k: d for k, (_, d) in KEYS.items()}
    if ns.config:
        merged.update(read_config_file(ns.config))
    for key, (conv, _) in KEYS.items():
        raw = getattr(ns, key, None)
        if raw is not None:
            merged[key] = conv(raw)
    env_out = os.environ.get("OUT_DIR")
    if env_out:
        merged["out_dir"] = env_out
    if merged["out_dir"] is None:
        merged["out_dir"] = "out"
    return ExperimentConfig(ns.subcommand, merged)


# ---------------------------------------------------------------- validation


def _need(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg: ExperimentConfig) -> None:
    """Check every numeric field the dispatched operation uses before any work."""
    v = cfg.values
    sub = cfg.subcommand
    check_order(v["s"])
    _need(v["n_grid"] is not None and v["n_grid"] >= 3, "n_grid must be an integer >= 3")
    _need(v["max_iter"] is not None and v["max_iter"] >= 1, "max_iter must be >= 1")
    _need(0 < v["damping"] <= 1, "damping must lie in (0, 1]")
    _need(v["tol"] is None or v["tol"] > 0, "tol must be positive")
    _need(v["m"] >= 1, "m must be >= 1")
    critical_exponents(1, v["s"], v["m"], v["beta"])
    if sub in ("scan", "nonexist"):
        r = v["refinements"]
        _need(len(r) >= 2 and all(a < b for a, b in zip(r, r[1:])) and r[0] >= 3, "refinements must increase, >= 3")
    for key in ("f", "g", "f1", "f2"):
        if v[key] is not None:
            DataSpec.parse(v[key])
    s, p = v["s"], v["p"]
    if sub == "solve":
        _need(v["scheme"] in SCHEMES, f"scheme must be one of {', '.join(SCHEMES)}")
        if v["scheme"] != "linear":
            _need(p is not None, "the nonlinear schemes need p")
        if v["scheme"] in ("monotone", "reaction"):
            _need(1 < p < 2 * s, f"scheme {v['scheme']} needs 1 < p < 2s = {2 * s:g}")
        if v["scheme"] == "fixed-point":
            _need(2 * s <= p < s / (1 - s) * (1 - 1e-12), f"fixed-point needs 2s <= p < s/(1-s) = [{2 * s:g}, {s / (1 - s):g})")
            _need(v["l"] > 0, "l must be positive")
            _need(v["m"] > 1 / ((p / (p - 1)) * (2 * s - 1)), "m too small for the fixed-point scheme")
        if v["scheme"] == "reaction":
            _need(v["g"] is not None, "reaction needs g")
            _need(v["lambda"] >= 0, "lambda must be >= 0")
        if v["scheme"] in ("newton", "regularized"):
            _need(p >= 1, "p must be >= 1")
    elif sub == "scan":
        _need(v["kind"] in SCAN_KINDS, f"kind must be one of {', '.join(SCAN_KINDS)}")
        _need(v["values"], "scan needs a sweep list (--a, --q, --t or --values)")
        if v["kind"] == "hardy":
            _need(p is None or p > 1, "Hardy exponent p must be > 1")
        if v["kind"] in ("grad-integrability", "sobolev"):
            _need(all(a >= 1 for a in v["values"]), "sweep exponents must be >= 1")
        _need(v["source"] in ("boundary", "interior"), "source must be boundary or interior")
    elif sub == "dirac":
        _need(p is not None and p >= 1, "dirac needs p >= 1")
        e = v["eps"]
        _need(len(e) >= 2 and all(a > b > 0 for a, b in zip(e, e[1:])), "eps must be a decreasing positive list")
    elif sub == "nonexist":
        _need(v["values"] or p is not None, "nonexist needs --p or a list of p values")
    elif sub == "compare":
        _need(v["f1"] is not None and v["f2"] is not None, "compare needs f1 and f2")
        _need(v["scheme"] in ("linear", "monotone"), "compare supports the linear and monotone schemes")
        if v["scheme"] == "monotone":
            _need(p is not None and 1 < p < 2 * s, f"monotone needs 1 < p < 2s = {2 * s:g}")


# ---------------------------------------------------------------- runners


def _write_field_csv(path, grid, columns: dict):
    names = list(columns)
    with open(path, "w") as fh:
        fh.write(",".join(["x"] + names) + "\n")
        for i in range(grid.n_interior):
            fh.write(",".join([repr(float(grid.nodes[i]))] + [repr(float(columns[k][i])) for k in names]) + "\n")


def run_solve(cfg, out: Path):
    from .operator import assemble
    from .solvers import (
        FixedPointConfig,
        MonotoneSchedule,
        solve_fixed_point,
        solve_linear,
        solve_monotone,
        solve_newton,
        solve_reaction,
        solve_regularized,
    )
    from .solvers.report import SolveReport

    v = cfg.values
    grid = build_grid(v["n_grid"])
    op = assemble(grid, v["s"])
    f = DataSpec.parse(v["f"]).sample(grid)
    scheme = v["scheme"]
    p = v["p"]
    if scheme == "linear":
        u = solve_linear(op, f)
        res = float(np.max(np.abs(op.matrix @ u.values - f.values)))
        rep = SolveReport("linear", u, True, "direct", 1, 1, [res], equation_residual=res, tol=v["tol"] or 1e-10)
    elif scheme == "monotone":
        sched = MonotoneSchedule(damping=v["damping"], max_iter=v["max_iter"], **({"tol_outer": v["tol"]} if v["tol"] else {}))
        rep = solve_monotone(op, f, p, sched)
    elif scheme == "reaction":
        g = DataSpec.parse(v["g"]).sample(grid)
        kmax = int(2 ** math.ceil(math.log2(max(2.0, float(np.max(np.abs(np.concatenate([f.values, g.values]))))))))
        sched = MonotoneSchedule(
            k_max=max(kmax, 1), k_factor=2.0, damping=v["damping"], max_iter=v["max_iter"], **({"tol_outer": v["tol"]} if v["tol"] else {})
        )
        rep = solve_reaction(op, f, g, v["lambda"], p, sched)
    elif scheme == "fixed-point":
        fp = FixedPointConfig(p=p, m=v["m"], l=v["l"], max_iter=v["max_iter"], tol=v["tol"] or 1e-10)
        rep = solve_fixed_point(op, f, fp)
    elif scheme == "newton":
        rep = solve_newton(op, f, p, tol=v["tol"] or 1e-10, max_iter=v["max_iter"])
    else:
        n_reg = 8.0
        rep = solve_regularized(op, f, n_reg, 10.0, p, v["damping"], v["tol"] or 1e-10, v["max_iter"])
    rep.write_csv(out / "history.csv")
    _write_field_csv(out / "solution.csv", grid, {"u": rep.final.values, "f": f.values})
    summary = [
        f"scheme: {rep.scheme}",
        f"converged: {rep.converged} ({rep.reason})",
        f"outer iterations: {rep.iterates_outer}, inner iterations: {rep.iterates_inner}",
        f"equation residual: {rep.equation_residual:.3e}",
        f"ordering violation: {rep.monotone_violation:.3e}",
        f"max u: {float(np.max(rep.final.values)):.10g}",
    ]
    return rep.to_dict(), summary


def run_scan(cfg, out: Path):
    from . import diagnostics as dg

    v = cfg.values
    kind = v["kind"]
    if kind == "grad-integrability":
        res = dg.gradient_integrability_scan(v["s"], v["values"], v["refinements"], v["f"], v["w_exp"])
    elif kind == "sobolev":
        res = dg.sobolev_gain_scan(v["s"], v["m"], v["values"], v["refinements"], v["source"])
    elif kind == "hardy":
        res = dg.hardy_scan(v["values"], v["p"] or 2.0, v["refinements"])
    else:
        res = dg.nonexistence_scan(v["s"], v["values"], v["refinements"])
    return _scan_outputs(res, out)


def _scan_outputs(res, out: Path):
    res.write_csv(out / "scan.csv")
    lines = [f"scan: {res.kind}"]
    for i, prm in enumerate(res.parameter_grid):
        d = res.details[i]
        lines.append(
            f"  {prm:g}: {res.verdicts[i]} (last ratio {d.ratio:.4f}, increment exponent {d.increment_exponent:.4f}, rule {d.rule})"
        )
    pred = res.extras.get("predicted_threshold")
    lines.append(f"empirical threshold: {res.threshold:g}" + (f", predicted {pred:g}" if pred is not None else ""))
    lines.append(f"verdicts monotone: {res.monotone}")
    return res.to_dict(), lines


def run_dirac(cfg, out: Path):
    from .diagnostics import dirac_blowup_scan

    v = cfg.values
    res = dirac_blowup_scan(v["s"], v["p"], v["eps"], v["n_grid"], v["mass"])
    d, lines = _scan_outputs(res, out)
    lines.insert(1, "note: " + res.extras["surrogate"])
    lines.append("halving ratios: " + ", ".join(f"{r:.4f}" for r in res.extras["halving_ratios"]))
    return d, lines


def run_nonexist(cfg, out: Path):
    from .diagnostics import nonexistence_scan

    v = cfg.values
    ps = v["values"] or [v["p"]]
    res = nonexistence_scan(v["s"], ps, v["refinements"])
    d, lines = _scan_outputs(res, out)
    for prm, lab in zip(res.parameter_grid, res.extras["labels"]):
        lines.append(f"  p={prm:g}: {lab}")
    return d, lines


def run_validate_operator(cfg, out: Path):
    from .operator import assemble, dump_matrix
    from .oracles import fractional_laplacian_1d

    v = cfg.values
    s = v["s"]
    grid = build_grid(v["n_grid"])
    op = assemble(grid, s)
    x = grid.nodes
    w = (1 - x * x) ** s
    aw = op.matrix @ w
    mid = np.abs(x) <= 0.5
    spread = float((aw[mid].max() - aw[mid].min()) / np.mean(aw[mid]))
    probes = [-0.5, -0.25, 0.0, 0.25, 0.5]
    oracle_w = lambda t: np.maximum(1 - np.asarray(t) ** 2, 0.0) ** s
    rows = []
    for xp in probes:
        i = int(np.argmin(np.abs(x - xp)))
        ref = fractional_laplacian_1d(oracle_w, float(x[i]), s)
        rows.append({"x": float(x[i]), "discrete": float(aw[i]), "oracle": ref, "rel_error": abs(aw[i] / ref - 1)})
    A = op.matrix
    off = A - np.diag(np.diag(A))
    result = {
        "n_grid": grid.n_interior,
        "s": s,
        "relative_spread": spread,
        "oracle_points": rows,
        "max_oracle_error": max(r["rel_error"] for r in rows),
        "symmetry_defect": float(np.max(np.abs(A - A.T)) / np.max(np.abs(A))),
        "offdiagonal_max": float(off.max()),
        "min_dominance_margin": float(np.min(np.diag(A) - np.abs(off).sum(axis=1))),
    }
    if v["dump_matrix"]:
        dump_matrix(op, out / v["dump_matrix"])
    lines = [
        f"operator check s={s:g}, n={grid.n_interior}",
        f"relative spread of A w over |x| <= 0.5: {spread:.3e}",
        f"max relative deviation from quadrature oracle: {result['max_oracle_error']:.3e}",
        f"symmetry defect: {result['symmetry_defect']:.3e}",
    ]
    return result, lines


def run_compare(cfg, out: Path):
    from .operator import assemble
    from .solvers import solve_linear, solve_monotone

    v = cfg.values
    grid = build_grid(v["n_grid"])
    op = assemble(grid, v["s"])
    f1 = DataSpec.parse(v["f1"]).sample(grid)
    f2 = DataSpec.parse(v["f2"]).sample(grid)
    if np.any(f1.values > f2.values):
        raise ConfigError("compare needs f1 <= f2 at every node")
    if v["scheme"] == "linear":
        u1, u2 = solve_linear(op, f1), solve_linear(op, f2)
    else:
        if np.any(f1.values < 0):
            raise ConfigError("the monotone scheme needs f1 >= 0")
        u1 = solve_monotone(op, f1, v["p"]).final
        u2 = solve_monotone(op, f2, v["p"]).final
    violation = float(np.max(u1.values - u2.values))
    tol = 1e-6 * float(np.max(np.abs(u2.values)))
    result = {
        "scheme": v["scheme"],
        "worst_violation": violation,
        "tolerance": tol,
        "pass": bool(violation <= tol),
        "u2_nonnegative": bool(np.min(u2.values) >= 0),
    }
    _write_field_csv(out / "compare.csv", grid, {"u1": u1.values, "u2": u2.values})
    lines = [f"compare ({v['scheme']}): worst violation of u1 <= u2 = {violation:.3e}, tolerance {tol:.3e}",
             "PASS" if result["pass"] else "FAIL"]
    return result, lines


RUNNERS = {
    "solve": run_solve,
    "scan": run_scan,
    "dirac": run_dirac,
    "nonexist": run_nonexist,
    "validate-operator": run_validate_operator,
    "compare": run_compare,
}


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def run(cfg: ExperimentConfig) -> int:
    validate(cfg)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    result, lines = RUNNERS[cfg.subcommand](cfg, out)
    v = cfg.values
    exps = critical_exponents(1, v["s"], v["m"], v["beta"]).as_dict()
    report = {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_VERSION,
        "tool_version": __version__,
        "config": cfg.echo(),
        "exponents": exps,
        "result": result,
    }
    body = json.dumps(report, sort_keys=True, indent=1, default=_json_default)
    # the timestamp sits on its own first line so that runs can be diffed without it
    text = '{\n "timestamp": ' + json.dumps(_timestamp()) + ",\n" + body[2:] + "\n"
    (out / "report.json").write_text(text)
    header = [f"fracgrad {__version__} {cfg.subcommand}", "exponents: " + ", ".join(f"{k}={exps[k]}" for k in sorted(exps))]
    (out / "summary.txt").write_text("\n".join(header + lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except SystemExit as exc:  # argparse
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    except (InvalidArgument, DegenerateInput, SingularInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
