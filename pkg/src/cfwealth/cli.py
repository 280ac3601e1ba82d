"""Command-line experiment runner.

Subcommands ``dd``, ``dc``, ``kinetic``, ``fp`` and ``converge`` run one
experiment each and write data files plus ``summary.json`` into ``--out``.
``validate`` checks a configuration without running it.

Configuration files are flat ``key = value`` text (``#`` starts a comment).
Precedence is schema defaults, then the file, then command-line flags. When a
file is given, the keys marked required must be present in it or on the
command line; without a file every key falls back to its documented default.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure, 3 an
enabled check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import chain_dc, chain_dd, fokker_planck, kinetic, stats
from .simplex import BetaMarginalSpec, beta_cdf, uniform_simplex_array

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
MODELS = ("dd", "dc", "kinetic", "fp", "converge")
FORMATS = ("csv", "json")
U64_MAX = 2**64 - 1


def _tokens(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [tok for tok in str(value).replace(" ", "").split(",") if tok]


def _int_list(value) -> list[int]:
    return [int(tok) for tok in _tokens(value)]


def _float_list(value) -> list[float]:
    return [float(tok) for tok in _tokens(value)]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable[[Any], Any]
    default: Any
    help: str
    required: bool = False
    check: Callable[[Any], str | None] | None = None


def _at_least(lo):
    return lambda v: None if v >= lo else f"must be >= {lo}"


def _positive(v):
    return None if v > 0 else "must be positive"


def _fraction(v):
    return None if 0 <= v < 1 else "must lie in [0, 1)"


def _open_unit(v):
    return None if 0 < v < 1 else "must lie in (0,1)"


SCHEMAS: dict[str, list[Param]] = {
    "dd": [
        Param("agents", int, 3, "number of agents N", True, _at_least(2)),
        Param("coins", int, 4, "number of coins n", True, _at_least(0)),
        Param("steps", int, 100_000, "trajectory length", False, _at_least(0)),
        Param("thin", int, 1, "keep every thin-th state", False, _at_least(1)),
        Param("matrix", _bool, False, "build the exact kernel and check it"),
        Param("check_uniform", _bool, False, "check empirical occupation against uniform"),
        Param("tv_tol", float, 0.01, "TV tolerance for the occupation check", False, _positive),
    ],
    "dc": [
        Param("agents", int, 5, "number of agents N", True, _at_least(2)),
        Param("steps", int, 200_000, "trajectory length", True, _at_least(0)),
        Param("thin", int, 0, "thinning (0 means N^2)", False, _at_least(0)),
        Param("burn_in", float, 0.1, "discarded fraction of the trajectory", False, _fraction),
        Param("check_beta", _bool, False, "KS-test each coordinate against Beta(1, N-1)"),
    ],
    "kinetic": [
        Param("agents", int, 10_000, "population size", True, _at_least(2)),
        Param("lambda", float, 0.25, "propensity to invest", True, _open_unit),
        Param("noise", str, "zero", "zero | two_point | uniform", True),
        Param("sigma", float, 0.0, "noise standard deviation"),
        Param("t_end", float, 10.0, "final kinetic time", True, _positive),
        Param("record_dt", float, 0.1, "moment recording interval", False, _positive),
        Param("moments", _float_list, [], "extra moment orders s, comma separated"),
        Param("init_mean", float, 1.0, "mean of the exponential initial wealths", False, _positive),
        Param("fit_lo", float, 1.0, "variance-rate fit window start", False, _at_least(0)),
        Param("fit_hi", float, 5.0, "variance-rate fit window end", False, _positive),
        Param("check_decay", _bool, False, "check mean conservation and variance rate (zero noise)"),
        Param("check_tail", _bool, False, "check for an exponential tail at t_end"),
        Param("tail_quantile", float, 0.8, "tail fit cutoff quantile", False, _open_unit),
    ],
    "fp": [
        Param("gamma", float, 1.0, "sigma_eta^2 / lambda", True, _positive),
        Param("mean", float, 1.0, "mean wealth m", True, _positive),
        Param("w_max", float, 50.0, "domain truncation", True, _positive),
        Param("cells", int, 256, "number of cells", True, _at_least(16)),
        Param("dt", float, 0.01, "time step", True, _positive),
        Param("t_end", float, 30.0, "final time", True, _positive),
        Param("init", str, "uniform", "uniform | stationary"),
        Param("bump_hi", float, 2.0, "initial density is uniform on [0, bump_hi]", False, _positive),
        Param("record_every", int, 100, "diagnostics every k steps", False, _at_least(1)),
        Param("l1_tol", float, 0.02, "L1 tolerance to the stationary profile", False, _positive),
    ],
    "converge": [
        Param("agents", int, 3, "number of agents N", True, _at_least(2)),
        Param("n_list", _int_list, [10, 100, 1000], "coin totals n, comma separated", True),
        Param("k", int, 5, "number of steps", True, _at_least(0)),
        Param("replicas", int, 10_000, "replicas per chain", True, _at_least(100)),
    ],
}

COMMON = ("model", "seed", "out", "format")


@dataclass
class ExperimentConfig:
    model: str | None
    parameters: dict = field(default_factory=dict)
    seed: int | None = 0
    output_dir: str = "results"
    format: str = "csv"
    # key -> line number for values read from a file
    lines: dict = field(default_factory=dict)
    from_file: bool = False

    def resolved(self) -> dict:
        return {
            "model": self.model,
            "seed": self.seed,
            "out": self.output_dir,
            "format": self.format,
            **self.parameters,
        }


def parse_config_text(text: str) -> tuple[dict, dict, list[str]]:
    """Parse ``key = value`` lines into ``(values, line_numbers, diagnostics)``."""
    values, lines, diags = {}, {}, []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            diags.append(f"line {no}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key in values:
            diags.append(f"line {no}: duplicate key {key!r} (first set on line {lines[key]})")
        values[key] = val
        lines[key] = no
    return values, lines, diags


def build_config(model: str | None, file_values: dict | None, cli_values: dict, lines: dict | None = None) -> ExperimentConfig:
    """Merge defaults, file values and flag values into an unvalidated configuration."""
    raw = dict(file_values or {})
    raw.update({k: v for k, v in cli_values.items() if v is not None})
    model = raw.pop("model", model) if model is None else model
    raw.pop("model", None)
    from_file = file_values is not None
    params = {}
    for p in SCHEMAS.get(model, []):
        if p.name in raw:
            params[p.name] = raw.pop(p.name)
        elif not (from_file and p.required):
            params[p.name] = p.default
    seed = raw.pop("seed", None if from_file else 0)
    out = raw.pop("out", "results")
    fmt = raw.pop("format", "csv")
    # anything left over is unknown; keep it so validation can report it
    params.update({f"?{k}": v for k, v in raw.items()})
    return ExperimentConfig(model, params, seed, out, fmt, dict(lines or {}), from_file)


def _where(cfg: ExperimentConfig, key: str) -> str:
    return f"line {cfg.lines[key]}: " if key in cfg.lines else ""


def validate(config: ExperimentConfig) -> list[str]:
    """All schema violations of ``config``; parsed values are written back on success."""
    diags = []
    if config.model is None:
        diags.append("missing required key 'model'")
    elif config.model not in SCHEMAS:
        diags.append(f"{_where(config, 'model')}model must be one of {', '.join(MODELS)}")
    if config.seed is None:
        diags.append("missing required key 'seed'")
    else:
        try:
            seed = int(config.seed)
            if not 0 <= seed <= U64_MAX:
                raise ValueError
            config.seed = seed
        except (TypeError, ValueError):
            diags.append(f"{_where(config, 'seed')}seed must be an unsigned 64-bit integer")
    if config.format not in FORMATS:
        diags.append(f"{_where(config, 'format')}format must be csv or json")
    if config.model not in SCHEMAS:
        return diags
    parsed = {}
    for p in SCHEMAS[config.model]:
        if p.name not in config.parameters:
            diags.append(f"missing required key {p.name!r}")
            continue
        try:
            val = p.parse(config.parameters[p.name])
        except (TypeError, ValueError) as exc:
            diags.append(f"{_where(config, p.name)}{p.name}: cannot parse ({exc})")
            continue
        msg = p.check(val) if p.check else None
        if msg:
            diags.append(f"{_where(config, p.name)}{p.name} {msg}")
        parsed[p.name] = val
    for key in config.parameters:
        if key.startswith("?"):
            diags.append(f"{_where(config, key[1:])}unknown key {key[1:]!r} for model {config.model}")
    diags.extend(_cross_checks(config.model, parsed, config))
    if not diags:
        config.parameters = parsed
    return diags


def _cross_checks(model: str, p: dict, config: ExperimentConfig) -> list[str]:
    out = []
    if model == "kinetic" and {"lambda", "noise", "sigma"} <= p.keys():
        for msg in kinetic.exchange_param_problems(p["lambda"], p["noise"], p["sigma"]):
            if msg.startswith("lambda"):  # already reported by the schema check
                continue
            out.append(f"{_where(config, 'sigma' if 'sigma' in msg else 'noise')}{msg}")
        if p.get("check_decay") and p["noise"] != "zero":
            out.append(f"{_where(config, 'check_decay')}check_decay applies to zero noise only")
        if "fit_lo" in p and "fit_hi" in p and p["fit_lo"] >= p["fit_hi"]:
            out.append("fit_lo must be below fit_hi")
    if model == "fp" and {"mean", "w_max"} <= p.keys() and p["w_max"] <= p["mean"]:
        out.append(f"{_where(config, 'w_max')}w_max must exceed the mean wealth")
    if model == "fp" and p.get("init") not in (None, "uniform", "stationary"):
        out.append(f"{_where(config, 'init')}init must be uniform or stationary")
    if model == "converge" and "n_list" in p:
        if not p["n_list"]:
            out.append("n_list must not be empty")
        elif min(p["n_list"]) < 1:
            out.append("every n in n_list must be at least 1")
    if model == "dd" and {"agents", "coins"} <= p.keys() and p.get("matrix"):
        size = chain_dd.state_count(p["agents"], p["coins"])
        if size > chain_dd.DEFAULT_STATE_CAP:
            out.append(f"matrix has {size} states, above the cap {chain_dd.DEFAULT_STATE_CAP}")
    return out


# ---------------------------------------------------------------- outputs


class Writer:
    def __init__(self, out_dir: Path, fmt: str):
        self.dir = out_dir
        self.fmt = fmt
        self.files: list[str] = []

    def table(self, stem: str, columns: list[str] | None, rows: np.ndarray, integer: bool = False):
        rows = np.asarray(rows)
        if self.fmt == "json":
            path = self.dir / f"{stem}.json"
            data = rows.tolist()
            doc = {"columns": columns, "rows": data} if columns else data
            path.write_text(json.dumps(doc) + "\n")
        else:
            path = self.dir / f"{stem}.csv"
            fmt = "%d" if integer else "%.17g"
            header = ",".join(columns) if columns else ""
            np.savetxt(path, rows, fmt=fmt, delimiter=",", header=header, comments="")
        self.files.append(path.name)


def _check(name, statistic, critical, n, passed) -> dict:
    return {
        "test": name,
        "statistic": float(statistic),
        "critical_value": float(critical),
        "n": int(n),
        "pass": bool(passed),
    }


def _run_dd(p, rng, w: Writer):
    n_agents, n_coins = p["agents"], p["coins"]
    start = chain_dd.DiscretePoint(tuple(chain_dd.sample_uniform_states(n_agents, n_coins, 1, rng)[0]))
    traj = chain_dd.run_dd(start, p["steps"], rng, p["thin"])
    steps = np.arange(traj.shape[0]) * p["thin"]
    w.table("trajectory", ["step"] + [f"c{k}" for k in range(n_agents)], np.column_stack([steps, traj]), integer=True)
    statistics, checks = {}, []
    size = chain_dd.state_count(n_agents, n_coins)
    stationary = None
    if p["matrix"]:
        mat = chain_dd.build_transition_matrix(n_agents, n_coins)
        w.table("matrix", None, mat)
        row_dev = float(np.max(np.abs(mat.sum(axis=1) - 1)))
        col_dev = float(np.max(np.abs(mat.sum(axis=0) - 1)))
        statistics.update(states=size, max_row_sum_error=row_dev, max_col_sum_error=col_dev)
        checks.append(_check("row_stochastic", row_dev, 1e-12, size, row_dev <= 1e-12))
        checks.append(_check("doubly_stochastic", max(row_dev, col_dev), 1e-12, size, max(row_dev, col_dev) <= 1e-12))
        stationary = chain_dd.stationary_distribution(mat)
        tv_u = stats.total_variation(stationary, np.full(size, 1.0 / size))
        statistics["stationary_tv_to_uniform"] = tv_u
        checks.append(_check("stationary_uniform", tv_u, 1e-10, size, tv_u < 1e-10))
    if size <= 10**6:
        idx = np.fromiter((chain_dd.rank_state(r) for r in traj.tolist()), dtype=np.int64, count=traj.shape[0])
        freq = np.bincount(idx, minlength=size) / idx.size
        tv_emp = stats.total_variation(freq, np.full(size, 1.0 / size))
        statistics["occupation_tv_to_uniform"] = tv_emp
        if stationary is not None:
            statistics["occupation_tv_to_stationary"] = stats.total_variation(freq, stationary)
        if p["check_uniform"]:
            checks.append(_check("occupation_uniform", tv_emp, p["tv_tol"], idx.size, tv_emp < p["tv_tol"]))
    return statistics, checks


def _run_dc(p, rng, w: Writer):
    n_agents = p["agents"]
    thin = p["thin"] or n_agents**2
    start = uniform_simplex_array(n_agents, 1, rng)[0]
    traj = chain_dc.run_dc_array(start, p["steps"], rng, thin)
    steps = np.arange(traj.shape[0]) * thin
    w.table("trajectory", ["step"] + [f"x{k}" for k in range(n_agents)], np.column_stack([steps, traj]))
    statistics = {"thin": thin, "burn_in": p["burn_in"], "samples": int(traj.shape[0])}
    checks = []
    if p["check_beta"]:
        kept = traj[int(math.ceil(p["burn_in"] * traj.shape[0])):]
        spec = BetaMarginalSpec.uniform_marginal(n_agents)
        for k in range(n_agents):
            res = stats.ks_statistic(kept[:, k], lambda x: beta_cdf(spec, x))
            checks.append(_check(f"ks_beta_x{k}", res.statistic, res.critical_value, res.n, res.passed))
    return statistics, checks


def _run_kinetic(p, rng, w: Writer):
    params = kinetic.ExchangeParams(p["lambda"], p["noise"], p["sigma"])
    pop = kinetic.WealthPopulation.exponential(p["agents"], rng, p["init_mean"])
    final, series = kinetic.dsmc_run(pop, p["t_end"], params, rng, p["record_dt"], p["moments"])
    cols = ["t", "m1", "m2"] + [f"m{s:g}" for s in p["moments"]]
    w.table("moments", cols, series.as_array())
    w.table("population", None, final.wealths[:, None])
    m1 = np.array(series.m1)
    drift = float(np.max(np.abs(m1 / m1[0] - 1)))
    statistics = {"mean_relative_drift": drift, "final_time": final.time}
    checks = []
    s2 = kinetic.moment_rate(2, params.lam)
    hi = min(p["fit_hi"], p["t_end"])
    if hi > p["fit_lo"]:
        rate = kinetic.fit_variance_rate(series, p["fit_lo"], hi)
        statistics.update(variance_rate=rate, moment_rate_s2=s2)
    if p["check_decay"]:
        checks.append(_check("mean_conserved", drift, 1e-12, final.size, drift <= 1e-12))
        rel = abs(statistics["variance_rate"] / s2 - 1)
        checks.append(_check("variance_rate", rel, 0.1, final.size, rel <= 0.1))
    if p["check_tail"]:
        fit = stats.fit_exponential_tail(final.wealths, p["tail_quantile"])
        statistics.update(tail_rate=fit.rate, tail_r_squared=fit.r_squared)
        checks.append(_check("exponential_tail", fit.r_squared, 0.9, final.size, fit.r_squared >= 0.9 and fit.rate < 0))
    return statistics, checks


def _run_fp(p, rng, w: Writer):
    cfg = fokker_planck.FpConfig(p["gamma"], p["mean"], p["w_max"], p["cells"], p["dt"])
    if p["init"] == "stationary":
        init = fokker_planck.stationary_solution(cfg, kind="nodal")
    else:
        init = fokker_planck.uniform_bump(cfg, 0.0, min(p["bump_hi"], cfg.w_max))
    field_, diag = fokker_planck.fp_solve(init, cfg, p["t_end"], p["record_every"])
    w.table("density", ["w_center", "g"], np.column_stack([field_.centers, field_.cell_averages]))
    w.table("diagnostics", ["t", "mass", "mean", "l1_to_stationary"], diag.as_array())
    mass_drift = float(np.max(np.abs(np.array(diag.mass) - diag.mass[0])))
    mean_drift = abs(diag.mean[-1] / diag.mean[0] - 1)
    l1 = diag.l1_to_stationary[-1]
    statistics = {"mass_drift": mass_drift, "mean_relative_drift": mean_drift, "final_l1_to_stationary": l1}
    checks = [
        _check("mass_conserved", mass_drift, 1e-9, cfg.cells, mass_drift < 1e-9),
        _check("l1_to_stationary", l1, p["l1_tol"], cfg.cells, l1 < p["l1_tol"]),
        _check("mean_drift", mean_drift, 0.01, cfg.cells, mean_drift < 0.01),
    ]
    return statistics, checks


def _run_converge(p, rng, w: Writer):
    points = stats.dd_dc_convergence(p["n_list"], p["agents"], p["k"], p["replicas"], rng)
    w.table("convergence", ["n", "distance"], np.array([[pt.n, pt.distance] for pt in points]))
    ok, rho = stats.convergence_trend_ok(points)
    pts = sorted(points)
    statistics = {"distances": {str(pt.n): pt.distance for pt in points}, "spearman": rho}
    checks = [
        _check("distance_nonincreasing", pts[-1].distance - pts[0].distance, 0.0, p["replicas"], pts[-1].distance <= pts[0].distance),
        _check("rank_correlation", rho, 0.0, len(points), rho <= 0),
    ]
    return statistics, checks


RUNNERS = {"dd": _run_dd, "dc": _run_dc, "kinetic": _run_kinetic, "fp": _run_fp, "converge": _run_converge}


def run(config: ExperimentConfig) -> int:
    """Validate, run and write outputs; return the process exit code."""
    diags = validate(config)
    if diags:
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    child = np.random.SeedSequence(config.seed).spawn(1)[0]
    rng = np.random.Generator(np.random.Philox(child))
    summary = {
        "model": config.model,
        "config": config.resolved(),
        "rng": {
            "bit_generator": "Philox",
            "scheme": "counter-based Philox streams keyed by SeedSequence(seed).spawn(k); stream r uses child r",
            "seed": config.seed,
            "streams": 1,
            "spawn_keys": [list(child.spawn_key)],
        },
    }
    writer = Writer(out, config.format)
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        statistics, checks = RUNNERS[config.model](config.parameters, rng, writer)
        summary.update(statistics=statistics, checks=checks)
        if not all(c["pass"] for c in checks):
            code = EXIT_CHECK
    except Exception as exc:  # reported in summary.json, never swallowed silently
        summary["error"] = {"type": type(exc).__name__, "message": str(exc), "traceback": traceback.format_exc()}
        code = EXIT_RUNTIME
    summary["elapsed_seconds"] = time.perf_counter() - t0
    summary["outputs"] = writer.files
    summary["exit_code"] = code
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    for c in summary.get("checks", []):
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['test']}: {c['statistic']:.6g} (threshold {c['critical_value']:.6g})")
    if "error" in summary:
        print(f"error: {summary['error']['type']}: {summary['error']['message']}", file=sys.stderr)
    return code


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# ---------------------------------------------------------------- argparse


def _add_common(sp):
    sp.add_argument("--config", type=Path, help="flat key = value configuration file")
    sp.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (default 0)")
    sp.add_argument("--out", default=None, help="output directory (default results)")
    sp.add_argument("--format", choices=FORMATS, default=None, help="data file format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfwealth", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for model in MODELS:
        sp = sub.add_parser(model, help=f"run the {model} experiment")
        _add_common(sp)
        for p in SCHEMAS[model]:
            flag = "--" + p.name.replace("_", "-")
            dest = p.name
            if p.parse is _bool:
                sp.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction, default=None, help=p.help)
            else:
                sp.add_argument(flag, dest=dest, type=str, default=None, help=f"{p.help} (default {p.default})")
    vp = sub.add_parser("validate", help="check a configuration without running it")
    vp.add_argument("--config", type=Path, help="configuration file to check")
    vp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra or overriding keys")
    return parser


def _load_file(path: Path | None):
    if path is None:
        return None, {}, []
    return parse_config_text(path.read_text())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        values, lines, diags = _load_file(args.config)
        overrides = {}
        for item in args.set:
            key, _, val = item.partition("=")
            overrides[key.strip().replace("-", "_")] = val.strip()
        cfg = build_config(None, values if values is not None else {}, overrides, lines)
        diags = diags + validate(cfg)
        for d in diags:
            print(d)
        if not diags:
            print("ok")
        return EXIT_INVALID if diags else EXIT_OK
    values, lines, diags = _load_file(args.config)
    if diags:
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INVALID
    if values is not None and values.get("model", args.command) != args.command:
        print(f"error: line {lines['model']}: config model {values['model']!r} does not match subcommand", file=sys.stderr)
        return EXIT_INVALID
    cli_values = {p.name: getattr(args, p.name) for p in SCHEMAS[args.command]}
    cli_values.update(seed=args.seed, out=args.out, format=args.format)
    cfg = build_config(args.command, values, cli_values, lines)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
