"""
Command-line front end.

    sparse-lmsf run            one experiment -> mse.csv, summary.json, manifest.json
    sparse-lmsf sweep          phi / K / snr_db sweep, same three files
    sparse-lmsf penalty-curve  penalty.csv with the three zero-attractor shapes

Settings resolve as flags > ``--config`` file > built-in defaults. A config
file is flat ``key = value`` text using the flag names without dashes
(``lambda-za = 4e-5``), or a ``manifest.json`` written by an earlier run,
whose ``config`` block replays that run exactly.

Exit codes: 0 success, 2 bad configuration, 3 every run diverged for some
algorithm, 4 file I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, EmptyTraceError, InvalidSpecError
from .estimators import EstimatorConfig, EstimatorKind, penalty_curves
from .montecarlo import (
    SWEEP_PARAMETERS,
    ExperimentSpec,
    convergence_iteration,
    run_experiment,
    steady_state_mse,
    sweep,
)
from .sparse_channel import NoiseSpec, SparseChannelSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

DEFAULTS = {
    "N": 128,
    "K": 4,
    "snr_db": 10.0,
    "mu": 0.005,
    "phi": 0.8,
    "lambda_za": 4e-5,
    "lambda_rza": 4e-3,
    "lambda_rl1": 4e-5,
    "epsilon": 20.0,
    "delta": 0.05,
    "runs": 200,
    "iters": 2000,
    "seed": 0,
    "algos": "lmsf,za,rza,rl1",
    "param": None,
    "values": None,
}
INT_KEYS = {"N", "K", "runs", "iters", "seed"}
STR_KEYS = {"algos", "param", "values"}
# Execution-only settings; they never change an output byte.
RUNTIME_KEYS = {"threads", "out"}


def _key(name: str) -> str:
    return name.strip().lstrip("-").replace("-", "_")


def _coerce(key, raw):
    if raw is None or key in STR_KEYS:
        return raw
    try:
        if key in INT_KEYS:
            if isinstance(raw, str):
                value = float(raw) if any(c in raw for c in ".eE") else int(raw)
            else:
                value = raw
            if float(value) != int(value):
                raise ValueError
            return int(value)
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {raw!r} as a number") from None


def read_config_file(path) -> dict:
    """Flat settings from a key = value file or a manifest.json."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
        items = data.get("config", data).items()
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":"
            if sep not in line:
                raise ConfigError("config", f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split(sep, 1)
            items.append((k, v.strip()))
    settings = {}
    for k, v in items:
        key = _key(k)
        if key in RUNTIME_KEYS:
            continue
        if key not in DEFAULTS:
            raise ConfigError(key, f"unknown setting in {path}")
        settings[key] = v
    return settings


def _validate(s: dict):
    for key in ("N", "K", "runs", "iters", "mu", "phi", "epsilon", "delta"):
        if not s[key] > 0:
            raise ConfigError(key, f"must be positive, got {s[key]}")
    for key in ("lambda_za", "lambda_rza", "lambda_rl1"):
        if not s[key] >= 0:
            raise ConfigError(key, f"must be nonnegative, got {s[key]}")
    for key in ("snr_db", "mu", "phi", "epsilon", "delta", "lambda_za", "lambda_rza", "lambda_rl1"):
        if not math.isfinite(s[key]):
            raise ConfigError(key, f"must be finite, got {s[key]}")
    if s["K"] > s["N"]:
        raise ConfigError("K", f"number of nonzero taps ({s['K']}) exceeds N ({s['N']})")
    if not 0 <= s["seed"] < 2 ** 64:
        raise ConfigError("seed", f"must be in [0, 2**64), got {s['seed']}")


def resolve_settings(flags: dict, config_file=None) -> dict:
    """Merge defaults, config file and explicit flags (``None`` = not given)."""
    settings = dict(DEFAULTS)
    if config_file is not None:
        settings.update(read_config_file(config_file))
    for name, value in flags.items():
        key = _key(name)
        if key in RUNTIME_KEYS or key == "config" or value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown setting")
        settings[key] = value
    settings = {k: _coerce(k, v) for k, v in settings.items()}
    _validate(settings)
    return settings


def spec_from_settings(s: dict) -> ExperimentSpec:
    lambdas = {
        EstimatorKind.LMSF: 0.0,
        EstimatorKind.ZA: s["lambda_za"],
        EstimatorKind.RZA: s["lambda_rza"],
        EstimatorKind.RL1: s["lambda_rl1"],
    }
    names = [a for a in str(s["algos"]).split(",") if a.strip()]
    if not names:
        raise ConfigError("algos", "no algorithms selected")
    kinds = [EstimatorKind.parse(a) for a in names]
    if len(set(kinds)) != len(kinds):
        raise ConfigError("algos", f"duplicate algorithm in {s['algos']!r}")
    algos = tuple(
        EstimatorConfig(kind=k, mu=s["mu"], phi=s["phi"], lam=lambdas[k],
                        epsilon=s["epsilon"], delta=s["delta"])
        for k in kinds
    )
    try:
        return ExperimentSpec(
            channel=SparseChannelSpec(n_taps=s["N"], n_nonzero=s["K"]),
            noise=NoiseSpec.from_snr(s["snr_db"]),
            algorithms=algos,
            n_iterations=s["iters"],
            n_runs=s["runs"],
            base_seed=s["seed"],
        )
    except InvalidSpecError as exc:
        raise ConfigError("spec", str(exc)) from None


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file or manifest.json")
    p.add_argument("--N", type=int, help="channel length (default 128)")
    p.add_argument("--K", type=int, help="number of nonzero taps (default 4)")
    p.add_argument("--snr-db", type=float, help="SNR in dB (default 10)")
    p.add_argument("--mu", type=float, help="step size (default 0.005)")
    p.add_argument("--phi", type=float, help="LMS/F threshold (default 0.8)")
    p.add_argument("--lambda-za", type=float, help="ZA regularisation (default 4e-5)")
    p.add_argument("--lambda-rza", type=float, help="RZA regularisation (default 4e-3)")
    p.add_argument("--lambda-rl1", type=float, help="RL1 regularisation (default 4e-5)")
    p.add_argument("--epsilon", type=float, help="RZA reweight factor (default 20)")
    p.add_argument("--delta", type=float, help="RL1 offset (default 0.05)")
    p.add_argument("--runs", type=int, help="Monte-Carlo runs (default 200)")
    p.add_argument("--iters", type=int, help="iterations per run (default 2000)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--algos", help="comma list from lmsf,za,rza,rl1")
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-lmsf", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_experiment_flags(sub.add_parser("run", help="run one Monte-Carlo experiment"))

    p = sub.add_parser("sweep", help="sweep phi, K or snr_db")
    _add_experiment_flags(p)
    p.add_argument("--param", choices=SWEEP_PARAMETERS, help="parameter to sweep")
    p.add_argument("--values", help="comma-separated values")

    p = sub.add_parser("penalty-curve", help="tabulate the zero-attractor penalty shapes")
    p.add_argument("--epsilon", type=float, default=20.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--grid", type=int, default=201, help="number of grid points on [-1, 1]")
    p.add_argument("--out", default=".", help="output directory")
    return parser


def parse_config(argv=None) -> ExperimentSpec:
    """Resolve ``run``-style arguments (without the subcommand) into a spec."""
    parser = argparse.ArgumentParser(prog="sparse-lmsf run")
    _add_experiment_flags(parser)
    args = parser.parse_args([] if argv is None else argv)
    return spec_from_settings(resolve_settings(vars(args), args.config))


def _fmt(value) -> str:
    return repr(float(value))


def emit_mse_csv(traces, path) -> Path:
    """Write ``iteration,<label>,...`` with one row per iteration (1-based)."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to write")
    length = len(traces[0].values)
    if any(len(t.values) != length for t in traces):
        raise ValueError("traces have unequal lengths")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration"] + [t.label for t in traces])
    columns = [t.values for t in traces]
    for k in range(length):
        writer.writerow([k + 1] + [_fmt(c[k]) for c in columns])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_mse_csv(path) -> dict:
    """Inverse of :func:`emit_mse_csv`: label -> float64 array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {label: np.array([float(r[j]) for r in body]) for j, label in enumerate(header) if j}


def _penalty_grid(size: int) -> np.ndarray:
    # Integer numerators keep 0 and +-1 exact on the grid.
    return (2.0 * np.arange(size) - (size - 1)) / (size - 1)


def emit_penalty_csv(epsilon: float, delta: float, grid_size: int, path) -> Path:
    if grid_size < 2:
        raise ConfigError("grid", f"needs at least 2 points, got {grid_size}")
    rows = penalty_curves(_penalty_grid(grid_size), epsilon, delta)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["w", "zeta_za", "zeta_rza", "zeta_rl1"])
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def _json_float(x):
    return None if x is None or math.isnan(x) else float(x)


def _ordering(ss: dict) -> dict:
    ranking = sorted(ss, key=lambda label: ss[label])
    verdict = {"ranking": ranking}
    expected = ["rl1", "rza", "za", "lmsf"]
    present = [label for label in expected if label in ss]
    verdict["expected_order_holds"] = all(
        ss[a] < ss[b] for a, b in zip(present, present[1:])
    )
    if "rl1" in ss and len(ss) > 1:
        verdict["rl1_best"] = ranking[0] == "rl1" and ss["rl1"] < min(
            v for k, v in ss.items() if k != "rl1"
        )
    return verdict


def summarize(results, parameter=None, values=None) -> dict:
    """JSON-ready summary of one experiment or a sweep."""
    values = values if values is not None else [None]
    cells, orderings = [], []
    for value, result in zip(values, results):
        ss = {}
        for trace in result.traces:
            ss[trace.label] = steady_state_mse(trace)
            cells.append({
                "value": value,
                "algorithm": trace.label,
                "steady_state_mse": ss[trace.label],
                "convergence_iteration": convergence_iteration(trace),
                "runs_used": trace.n_runs,
                "diverged_runs": trace.n_diverged,
                "zero_support_abs": _json_float(result.zero_support_abs.get(trace.label)),
            })
        orderings.append({"value": value, **_ordering(ss)})
    return {
        "parameter": parameter,
        "values": None if parameter is None else list(values),
        "spec": results[0].spec.to_dict(),
        "steady_state": cells,
        "ordering": orderings,
    }


def emit_summary_json(manifest: dict, summary: dict, path) -> Path:
    payload = {"version": manifest.get("version"), "config": manifest.get("config"), **summary}
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def _manifest(command, settings, spec, diverged, outputs) -> dict:
    config = {k: v for k, v in settings.items() if v is not None}
    return {
        "tool": "sparse-lmsf",
        "version": __version__,
        "command": command,
        "config": config,
        "spec": spec.to_dict(),
        "base_seed": spec.base_seed,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "diverged_runs": diverged,
        "outputs": outputs,
    }


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _parse_values(param, raw):
    if raw is None:
        raise ConfigError("values", "sweep needs --values")
    out = []
    for item in str(raw).split(","):
        item = item.strip()
        if item:
            out.append(_coerce("K" if param == "K" else param, item))
    if not out:
        raise ConfigError("values", "sweep needs at least one value")
    return out


def _run_command(args) -> int:
    flags = {k: v for k, v in vars(args).items() if k not in ("command",)}
    settings = resolve_settings(flags, args.config)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("threads", f"must be >= 1, got {args.threads}")
    spec = spec_from_settings(settings)

    if args.command == "run":
        settings["param"] = settings["values"] = None
        results = [run_experiment(spec, threads=args.threads)]
        traces = results[0].traces
        summary = summarize(results)
        diverged = results[0].diverged
    else:
        param = settings["param"]
        if param is None:
            raise ConfigError("param", f"sweep needs --param, one of {SWEEP_PARAMETERS}")
        if param not in SWEEP_PARAMETERS:
            raise ConfigError("param", f"cannot sweep {param!r}")
        values = _parse_values(param, settings["values"])
        for v in values:
            if param == "K" and not 1 <= v <= spec.channel.n_taps:
                raise ConfigError("values", f"K={v} outside [1, N={spec.channel.n_taps}]")
            if param == "phi" and not (v > 0 and math.isfinite(v)):
                raise ConfigError("values", f"phi={v} must be positive")
        result = sweep(spec, param, values, threads=args.threads)
        results = result.experiments
        traces = []
        for value, exp in zip(values, results):
            for t in exp.traces:
                traces.append(type(t)(f"{t.label}@{param}={value}", t.values, t.n_runs, t.n_diverged))
        summary = summarize(results, param, values)
        diverged = {f"{t.label}@{param}={v}": t.n_diverged
                    for v, exp in zip(values, results) for t in exp.traces}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_mse_csv(traces, out / "mse.csv")
    manifest = _manifest(args.command, settings, spec, diverged, ["mse.csv", "summary.json"])
    emit_summary_json(manifest, summary, out / "summary.json")
    _write_json(manifest, out / "manifest.json")
    return EXIT_OK


def _penalty_command(args) -> int:
    if args.grid < 2:
        raise ConfigError("grid", f"needs at least 2 points, got {args.grid}")
    penalty_curves([0.0], args.epsilon, args.delta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_penalty_csv(args.epsilon, args.delta, args.grid, out / "penalty.csv")
    _write_json({
        "tool": "sparse-lmsf",
        "version": __version__,
        "command": "penalty-curve",
        "config": {"epsilon": args.epsilon, "delta": args.delta, "grid": args.grid},
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": ["penalty.csv"],
    }, out / "manifest.json")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "penalty-curve":
            return _penalty_command(args)
        return _run_command(args)
    except ConfigError as exc:
        print(f"sparse-lmsf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyTraceError as exc:
        print(f"sparse-lmsf: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"sparse-lmsf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
