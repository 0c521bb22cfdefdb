"""Command line interface.

Subcommands:
  run      one experiment, optionally persisting a per-round trace
  compare  several algorithms on one task, merged into a wide CSV
  sweep    grid over the horizon T or the exploration radius delta
  bounds   print the estimated loss/gradient bounds for a dataset

Flags mirror ExperimentConfig; a JSON file given via --config supplies
defaults for any of them and explicit flags win.  When --out is omitted,
the ONSEG_OUT_DIR environment variable names a directory for auto-named
outputs.  Exit codes: 0 success, 2 configuration/usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from dataclasses import replace

import numpy as np

from .backend import active_backend
from .errors import ConfigError, DataError
from .harness import (
    ALGOS,
    BANDIT_ALGOS,
    SCHEDULES,
    TASKS,
    ExperimentConfig,
    plan_experiment,
    run_trials,
    trace_path,
    write_trace,
)

OUT_DIR_ENV = "ONSEG_OUT_DIR"

_CONFIG_FIELDS = {f.name for f in dataclass_fields(ExperimentConfig)}
# keys a JSON config may carry: every flag of every subcommand
_EXTRA_KEYS = {"algos", "param", "values"}


def _add_common_flags(p: argparse.ArgumentParser, with_algo: bool = True) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, metavar="FILE",
                   help="JSON file with defaults for any flag")
    p.add_argument("--task", choices=TASKS, default=S)
    if with_algo:
        p.add_argument("--algo", choices=ALGOS, default=S)
    p.add_argument("--data", dest="data_path", default=S, metavar="PATH",
                   help="libSVM file (regression/classification) or returns CSV (portfolio)")
    p.add_argument("--T", default=S, help="horizon: a round count or '<k>n'")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--dim", type=int, default=S, help="dimension of the synthetic task")
    p.add_argument("--diameter", type=float, default=S, help="ball diameter D")
    p.add_argument("--inner-radius", dest="inner_radius", type=float, default=S,
                   help="radius r of the centered ball inside the feasible set")
    p.add_argument("--sigma", type=float, default=S, help="exp-concavity constant")
    p.add_argument("--schedule", choices=SCHEDULES, default=S)
    p.add_argument("--delta", type=float, default=S, help="override: exploration radius")
    p.add_argument("--gamma", type=float, default=S, help="override: shrinkage factor")
    p.add_argument("--beta", type=float, default=S, help="override: Newton step parameter")
    p.add_argument("--F", type=float, default=S, help="override: loss bound")
    p.add_argument("--G", type=float, default=S, help="override: gradient bound")
    p.add_argument("--L", type=float, default=S, help="override: Lipschitz constant")
    p.add_argument("--shuffle", action="store_true", default=S,
                   help="replay a seeded permutation of the samples")
    p.add_argument("--regret", action="store_true", default=S,
                   help="fill cumulative regret against the offline optimum")
    p.add_argument("--out", default=S, metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onseg",
        description="Bandit convex optimization benchmark harness "
                    f"(active backend: {active_backend()})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_common_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several algorithms on one task")
    _add_common_flags(p_cmp, with_algo=False)
    p_cmp.add_argument("--algos", default=argparse.SUPPRESS,
                       help="comma-separated algorithms (default: all compatible)")
    p_cmp.set_defaults(func=cmd_compare)

    p_sw = sub.add_parser("sweep", help="grid over T or delta")
    _add_common_flags(p_sw)
    p_sw.add_argument("--param", choices=("T", "delta"), default=argparse.SUPPRESS)
    p_sw.add_argument("--values", default=argparse.SUPPRESS,
                      help="comma-separated grid values")
    p_sw.set_defaults(func=cmd_sweep)

    p_b = sub.add_parser("bounds", help="print estimated F/G/L for a dataset")
    _add_common_flags(p_b, with_algo=False)
    p_b.set_defaults(func=cmd_bounds)
    return parser


def _merged_options(ns: argparse.Namespace) -> dict:
    """Defaults from the JSON config file, overridden by explicit flags."""
    explicit = {k: v for k, v in vars(ns).items() if k not in ("command", "func")}
    merged: dict = {}
    path = explicit.pop("config", None)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in raw.items():
            norm = key.replace("-", "_")
            if norm == "data":
                norm = "data_path"
            if norm not in _CONFIG_FIELDS | _EXTRA_KEYS | {"algo"}:
                raise ConfigError(f"unknown config key {key!r}")
            merged[norm] = val
    merged.update(explicit)
    return merged


def _config_from(options: dict, need_algo: bool = True) -> ExperimentConfig:
    opts = {k: v for k, v in options.items() if k in _CONFIG_FIELDS}
    if "task" not in opts:
        raise ConfigError("--task is required")
    if "algo" not in opts:
        if need_algo:
            raise ConfigError("--algo is required")
        opts["algo"] = "onseg"  # placeholder for subcommands that run no learner
    try:
        config = ExperimentConfig(**opts)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def _resolve_out(config: ExperimentConfig, default_name: str) -> str | None:
    if config.out:
        return config.out
    out_dir = os.environ.get(OUT_DIR_ENV)
    if not out_dir:
        return None
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, default_name)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(ns: argparse.Namespace) -> int:
    config = _config_from(_merged_options(ns))
    results = run_trials(config)
    out = _resolve_out(
        config, f"{config.task}_{config.algo}_T{config.T}_seed{config.seed}.csv"
    )
    if out:
        for i, result in enumerate(results):
            path = trace_path(out, i, config.trials)
            write_trace(result.to_records(), path)
            print(f"wrote {path}")
    for i, result in enumerate(results):
        line = (
            f"trial={i} T={result.T} final_metric={_fmt(float(result.metric[-1]))} "
            f"mean_loss={_fmt(float(np.mean(result.loss)))}"
        )
        if result.regret is not None:
            line += f" final_regret={_fmt(float(result.regret[-1]))}"
        print(line)
    return 0


def _default_algos(task: str) -> list[str]:
    return list(BANDIT_ALGOS) if task == "portfolio" else list(ALGOS)


def cmd_compare(ns: argparse.Namespace) -> int:
    options = _merged_options(ns)
    config = _config_from(options, need_algo=False)
    raw = options.get("algos")
    if raw is None:
        algos = _default_algos(config.task)
    else:
        if isinstance(raw, str):
            algos = [a.strip() for a in raw.split(",") if a.strip()]
        elif isinstance(raw, list):
            algos = [str(a) for a in raw]
        else:
            raise ConfigError(f"--algos must be a comma-separated list, got {raw!r}")
        for a in algos:
            if a not in ALGOS:
                raise ConfigError(f"unknown algorithm {a!r}; expected one of {ALGOS}")
        if not algos:
            raise ConfigError("--algos must name at least one algorithm")

    with_regret = config.regret
    curves: dict[str, dict[str, np.ndarray]] = {}
    T = None
    for algo in algos:
        results = run_trials(replace(config, algo=algo))
        T = results[0].T
        curves[algo] = {
            "loss": np.mean(np.stack([r.loss for r in results]), axis=0),
            "metric": np.mean(np.stack([r.metric for r in results]), axis=0),
        }
        if with_regret:
            curves[algo]["regret"] = np.mean(
                np.stack([r.regret for r in results]), axis=0
            )

    header = ["t"]
    for algo in algos:
        header += [f"{algo}_loss", f"{algo}_metric"]
        if with_regret:
            header.append(f"{algo}_regret")

    out = _resolve_out(config, f"{config.task}_compare_T{config.T}_seed{config.seed}.csv")
    with _open_out(out) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(T):
            row: list = [t + 1]
            for algo in algos:
                row += [_fmt(float(curves[algo]["loss"][t])),
                        _fmt(float(curves[algo]["metric"][t]))]
                if with_regret:
                    row.append(_fmt(float(curves[algo]["regret"][t])))
            writer.writerow(row)
    if out:
        print(f"wrote {out}")
    return 0


def cmd_sweep(ns: argparse.Namespace) -> int:
    options = _merged_options(ns)
    config = _config_from(options)
    param = options.get("param")
    if param not in ("T", "delta"):
        raise ConfigError("--param must be 'T' or 'delta'")
    raw = options.get("values")
    if raw is None:
        raise ConfigError("--values is required")
    tokens = ([v.strip() for v in raw.split(",") if v.strip()]
              if isinstance(raw, str) else [str(v) for v in raw])
    if not tokens:
        raise ConfigError("--values must name at least one grid point")
    if param == "delta":
        try:
            values: list = [float(v) for v in tokens]
        except ValueError as exc:
            raise ConfigError(f"bad delta value: {exc}") from exc
    else:
        values = tokens  # validated by horizon resolution at run time

    with_regret = config.regret
    rows = []
    for v in values:
        cfg = replace(config, **{("T" if param == "T" else "delta"): v})
        results = run_trials(cfg)
        finals = np.array([float(r.metric[-1]) for r in results])
        row = [v, results[0].T, _fmt(float(finals.mean())), _fmt(float(finals.std()))]
        if with_regret:
            regs = np.array([float(r.regret[-1]) for r in results])
            row.append(_fmt(float(regs.mean())))
        rows.append(row)

    header = [param, "rounds", "final_metric_mean", "final_metric_std"]
    if with_regret:
        header.append("final_regret_mean")
    out = _resolve_out(config, f"{config.task}_{config.algo}_sweep_{param}.csv")
    with _open_out(out) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    if out:
        print(f"wrote {out}")
    return 0


def cmd_bounds(ns: argparse.Namespace) -> int:
    config = _config_from(_merged_options(ns), need_algo=False)
    plan = plan_experiment(config)
    stream = plan.stream_factory()
    bounds = stream.bounds(plan.set_full)
    if plan.dataset is not None:
        print(f"n {plan.dataset.n}")
        print(f"d {plan.dataset.d}")
    else:
        print(f"d {plan.set_full.dim}")
    print(f"F {_fmt(bounds.F)}")
    print(f"G {_fmt(bounds.G)}")
    print(f"L {_fmt(bounds.L)}")
    return 0


class _open_out:
    """Context manager: open path for writing, or hand out stdout."""

    def __init__(self, path: str | None):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path is None:
            return sys.stdout
        self.fh = open(self.path, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()
        return False


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
