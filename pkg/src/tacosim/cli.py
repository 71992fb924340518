"""Command-line experiment driver.

Subcommands: example, montecarlo, sweep-gamma, interrupt, scalability, bound,
show-config. Configuration comes from built-in defaults, then an optional
key = value config file (--config), then command-line overrides; show-config
prints the effective merged configuration in the same format the file uses.

Exit codes: 0 success, 1 validation error, 2 completed but at least one trial
hit the step cap.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from fractions import Fraction
from pathlib import Path

from .board import exact
from .errors import TacoError
from .experiments import (
    ExperimentConfig,
    ExampleRun,
    RunResult,
    SCHEMA_VERSION,
    bound_report,
    config_lines,
    run_example,
    run_interrupt,
    run_montecarlo,
    run_scalability,
    run_sweep_gamma,
)

_CONFIG_KEYS = [f.name for f in dataclasses.fields(ExperimentConfig)]

_INT_KEYS = {"n", "m", "trials", "base_seed", "max_steps", "history_cap", "workers"}
_FLOAT_KEYS = {"epsilon_rel", "separation", "k_min", "k_max", "b_min", "b_max"}
_FRACTION_KEYS = {"gamma", "d0"}
_STR_KEYS = {"scenario", "backend", "out_dir"}

# Per-subcommand default overrides, applied below config file and flags.
# The scalability grid keeps the coarse unit d0=1 with Uniform(0,1) costs;
# the waypoint commands inherit the negotiation-scale default from
# ExperimentConfig.
_COMMAND_DEFAULTS: dict[str, dict] = {
    "interrupt": {"mechanisms": ("taco",)},
    "scalability": {
        "scenario": "random",
        "trials": 100,
        "epsilon": 0.1,
        "d0": Fraction(1),
    },
}


def _parse_value(key: str, raw: str):
    if key == "epsilon":
        return None if str(raw).strip().lower() in ("", "none") else float(raw)
    if key == "mechanisms":
        return tuple(tok.strip() for tok in str(raw).split(",") if tok.strip())
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _FRACTION_KEYS:
        return exact(str(raw))
    if key in _STR_KEYS:
        return str(raw)
    raise ValueError(f"unknown configuration key {key!r}")


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a key = value config file; # starts a comment."""
    data: dict[str, str] = {}
    for lineno, raw_line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown configuration key {key!r}")
        data[key] = val.strip()
    return data


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = dict(_COMMAND_DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            values[key] = _parse_value(key, raw)
    for key in _CONFIG_KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = _parse_value(key, raw)
    return ExperimentConfig(**values)


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="FILE", help="key = value configuration file")
    for key in _CONFIG_KEYS:
        sub.add_argument(
            f"--{key.replace('_', '-')}",
            dest=key,
            metavar="VALUE",
            default=None,
            help=f"override {key}",
        )


def _fmt_fraction_matrix(mat) -> str:
    return "[" + ",".join("[" + ",".join(str(v) for v in row) + "]" for row in mat) + "]"


def _fmt_float_matrix(mat) -> str:
    return "[" + ",".join(
        "[" + ",".join(f"{v:.6g}" for v in row) + "]" for row in mat
    ) + "]"


def _print_example(run: ExampleRun) -> None:
    # Displayed agent/option numbers are 1-based; CSV files stay 0-based.
    print("worked two-agent example (agents and options numbered from 1)")
    print("step  agent  offers            pays              profits                 selections")
    for snap, ts in zip(run.steps, run.outcome.trace):
        sels = ",".join("-" if s is None else str(s + 1) for s in snap.selections)
        print(
            f"{snap.step:>4}  {snap.agent + 1:>5}  "
            f"{_fmt_fraction_matrix(snap.offers):<16}  "
            f"{_fmt_fraction_matrix(snap.pays):<16}  "
            f"{_fmt_float_matrix(snap.profits):<22}  ({sels})"
        )
    for start, end in run.detected_spans:
        print(f"cycle detected: steps {start}..{end}")
    out = run.outcome
    settle_str = ",".join(str(s) for s in out.settlements)
    print(
        f"terminated at step {out.steps}: consensus option {out.consensus_choice + 1}, "
        f"settlements [{settle_str}], final d {out.final_d}"
    )


def _write_example_files(run: ExampleRun, out_dir: Path) -> None:
    import csv as _csv

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "example_trace.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(
            ["step", "agent", "selection", "offers", "pays", "profits", "selections"]
        )
        for snap, ts in zip(run.steps, run.outcome.trace):
            writer.writerow(
                [
                    snap.step,
                    snap.agent,
                    ts.selection,
                    _fmt_fraction_matrix(snap.offers),
                    _fmt_fraction_matrix(snap.pays),
                    _fmt_float_matrix(snap.profits),
                    " ".join("-" if s is None else str(s) for s in snap.selections),
                ]
            )
    out = run.outcome
    lines = [
        f"csv_schema_version = {SCHEMA_VERSION}",
        "command = example",
        f"steps = {out.steps}",
        f"rounds = {out.rounds}",
        f"cycles_detected = {out.cycles_detected}",
        f"consensus_choice = {out.consensus_choice}",
        f"settlements = {','.join(str(s) for s in out.settlements)}",
        f"final_d = {out.final_d}",
        f"terminated_naturally = {out.terminated_naturally}",
    ]
    (out_dir / "example_summary.txt").write_text("\n".join(lines) + "\n")


def _finish_run(res: RunResult) -> int:
    print(res.summary_text, end="")
    if res.csv_path is not None:
        print(f"per-trial rows: {res.csv_path}")
    if res.summary_path is not None:
        print(f"summary: {res.summary_path}")
    if res.failures:
        print(f"warning: {res.failures} trial(s) hit the step cap", file=sys.stderr)
        return 2
    return 0


def _cmd_example(args: argparse.Namespace) -> int:
    epsilon = float(args.epsilon)
    run = run_example(epsilon=epsilon, d0=exact(args.d0), gamma=exact(args.gamma))
    _print_example(run)
    if args.out:
        _write_example_files(run, Path(args.out))
    return 0


def _out_dir(cfg: ExperimentConfig) -> Path | None:
    # An empty out_dir disables files, matching the example command's --out ''.
    return Path(cfg.out_dir) if cfg.out_dir else None


def _cmd_montecarlo(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    return _finish_run(run_montecarlo(cfg, _out_dir(cfg)))


def _cmd_sweep_gamma(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    gammas = [exact(tok) for tok in args.gammas.split(",") if tok.strip()]
    return _finish_run(run_sweep_gamma(cfg, gammas, _out_dir(cfg)))


def _cmd_interrupt(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    steps = []
    for tok in args.steps.split(","):
        tok = tok.strip()
        if not tok:
            continue
        steps.append(0 if tok.lower() == "natural" else int(tok))
    return _finish_run(run_interrupt(cfg, steps, _out_dir(cfg)))


def _cmd_scalability(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
    m_list = [int(tok) for tok in args.m_list.split(",") if tok.strip()]
    return _finish_run(run_scalability(cfg, n_list, m_list, _out_dir(cfg)))


def _cmd_bound(args: argparse.Namespace) -> int:
    print(
        bound_report(
            int(args.n),
            int(args.m),
            exact(args.gamma),
            float(args.epsilon),
            exact(args.d0),
            float(args.b_max),
        ),
        end="",
    )
    return 0


def _cmd_show_config(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    for line in config_lines(cfg):
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tacosim",
        description="Trading-auction consensus simulation workbench",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("example", help="run and print the worked two-agent trace")
    p.add_argument("--epsilon", default="1e-6", help="termination tolerance")
    p.add_argument("--gamma", default="9/10", help="trading-unit decay factor (rational)")
    p.add_argument("--d0", default="1", help="initial trading unit (rational)")
    p.add_argument("--out", default="results/example", help="output directory (or omit files with --out '')")
    p.set_defaults(func=_cmd_example)

    p = subs.add_parser("montecarlo", help="mechanism comparison over seeded trials")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_montecarlo)

    p = subs.add_parser("sweep-gamma", help="Monte Carlo per decay factor, paired instances")
    _add_config_flags(p)
    p.add_argument("--gammas", default="3/10,6/10,9/10,99/100", help="comma-separated rationals")
    p.set_defaults(func=_cmd_sweep_gamma)

    p = subs.add_parser("interrupt", help="forced-interruption sweep, paired instances")
    _add_config_flags(p)
    p.add_argument(
        "--steps",
        default="natural,50,20,5",
        help="comma-separated interruption steps; 'natural' or 0 = run to termination",
    )
    p.set_defaults(func=_cmd_interrupt)

    p = subs.add_parser("scalability", help="grid over agent and choice counts")
    _add_config_flags(p)
    p.add_argument("--n-list", default="3,5,7,10", help="comma-separated agent counts")
    p.add_argument("--m-list", default="3,10,30,100", help="comma-separated choice counts")
    p.set_defaults(func=_cmd_scalability)

    p = subs.add_parser("bound", help="print the analytic worst-case step bound")
    p.add_argument("--n", default="2")
    p.add_argument("--m", default="2")
    p.add_argument("--gamma", default="9/10")
    p.add_argument("--epsilon", default="0.1")
    p.add_argument("--d0", default="1")
    p.add_argument("--b-max", default="1.2")
    p.set_defaults(func=_cmd_bound)

    p = subs.add_parser("show-config", help="print the effective configuration")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_show_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, TypeError, TacoError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
