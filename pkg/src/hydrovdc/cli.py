"""Command-line entry points: verify, forces, simulate, plot.

Exit codes: 0 success, 1 failed check or aborted run, 2 usage or input error.
Relative output paths are placed under ``$HYDROVDC_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_config, load_default_config, parse_yaml
from .dynamics import full_backward_pass
from .errors import ConfigError, HydroVDCError
from .kinematics import forward_velocities, resolve_frames
from .simulation import SimulationAborted, run_scenario
from .tracefile import format_number, plot_script, write_trace_csv
from .verification import standard_checks

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
OUTPUT_DIR_ENV = "HYDROVDC_OUTPUT_DIR"


def _output_path(p: str) -> Path:
    path = Path(p)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _config(args):
    return load_default_config() if args.config is None else load_config(args.config)


def cmd_verify(args) -> int:
    cfg = _config(args)
    resolve_frames(cfg.model)
    results = standard_checks(cfg, quick=args.quick)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"verify: passed={passed} failed={len(results) - passed} total={len(results)}")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def _state_vector(doc: dict, key: str, n: int, required: bool) -> np.ndarray:
    if key not in doc:
        if required:
            raise ConfigError(f"state file: '{key}' is required")
        return np.zeros(n)
    v = np.asarray(doc[key], dtype=float).ravel()
    if v.size != n:
        raise ConfigError(f"state file: '{key}' needs {n} values, got {v.size}")
    return v


def cmd_forces(args) -> int:
    cfg = _config(args)
    model = cfg.model
    doc = parse_yaml(Path(args.state).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError("state file: top level must be a mapping")
    unknown = set(doc) - {"q", "dq", "ddq", "tip_wrench"}
    if unknown:
        raise ConfigError(f"state file: unknown keys {sorted(unknown)}")
    n = model.ndof
    q = _state_vector(doc, "q", n, True)
    dq = _state_vector(doc, "dq", n, False)
    ddq = _state_vector(doc, "ddq", n, False)
    tip = _state_vector(doc, "tip_wrench", 6, False)
    tr = forward_velocities(model, q, dq, ddq=ddq)
    wt = full_backward_pass(model, tr, tip)
    fields = []
    for j, w in enumerate(wt.structures, start=1):
        fields.append(f"f_c{j}_N={format_number(w.f_c)}")
        if w.f_ct is not None:
            fields.append(f"f_ct{j}_N={format_number(w.f_ct)}")
    for f in fields:
        print(f)
    print("forces: " + " ".join(fields))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sc = cfg.scenario
    if args.duration is not None:
        if not args.duration > 0:
            raise ConfigError("--duration must be > 0")
        sc = replace(sc, duration=args.duration)
    try:
        res = run_scenario(cfg.model, cfg.gains, sc)
    except SimulationAborted as exc:
        print(f"simulate: aborted step={exc.step} reason={exc.cause}", file=sys.stderr)
        return EXIT_FAIL
    out = _output_path(args.out)
    write_trace_csv(res.columns, out)
    c = res.columns
    n = res.n_actuators
    u = max(float(np.abs(c[f"u{k}_V"]).max()) for k in range(1, n + 1))
    p = np.concatenate([c[f"p{s}{k}_Pa"] for k in range(1, n + 1) for s in ("a", "b")])
    print(
        f"simulate: rows={len(c['t_s'])} max_abs_u_V={format_number(u)} "
        f"p_min_bar={format_number(p.min() / 1e5)} p_max_bar={format_number(p.max() / 1e5)} "
        f"max_tool_err_m={format_number(c['tool_err_m'].max())} out={out}"
    )
    return EXIT_OK


def cmd_plot(args) -> int:
    csv_path = Path(args.csv)
    if not csv_path.is_file():
        raise ConfigError(f"trace file {csv_path} not found")
    out = _output_path(args.out) if args.out else csv_path.with_name(csv_path.stem + "_plots.py")
    out.write_text(plot_script(csv_path, out), encoding="utf-8")
    print(f"plot: script={out} csv={csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrovdc", description="Hydraulic manipulator modelling and control toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="YAML configuration (default: shipped desk-scale model)")
        return p

    p = with_config(sub.add_parser("verify", help="run oracle-equivalence and invariant suites"))
    p.add_argument("--quick", action="store_true", help="smaller case counts")
    p.set_defaults(func=cmd_verify)

    p = with_config(sub.add_parser("forces", help="actuator forces for one state"))
    p.add_argument("state", help="YAML file with q and optionally dq, ddq, tip_wrench")
    p.set_defaults(func=cmd_forces)

    p = with_config(sub.add_parser("simulate", help="run the configured closed-loop scenario to CSV"))
    p.add_argument("--out", default="trace.csv", help="CSV output path")
    p.add_argument("--duration", type=float, help="override the scenario duration (s)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="write a matplotlib script for a trace CSV")
    p.add_argument("csv", help="trace CSV from simulate")
    p.add_argument("--out", help="script path (default: <csv stem>_plots.py)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HydroVDCError as exc:
        print(f"{parser.prog} {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
