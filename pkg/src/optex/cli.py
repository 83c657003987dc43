"""Command-line interface: `optex search|eval|report`.

A batch tool: `search` runs the configured multi-start exchange search and
writes the design, a human-readable report, and a machine-readable record;
`eval` scores an externally supplied design under the configured criterion;
`report` turns a set of result records into an efficiency table.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .criteria import alias_matrix, compound_objective
from .model import model_matrices
from .reporting import (
    efficiency_table,
    efficiency_table_csv,
    efficiency_table_text,
    eval_record,
    eval_report_text,
    read_design_csv,
    search_record,
    search_report_text,
    write_design_csv,
    write_record,
)
from .search import fresh_master_seed, multi_start, prior_for_spec


def _apply_overrides(run: RunConfig, args) -> RunConfig:
    spec = run.experiment
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "starts", None) is not None:
        updates["n_starts"] = args.starts
    if getattr(args, "algorithm", None) is not None:
        updates["algorithm"] = args.algorithm
    if updates:
        spec = spec.with_overrides(**updates)
        run = replace(run, experiment=spec)
    if getattr(args, "workers", None) is not None:
        run = replace(run, workers=args.workers)
    if getattr(args, "out", None) is not None:
        run = replace(run, out_dir=args.out)
    return run


def _out_dir(run: RunConfig) -> Path:
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_search(args) -> int:
    run = _apply_overrides(parse_config(args.config), args)
    spec = run.experiment
    result = multi_start(spec, workers=run.workers)
    out = _out_dir(run)
    if run.design_csv:
        write_design_csv(out / "design.csv", result.design, spec.grid)
    if run.result_json:
        write_record(out / "result.json", search_record(result, run))
    report = search_report_text(result, run)
    if run.report_txt:
        (out / "report.txt").write_text(report, encoding="utf-8", newline="\n")
    sys.stdout.write(report)
    if result.non_converged:
        sys.stderr.write(f"warning: {len(result.non_converged)} restart(s) did not "
                         "converge within the pass cap\n")
    return 0


def cmd_eval(args) -> int:
    run = _apply_overrides(parse_config(args.config), args)
    spec = run.experiment
    design = read_design_csv(args.design, spec.grid)
    master_seed = spec.seed if spec.seed is not None else fresh_master_seed()
    prior = prior_for_spec(spec, master_seed)
    breakdown = compound_objective(design, spec, prior)
    X1, X2 = model_matrices(design, spec.primary, spec.potential, spec.grid)
    alias = alias_matrix(X1, X2)
    out = _out_dir(run)
    if run.result_json:
        record = eval_record(design, breakdown, run, master_seed,
                             prior.seed if prior is not None else None, X1, X2)
        write_record(out / "eval_result.json", record)
    report = eval_report_text(breakdown, run, alias)
    if run.report_txt:
        (out / "eval_report.txt").write_text(report, encoding="utf-8", newline="\n")
    sys.stdout.write(report)
    return 0


def cmd_report(args) -> int:
    records = []
    for path in args.records:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"result record not found: {p}")
        with open(p, "r", encoding="utf-8") as fh:
            records.append(json.load(fh))
    table = efficiency_table(records)
    text = efficiency_table_text(table)
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "efficiency.csv").write_text(efficiency_table_csv(table),
                                            encoding="utf-8", newline="\n")
        (out / "efficiency.txt").write_text(text, encoding="utf-8", newline="\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optex",
        description="Multi-objective optimal experimental designs for polynomial "
                    "response-surface models.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("search", help="run the multi-start exchange search")
    sp.add_argument("--config", required=True, help="YAML run configuration")
    sp.add_argument("--seed", type=int, help="master seed (overrides config)")
    sp.add_argument("--starts", type=int, help="number of restarts")
    sp.add_argument("--algorithm", choices=("ptex", "coordex"))
    sp.add_argument("--workers", type=int, help="parallel restart workers")
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_search)

    ev = sub.add_parser("eval", help="evaluate an existing design file")
    ev.add_argument("--config", required=True, help="YAML run configuration")
    ev.add_argument("--design", required=True, help="design CSV to score")
    ev.add_argument("--seed", type=int, help="master seed (regenerates the MC prior)")
    ev.add_argument("--out", help="output directory")
    ev.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="efficiency table from result records")
    rp.add_argument("records", nargs="+", help="result.json files (must include the "
                    "three pure-criterion runs)")
    rp.add_argument("--out", help="output directory for efficiency.csv")
    rp.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        sys.stderr.write(f"error: {err}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
