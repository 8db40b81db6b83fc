"""Command line entry point.

    catekit run CONFIG.json [--out DIR] [--threads K] [--emit-plotscript] [--no-figures]

Writes ``results.csv`` and ``summary.csv`` (plus per-instance CSVs where the
experiment produces them) to the output directory, renders figures into
``figures/`` and records run metadata in ``run_info.json``. The exit status is
0 only if every task completed.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import pathlib
import sys

from catekit.errors import CateKitError
from catekit.experiments import plotting
from catekit.experiments.config import load_config
from catekit.experiments.results import (
    RESULT_COLUMNS,
    SUMMARY_COLUMNS,
    read_csv_dicts,
    write_rows,
)
from catekit.experiments.runners import run_experiment

log = logging.getLogger("catekit")


def build_parser():
    p = argparse.ArgumentParser(prog="catekit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config", help="path to the experiment JSON file")
    run.add_argument("--out", help="output directory (overrides the config's 'output')")
    run.add_argument("--threads", type=int, default=1, help="concurrent tasks (default 1)")
    run.add_argument("--emit-plotscript", action="store_true",
                     help="also write plot_results.py for re-rendering figures from the CSVs")
    run.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def run_command(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.output or os.path.join(
        "results", pathlib.Path(args.config).stem
    )
    out_dir = pathlib.Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.threads < 1:
        raise CateKitError("--threads must be >= 1")

    started = datetime.datetime.now(datetime.timezone.utc)
    table = run_experiment(cfg, threads=args.threads, out_dir=out_dir, raise_on_error=False)
    write_rows(out_dir / "results.csv", RESULT_COLUMNS, table.rows)
    write_rows(out_dir / "summary.csv", SUMMARY_COLUMNS, table.summary())
    if table.errors:
        with open(out_dir / "errors.txt", "w", encoding="utf-8") as fh:
            fh.write("\n".join(table.errors) + "\n")

    figures = []
    if not args.no_figures:
        figures = plotting.render_figures(
            cfg.experiment, read_csv_dicts(out_dir / "summary.csv"), str(out_dir)
        )
    if args.emit_plotscript:
        plotting.write_plotscript(cfg.experiment, str(out_dir))

    info = {
        "config": os.path.abspath(args.config),
        "experiment": cfg.experiment,
        "started_utc": started.isoformat(),
        "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "threads": args.threads,
        "n_rows": len(table.rows),
        "n_failed_tasks": len(table.errors),
        "figures": [os.path.relpath(f, out_dir) for f in figures],
    }
    with open(out_dir / "run_info.json", "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2)
        fh.write("\n")

    print(f"{cfg.experiment}: {len(table.rows)} rows written to {out_dir}")
    for err in table.errors:
        print(f"FAILED {err}", file=sys.stderr)
    return 0 if not table.errors else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run_command(args)
    except (CateKitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
