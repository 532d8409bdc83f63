"""Command line entry point: ``crossdiff run|preset|plotdata|check``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
from filelock import FileLock, Timeout

from . import __version__, kernels
from .config import (PRESETS, ExperimentConfig, ParseError, ValidationError, parse_config,
                     preset_config)
from .experiments import RUNNERS, structure_checks


class MissingReport(FileNotFoundError):
    pass


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False) + "\n")


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> tuple[int, dict]:
    """Run the configured scenario; returns (exit status, report).

    Writes report.json (deterministic) and manifest.json (versions, wall time)
    into the output directory, holding a lock file for the duration.
    """
    if out is not None:
        cfg = cfg.with_out(str(out))
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(outdir / ".crossdiff.lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        report = {"status": "error", "error": f"output directory {outdir} is locked"}
        return 3, report
    echo = {k: v for k, v in cfg.values.items() if k != "out"}  # paths are not results
    try:
        start = time.perf_counter()
        try:
            result = RUNNERS[cfg.scenario](cfg, outdir)
            verdicts = result["verdicts"]
            failures = sorted(k for k, v in verdicts.items() if v != "pass")
            report = {"preset": cfg.preset, "scenario": cfg.scenario, "config": echo,
                      "verdicts": verdicts, "tables": result["tables"], "failures": failures,
                      "status": "pass" if not failures else "fail"}
            status = 0 if not failures else 1
        except Exception as exc:  # reported, not raised: the CLI contract is an exit code
            report = {"preset": cfg.preset, "scenario": cfg.scenario, "config": echo,
                      "status": "error", "error": f"{type(exc).__name__}: {exc}",
                      "verdicts": {}, "failures": ["error"]}
            status = 2
        write_json(outdir / "report.json", report)
        manifest = {
            "config": cfg.values,
            "versions": {"crossdiff": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__,
                         "kernels": kernels.BACKEND},
            "wall_time_s": time.perf_counter() - start,
            "status": report["status"],
        }
        write_json(outdir / "manifest.json", manifest)
        (outdir / "config.toml").write_text(cfg.emit())
        return status, report
    finally:
        lock.release()


# ---------------------------------------------------------------------------
# plot data


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    return path


def emit_plotdata(directory, dest=None) -> list:
    """Flatten every report under ``directory`` into plot-ready CSV files."""
    root = Path(directory)
    reports = sorted(root.rglob("report.json")) if root.is_dir() else []
    if not reports:
        raise MissingReport(f"no report.json under {root}")
    dest = Path(dest) if dest is not None else root / "plotdata"
    dest.mkdir(parents=True, exist_ok=True)
    written = []

    def tag(p: Path) -> str:
        rel = p.parent.relative_to(root)
        return "_".join(rel.parts) or "run"

    for path in reports:
        rep = json.loads(path.read_text())
        name = tag(path)
        tables = rep.get("tables", {})
        cauchy = rep.get("cauchy") if "cauchy" in rep else None
        if cauchy and cauchy.get("rows"):
            written.append(_write_rows(dest / f"cauchy_{name}.csv", ["n", "lambda", "dist_to_last"],
                                       [[r["n"], r["lambda"], r["dist_to_last"]]
                                        for r in cauchy["rows"]]))
        conv = tables.get("convergence")
        if conv:
            keys = [k for k in conv["rows"][0] if k != "n"]
            written.append(_write_rows(dest / f"convergence_{name}.csv", ["n", *keys],
                                       [[r["n"], *[r[k] for k in keys]] for r in conv["rows"]]))
        vmo = tables.get("vmo")
        if vmo:
            written.append(_write_rows(dest / f"oscillation_{name}.csv", ["R", "osc_u", "osc_U"],
                                       zip(vmo["radii"], vmo["osc_u"], vmo["osc_U"])))
    for ledger in sorted(root.rglob("ledger*.csv")):
        if dest in ledger.parents:
            continue
        rel = ledger.relative_to(root)
        out = dest / ("ledger_" + "_".join(rel.with_suffix("").parts) + ".csv")
        out.write_text(ledger.read_text())
        written.append(out)
    return written


# ---------------------------------------------------------------------------
# entry point


def _load(path: str) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def _print_report(report: dict, verbosity: int) -> None:
    if verbosity <= 0:
        return
    for k, v in sorted(report.get("verdicts", {}).items()):
        print(f"{v:5s} {k}")
    if report.get("error"):
        print(f"error {report['error']}", file=sys.stderr)
    print(f"status: {report['status']}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="crossdiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the output directory")
    p_pre = sub.add_parser("preset", help="run a built-in preset")
    p_pre.add_argument("name", choices=sorted(PRESETS))
    p_pre.add_argument("--out", required=True)
    p_plot = sub.add_parser("plotdata", help="emit plot-ready CSV from report directories")
    p_plot.add_argument("directory")
    p_chk = sub.add_parser("check", help="structure checks only")
    p_chk.add_argument("config")
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            cfg = _load(args.config)
            status, report = run_experiment(cfg, args.out)
            _print_report(report, cfg["verbosity"])
            return status
        if args.command == "preset":
            cfg = preset_config(args.name, args.out)
            status, report = run_experiment(cfg)
            _print_report(report, cfg["verbosity"])
            return status
        if args.command == "plotdata":
            for p in emit_plotdata(args.directory):
                print(p)
            return 0
        if args.command == "check":
            cfg = _load(args.config)
            result = structure_checks(cfg)
            failures = sorted(k for k, v in result["verdicts"].items() if v != "pass")
            report = {"verdicts": result["verdicts"], "tables": result["tables"],
                      "failures": failures, "status": "fail" if failures else "pass"}
            print(json.dumps(_clean(report), indent=1, sort_keys=True))
            return 1 if failures else 0
    except ParseError as exc:
        print(json.dumps({"status": "error", "kind": "parse", "message": str(exc),
                          "line": exc.line, "column": exc.column}), file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(json.dumps({"status": "error", "kind": "validation", "field": exc.field,
                          "message": str(exc)}), file=sys.stderr)
        return 2
    except MissingReport as exc:
        print(json.dumps({"status": "error", "kind": "missing_report", "message": str(exc)}),
              file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
