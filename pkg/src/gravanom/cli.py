"""Command line runner: ``gravanom <subcommand> [--config FILE] [--out FILE] ...``.

The JSON report is byte-identical for identical config and seed; wall times
go to a sidecar ``*.timings.json`` file and to stderr.
"""
from __future__ import annotations

import argparse
import difflib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .checks import REGISTRY, CheckRecord, check_ids, run_check
from .config import ConfigError, ExperimentConfig, load_config

OUTPUT_DIR_ENV = "GRAVANOM_OUTPUT_DIR"

SUBCOMMAND_GROUPS = {
    "cs-action": ("cs-action",),
    "delta": ("delta",),
    "mapping-torus": ("mapping-torus",),
    "cotton": ("cotton", "variational"),
    "holonomy": ("holonomy",),
    "ledger": ("ledger",),
    "verify-all": None,
}


def select_checks(subcommand: str, config: ExperimentConfig, only: list[str] | None = None) -> list[str]:
    groups = SUBCOMMAND_GROUPS[subcommand]
    ids = [i for i in check_ids() if groups is None or REGISTRY[i].group in groups]
    ids = [i for i in ids if config.checks.get(i) is None or config.checks[i].enabled]
    if only:
        unknown = [i for i in only if i not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown check ids {unknown}")
        ids = [i for i in ids if i in only]
    return ids


def _timed(check_id: str, config: ExperimentConfig):
    start = time.perf_counter()
    record = run_check(check_id, config)
    return record, time.perf_counter() - start


def run_checks(ids: list[str], config: ExperimentConfig, jobs: int = 1) -> tuple[list[CheckRecord], dict[str, float]]:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda i: _timed(i, config), ids))
    else:
        results = [_timed(i, config) for i in ids]
    pairs = sorted(zip(ids, results))
    records = [r for _, (r, _) in pairs]
    timings = {i: t for i, (_, t) in pairs}
    return records, timings


def build_report(subcommand: str, config: ExperimentConfig, records: list[CheckRecord]) -> dict:
    checks = []
    for r in records:
        d = r.as_dict()
        if not math.isfinite(d["residual"]):
            d["residual"] = None
        checks.append(d)
    nodes = sorted({REGISTRY[r.id].params.get("nodes") for r in records if "nodes" in REGISTRY[r.id].params})
    return {
        "subcommand": subcommand,
        "environment": {
            "version": __version__,
            "seed": config.seed,
            "grid_sizes": nodes,
            "tolerance_scale": config.tolerance_scale,
        },
        "checks": checks,
        "summary": {
            "total": len(records),
            "passed": sum(r.passed for r in records),
            "failed": [r.id for r in records if not r.passed],
            "all_passed": all(r.passed for r in records),
        },
    }


def serialize_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def output_path(config: ExperimentConfig, out: str | None) -> Path:
    path = Path(out or config.output)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        path = Path(env_dir) / path.name
    return path


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def explain(check_id: str) -> tuple[int, str]:
    spec = REGISTRY.get(check_id)
    if spec is None:
        close = difflib.get_close_matches(check_id, check_ids(), n=5, cutoff=0.3)
        hint = close or check_ids()
        return 2, f"unknown check id {check_id!r}; did you mean: {', '.join(hint)}"
    params = ", ".join(f"{k}={v}" for k, v in spec.params.items()) or "none"
    text = (
        f"{spec.id}  [{spec.group}]\n"
        f"  statement: {spec.statement}\n"
        f"  formula:   {spec.formula}\n"
        f"  tolerance: {spec.tolerance:g}\n"
        f"  params:    {params}"
    )
    return 0, text


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gravanom", description="Numerical checks of gravitational Chern-Simons anomalies on flat tori.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_GROUPS:
        p = sub.add_parser(name, help=f"run the {name} checks")
        p.add_argument("--config", help="YAML experiment file (default: the shipped config)")
        p.add_argument("--out", help="report path (JSON)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--tolerance-scale", type=float, help="multiply every tolerance")
        p.add_argument("--jobs", type=int, default=1, help="checks run concurrently")
        p.add_argument("--check", action="append", dest="only", help="restrict to this check id (repeatable)")
    p = sub.add_parser("explain", help="print the statement behind a check")
    p.add_argument("check_id")
    sub.add_parser("list", help="list check ids")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    if args.command == "explain":
        code, text = explain(args.check_id)
        print(text, file=sys.stdout if code == 0 else sys.stderr)
        return code
    if args.command == "list":
        for i in check_ids():
            print(f"{i:30s} {REGISTRY[i].group}")
        return 0
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.tolerance_scale is not None and args.tolerance_scale <= 0:
        print("error: --tolerance-scale must be positive", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config, {"seed": args.seed, "tolerance_scale": args.tolerance_scale})
        ids = select_checks(args.command, config, args.only)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return 2
    records, timings = run_checks(ids, config, max(1, args.jobs))
    report = build_report(args.command, config, records)
    path = output_path(config, args.out)
    _write(path, serialize_report(report))
    _write(path.with_suffix(".timings.json"), json.dumps({k: round(v, 3) for k, v in timings.items()}, indent=2, sort_keys=True) + "\n")
    for r in records:
        status = "PASS" if r.passed else "FAIL"
        extra = f"  ({r.error})" if r.error else ""
        print(f"{status}  {r.id:30s} residual={r.residual:.3e} tol={r.tolerance:.1e}  [{timings[r.id]:.1f}s]{extra}", file=sys.stderr)
    print(f"{report['summary']['passed']}/{len(records)} checks passed; report written to {path}", file=sys.stderr)
    return 0 if report["summary"]["all_passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
