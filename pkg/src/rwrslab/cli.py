"""Batch command line: run, validate, constants, report.

Exit codes: 0 success / all checks passed, 1 experiment-level test failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (ConfigError, _toml, config_from_dict, load_config,
                          run_experiment, validate_config_dict)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwrslab",
                                description="random walk in random scenery lab")
    sub = p.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads (affects speed only)")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config master seed")

    val = sub.add_parser("validate", help="check a config file, no simulation")
    val.add_argument("--config", required=True, type=Path)

    con = sub.add_parser("constants", help="run the constants suite")
    con.add_argument("--out", required=True, type=Path)
    con.add_argument("--seed", type=int, default=20240601)

    rep = sub.add_parser("report", help="summarize report.json from an output dir")
    rep.add_argument("--out", required=True, type=Path)
    return p


def _load_raw(path: Path) -> dict:
    with open(path, "rb") as fh:
        return _toml().load(fh)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "validate":
            raw = _load_raw(args.config)
            issues = validate_config_dict(raw)
            for msg in issues:
                print(msg)
            return 0 if not issues else 2

        if args.verb == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                raw = _load_raw(args.config)
                raw["seed"] = args.seed
                cfg = config_from_dict(raw)
            if args.threads is not None:
                cfg.threads = args.threads
            result, manifest = run_experiment(cfg, args.out)
            for rep in result.reports:
                print(rep.line())
            print(f"wrote {args.out} (config {manifest.config_hash[:12]})")
            return 0 if result.passed else 1

        if args.verb == "constants":
            cfg = config_from_dict({"experiment": "constants", "seed": args.seed})
            result, _ = run_experiment(cfg, args.out)
            for rep in result.reports:
                print(rep.line())
            return 0 if result.passed else 1

        if args.verb == "report":
            path = Path(args.out) / "report.json"
            if not path.exists():
                print(f"no report.json under {args.out}", file=sys.stderr)
                return 2
            report = json.loads(path.read_text())
            ok = True
            for rep in report["reports"]:
                tag = "PASS" if rep["passed"] else "FAIL"
                ok = ok and rep["passed"]
                print(f"[{tag}] {rep['name']}: {rep['value']:.6g} "
                      f"<= {rep['threshold']:.6g}")
            return 0 if ok else 1
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
