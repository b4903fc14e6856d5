"""Command line entry point: ``run``, ``study``, ``analyze-flux`` and ``oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import oracle
from .harness import (EXIT_CONFIG, EXIT_OK, ConfigError, convergence_study, gn_report, load_config,
                      run_experiment)


def _floats(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decaylab", description="Long-time decay experiments for scalar conservation laws.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="solve a configured problem and write decay/GN/envelope reports")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: outputs.directory from the config)")
    st = sub.add_parser("study", help="grid refinement study against an exact solution")
    st.add_argument("config")
    st.add_argument("--refine", type=_ints, required=True, help="cell counts, e.g. 100,200,400,800")
    st.add_argument("--out", help="CSV path for the order table")
    af = sub.add_parser("analyze-flux", help="nonlinearity set and genuine-nonlinearity checks only")
    af.add_argument("config")
    orc = sub.add_parser("oracle", help="exact Example 1 profiles as x,u CSV per time")
    orc.add_argument("times", type=_floats)
    orc.add_argument("--epsilon", type=float, default=None, help="perturbation height (periodic case if omitted)")
    orc.add_argument("--points", type=int, default=401)
    orc.add_argument("--out", help="directory for one CSV per time (default: print to stdout)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.verb == "run":
            res = run_experiment(load_config(args.config), args.out)
            print(f"{res.summary['name']}: verdict={res.verdict} expected={res.expected} -> {res.out_dir}")
            return res.exit_code
        if args.verb == "study":
            cfg = load_config(args.config)
            out = args.out or str(cfg.base_dir / f"{cfg.name}-study.csv")
            rows = convergence_study(cfg, args.refine, out)
            print("cells,dx,l1_error,order")
            for c, h, e, o in rows:
                print(f"{c},{h:.6g},{e:.6e},{o:.3f}")
            return EXIT_OK
        if args.verb == "analyze-flux":
            print(json.dumps(gn_report(load_config(args.config)), indent=2, sort_keys=True))
            return EXIT_OK
        if args.verb == "oracle":
            if any(t < 0 for t in args.times):
                raise ConfigError("times must be non-negative")
            data = oracle.plot_data(args.times, args.epsilon, args.points)
            if args.out:
                d = Path(args.out)
                d.mkdir(parents=True, exist_ok=True)
                for t, text in data.items():
                    (d / f"example1_t{t:g}.csv").write_text(text)
            else:
                for t, text in data.items():
                    print(f"# t = {t:g}")
                    sys.stdout.write(text)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG
