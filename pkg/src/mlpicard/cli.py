"""Command line entry point: ``mlp-bench`` / ``python -m mlpicard``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .harness import ExperimentError, ExperimentSpec, ReferenceMode, emit_csv, emit_plot, render_table, run_experiment

log = logging.getLogger("mlpicard")

DEFAULTS = {
    "example": None,
    "d": "10",
    "n": "1..5",
    "runs": 5,
    "reference": "paper-mlp",
    "seed": 0,
    "workers": 1,
    "csv": None,
    "plot": None,
    "fixtures": None,
    "t": None,
    "r": None,
    "em_steps": None,
    "no_timing": False,
}


def parse_int_list(text) -> list[int]:
    """``"1..4,6"`` -> ``[1, 2, 3, 4, 6]``; also accepts ints and lists."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty integer list {text!r}")
    return out


def parse_radius(text) -> float:
    value = math.inf if str(text).strip().lower() in ("inf", "infinity", "∞") else float(text)
    if not value >= 0:
        raise ValueError("truncation radius must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mlp-bench",
        description="Multilevel Picard benchmark: relative L2-errors, draw counts and timings.",
    )
    p.add_argument("--config", help="JSON file with the same keys as the flags; flags win")
    p.add_argument("--example", choices=["allen-cahn", "sine-gordon", "heat-system", "semilinear-bs"])
    p.add_argument("--d", help="dimensions, e.g. 10,100 (default 10)")
    p.add_argument("--n", help="iteration indices with M = n, e.g. 1..6 (default 1..5)")
    p.add_argument("--runs", type=int, help="independent realizations per cell (default 5)")
    p.add_argument("--reference", help="paper-ds, paper-mlp or self:N (default paper-mlp)")
    p.add_argument("--seed", type=int, help="master seed, 64-bit (default 0)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--csv", help="write result rows as CSV")
    p.add_argument("--plot", help="write an error-vs-cost SVG (plus .dat data file)")
    p.add_argument("--fixtures", help="reference-value file replacing the bundled one")
    p.add_argument("--t", type=float, help="evaluation time override")
    p.add_argument("--r", help="truncation radius override (number or inf)")
    p.add_argument("--em-steps", type=float, dest="em_steps", help="use Euler-Maruyama with this many steps per unit time")
    p.add_argument("--no-timing", action="store_true", default=None, dest="no_timing",
                   help="leave the runtime column empty (byte-reproducible CSV)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ValueError(f"unknown config key {key!r}")
            opts[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if not opts["example"]:
        raise ValueError("--example is required (flag or config key)")
    return opts


def spec_from_options(opts: dict) -> ExperimentSpec:
    return ExperimentSpec(
        example=opts["example"],
        dims=parse_int_list(opts["d"]),
        ns=parse_int_list(opts["n"]),
        runs=int(opts["runs"]),
        reference=ReferenceMode.parse(str(opts["reference"])),
        seed=int(opts["seed"]),
        workers=int(opts["workers"]),
        fixtures=opts["fixtures"],
        t=None if opts["t"] is None else float(opts["t"]),
        r=None if opts["r"] is None else parse_radius(opts["r"]),
        em_steps=None if opts["em_steps"] is None else float(opts["em_steps"]),
        record_timing=not opts["no_timing"],
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        opts = resolve_options(args)
        spec = spec_from_options(opts)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))

    status = 0
    try:
        rows = run_experiment(spec)
    except ExperimentError as exc:
        for failure in exc.failures:
            print(f"error: {failure}", file=sys.stderr)
        rows, status = exc.rows, 1
    except (KeyError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if rows:
        print(f"{spec.example}  reference={spec.reference}  runs={spec.runs}  seed={spec.seed}  workers={spec.workers}")
        print(render_table(rows))
        if opts["csv"]:
            emit_csv(rows, opts["csv"])
        if opts["plot"]:
            emit_plot(rows, opts["plot"], title=spec.example.replace("_", " "))
    return status


if __name__ == "__main__":
    sys.exit(main())
