"""``simulate`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import EXPERIMENTS, ConfigError, ExperimentSpec, load_raw, nearest_preset, resolve
from .experiments import run_experiment


def _list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description=__doc__)
    p.add_argument("--config", help="JSON configuration file (defaults used when omitted)")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--seeds", type=int, help="number of Monte Carlo runs per cell")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--target-cov", type=_list(str), help="preset keys or CoV values, comma separated")
    p.add_argument("--num-dbs", type=_list(int))
    p.add_argument("--theta-b", type=_list(float))
    p.add_argument("--exclude-mbs-interference", action="store_true")
    p.add_argument("--penalty-form", choices=("hinge", "verbatim"))
    p.add_argument("--workers", type=int)
    p.add_argument("--print-config", action="store_true", help="echo the resolved configuration and exit")
    p.add_argument("--verbose", action="store_true")
    return p


def apply_overrides(raw: dict, args) -> ExperimentSpec:
    """Merge command-line options into a parsed config mapping and resolve it."""
    raw = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    exp = raw.setdefault("experiment", {})
    env = raw.setdefault("environment", {})
    swarm = raw.setdefault("swarm", {})
    if args.experiment:
        exp["name"] = args.experiment
    for key in ("seeds", "master_seed", "workers", "num_dbs", "theta_b"):
        if getattr(args, key) is not None:
            exp[key] = getattr(args, key)
    if args.out is not None:
        exp["output_dir"] = args.out
    if args.exclude_mbs_interference:
        env["exclude_mbs_interference"] = True
    if args.penalty_form is not None:
        swarm["penalty_form"] = args.penalty_form
    if args.target_cov is not None:
        exp.pop("target_cov", None)
    spec = resolve(raw)
    if args.target_cov is not None:
        spec = replace(spec, target_cov=tuple(nearest_preset(spec, v) for v in args.target_cov))
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        raw = load_raw(args.config) if args.config else {}
        spec = apply_overrides(raw, args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        print(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
        return 0
    try:
        paths = run_experiment(spec)
    except OSError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
