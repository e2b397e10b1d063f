"""Command-line experiment runner.

Subcommands:

* ``run``           -- execute an experiment from a preset and/or JSON config
                       file, with flag overrides, and write the CSV.
* ``oracle-check``  -- certify solver and heuristics against the brute-force
                       oracles on tiny instances.
* ``list-presets``  -- show the available experiment presets.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace

from .experiments import (
    ExperimentConfig,
    PRESET_NAMES,
    certify_tiny_instances,
    preset,
    run_experiment,
)

_LIST_FIELDS = {"sweep_values", "schemes"}


def _load_config(args) -> ExperimentConfig:
    cfg = preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in _LIST_FIELDS & set(data):
            data[key] = tuple(data[key])
        cfg = replace(cfg, **data)
    overrides = {}
    for name in ("trials", "out", "workers"):
        val = getattr(args, name)
        if val is not None:
            overrides[name] = val
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.schemes is not None:
        overrides["schemes"] = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    if cfg.out is None:
        cfg = replace(cfg, out="results.csv")
    rows = run_experiment(cfg, diagnostics_path=args.diagnostics)
    print(f"wrote {len(rows)} rows to {cfg.out}")
    return 0


def _cmd_oracle_check(args) -> int:
    ok, rows = certify_tiny_instances(
        n_instances=args.count, base_seed=args.seed or 7000, verbose=True
    )
    n_bad = sum(1 for r in rows if not r["ok"])
    print(f"{len(rows) - n_bad}/{len(rows)} instances certified")
    return 0 if ok else 1


def _cmd_list_presets(args) -> int:
    for name in PRESET_NAMES:
        cfg = preset(name)
        print(
            f"{name}: scenario={cfg.scenario} K={cfg.k} J={cfg.j} N={cfg.n} "
            f"sweep={cfg.sweep_axis}{list(cfg.sweep_values)} "
            f"schemes={','.join(cfg.schemes)}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayalloc",
        description="Max-min fair relay selection and power allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep and write CSV")
    p_run.add_argument("--preset", choices=PRESET_NAMES, help="start from a named preset")
    p_run.add_argument("--config", help="JSON config file (flat keys override the preset)")
    p_run.add_argument("--out", help="output CSV path (default results.csv)")
    p_run.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep point")
    p_run.add_argument("--seed", type=int, help="base seed; trial t uses seed base+t")
    p_run.add_argument("--schemes", help="comma-separated scheme subset")
    p_run.add_argument("--workers", type=int, help="worker processes (default 1)")
    p_run.add_argument("--diagnostics", help="also write per-row JSON lines here")
    p_run.set_defaults(func=_cmd_run)

    p_oc = sub.add_parser("oracle-check", help="tiny-instance oracle certification")
    p_oc.add_argument("--count", type=int, default=10, help="number of tiny instances")
    p_oc.add_argument("--seed", type=int, help="base seed (default 7000)")
    p_oc.set_defaults(func=_cmd_oracle_check)

    p_lp = sub.add_parser("list-presets", help="list experiment presets")
    p_lp.set_defaults(func=_cmd_list_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
