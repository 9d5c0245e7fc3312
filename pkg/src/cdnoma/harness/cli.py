"""Command-line entry point: ``cdnoma <verb> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import channel, grouping
from ..netconfig import ConfigError
from .experiment import default_threads, load_spec, run_experiment, validate
from .presets import PRESETS, get_preset


def _spec_for(target: str):
    if target in PRESETS:
        return get_preset(target), target
    path = Path(target)
    if not path.exists():
        raise ConfigError(f"{target!r} is neither a preset nor a spec file "
                          f"(presets: {', '.join(PRESETS)})")
    return load_spec(path), None


def cmd_run(args) -> int:
    spec, preset = _spec_for(args.target)
    spec = spec.scaled(args.full_scale)
    if args.seed is not None:
        spec.seed = args.seed
    if args.trials is not None:
        spec.trials = args.trials
    if args.drops is not None:
        spec.drops = args.drops
    out = run_experiment(spec, args.out, threads=args.threads, preset=preset)
    print(f"wrote {out.directory} ({out.manifest['wall_time_s']:.1f} s)")
    for row in out.summary:
        print(f"  {row['scenario_id']:<32} {row['scheme']:<26} sum SE/cell "
              f"{row['se_bits']:8.3f} +- {row['ci_halfwidth']:.3f}")
    return 0


def cmd_list(args) -> int:
    for name, spec in PRESETS.items():
        budget = f"~{spec.budget_s:g} s" if spec.budget_s else ""
        print(f"{name:<18} {budget:>8}  {spec.description}")
    return 0


def cmd_validate(args) -> int:
    spec, _ = _spec_for(args.target)
    problems = validate(spec.scaled(args.full_scale))
    if problems:
        print(f"{args.target}: {len(problems)} problem(s)")
        for p in problems:
            print(f"  - {p}")
        return 1
    print(f"{args.target}: ok")
    return 0


def cmd_group(args) -> int:
    Rs = channel.load_correlations(args.dump)
    rng = np.random.default_rng(args.seed if args.seed is not None else 1)
    if args.balanced:
        ga = grouping.balanced_group(Rs, args.groups, args.p, rng)
    else:
        ga = grouping.kmeans_group(Rs, args.groups, args.p, rng)
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "groups.csv"
    grouping.write_csv(out, ga)
    print(f"wrote {out}: {ga.G} groups, sizes {ga.sizes()}, total cost {ga.total_cost:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdnoma", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a preset or a YAML spec file")
    r.add_argument("target", help="preset name or spec file")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int, help="channel realizations per drop")
    r.add_argument("--drops", type=int, help="UE drops per sweep point")
    r.add_argument("--out", default="results", help="output root (default: results)")
    r.add_argument("--threads", type=int, default=1,
                   help=f"worker processes (this machine: {default_threads()})")
    r.add_argument("--full-scale", action="store_true", help="publication-scale settings")
    r.set_defaults(func=cmd_run)

    lp = sub.add_parser("list-presets", help="list the preset catalog")
    lp.set_defaults(func=cmd_list)

    v = sub.add_parser("validate", help="check a spec file (or preset) without running it")
    v.add_argument("target")
    v.add_argument("--full-scale", action="store_true")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("group", help="group UEs from a correlation-matrix dump")
    g.add_argument("dump", help=".npy or .csv dump written by dump_correlations")
    g.add_argument("--groups", "-G", type=int, default=8)
    g.add_argument("--p", type=int, default=6, help="eigenspace dimension")
    g.add_argument("--balanced", action="store_true", help="exactly K/G UEs per group")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", default="groups.csv")
    g.set_defaults(func=cmd_group)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for prob in exc.problems:
            print(f"  - {prob}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
