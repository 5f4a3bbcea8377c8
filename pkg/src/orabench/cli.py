"""Command line entry point: ``orabench {gen,run,summarize,validate,lower-bound}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as oio
from .core import realize, validate_instance
from .genlab import (AUG_PRESETS, BUDGET_RULES, FAMILIES, RED_PRESETS, GeneratorConfig,
                     gen_augmentation_plan, gen_byzantine_scenario, gen_hard_instance,
                     gen_prophet_instance)
from .harness import (ExperimentConfig, read_csv_rows, run_experiment, summarize,
                      summary_to_csv)
from .lp import brute_force_offline_opt


def _config_from_args(args) -> GeneratorConfig:
    kw = dict(family=args.family, n=args.n, m=args.m, epsilon=args.epsilon, seed=args.seed,
              K_max=args.K_max, z=args.z, B=args.B, strict=not args.no_strict,
              red_fraction=args.red_fraction, red_preset=args.red_preset,
              aug_preset=args.aug_preset, boost=args.boost, budget_rule=args.budget_rule)
    if args.budget is not None:
        kw["budgets"] = (float(args.budget),) * args.m
    return GeneratorConfig(**kw)


def cmd_gen(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out)
    if cfg.family == "hard_lower_bound":
        inst, eps = gen_hard_instance(cfg.z, cfg.B, cfg.strict)
        doc = oio.instance_to_json(inst)
        doc["epsilon_implied"] = eps
        oio.save_json(doc, out)
    elif cfg.family == "byzantine":
        oio.save_json(oio.scenario_to_json(gen_byzantine_scenario(cfg)), out)
    else:
        inst = gen_prophet_instance(cfg)
        oio.save_json(oio.instance_to_json(inst), out)
        if cfg.family == "augmentation":
            plan = gen_augmentation_plan(inst, cfg.aug_preset,
                                         np.random.default_rng([cfg.seed, 7]), cfg.boost)
            plan_path = Path(args.plan_out) if args.plan_out else out.with_suffix(".plan.json")
            oio.save_json(oio.plan_to_json(plan), plan_path)
    print(f"wrote {out}")
    return 0


def cmd_run(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    cfg = ExperimentConfig.from_dict(doc)
    report = run_experiment(cfg)
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    agg = report.aggregates
    print(f"trials={agg['trials']} errors={agg['errors']} mean_ratio={agg['mean_ratio']} "
          f"se={agg['se_ratio']} pr_ea={agg['pr_ea']} pr_be={agg['pr_be']}", file=sys.stderr)
    return 0


def cmd_summarize(args) -> int:
    rows = read_csv_rows(Path(args.report).read_text())
    grouping = [g for g in (args.group_by or "").split(",") if g]
    text = summary_to_csv(summarize(rows, grouping))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    doc = oio.load_json(args.path)
    if "green" in doc:
        sc = oio.scenario_from_json(doc)
        from .core import Instance, RequestDistribution
        menus = list(sc.green) + [r for _, r in sc.red]
        problems = validate_instance(Instance(sc.budgets, [RequestDistribution((t,)) for t in menus]))
    else:
        problems = validate_instance(oio.instance_from_json(doc))
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return 1 if problems else 0


def cmd_lower_bound(args) -> int:
    inst, eps = gen_hard_instance(args.z, args.B, strict=not args.no_strict)
    rng = np.random.default_rng(args.seed)
    lo, hi = 5 * args.B, 7 * args.B
    values = []
    for _ in range(args.realizations):
        v, _ = brute_force_offline_opt(realize(inst, rng), inst.budgets)
        values.append(v)
    bad = sum(1 for v in values if not lo - 1e-9 <= v <= hi + 1e-9)
    print(f"z={args.z} B={args.B} m={inst.m} buyers={inst.n} eps={eps:.6g}")
    print(f"opt min={min(values):g} mean={np.mean(values):.6g} max={max(values):g} "
          f"range=[{lo}, {hi}] violations={bad}/{len(values)}")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orabench", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance, scenario or plan")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--plan-out")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--epsilon", type=float, default=0.25)
    g.add_argument("--K-max", dest="K_max", type=int, default=3)
    g.add_argument("--budget", type=float, help="same budget for every resource")
    g.add_argument("--budget-rule", choices=BUDGET_RULES, default="pricing")
    g.add_argument("--z", type=int, default=1)
    g.add_argument("--B", type=int, default=4)
    g.add_argument("--no-strict", action="store_true",
                   help="round a non-integer sqrt(B/z) instead of rejecting it")
    g.add_argument("--red-preset", choices=RED_PRESETS, default="uniform_red")
    g.add_argument("--red-fraction", type=float, default=0.0)
    g.add_argument("--aug-preset", choices=AUG_PRESETS, default="zero")
    g.add_argument("--boost", type=float, default=1.0)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a Monte-Carlo experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="aggregate a report CSV")
    s.add_argument("--report", required=True)
    s.add_argument("--group-by", default="")
    s.add_argument("--out")
    s.set_defaults(func=cmd_summarize)

    v = sub.add_parser("validate", help="check an instance or scenario file")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)

    lb = sub.add_parser("lower-bound", help="brute-force realizations of the hard instance")
    lb.add_argument("--z", type=int, default=1)
    lb.add_argument("--B", type=int, default=4)
    lb.add_argument("--realizations", type=int, default=100)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--no-strict", action="store_true")
    lb.set_defaults(func=cmd_lower_bound)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
