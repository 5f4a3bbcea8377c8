"""Monte-Carlo experiment runner, benchmarks, aggregates and tail bounds.

Each trial gets its own 64-bit seed derived from the master seed with
``SeedSequence.spawn``, so any single row can be reproduced in isolation.
Set ``ORABENCH_THREADS`` to run trials in that many worker processes; rows
are always emitted in trial order.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
import json

import numpy as np

from .augmentation import AugmentationPlan, run_augmented_pricing
from .byzantine import (GREEN, ByzantineScenario, discretize, evaluate_green_benchmark,
                        run_byzantine_pricing)
from .core import Instance, realize
from .estimation import single_sample_pipeline
from .genlab import (GeneratorConfig, gen_augmentation_plan, gen_byzantine_scenario,
                     gen_hard_instance, gen_prophet_instance)
from .lp import (TooLargeError, brute_force_offline_opt, build_configuration_lp,
                 solve_packing_lp)
from .pricing import known_distribution_estimates, run_exponential_pricing, run_fixed_prices

ALGORITHMS = ("exp_pricing", "single_sample", "byzantine", "augmented",
              "greedy_baseline", "static_price_baseline")
BENCHMARKS = ("auto", "lp_ub", "brute_force")

CSV_COLUMNS = ("trial", "seed", "algorithm", "B", "epsilon", "total_value", "base_value",
               "stop_time", "benchmark", "benchmark_kind", "ratio", "ea", "be", "max_util",
               "guard", "conflicts", "error")


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    generator: GeneratorConfig | None = None
    instance_path: str | None = None
    trials: int = 10
    seed: int = 0
    epsilon: float = 0.25
    D: int | None = None
    benchmark: str = "auto"
    out: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"unknown benchmark {self.benchmark!r}")
        if (self.generator is None) == (self.instance_path is None):
            raise ValueError("give exactly one of generator or instance_path")
        fam = self.generator.family if self.generator is not None else None
        if self.algorithm == "byzantine":
            if fam is not None and fam != "byzantine":
                raise ValueError("byzantine algorithm needs the byzantine family")
        elif fam == "byzantine":
            raise ValueError(f"{self.algorithm} cannot run on a byzantine scenario")
        if self.algorithm == "single_sample" and self.benchmark == "brute_force":
            raise ValueError("single_sample reports against the LP upper bound")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        gen = doc.pop("generator", None)
        if gen is not None:
            gen = dict(gen)
            for key in ("value_range", "budgets"):
                if gen.get(key) is not None:
                    gen[key] = tuple(gen[key])
            gen = GeneratorConfig(**gen)
        return cls(generator=gen, **doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class Report:
    rows: list[dict]
    aggregates: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def read_csv_rows(text: str) -> list[dict]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row: dict = {}
        for k, v in raw.items():
            if v == "" or v is None:
                row[k] = None
            elif k in ("algorithm", "benchmark_kind", "error"):
                row[k] = v
            else:
                try:
                    row[k] = int(v)
                except ValueError:
                    row[k] = float(v)
        rows.append(row)
    return rows


def trial_seeds(master: int, trials: int) -> list[int]:
    children = np.random.SeedSequence(master).spawn(trials)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


# --------------------------------------------------------------------------
# Shared per-experiment context (computed once per process)
# --------------------------------------------------------------------------

@dataclass
class _Context:
    inst: Instance | None = None
    scenario: ByzantineScenario | None = None
    estimates: object = None
    lp_ub: float | None = None
    duals: np.ndarray | None = None
    plan: AugmentationPlan | None = None
    green_bench: tuple[float, str] | None = None


def _load_source(cfg: ExperimentConfig):
    from .io import instance_from_json, load_json, scenario_from_json
    if cfg.instance_path is not None:
        doc = load_json(cfg.instance_path)
        if cfg.algorithm == "byzantine":
            return None, scenario_from_json(doc)
        return instance_from_json(doc), None
    g = cfg.generator
    if g.family == "byzantine":
        return None, gen_byzantine_scenario(g)
    if g.family == "hard_lower_bound":
        return gen_hard_instance(g.z, g.B, g.strict)[0], None
    return gen_prophet_instance(g), None


@lru_cache(maxsize=8)
def _context(cfg_json: str) -> _Context:
    cfg = ExperimentConfig.from_dict(json.loads(cfg_json))
    inst, scenario = _load_source(cfg)
    ctx = _Context(inst=inst, scenario=scenario)
    eps = cfg.epsilon
    if scenario is not None:
        value, kind = evaluate_green_benchmark(scenario)
        ctx.green_bench = (float(value), kind)
        return ctx
    full = solve_packing_lp(build_configuration_lp(inst, 1.0))
    ctx.lp_ub = full.objective
    if cfg.algorithm in ("exp_pricing", "augmented"):
        ctx.estimates = known_distribution_estimates(inst, eps)
    if cfg.algorithm == "static_price_baseline":
        ctx.duals = solve_packing_lp(build_configuration_lp(inst, 1.0 - eps)).duals
    if cfg.algorithm == "augmented":
        preset = cfg.generator.aug_preset if cfg.generator is not None else "zero"
        boost = cfg.generator.boost if cfg.generator is not None else 1.0
        ctx.plan = gen_augmentation_plan(inst, preset, np.random.default_rng([cfg.seed, 7]), boost)
    return ctx


def _cfg_key(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, default=list)


def run_trial(cfg: ExperimentConfig, trial: int, seed: int) -> dict:
    row = {"trial": trial, "seed": seed, "algorithm": cfg.algorithm, "epsilon": cfg.epsilon}
    try:
        row.update(_run_trial(cfg, seed))
    except (ValueError, RuntimeError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    bench = row.get("benchmark")
    if bench is not None and bench > 0 and row.get("total_value") is not None:
        row["ratio"] = row["total_value"] / bench
    else:
        row["ratio"] = None
    return row


def _benchmark_for(cfg: ExperimentConfig, ctx: _Context, requests) -> tuple[float, str]:
    if cfg.benchmark == "brute_force" or (cfg.benchmark == "auto" and requests is not None
                                          and cfg.algorithm != "single_sample"
                                          and cfg.generator is not None
                                          and cfg.generator.family == "hard_lower_bound"):
        try:
            return brute_force_offline_opt(requests, ctx.inst.budgets)[0], "brute_force"
        except TooLargeError:
            if cfg.benchmark == "brute_force":
                raise
    return ctx.lp_ub, "lp_ub"


def _run_trial(cfg: ExperimentConfig, seed: int) -> dict:
    ctx = _context(_cfg_key(cfg))
    rng = np.random.default_rng(seed)
    eps = cfg.epsilon
    if cfg.algorithm == "byzantine":
        sc = ctx.scenario
        bench, kind = ctx.green_bench
        opt_hat = sc.opt_hat if sc.opt_hat is not None else bench
        beta = sc.beta if sc.opt_hat is not None else 1.0
        sched = discretize(sc, eps, rng)
        tr = run_byzantine_pricing(sched, sc.budgets, eps, opt_hat, beta)
        green_value = sum(v for v, k in zip(tr.values, tr.meta["kinds"]) if k == GREEN)
        return {"B": float(np.min(sc.budgets)), "total_value": tr.total_value,
                "base_value": float(green_value), "stop_time": tr.stop_time, "benchmark": bench,
                "benchmark_kind": kind, "ea": False, "be": tr.terminated_early,
                "max_util": tr.max_utilization(sc.budgets), "guard": tr.guard_activations,
                "conflicts": sched.conflicts}

    inst = ctx.inst
    requests = realize(inst, rng)
    if cfg.algorithm == "exp_pricing":
        tr = run_exponential_pricing(inst, ctx.estimates, eps, requests=requests)
    elif cfg.algorithm == "single_sample":
        sample = requests
        est = single_sample_pipeline(sample, inst.budgets, eps, cfg.D, rng)
        requests = realize(inst, rng)
        tr = run_exponential_pricing(inst, est, eps, requests=requests)
    elif cfg.algorithm == "augmented":
        tr = run_augmented_pricing(inst, ctx.plan, eps, rng, ctx.estimates, requests)
    elif cfg.algorithm == "greedy_baseline":
        tr = run_fixed_prices(requests, inst.budgets, np.zeros(inst.m))
    else:
        tr = run_fixed_prices(requests, inst.budgets, ctx.duals)
    bench, kind = _benchmark_for(cfg, ctx, requests)
    return {"B": float(np.min(inst.budgets)), "total_value": tr.total_value,
            "base_value": tr.base_total_value, "stop_time": tr.stop_time, "benchmark": bench,
            "benchmark_kind": kind, "ea": tr.terminated_early, "be": False,
            "max_util": tr.max_utilization(inst.budgets), "guard": tr.guard_activations,
            "conflicts": 0}


def _worker(args):
    cfg_json, trial, seed = args
    return run_trial(ExperimentConfig.from_dict(json.loads(cfg_json)), trial, seed)


def thread_count() -> int:
    raw = os.environ.get("ORABENCH_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"ORABENCH_THREADS must be >= 1, got {raw!r}")
    return n


def run_experiment(cfg: ExperimentConfig) -> Report:
    seeds = trial_seeds(cfg.seed, cfg.trials)
    workers = min(thread_count(), cfg.trials)
    if workers > 1:
        key = _cfg_key(cfg)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_worker, [(key, t, s) for t, s in enumerate(seeds)]))
    else:
        rows = [run_trial(cfg, t, s) for t, s in enumerate(seeds)]
    groups = summarize(rows, [])
    return Report(rows, groups[0] if groups else {})


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------

def _mean_se(xs: list[float]) -> tuple[float | None, float | None]:
    if not xs:
        return None, None
    arr = np.asarray(xs, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def summarize(rows: list[dict], grouping=()) -> list[dict]:
    """Grouped aggregates; an empty grouping gives one global row."""
    if not rows:
        raise ValueError("cannot summarize an empty report")
    grouping = list(grouping)
    buckets: dict[tuple, list[dict]] = {}
    for row in rows:
        buckets.setdefault(tuple(row.get(g) for g in grouping), []).append(row)
    out = []
    for key in sorted(buckets, key=lambda k: tuple((x is None, x) for x in k)):
        members = buckets[key]
        kinds = {r.get("benchmark_kind") for r in members if r.get("benchmark_kind")}
        if len(kinds) > 1:
            raise ValueError(f"group {key} mixes benchmark kinds {sorted(kinds)}")
        ratios = [r["ratio"] for r in members if r.get("ratio") is not None]
        values = [r["total_value"] for r in members if r.get("total_value") is not None]
        ok = [r for r in members if not r.get("error")]
        mean, se = _mean_se(ratios)
        vmean, vse = _mean_se(values)
        pr_ea = float(np.mean([bool(r.get("ea")) for r in ok])) if ok else None
        eps = {r.get("epsilon") for r in members} - {None}
        agg = dict(zip(grouping, key))
        agg.update(
            trials=len(members), errors=len(members) - len(ok),
            benchmark_kind=next(iter(kinds), None),
            mean_ratio=mean, se_ratio=se,
            min_ratio=min(ratios) if ratios else None, max_ratio=max(ratios) if ratios else None,
            undefined_ratios=len(members) - len(ratios),
            mean_value=vmean, se_value=vse,
            pr_ea=pr_ea,
            # Early-termination-heavy groups are flagged when Pr(EA) exceeds epsilon.
            ea_heavy=(pr_ea > next(iter(eps))) if pr_ea is not None and len(eps) == 1 else None,
            pr_be=float(np.mean([bool(r.get("be")) for r in ok])) if ok else None,
            conflict_rate=float(np.mean([(r.get("conflicts") or 0) > 0 for r in ok])) if ok else None,
        )
        out.append(agg)
    return out


def summary_to_csv(table: list[dict]) -> str:
    if not table:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(table[0].keys()), lineterminator="\n")
    w.writeheader()
    for row in table:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def is_trend_nondecreasing(table: list[dict], slack_se: float = 2.0) -> bool:
    """Each group's mean ratio is at least the previous one minus ``slack_se`` combined SEs."""
    for prev, cur in zip(table, table[1:]):
        se = math.hypot(prev["se_ratio"] or 0.0, cur["se_ratio"] or 0.0)
        if cur["mean_ratio"] < prev["mean_ratio"] - slack_se * se:
            return False
    return True


# --------------------------------------------------------------------------
# Tail bounds
# --------------------------------------------------------------------------

def concentration_bound(kind: str, **p) -> float:
    """Closed-form tail probability bounds.

    hoeffding:       N, a, b, eps   -> 2 exp(-2 N eps^2 / (b-a)^2)      (deviation of a mean)
    bernstein:       sigma2, M, eps -> exp(-(eps^2/2) / (sigma2 + M eps/3))   (one tail of a sum)
    bernstein_swor:  u, v, M, mu, tau -> 2 exp(-tau^2 / (M (4 v mu + tau)))
                     (sum of a size-v sample drawn without replacement from u values in [0, M])
    """
    if kind == "hoeffding":
        N, a, b, eps = p["N"], p["a"], p["b"], p["eps"]
        if N < 1 or not b > a or eps <= 0:
            raise ValueError("hoeffding needs N >= 1, b > a, eps > 0")
        return min(1.0, 2.0 * math.exp(-2.0 * N * eps**2 / (b - a) ** 2))
    if kind == "bernstein":
        s2, M, eps = p["sigma2"], p["M"], p["eps"]
        if s2 < 0 or M <= 0 or eps < 0:
            raise ValueError("bernstein needs sigma2 >= 0, M > 0, eps >= 0")
        if s2 == 0 and eps == 0:
            return 1.0
        return min(1.0, math.exp(-(eps**2 / 2.0) / (s2 + M * eps / 3.0)))
    if kind == "bernstein_swor":
        u, v, M, mu, tau = p["u"], p["v"], p["M"], p["mu"], p["tau"]
        if not 1 <= v <= u:
            raise ValueError(f"need 1 <= v <= u, got v={v}, u={u}")
        if M <= 0 or tau <= 0 or not 0 <= mu <= M:
            raise ValueError("bernstein_swor needs M > 0, tau > 0, 0 <= mu <= M")
        return min(1.0, 2.0 * math.exp(-tau**2 / (M * (4.0 * v * mu + tau))))
    raise ValueError(f"unknown bound kind {kind!r}")


def hoeffding_trials(eps: float, failure: float = 1e-3, a: float = 0.0, b: float = 1.0) -> int:
    """Smallest N with ``hoeffding(N, a, b, eps) <= failure``."""
    return math.ceil((b - a) ** 2 * math.log(2.0 / failure) / (2.0 * eps**2))
