"""Instance, scenario and adversary generators.

Every generator is a pure function of its config (seed included). Generated
values carry a deterministic jitter of ``1e-9 * decision_index`` so the
smallest-id tie-break of the best-response oracle almost never matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .augmentation import AugmentationPlan
from .byzantine import ByzantineScenario, byzantine_budget
from .core import Instance, RequestDistribution, RequestType, check_instance, realize
from .pricing import log_term

FAMILIES = ("iid", "nonidentical", "hard_lower_bound", "byzantine", "augmentation")
RED_PRESETS = ("front_loaded", "value_decoys", "budget_burners", "uniform_red")
AUG_PRESETS = ("zero", "uniform_boost", "misleading", "spike", "random")
BUDGET_RULES = ("pricing", "delta", "byzantine")
JITTER = 1e-9


@dataclass(frozen=True)
class GeneratorConfig:
    family: str = "nonidentical"
    n: int = 100
    m: int = 2
    epsilon: float = 0.25
    seed: int = 0
    budgets: tuple[float, ...] | None = None
    budget_rule: str = "pricing"
    K_max: int = 3
    decisions_max: int = 3
    value_range: tuple[float, float] = (1.0, 10.0)
    sparsity: float = 0.5
    z: int = 1
    B: int = 4
    strict: bool = True
    red_fraction: float = 0.0
    red_preset: str = "uniform_red"
    green_family: str = "iid"
    aug_preset: str = "zero"
    boost: float = 1.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.K_max < 1 or self.decisions_max < 1:
            raise ValueError("K_max and decisions_max must be >= 1")
        lo, hi = self.value_range
        if not 0.0 <= lo <= hi:
            raise ValueError(f"bad value_range {self.value_range}")
        if not 0.0 < self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in (0, 1], got {self.sparsity}")
        if self.budget_rule not in BUDGET_RULES:
            raise ValueError(f"unknown budget rule {self.budget_rule!r}")
        if self.budgets is not None:
            if len(self.budgets) != self.m or any(b <= 0 for b in self.budgets):
                raise ValueError(f"need {self.m} positive budgets")
        if not 0.0 <= self.red_fraction < 1.0:
            raise ValueError(f"red fraction must lie in [0, 1), got {self.red_fraction}")
        if self.red_preset not in RED_PRESETS:
            raise ValueError(f"unknown red preset {self.red_preset!r}")
        if self.aug_preset not in AUG_PRESETS:
            raise ValueError(f"unknown augmentation preset {self.aug_preset!r}")
        if self.green_family not in ("iid", "nonidentical"):
            raise ValueError("green_family must be iid or nonidentical")
        if self.boost < 0:
            raise ValueError("boost must be >= 0")

    def with_(self, **kw) -> "GeneratorConfig":
        return replace(self, **kw)


def rule_budget(rule: str, n: int, m: int, epsilon: float, beta: float = 1.0) -> float:
    """Budget sized for a regime: ``pricing`` (32 L / eps^2), ``delta`` (smallest with delta <= 1/2),
    ``byzantine`` (20 ln(m beta/eps) / eps^2), where ``L = ln(n m beta / eps)``."""
    if rule == "pricing":
        return float(math.ceil(32.0 * log_term(n, m, beta, epsilon) / epsilon**2))
    if rule == "delta":
        return float(math.ceil(16.0 * log_term(n, m, beta, epsilon) / epsilon))
    if rule == "byzantine":
        return float(byzantine_budget(m, epsilon, beta))
    raise ValueError(f"unknown budget rule {rule!r}")


def _budgets(cfg: GeneratorConfig) -> np.ndarray:
    if cfg.budgets is not None:
        return np.asarray(cfg.budgets, dtype=float)
    return np.full(cfg.m, rule_budget(cfg.budget_rule, cfg.n, cfg.m, cfg.epsilon))


def _probabilities(rng: np.random.Generator, K: int) -> np.ndarray:
    if K == 1:
        return np.ones(1)
    p = rng.dirichlet(np.ones(K))
    p = np.maximum(p, 1e-3)
    p /= p.sum()
    p[-1] = 1.0 - p[:-1].sum()
    return p


def _random_distribution(rng: np.random.Generator, cfg: GeneratorConfig,
                         counter: list[int]) -> RequestDistribution:
    K = int(rng.integers(1, cfg.K_max + 1))
    probs = _probabilities(rng, K)
    lo, hi = cfg.value_range
    types = []
    for k in range(K):
        d = int(rng.integers(1, cfg.decisions_max + 1))
        vals = rng.uniform(lo, hi, size=d)
        mask = rng.random((d, cfg.m)) < cfg.sparsity
        # Every real decision uses at least one resource.
        mask[np.arange(d), rng.integers(0, cfg.m, size=d)] = True
        cons = np.where(mask, rng.uniform(0.0, 1.0, size=(d, cfg.m)), 0.0)
        jitter = JITTER * (counter[0] + 1 + np.arange(d))
        counter[0] += d
        values = np.concatenate([[0.0], vals + jitter])
        consumption = np.vstack([np.zeros(cfg.m), cons])
        types.append(RequestType(values, consumption, probs[k]))
    return RequestDistribution(tuple(types))


def gen_prophet_instance(cfg: GeneratorConfig) -> Instance:
    family = cfg.family
    if family in ("byzantine", "augmentation"):
        family = cfg.green_family if family == "byzantine" else "nonidentical"
    if family not in ("iid", "nonidentical"):
        raise ValueError(f"family {cfg.family!r} is not a prophet family")
    rng = np.random.default_rng(cfg.seed)
    counter = [0]
    if family == "iid":
        dist = _random_distribution(rng, cfg, counter)
        dists = (dist,) * cfg.n
    else:
        dists = tuple(_random_distribution(rng, cfg, counter) for _ in range(cfg.n))
    return check_instance(Instance(_budgets(cfg), dists))


def hard_group_sizes(z: int, B: int, strict: bool = True) -> tuple[int, int, int]:
    """Per-bit buyer counts of the three groups: ``(sqrt(B/z), 2B/z, B/z)``."""
    if z < 1 or B < 1:
        raise ValueError("z and B must be >= 1")
    if (2 * B) % z or B % z:
        raise ValueError(f"B/z must be an integer, got B={B}, z={z}")
    root = math.sqrt(B / z)
    g1 = round(root)
    if strict and g1 * g1 * z != B:
        raise ValueError(f"sqrt(B/z) = {root:.4g} is not an integer (pass strict=False to round)")
    return g1, 2 * B // z, B // z


def hard_bundles(z: int) -> tuple[np.ndarray, np.ndarray]:
    """Bundle indicators, shape ``(z, 2^z)``: A_l holds items whose bit l-1 is 1, B_l the rest."""
    items = np.arange(2**z)
    A = np.array([(items >> l) & 1 for l in range(z)], dtype=float)
    return A, 1.0 - A


def gen_hard_instance(z: int, B: int, strict: bool = True) -> tuple[Instance, float]:
    """Single-minded buyers over ``2^z`` items; returns the instance and ``sqrt(z/B)``."""
    g1, g2, g3 = hard_group_sizes(z, B, strict)
    m = 2**z
    A, Bb = hard_bundles(z)
    null = np.zeros(m)

    def single(value: float, bundle: np.ndarray, p: float = 1.0) -> RequestType:
        return RequestType([0.0, value], np.vstack([null, bundle]), p)

    dists = []
    for l in range(z):
        dists += [RequestDistribution((single(2.0, A[l]),))] * g1
    for l in range(z):
        two = RequestDistribution((single(1.0, A[l], 0.5), single(3.0, A[l], 0.5)))
        dists += [two] * g2
    for l in range(z):
        dists += [RequestDistribution((single(4.0, Bb[l]),))] * g3
    inst = check_instance(Instance(np.full(m, float(B)), tuple(dists)))
    return inst, math.sqrt(z / B)


def _red_count(n_green: int, red_fraction: float) -> int:
    if not 0.0 <= red_fraction < 1.0:
        raise ValueError(f"red fraction must lie in [0, 1), got {red_fraction}")
    return int(round(red_fraction / (1.0 - red_fraction) * n_green))


def gen_byzantine_scenario(cfg: GeneratorConfig) -> ByzantineScenario:
    """Greens from one realization of a prophet instance; reds per preset, times fixed up front."""
    if cfg.family != "byzantine":
        raise ValueError("gen_byzantine_scenario needs family='byzantine'")
    budgets = np.asarray(cfg.budgets, dtype=float) if cfg.budgets is not None else \
        np.full(cfg.m, float(byzantine_budget(cfg.m, cfg.epsilon)))
    base = gen_prophet_instance(cfg.with_(budgets=tuple(budgets)))
    rng = np.random.default_rng([cfg.seed, 1])
    greens = tuple(RequestType(r.values, r.consumption, 1.0) for r in realize(base, rng))
    n_red = _red_count(len(greens), cfg.red_fraction)
    m = cfg.m
    vmax = max(float(g.values.max()) for g in greens)
    red = []
    for r in range(n_red):
        preset = cfg.red_preset
        if preset == "front_loaded":
            t = r * 1e-6
            menu = greens[int(rng.integers(len(greens)))]
        elif preset == "uniform_red":
            t = float(rng.random())
            menu = greens[int(rng.integers(len(greens)))]
        elif preset == "value_decoys":
            t = float(rng.uniform(0.0, 0.1))
            scarce = np.zeros(m)
            scarce[int(np.argmin(budgets))] = 1.0
            menu = RequestType([0.0, 10.0 * vmax + JITTER * (r + 1)], np.vstack([np.zeros(m), scarce]))
        else:  # budget_burners
            t = float(rng.random())
            menu = RequestType([0.0, 0.0], np.vstack([np.zeros(m), np.ones(m)]))
        red.append((t, RequestType(menu.values, menu.consumption, 1.0)))
    return ByzantineScenario(greens, tuple(red), budgets, cfg.epsilon)


def gen_augmentation_plan(inst: Instance, preset: str, rng: np.random.Generator,
                          boost: float = 1.0, spike: float = 1e6) -> AugmentationPlan:
    if preset not in AUG_PRESETS:
        raise ValueError(f"unknown augmentation preset {preset!r}")
    r: dict = {}
    if preset == "zero":
        pass
    elif preset == "spike":
        r[(0, 0, 1)] = spike
    else:
        for i, dist in enumerate(inst.distributions):
            for k, t in enumerate(dist.types):
                if t.size < 2:
                    continue
                if preset == "uniform_boost":
                    for th in range(1, t.size):
                        r[(i, k, th)] = boost
                elif preset == "random":
                    for th in range(1, t.size):
                        if rng.random() < 0.5:
                            r[(i, k, th)] = float(rng.uniform(0.0, boost))
                else:  # misleading: make the worst value-per-unit decision look best
                    used = t.consumption[1:].sum(axis=1)
                    density = t.values[1:] / np.maximum(used, 1e-12)
                    th = 1 + int(np.argmin(density))
                    r[(i, k, th)] = float(t.values.max() - t.values[th]) + boost
    return AugmentationPlan(r)


def gen_decoy_instance(n: int, m: int, budget: float, decoy_share: float = 0.5,
                       low: float = 1.0, high: float = 10.0) -> Instance:
    """Deterministic family where early cheap requests can exhaust the budget.

    The first ``decoy_share * n`` requests offer ``low`` value for one unit of
    every resource; the rest offer ``high``. Total demand is ``n`` per resource.
    """
    n_low = int(round(decoy_share * n))
    cons = np.vstack([np.zeros(m), np.ones(m)])
    lo = RequestDistribution((RequestType([0.0, low], cons),))
    hi = RequestDistribution((RequestType([0.0, high], cons),))
    return check_instance(Instance(np.full(m, float(budget)), (lo,) * n_low + (hi,) * (n - n_low)))
