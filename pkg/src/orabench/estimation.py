"""Learning the pricing estimates from a single sample of the request sequence.

The sample is split into ``D`` random parts of equal size. Each part solves its
own sample LP with a ``(1-eps)/D`` share of the budget, and the optimal
solution's per-request consumption becomes that request's estimate. The value
scale ``opt_hat`` is an order statistic of the per-request best values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lp import build_sample_lp, solution_consumption, solve_packing_lp
from .core import RealizedRequest
from .pricing import Estimates, check_epsilon

DEFAULT_MAX_PARTS = 64


class SampleTooSmall(ValueError):
    """Fewer requests than the rank the order-statistic estimator needs."""


@dataclass(frozen=True)
class Partition:
    parts: tuple[np.ndarray, ...]
    pad_count: int
    n: int

    @property
    def D(self) -> int:
        return len(self.parts)

    @property
    def n_padded(self) -> int:
        return self.n + self.pad_count


def random_partition(n: int, D: int, rng: np.random.Generator) -> Partition:
    """Pad ``n`` up to a multiple of ``D`` with null requests, shuffle, and slice."""
    if D < 1:
        raise ValueError(f"D must be >= 1, got {D}")
    pad = (-n) % D
    total = n + pad
    if D > total:
        raise ValueError(f"D={D} exceeds padded size {total}")
    perm = rng.permutation(total)
    size = total // D
    parts = tuple(np.sort(perm[d * size:(d + 1) * size]) for d in range(D))
    return Partition(parts, pad, n)


def theoretical_part_count(n: int, m: int, epsilon: float) -> float:
    """Part count the worst-case analysis asks for; far beyond desk scale."""
    return 1024.0 * math.log(n * m / epsilon) ** 3 / epsilon**4


def default_part_count(n: int) -> int:
    return min(n, DEFAULT_MAX_PARTS)


def partition_accuracy(n: int, m: int, epsilon: float, D: int) -> float:
    """Additive accuracy ``sqrt(4 ln(nm/eps) / D)`` achieved by ``D`` parts."""
    return math.sqrt(4.0 * math.log(n * m / epsilon) / D)


def estimate_prefix_consumptions(sample: Sequence[RealizedRequest], partition: Partition,
                                 budgets, epsilon: float) -> np.ndarray:
    """Per-request consumption estimates, shape ``(n, m)``; pad rows are dropped."""
    budgets = np.asarray(budgets, dtype=float)
    n, m = len(sample), budgets.shape[0]
    if n != partition.n:
        raise ValueError(f"sample has {n} requests, partition covers {partition.n}")
    part_budget = (1.0 - epsilon) / partition.D * budgets
    out = np.zeros((n, m))
    for idx in partition.parts:
        real = [int(i) for i in idx if i < n]
        reqs = [sample[i] for i in real if sample[i].max_value > 0]
        if not reqs:
            continue
        lp = build_sample_lp(reqs, part_budget)
        sol = solve_packing_lp(lp)
        cons = solution_consumption(lp, sol)
        for row, req in zip(cons, reqs):
            out[req.step] = row
    return out


def opt_hat_rank(epsilon: float) -> int:
    # The small offset keeps e.g. 3/0.25 from rounding up to 13.
    return math.ceil(3.0 / epsilon - 1e-9)


def estimate_opt_hat(sample: Sequence[RealizedRequest], epsilon: float) -> float:
    """The ``ceil(3/eps)``-th largest per-request maximum value (ties by index)."""
    rank = opt_hat_rank(epsilon)
    if len(sample) < rank:
        raise SampleTooSmall(f"need at least {rank} requests, got {len(sample)}")
    maxima = np.array([r.max_value for r in sample])
    order = np.lexsort((np.arange(maxima.size), -maxima))
    return float(maxima[order[rank - 1]])


def single_sample_pipeline(sample: Sequence[RealizedRequest], budgets, epsilon: float,
                           D: int | None, rng: np.random.Generator) -> Estimates:
    """Estimates learned from one realization of the request sequence (beta = 1)."""
    check_epsilon(epsilon)
    n = len(sample)
    D = default_part_count(n) if D is None else int(D)
    for pos, req in enumerate(sample):
        if req.step != pos:
            raise ValueError(f"sample position {pos} holds step {req.step}")
    opt_hat = estimate_opt_hat(sample, epsilon)
    partition = random_partition(n, D, rng)
    a_hat = estimate_prefix_consumptions(sample, partition, budgets, epsilon)
    return Estimates(opt_hat, np.clip(a_hat, 0.0, 1.0), 1.0)
