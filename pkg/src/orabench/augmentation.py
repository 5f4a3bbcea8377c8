"""Exponential pricing when an oblivious adversary inflates observed values.

The algorithm sees ``v + r`` with ``r >= 0`` fixed in advance per
``(step, type, decision)``, while prices and estimates come from the base
instance. Gains are recorded both ways.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Instance, RealizedRequest, RequestType, Trace, sample_request
from .pricing import Estimates, known_distribution_estimates, run_exponential_pricing


@dataclass(frozen=True)
class AugmentationPlan:
    r: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, val in dict(self.r).items():
            if len(key) != 3:
                raise ValueError(f"plan keys are (step, type, decision), got {key!r}")
            val = float(val)
            if not val >= 0 or not math.isfinite(val):
                raise ValueError(f"perturbation at {key} must be finite and >= 0, got {val}")
            if val != 0.0:
                clean[tuple(int(x) for x in key)] = val
        object.__setattr__(self, "r", clean)

    def __len__(self) -> int:
        return len(self.r)

    def get(self, i: int, k: int, theta: int) -> float:
        return self.r.get((i, k, theta), 0.0)

    def vector(self, i: int, k: int, size: int) -> np.ndarray:
        out = np.zeros(size)
        for (si, sk, th), val in self.r.items():
            if si == i and sk == k and th < size:
                out[th] = val
        return out

    def to_triplets(self) -> list[dict]:
        return [{"i": i, "k": k, "theta": th, "r": v} for (i, k, th), v in sorted(self.r.items())]

    @classmethod
    def from_triplets(cls, rows) -> "AugmentationPlan":
        return cls({(row["i"], row["k"], row["theta"]): row["r"] for row in rows})

    def _index(self) -> dict:
        idx: dict = {}
        for (i, k, th), val in self.r.items():
            idx.setdefault((i, k), {})[th] = val
        return idx


def augmented_values(req: RealizedRequest, plan: AugmentationPlan) -> np.ndarray:
    return req.values + plan.vector(req.step, req.type_index, req.values.shape[0])


def apply_augmentation(req: RealizedRequest, plan: AugmentationPlan) -> RealizedRequest:
    """The request as observed: values ``v + r``, same consumptions and menu."""
    vals = augmented_values(req, plan)
    if np.array_equal(vals, req.values):
        return req
    return RealizedRequest(req.step, req.type_index,
                           RequestType(vals, req.consumption, req.rtype.probability))


def run_augmented_pricing(inst: Instance, plan: AugmentationPlan, epsilon: float,
                          rng: np.random.Generator, estimates: Estimates | None = None,
                          requests=None) -> Trace:
    """Exponential pricing whose argmax uses augmented values.

    ``estimates`` default to the known-distribution estimates of the base
    instance; pass them in to avoid re-solving the LPs per run.
    """
    est = known_distribution_estimates(inst, epsilon) if estimates is None else estimates
    if requests is None:
        requests = [sample_request(d, i, rng) for i, d in enumerate(inst.distributions)]
    idx = plan._index()
    seen = []
    for req in requests:
        extra = idx.get((req.step, req.type_index))
        if extra is None:
            seen.append(req.values)
        else:
            v = req.values.copy()
            for th, val in extra.items():
                if th < v.shape[0]:
                    v[th] += val
            seen.append(v)
    return run_exponential_pricing(inst, est, epsilon, requests=requests, augmented=seen)


def dominance_slacks(trace: Trace, requests) -> np.ndarray:
    """Per step: chosen augmented utility minus the best base utility at the same prices."""
    out = np.empty(len(trace))
    for t in range(len(trace)):
        req = requests[trace.step_index[t]]
        prices = trace.prices[t]
        chosen = trace.values[t] - float(trace.consumption[t] @ prices)
        best = float(np.max(req.values - req.consumption @ prices))
        out[t] = chosen - best
    return out
