"""Domain model: decisions, request distributions, instances, traces.

Menus are stored as dense arrays (``values`` of shape ``(d,)`` and
``consumption`` of shape ``(d, m)``) so the best-response oracle is a single
matrix-vector product. Row 0 of every menu is the null decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

PROB_TOL = 1e-12


class InstanceError(ValueError):
    """Raised when an instance (or one of its parts) violates an invariant."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Decision:
    id: int
    value: float
    consumption: np.ndarray

    @property
    def is_null(self) -> bool:
        return self.value == 0.0 and not np.any(self.consumption)


class RequestType:
    """One realizable request tuple: a finite decision menu plus its probability."""

    __slots__ = ("values", "consumption", "probability")

    def __init__(self, values, consumption, probability: float = 1.0):
        values = _frozen(values)
        consumption = _frozen(consumption)
        if values.ndim != 1 or consumption.ndim != 2 or consumption.shape[0] != values.shape[0]:
            raise InstanceError(
                f"menu shape mismatch: values {values.shape}, consumption {consumption.shape}"
            )
        if values.shape[0] == 0:
            raise InstanceError("menu must contain at least the null decision")
        self.values = values
        self.consumption = consumption
        self.probability = float(probability)

    @classmethod
    def from_decisions(cls, decisions: Sequence[tuple[float, Sequence[float]]], m: int,
                       probability: float = 1.0, prepend_null: bool = True) -> "RequestType":
        """Build a type from ``(value, consumption)`` pairs.

        With ``prepend_null`` the null decision is inserted at id 0 unless the
        first pair already is one.
        """
        rows = [(float(v), list(a)) for v, a in decisions]
        if prepend_null and (not rows or rows[0][0] != 0.0 or any(rows[0][1])):
            rows.insert(0, (0.0, [0.0] * m))
        values = [v for v, _ in rows]
        cons = np.array([a for _, a in rows], dtype=float).reshape(len(rows), m)
        return cls(values, cons, probability)

    @property
    def m(self) -> int:
        return self.consumption.shape[1]

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def decisions(self) -> list[Decision]:
        return [Decision(i, float(self.values[i]), self.consumption[i]) for i in range(self.size)]

    def same_menu(self, other: "RequestType") -> bool:
        return (self.values.shape == other.values.shape
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.consumption, other.consumption))

    def __repr__(self) -> str:
        return f"RequestType(p={self.probability:g}, decisions={self.size}, m={self.m})"


@dataclass(frozen=True)
class RequestDistribution:
    types: tuple[RequestType, ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise InstanceError("a request distribution needs at least one type")
        probs = np.array([t.probability for t in self.types])
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([t.probability for t in self.types])

    @property
    def K(self) -> int:
        return len(self.types)

    @classmethod
    def deterministic(cls, rtype: RequestType) -> "RequestDistribution":
        return cls((RequestType(rtype.values, rtype.consumption, 1.0),))

    @classmethod
    def null(cls, m: int) -> "RequestDistribution":
        return cls((RequestType([0.0], np.zeros((1, m))),))


@dataclass(frozen=True)
class Instance:
    budgets: np.ndarray
    distributions: tuple[RequestDistribution, ...]

    def __post_init__(self):
        object.__setattr__(self, "budgets", _frozen(self.budgets))
        object.__setattr__(self, "distributions", tuple(self.distributions))

    @property
    def m(self) -> int:
        return self.budgets.shape[0]

    @property
    def n(self) -> int:
        return len(self.distributions)

    def with_budgets(self, budgets) -> "Instance":
        return Instance(np.asarray(budgets, dtype=float), self.distributions)


@dataclass(frozen=True)
class RealizedRequest:
    step: int
    type_index: int
    rtype: RequestType

    @property
    def values(self) -> np.ndarray:
        return self.rtype.values

    @property
    def consumption(self) -> np.ndarray:
        return self.rtype.consumption

    @property
    def decisions(self) -> list[Decision]:
        return self.rtype.decisions

    @property
    def max_value(self) -> float:
        return float(self.rtype.values.max())

    @classmethod
    def from_menu(cls, step: int, values, consumption, type_index: int = 0) -> "RealizedRequest":
        return cls(step, type_index, RequestType(values, consumption))


def sample_request(dist: RequestDistribution, step: int, rng: np.random.Generator) -> RealizedRequest:
    """Draw one request by inverse CDF on ``rng.random()``."""
    if dist.K == 1:
        k = 0
    else:
        k = type_from_uniform(dist, rng.random())
    return RealizedRequest(step, k, dist.types[k])


def type_from_uniform(dist: RequestDistribution, u: float) -> int:
    k = int(np.searchsorted(dist._cdf, u, side="right"))
    return min(k, dist.K - 1)


def realize(inst: Instance, rng: np.random.Generator) -> list[RealizedRequest]:
    """One full realization of the request sequence."""
    return [sample_request(d, i, rng) for i, d in enumerate(inst.distributions)]


def utilities(request: RealizedRequest, prices) -> np.ndarray:
    return request.values - request.consumption @ np.asarray(prices, dtype=float)


def best_response_index(values: np.ndarray, consumption: np.ndarray, prices: np.ndarray) -> int:
    # np.argmax returns the first maximiser, i.e. the smallest decision id.
    return int(np.argmax(values - consumption @ prices))


def best_response(request: RealizedRequest, prices) -> Decision:
    """Greedy decision against posted prices; ties go to the smallest id."""
    prices = np.asarray(prices, dtype=float)
    k = best_response_index(request.values, request.consumption, prices)
    return Decision(k, float(request.values[k]), request.consumption[k])


def validate_instance(inst: Instance) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    out: list[str] = []
    budgets = np.asarray(inst.budgets)
    if budgets.ndim != 1 or budgets.shape[0] < 1:
        out.append("instance needs m >= 1 budgets")
        return out
    m = budgets.shape[0]
    if inst.n < 1:
        out.append("instance needs n >= 1 requests")
    for j, b in enumerate(budgets):
        if not np.isfinite(b) or b <= 0:
            out.append(f"budget[{j}] = {b} is not positive")
    for i, dist in enumerate(inst.distributions):
        total = sum(t.probability for t in dist.types)
        if abs(total - 1.0) > PROB_TOL:
            out.append(f"request {i}: type probabilities sum to {total!r}, not 1")
        for k, t in enumerate(dist.types):
            where = f"request {i} type {k}"
            if not 0.0 < t.probability <= 1.0:
                out.append(f"{where}: probability {t.probability} outside (0, 1]")
            if t.m != m:
                out.append(f"{where}: consumption has {t.m} resources, expected {m}")
                continue
            if t.values[0] != 0.0 or np.any(t.consumption[0] != 0.0):
                out.append(f"{where}: decision 0 is not the null decision")
            if np.any(~np.isfinite(t.values)) or np.any(t.values < 0):
                out.append(f"{where}: negative or non-finite value")
            bad = (t.consumption < 0) | (t.consumption > 1) | ~np.isfinite(t.consumption)
            if np.any(bad):
                d, j = np.argwhere(bad)[0]
                out.append(f"{where}: consumption[{d}][{j}] = {t.consumption[d, j]} outside [0, 1]")
    return out


def check_instance(inst: Instance) -> Instance:
    problems = validate_instance(inst)
    if problems:
        raise InstanceError("; ".join(problems))
    return inst


@dataclass(frozen=True)
class StepRecord:
    step: int
    type_index: int
    prices: np.ndarray
    chosen: int
    value: float
    consumption: np.ndarray
    cumulative_consumption: np.ndarray


@dataclass
class Trace:
    """Execution record of one posted-pricing run.

    Per-step data is stored column-wise; ``steps`` materializes records.
    ``stop_time`` counts processed steps (the terminating step included).
    """

    m: int
    step_index: list[int] = field(default_factory=list)
    type_index: list[int] = field(default_factory=list)
    prices: list[np.ndarray] = field(default_factory=list)
    chosen: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    consumption: list[np.ndarray] = field(default_factory=list)
    base_values: list[float] | None = None
    stop_time: int = 0
    terminated_early: bool = False
    guard_activations: int = 0
    meta: dict = field(default_factory=dict)

    def record(self, step: int, type_index: int, prices: np.ndarray, chosen: int,
               value: float, consumption: np.ndarray) -> None:
        self.step_index.append(step)
        self.type_index.append(type_index)
        self.prices.append(prices)
        self.chosen.append(chosen)
        self.values.append(value)
        self.consumption.append(consumption)

    @property
    def total_value(self) -> float:
        return float(np.sum(self.values)) if self.values else 0.0

    @property
    def base_total_value(self) -> float:
        vals = self.values if self.base_values is None else self.base_values
        return float(np.sum(vals)) if vals else 0.0

    def price_matrix(self) -> np.ndarray:
        return np.array(self.prices).reshape(len(self.prices), self.m)

    def consumption_matrix(self) -> np.ndarray:
        return np.array(self.consumption, dtype=float).reshape(len(self.consumption), self.m)

    def cumulative_consumption(self) -> np.ndarray:
        return np.cumsum(self.consumption_matrix(), axis=0)

    def total_consumption(self) -> np.ndarray:
        c = self.consumption_matrix()
        return c.sum(axis=0) if len(c) else np.zeros(self.m)

    @property
    def steps(self) -> list[StepRecord]:
        cum = self.cumulative_consumption()
        return [StepRecord(self.step_index[t], self.type_index[t], self.prices[t], self.chosen[t],
                           self.values[t], self.consumption[t], cum[t])
                for t in range(len(self.chosen))]

    def __iter__(self) -> Iterator[StepRecord]:
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.chosen)

    def max_utilization(self, budgets) -> float:
        if not self.consumption:
            return 0.0
        return float(np.max(self.total_consumption() / np.asarray(budgets, dtype=float)))

    def identical_to(self, other: "Trace") -> bool:
        """Bitwise comparison of every recorded quantity."""
        if (self.step_index != other.step_index or self.type_index != other.type_index
                or self.chosen != other.chosen or self.stop_time != other.stop_time
                or self.terminated_early != other.terminated_early):
            return False
        return (np.array_equal(self.price_matrix(), other.price_matrix())
                and np.array_equal(np.array(self.values), np.array(other.values))
                and np.array_equal(self.consumption_matrix(), other.consumption_matrix()))
