"""Pricing under random-order arrivals with adversarial (red) insertions.

Green requests are fixed menus whose arrival times are uniform on [0, 1];
red requests carry adversary-chosen times. Time is cut into ``T`` slots with
at most one request each (``discretize``), and ``run_byzantine_pricing`` runs
two independent halves of an exponential price rule that targets a flat
per-slot consumption of ``(1-eps) B / T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import RealizedRequest, RequestType, Trace, best_response_index
from .lp import (TooLargeError, brute_force_offline_opt, build_sample_lp, search_space_size,
                 solve_packing_lp)
from .pricing import check_epsilon

DUMMY, GREEN, RED = 0, 1, 2
KIND_NAMES = {DUMMY: "dummy", GREEN: "green", RED: "red"}


@dataclass(frozen=True)
class ByzantineScenario:
    green: tuple[RequestType, ...]
    red: tuple[tuple[float, RequestType], ...]
    budgets: np.ndarray
    epsilon: float
    opt_hat: float | None = None
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "green", tuple(self.green))
        object.__setattr__(self, "red", tuple((float(t), rt) for t, rt in self.red))
        object.__setattr__(self, "budgets", np.asarray(self.budgets, dtype=float))
        check_epsilon(self.epsilon)
        for t, _ in self.red:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"red arrival time {t} outside [0, 1]")

    @property
    def n_green(self) -> int:
        return len(self.green)

    @property
    def n_red(self) -> int:
        return len(self.red)

    @property
    def m(self) -> int:
        return self.budgets.shape[0]

    @property
    def T(self) -> int:
        return slot_count(self.n_green + self.n_red, self.epsilon)

    def with_opt_hat(self, opt_hat: float, beta: float = 1.0) -> "ByzantineScenario":
        return ByzantineScenario(self.green, self.red, self.budgets, self.epsilon, opt_hat, beta)


def slot_count(n: int, epsilon: float) -> int:
    return max(1, math.ceil(n * n / epsilon))


def time_to_slot(t: float, T: int) -> int:
    return max(1, math.ceil(t * T))


@dataclass(frozen=True)
class SlotSchedule:
    """Occupied slots only; every other slot of ``1..T`` holds a dummy."""

    T: int
    slots: np.ndarray          # sorted 1-based slot numbers of occupied slots
    kinds: np.ndarray          # GREEN or RED per occupied slot
    origin: np.ndarray         # index into scenario.green or scenario.red
    menus: tuple[RequestType, ...]
    conflicts: int = 0         # greens whose first draw hit an occupied slot
    resamples: int = 0
    discarded_red: int = 0

    def kind_at(self, slot: int) -> int:
        pos = np.searchsorted(self.slots, slot)
        if pos < self.slots.size and self.slots[pos] == slot:
            return int(self.kinds[pos])
        return DUMMY

    def dense_kinds(self) -> np.ndarray:
        out = np.zeros(self.T, dtype=np.int64)
        out[self.slots - 1] = self.kinds
        return out

    def validate(self, n_green: int) -> list[str]:
        problems = []
        if np.any(np.diff(self.slots) <= 0):
            problems.append("occupied slots are not strictly increasing")
        if self.slots.size and (self.slots[0] < 1 or self.slots[-1] > self.T):
            problems.append("slot number outside 1..T")
        greens = np.sort(self.origin[self.kinds == GREEN])
        if not np.array_equal(greens, np.arange(n_green)):
            problems.append("green requests are not placed exactly once each")
        return problems


def discretize(scenario: ByzantineScenario, epsilon: float, rng: np.random.Generator,
               T: int | None = None) -> SlotSchedule:
    """Map red times and fresh uniform green times onto slots.

    The first red in a slot wins. A green landing on an occupied slot counts
    as a conflict and redraws its time until it lands on a free slot.
    """
    check_epsilon(epsilon)
    T = slot_count(scenario.n_green + scenario.n_red, epsilon) if T is None else int(T)
    if scenario.n_green > T:
        raise ValueError(f"{scenario.n_green} greens cannot fit in {T} slots")
    occupied: dict[int, tuple[int, int]] = {}
    discarded = 0
    red_order = sorted(range(scenario.n_red), key=lambda r: (scenario.red[r][0], r))
    for r in red_order:
        s = time_to_slot(scenario.red[r][0], T)
        if s in occupied:
            discarded += 1
        else:
            occupied[s] = (RED, r)
    free_total = T - len(occupied)
    if scenario.n_green > free_total:
        raise ValueError("not enough free slots for the green requests")
    conflicts = resamples = 0
    for g in range(scenario.n_green):
        s = time_to_slot(rng.random(), T)
        if s in occupied:
            conflicts += 1
            while s in occupied:
                resamples += 1
                s = time_to_slot(rng.random(), T)
        occupied[s] = (GREEN, g)
    slots = np.array(sorted(occupied), dtype=np.int64)
    kinds = np.array([occupied[s][0] for s in slots], dtype=np.int64)
    origin = np.array([occupied[s][1] for s in slots], dtype=np.int64)
    menus = tuple(scenario.green[o] if k == GREEN else scenario.red[o][1]
                  for k, o in zip(kinds, origin))
    return SlotSchedule(T, slots, kinds, origin, menus, conflicts, resamples, discarded)


def byzantine_lambda_init(opt_hat: float, m: int, epsilon: float) -> float:
    return epsilon**5 * opt_hat / m**4


def byzantine_budget(m: int, epsilon: float, beta: float = 1.0, constant: float = 20.0) -> int:
    """Budget ``ceil(c * ln(m beta / eps) / eps^2)``; ``c >= 16`` keeps each half within ``B/2 + 1``."""
    return math.ceil(constant * math.log(m * beta / epsilon) / epsilon**2)


def run_byzantine_pricing(schedule: SlotSchedule, budgets, epsilon: float, opt_hat: float,
                          beta: float = 1.0, record_dummies: bool = False) -> Trace:
    """Two-half exponential pricing over a slot schedule.

    Dummy slots consume nothing, so only occupied slots need simulating; the
    price at any slot follows in closed form from the local step counter.
    Set ``record_dummies`` to also log every dummy slot.
    """
    check_epsilon(epsilon)
    budgets = np.asarray(budgets, dtype=float)
    m = budgets.shape[0]
    T = schedule.T
    lam0 = byzantine_lambda_init(opt_hat, m, epsilon)
    cap_price = lam0 * (m * beta / epsilon) ** 8
    target = (1.0 - epsilon) * budgets / T
    hard_cap = budgets * (1.0 + 1e-12)
    half = T // 2

    trace = Trace(m=m)
    kinds: list[int] = []
    origins: list[int] = []
    total = np.zeros(m)
    halves = []
    occ = {int(s): p for p, s in enumerate(schedule.slots)}
    for start, stop in ((1, half), (half + 1, T)):
        used = np.zeros(m)
        broken_at = None
        served = 0
        slots = range(start, stop + 1) if record_dummies else \
            [int(s) for s in schedule.slots if start <= s <= stop]
        for s in slots:
            t = s - start + 1
            prices = lam0 * np.exp(epsilon * (used - (t - 1) * target))
            p = occ.get(s)
            if p is None:
                kinds.append(DUMMY)
                origins.append(-1)
                trace.record(s, -1, prices, 0, 0.0, np.zeros(m))
                continue
            menu = schedule.menus[p]
            if broken_at is not None:
                k = 0
            else:
                k = best_response_index(menu.values, menu.consumption, prices)
                if k != 0 and np.any(total + menu.consumption[k] > hard_cap):
                    trace.guard_activations += 1
                    k = 0
            a = menu.consumption[k]
            kinds.append(int(schedule.kinds[p]))
            origins.append(int(schedule.origin[p]))
            trace.record(s, int(schedule.origin[p]), prices, k, float(menu.values[k]), a)
            if broken_at is not None:
                continue
            served += 1
            used = used + a
            total = total + a
            nxt = lam0 * np.exp(epsilon * (used - t * target))
            if np.any(nxt > cap_price):
                broken_at = s
        halves.append({"start": start, "stop": stop, "broken_at": broken_at,
                       "consumption": used.tolist(), "served": served})
    trace.stop_time = T
    trace.terminated_early = any(h["broken_at"] is not None for h in halves)
    trace.meta.update(kinds=kinds, origins=origins, halves=halves, lambda_init=lam0,
                      price_cap=cap_price, epsilon=epsilon, T=T)
    return trace


def half_consumptions(trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    h = trace.meta["halves"]
    return np.array(h[0]["consumption"]), np.array(h[1]["consumption"])


def red_allocations(trace: Trace) -> int:
    """Number of red slots that received a nonnull decision."""
    return sum(1 for kd, k in zip(trace.meta["kinds"], trace.chosen) if kd == RED and k != 0)


def served_prices_within_cap(trace: Trace) -> bool:
    cap = trace.meta["price_cap"]
    halves = trace.meta["halves"]
    for s, prices in zip(trace.step_index, trace.prices):
        h = halves[0] if s <= halves[0]["stop"] else halves[1]
        if h["broken_at"] is not None and s > h["broken_at"]:
            continue
        if np.any(prices > cap):
            return False
    return True


def evaluate_green_benchmark(scenario: ByzantineScenario,
                             guard: int = 10**6) -> tuple[float, str]:
    """Offline optimum of the green requests alone: ``(value, "brute_force" | "lp_ub")``."""
    if scenario.n_green == 0:
        return 0.0, "brute_force"
    reqs = [RealizedRequest(i, 0, rt) for i, rt in enumerate(scenario.green)]
    if search_space_size(reqs) <= guard:
        try:
            value, _ = brute_force_offline_opt(reqs, scenario.budgets, guard=guard)
            return value, "brute_force"
        except TooLargeError:
            pass
    return green_lp_bound(scenario), "lp_ub"


def green_lp_bound(scenario: ByzantineScenario) -> float:
    if scenario.n_green == 0:
        return 0.0
    reqs = [RealizedRequest(i, 0, rt) for i, rt in enumerate(scenario.green)]
    return solve_packing_lp(build_sample_lp(reqs, scenario.budgets)).objective


def strip_red(scenario: ByzantineScenario) -> ByzantineScenario:
    return ByzantineScenario(scenario.green, (), scenario.budgets, scenario.epsilon,
                             scenario.opt_hat, scenario.beta)


def replace_red_with_dummies(schedule: SlotSchedule) -> SlotSchedule:
    keep = schedule.kinds != RED
    return SlotSchedule(schedule.T, schedule.slots[keep], schedule.kinds[keep],
                        schedule.origin[keep],
                        tuple(mn for mn, k in zip(schedule.menus, keep) if k),
                        schedule.conflicts, schedule.resamples, schedule.discarded_red)


def green_menus(requests: Sequence[RealizedRequest]) -> tuple[RequestType, ...]:
    """Realized requests as green menus; a realized menu has probability 1."""
    return tuple(RequestType(r.values, r.consumption, 1.0) for r in requests)
