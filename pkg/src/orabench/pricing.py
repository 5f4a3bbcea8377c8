"""Exponential posted pricing driven by consumption estimates.

Prices start at ``lambda_init`` and move multiplicatively with the gap between
what the algorithm actually consumed and what the estimates predicted::

    lambda_ij = lambda_init * exp(delta_j * sum_{l<i} (a_alg_lj - a_hat_lj))

There is no renormalization across resources. The run stops after the first
step at which some resource overshoots its estimated prefix by ``eps*B_j/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Instance, RealizedRequest, Trace, best_response_index, sample_request
from .lp import build_configuration_lp, solution_consumption, solve_packing_lp

CERT_TOL = 1e-9


class BudgetTooSmall(ValueError):
    """Some delta_j exceeds 1/2: the budget is below the regime the price rule needs."""


@dataclass(frozen=True)
class Estimates:
    opt_hat: float
    a_hat: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        a = np.array(self.a_hat, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"a_hat must be an n x m matrix, got shape {a.shape}")
        if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
            raise ValueError("a_hat entries must lie in [0, 1]")
        if not self.opt_hat >= 0 or not math.isfinite(self.opt_hat):
            raise ValueError(f"opt_hat must be finite and >= 0, got {self.opt_hat}")
        if not self.beta >= 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        a.setflags(write=False)
        object.__setattr__(self, "a_hat", a)
        object.__setattr__(self, "opt_hat", float(self.opt_hat))
        object.__setattr__(self, "beta", float(self.beta))


@dataclass(frozen=True)
class PricingParams:
    epsilon: float
    lambda_init: float
    delta: np.ndarray


def log_term(n: int, m: int, beta: float, epsilon: float) -> float:
    return math.log(n * m * beta / epsilon)


def check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2], got {epsilon}")


def compute_parameters(est: Estimates, n: int, m: int, budgets, epsilon: float) -> PricingParams:
    check_epsilon(epsilon)
    budgets = np.asarray(budgets, dtype=float)
    if budgets.shape != (m,) or np.any(budgets <= 0):
        raise ValueError(f"need {m} positive budgets, got {budgets}")
    L = log_term(n, m, est.beta, epsilon)
    lambda_init = est.opt_hat * 4.0 * L / (n * m)
    delta = 8.0 * L / (epsilon * budgets)
    if np.any(delta > 0.5):
        j = int(np.argmax(delta))
        raise BudgetTooSmall(
            f"delta[{j}] = {delta[j]:.4g} > 1/2; need B_j >= {16.0 * L / epsilon:.4g}")
    delta.setflags(write=False)
    return PricingParams(float(epsilon), float(lambda_init), delta)


def min_budget(n: int, m: int, epsilon: float, beta: float = 1.0) -> float:
    """Smallest budget for which every delta_j <= 1/2."""
    return 16.0 * log_term(n, m, beta, epsilon) / epsilon


def price_vector(step: int, cum_alg, cum_hat, params: PricingParams) -> np.ndarray:
    """Prices quoted to request ``step``; ``cum_*`` are sums over earlier steps."""
    diff = np.asarray(cum_alg, dtype=float) - np.asarray(cum_hat, dtype=float)
    return params.lambda_init * np.exp(params.delta * diff)


def run_exponential_pricing(inst: Instance, est: Estimates, epsilon: float,
                            rng: np.random.Generator | None = None,
                            requests: Sequence[RealizedRequest] | None = None,
                            augmented: Sequence[np.ndarray] | None = None) -> Trace:
    """One run of exponential pricing.

    Requests are drawn step by step from ``rng`` unless ``requests`` is given.
    ``augmented`` optionally supplies, per step, the observed value vector
    used in the argmax; the trace then records observed gains in ``values``
    and base gains in ``base_values``.
    """
    n, m = inst.n, inst.m
    if est.a_hat.shape != (n, m):
        raise ValueError(f"a_hat has shape {est.a_hat.shape}, expected {(n, m)}")
    if requests is None and rng is None:
        raise ValueError("need either an rng or pre-realized requests")
    params = compute_parameters(est, n, m, inst.budgets, epsilon)
    budgets = np.asarray(inst.budgets)
    threshold = epsilon * budgets / 2.0
    cap = budgets * (1.0 + 1e-12)

    trace = Trace(m=m, base_values=[] if augmented is not None else None)
    trace.meta.update(lambda_init=params.lambda_init, delta=params.delta.tolist(), epsilon=epsilon)
    cum_alg = np.zeros(m)
    cum_hat = np.zeros(m)
    for i in range(n):
        req = requests[i] if requests is not None else sample_request(inst.distributions[i], i, rng)
        prices = price_vector(i, cum_alg, cum_hat, params)
        seen = req.values if augmented is None else augmented[i]
        k = best_response_index(seen, req.consumption, prices)
        a = req.consumption[k]
        if k != 0 and np.any(cum_alg + a > cap):
            trace.guard_activations += 1
            k = 0
            a = req.consumption[0]
        trace.record(i, req.type_index, prices, k, float(seen[k]), a)
        if augmented is not None:
            trace.base_values.append(float(req.values[k]))
        cum_alg = cum_alg + a
        cum_hat = cum_hat + est.a_hat[i]
        if np.any(cum_alg >= cum_hat + threshold):
            trace.terminated_early = True
            trace.stop_time = i + 1
            return trace
    trace.stop_time = n
    return trace


def run_fixed_prices(requests: Sequence[RealizedRequest], budgets, prices,
                     values: Sequence[np.ndarray] | None = None) -> Trace:
    """Best responses against constant prices, skipping any decision that would overflow a budget.

    With zero prices this is the greedy baseline. A skipped decision falls back
    to the best decision that still fits.
    """
    budgets = np.asarray(budgets, dtype=float)
    prices = np.asarray(prices, dtype=float)
    m = budgets.shape[0]
    trace = Trace(m=m)
    cum = np.zeros(m)
    cap = budgets * (1.0 + 1e-12)
    for pos, req in enumerate(requests):
        vals = req.values if values is None else values[pos]
        util = vals - req.consumption @ prices
        fits = np.all(cum + req.consumption <= cap, axis=1)
        if not fits[int(np.argmax(util))]:
            trace.guard_activations += 1
        util = np.where(fits, util, -np.inf)
        k = int(np.argmax(util))
        a = req.consumption[k]
        trace.record(req.step, req.type_index, prices, k, float(vals[k]), a)
        cum = cum + a
    trace.stop_time = len(requests)
    return trace


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------

def _check_delta(delta) -> None:
    d = np.asarray(delta, dtype=float)
    if np.any(d <= 0) or np.any(d >= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")


def no_regret_slacks(r, lambda_init, delta) -> np.ndarray:
    """Prefix slacks ``lhs - rhs`` of the zero-price regret inequality.

    ``r`` may be one sequence ``(n,)`` or a batch ``(S, n)`` with per-row
    ``lambda_init`` and ``delta``. Entry ``t`` uses the prefix of length ``t+1``.
    """
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    R = np.atleast_2d(r)
    lam = np.broadcast_to(np.asarray(lambda_init, dtype=float), (R.shape[0],))[:, None]
    dl = np.broadcast_to(np.asarray(delta, dtype=float), (R.shape[0],))[:, None]
    _check_delta(dl)
    if np.any(np.abs(R) > 1.0):
        raise ValueError("rewards must lie in [-1, 1]")
    if np.any(lam <= 0):
        raise ValueError("lambda_init must be positive")
    before = np.concatenate([np.zeros((R.shape[0], 1)), np.cumsum(R, axis=1)[:, :-1]], axis=1)
    lam_star = lam * np.exp(dl * before)
    lhs = np.cumsum(lam_star * R, axis=1)
    pos = np.cumsum(lam_star * np.maximum(R, 0.0), axis=1)
    rhs = -2.0 * lam / dl - 4.0 * dl * pos
    out = lhs - rhs
    return out[0] if single else out


def check_no_regret_certificate(r, lambda_init: float, delta: float,
                                tau: int | None = None) -> tuple[float, float, bool]:
    """Evaluate the regret inequality on the prefix of length ``tau`` (default: all)."""
    _check_delta(delta)
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > 1.0):
        raise ValueError("rewards must lie in [-1, 1]")
    if lambda_init <= 0:
        raise ValueError("lambda_init must be positive")
    tau = r.shape[0] if tau is None else int(tau)
    if not 0 <= tau <= r.shape[0]:
        raise ValueError(f"tau={tau} outside [0, {r.shape[0]}]")
    r = r[:tau]
    before = np.concatenate([[0.0], np.cumsum(r)[:-1]]) if tau else np.zeros(0)
    lam_star = lambda_init * np.exp(delta * before)
    lhs = float(np.sum(lam_star * r))
    rhs = float(-2.0 * lambda_init / delta - 4.0 * delta * np.sum(lam_star * np.maximum(r, 0.0)))
    return lhs, rhs, lhs >= rhs - CERT_TOL


def check_revenue_loss_certificate(trace: Trace, consumption_star, params: PricingParams,
                                   epsilon: float) -> list[tuple[float, float, bool]]:
    """Per resource: ``sum lambda (a* - a_alg) <= 3 lambda_init/delta + 5 eps sum lambda a_alg``."""
    tau = trace.stop_time
    star = np.asarray(consumption_star, dtype=float)
    steps = np.asarray(trace.step_index[:tau], dtype=np.int64)
    lam = trace.price_matrix()[:tau]
    alg = trace.consumption_matrix()[:tau]
    star = star[steps] if tau else np.zeros((0, trace.m))
    lhs = np.sum(lam * (star - alg), axis=0)
    rhs = 3.0 * params.lambda_init / params.delta + 5.0 * epsilon * np.sum(lam * alg, axis=0)
    return [(float(l), float(r), bool(l <= r + CERT_TOL)) for l, r in zip(lhs, rhs)]


# --------------------------------------------------------------------------
# Estimates when the distributions are known
# --------------------------------------------------------------------------

def known_distribution_estimates(inst: Instance, epsilon: float) -> Estimates:
    """Opt_hat from the full-budget LP, a_hat from the optimum of the LP at ``(1-eps)B``."""
    check_epsilon(epsilon)
    full = solve_packing_lp(build_configuration_lp(inst, 1.0))
    lp = build_configuration_lp(inst, 1.0 - epsilon)
    sol = solve_packing_lp(lp)
    return Estimates(full.objective, solution_consumption(lp, sol), 1.0)
