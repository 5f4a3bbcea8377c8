import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import reference_pricing
from orabench.core import Instance, RequestDistribution, RequestType, realize
from orabench.genlab import GeneratorConfig, gen_prophet_instance
from orabench.lp import build_configuration_lp, solution_consumption, solve_packing_lp
from orabench.pricing import (BudgetTooSmall, Estimates, PricingParams,
                              check_no_regret_certificate, check_revenue_loss_certificate,
                              compute_parameters, known_distribution_estimates, no_regret_slacks,
                              price_vector, run_exponential_pricing, run_fixed_prices)


def det(menus, budgets):
    return Instance(budgets, tuple(RequestDistribution((RequestType.from_decisions(d, len(budgets)),))
                                   for d in menus))


def test_compute_parameters_examples():
    est = Estimates(100.0, np.zeros((10, 2)))
    p = compute_parameters(est, 10, 2, [160.0, 160.0], 0.5)
    assert p.lambda_init == pytest.approx(73.77758908227872, rel=1e-12)
    assert p.delta[0] == pytest.approx(0.36888794541139364, rel=1e-12)
    with pytest.raises(BudgetTooSmall):
        compute_parameters(est, 10, 2, [10.0, 10.0], 0.1)
    with pytest.raises(ValueError):
        compute_parameters(est, 10, 2, [160.0, 160.0], 0.6)


def test_estimates_validation():
    with pytest.raises(ValueError):
        Estimates(1.0, np.full((2, 1), 1.5))
    with pytest.raises(ValueError):
        Estimates(-1.0, np.zeros((2, 1)))
    with pytest.raises(ValueError):
        Estimates(1.0, np.zeros((2, 1)), beta=0.5)


def test_price_vector_examples():
    p = PricingParams(0.5, 3.0, np.array([0.2, 0.4]))
    assert price_vector(0, [1.0, 2.0], [1.0, 2.0], p).tolist() == [3.0, 3.0]
    one = PricingParams(0.5, 1.0, np.array([0.5]))
    assert price_vector(0, [2.0], [0.0], one)[0] == pytest.approx(math.e, rel=1e-15)
    two = PricingParams(0.5, 2.0, np.array([0.1]))
    assert price_vector(0, [0.0], [3.0], two)[0] == pytest.approx(1.4816364413634358, rel=1e-14)


def test_zero_value_instance_never_terminates_early():
    inst = det([[(0.0, [1.0])]] * 20, [200.0])
    tr = run_exponential_pricing(inst, Estimates(1.0, np.zeros((20, 1))), 0.5, np.random.default_rng(0))
    assert tr.total_value == 0.0
    assert not tr.terminated_early and tr.stop_time == 20


def test_single_step_takes_the_decision():
    inst = det([[(10.0, [0.5])]], [100.0])  # delta = 8 ln 2 / 50
    tr = run_exponential_pricing(inst, Estimates(1.0, np.zeros((1, 1))), 0.5, np.random.default_rng(0))
    assert tr.chosen == [1] and tr.total_value == 10.0


def golden_instance():
    menus = [[(10.0, [1.0])], [(4.0, [0.5]), (5.0, [1.0])], [(3.0, [1.0])]]
    return det(menus, [60.0])


def test_golden_three_step_trace():
    inst = golden_instance()
    lp = build_configuration_lp(inst, 0.5)
    a_hat = solution_consumption(lp, solve_packing_lp(lp))
    assert a_hat.ravel().tolist() == [1.0, 1.0, 1.0]
    tr = run_exponential_pricing(inst, Estimates(1.0, a_hat), 0.5, np.random.default_rng(0))
    # Desk calculation: lambda_init = 4 ln 6 / 3, delta = 8 ln 6 / 30.
    # Step 1 matches the estimate, step 2 takes the half-unit option, so step 3
    # is quoted lambda_init * exp(-delta / 2).
    expected = [2.3890126256374065, 2.3890126256374065, 1.881329844118394]
    assert np.allclose(tr.price_matrix().ravel(), expected, rtol=1e-14, atol=0)
    assert tr.chosen == [1, 1, 1]
    assert tr.values == [10.0, 4.0, 3.0]
    assert tr.stop_time == 3 and not tr.terminated_early


def test_termination_keeps_triggering_step():
    # eps*B/2 = 45 units of slack; every request takes one unit while a_hat is 0.
    n, B = 100, 180.0
    inst = det([[(50.0, [1.0])]] * n, [B])
    tr = run_exponential_pricing(inst, Estimates(1e-12, np.zeros((n, 1))), 0.5, np.random.default_rng(0))
    assert tr.terminated_early and tr.stop_time == 45
    assert len(tr) == 45 and tr.total_value == 45 * 50.0


def random_run(seed, n=300, m=2, K=3, zero_hat=False):
    cfg = GeneratorConfig(family="nonidentical", n=n, m=m, epsilon=0.5, K_max=K, seed=seed,
                          budgets=(240.0,) * m, sparsity=1.0)
    inst = gen_prophet_instance(cfg)
    est = known_distribution_estimates(inst, 0.5)
    if zero_hat:
        # Tiny lambda_init keeps prices low, so the stop rule is what ends the run.
        est = Estimates(1e-12, np.zeros_like(est.a_hat))
    reqs = realize(inst, np.random.default_rng(seed + 1000))
    return inst, est, reqs, run_exponential_pricing(inst, est, 0.5, requests=reqs)


@pytest.mark.parametrize("zero_hat", [False, True])
@pytest.mark.parametrize("seed", range(6))
def test_matches_reference_implementation(seed, zero_hat):
    inst, est, reqs, tr = random_run(seed, zero_hat=zero_hat)
    menus = [(r.values.tolist(), r.consumption.tolist()) for r in reqs]
    prices, chosen, gains, stop, early = reference_pricing(
        menus, est.a_hat.tolist(), inst.budgets.tolist(), est.opt_hat, 0.5)
    assert tr.chosen == chosen and tr.stop_time == stop and tr.terminated_early == early
    assert np.allclose(tr.price_matrix(), np.array(prices), rtol=1e-12, atol=0)
    assert tr.values == gains


@pytest.mark.parametrize("zero_hat", [False, True])
@pytest.mark.parametrize("seed", range(6))
def test_trace_invariants(seed, zero_hat):
    inst, est, reqs, tr = random_run(seed, zero_hat=zero_hat)
    if zero_hat:
        assert tr.terminated_early
    params = compute_parameters(est, inst.n, inst.m, inst.budgets, 0.5)
    P = tr.price_matrix()
    A = tr.consumption_matrix()
    # Multiplicative price recurrence.
    for t in range(len(tr) - 1):
        ratio = P[t + 1] / P[t]
        want = np.exp(params.delta * (A[t] - est.a_hat[t]))
        assert np.allclose(ratio, want, rtol=1e-12, atol=0)
    # Nonnegative chosen utility.
    for t, k in enumerate(tr.chosen):
        assert reqs[t].values[k] - A[t] @ P[t] >= 0.0
    # Budget display: consumption stays below estimated prefix + eps*B/2 + 1.
    tau = tr.stop_time
    used = A[:tau].sum(axis=0)
    hat = est.a_hat[:tau - 1].sum(axis=0) if tau else np.zeros(inst.m)
    assert np.all(used < hat + 0.5 * inst.budgets / 2 + 1)
    assert tr.guard_activations == 0


def test_determinism_same_seed():
    cfg = GeneratorConfig(family="nonidentical", n=80, m=2, K_max=3, seed=4, budgets=(200.0, 200.0))
    inst = gen_prophet_instance(cfg)
    est = known_distribution_estimates(inst, 0.5)
    a = run_exponential_pricing(inst, est, 0.5, np.random.default_rng(77))
    b = run_exponential_pricing(inst, est, 0.5, np.random.default_rng(77))
    assert a.identical_to(b)


def test_no_regret_examples():
    lhs, rhs, ok = check_no_regret_certificate(np.zeros(50), 2.0, 0.25)
    assert lhs == 0.0 and rhs == pytest.approx(-16.0) and ok
    lhs, rhs, ok = check_no_regret_certificate(np.ones(50), 2.0, 0.25)
    assert lhs > 0 > rhs and ok
    for bad in (0.0, 0.5, 0.7):
        with pytest.raises(ValueError):
            check_no_regret_certificate(np.zeros(3), 1.0, bad)
    with pytest.raises(ValueError):
        check_no_regret_certificate(np.array([1.5]), 1.0, 0.2)


def test_no_regret_random_sweep():
    rng = np.random.default_rng(0)
    R = rng.uniform(-1, 1, size=(1000, 200))
    slacks = no_regret_slacks(R, 1.0, rng.uniform(0.01, 0.49, 1000))
    assert slacks.min() >= -1e-9


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=60), st.floats(0.001, 0.499),
       st.sampled_from([0.01, 1.0, 100.0]))
@settings(max_examples=300, deadline=None)
def test_no_regret_holds_on_every_prefix(r, delta, lam):
    slacks = no_regret_slacks(np.array(r), lam, delta)
    assert slacks.min() >= -1e-9
    tau = len(r) // 2
    lhs, rhs, ok = check_no_regret_certificate(np.array(r), lam, delta, tau)
    assert ok


def test_revenue_loss_examples():
    inst, est, reqs, tr = random_run(3)
    params = compute_parameters(est, inst.n, inst.m, inst.budgets, 0.5)
    same = np.zeros((inst.n, inst.m))
    same[: tr.stop_time] = tr.consumption_matrix()[: tr.stop_time]
    for lhs, rhs, ok in check_revenue_loss_certificate(tr, same, params, 0.5):
        assert lhs == 0.0 and ok

    null = det([[(0.0, [0.0])]] * 5, [80.0])
    est0 = Estimates(1.0, np.zeros((5, 1)))
    tr0 = run_exponential_pricing(null, est0, 0.5, np.random.default_rng(0))
    p0 = compute_parameters(est0, 5, 1, [80.0], 0.5)
    (lhs, rhs, ok), = check_revenue_loss_certificate(tr0, np.zeros((5, 1)), p0, 0.5)
    assert lhs == 0.0 and rhs == pytest.approx(3 * p0.lambda_init / p0.delta[0]) and ok


def test_revenue_loss_holds_with_exact_estimates():
    for seed in range(100):
        cfg = GeneratorConfig(family="nonidentical", n=400, m=2, K_max=1, seed=seed,
                              budgets=(240.0, 240.0), sparsity=1.0)
        inst = gen_prophet_instance(cfg)
        est = known_distribution_estimates(inst, 0.5)
        tr = run_exponential_pricing(inst, est, 0.5, np.random.default_rng(seed))
        params = compute_parameters(est, inst.n, inst.m, inst.budgets, 0.5)
        assert all(ok for _, _, ok in check_revenue_loss_certificate(tr, est.a_hat, params, 0.5))


def test_fixed_prices_respect_budget():
    inst = det([[(1.0, [1.0])]] * 10, [3.0])
    reqs = realize(inst, np.random.default_rng(0))
    tr = run_fixed_prices(reqs, inst.budgets, np.zeros(1))
    assert tr.total_value == 3.0
    assert tr.total_consumption()[0] == 3.0
