import math

import pytest

from orabench.genlab import GeneratorConfig, gen_decoy_instance
from orabench.harness import (CSV_COLUMNS, ExperimentConfig, concentration_bound,
                              hoeffding_trials, is_trend_nondecreasing, read_csv_rows,
                              rows_to_csv, run_experiment, summarize, thread_count, trial_seeds)
from orabench.io import instance_to_json, save_json

SMALL = GeneratorConfig(family="nonidentical", n=60, m=2, K_max=1, seed=3, budgets=(200.0, 200.0))


def test_single_trial_deterministic_instance():
    cfg = ExperimentConfig("exp_pricing", generator=SMALL, trials=1, epsilon=0.5)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert len(a.rows) == 1 and a.to_csv() == b.to_csv()
    row = a.rows[0]
    assert row["benchmark_kind"] == "lp_ub" and row.get("error") is None
    agg = a.aggregates
    assert agg["mean_ratio"] == row["ratio"] and agg["se_ratio"] is None
    assert agg["min_ratio"] == agg["max_ratio"] == row["ratio"]


def test_same_master_seed_same_csv():
    cfg = ExperimentConfig("single_sample", generator=SMALL.with_(K_max=3), trials=4,
                           epsilon=0.5, D=4, seed=11)
    text = run_experiment(cfg).to_csv()
    assert text == run_experiment(cfg).to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    other = run_experiment(ExperimentConfig("single_sample", generator=SMALL.with_(K_max=3),
                                            trials=4, epsilon=0.5, D=4, seed=12)).to_csv()
    assert other != text


def test_trial_seeds_are_prefix_stable():
    assert trial_seeds(5, 3) == trial_seeds(5, 10)[:3]
    assert len(set(trial_seeds(0, 100))) == 100


def test_greedy_loses_to_pricing_on_decoys(tmp_path):
    path = tmp_path / "decoy.json"
    save_json(instance_to_json(gen_decoy_instance(2000, 1, 300.0)), path)
    ratio = {}
    for alg in ("greedy_baseline", "exp_pricing"):
        rep = run_experiment(ExperimentConfig(alg, instance_path=str(path), trials=2, epsilon=0.5))
        ratio[alg] = rep.aggregates["mean_ratio"]
    assert ratio["greedy_baseline"] == pytest.approx(0.1)
    assert ratio["greedy_baseline"] < ratio["exp_pricing"]


def test_errors_are_recorded_per_row():
    # Budget far below the admissible minimum: every trial records the failure.
    cfg = ExperimentConfig("exp_pricing", generator=SMALL.with_(budgets=(2.0, 2.0)), trials=2)
    rep = run_experiment(cfg)
    assert all("BudgetTooSmall" in r["error"] for r in rep.rows)
    assert rep.aggregates["errors"] == 2 and rep.aggregates["mean_ratio"] is None


def test_byzantine_rows_use_green_benchmark():
    gen = GeneratorConfig(family="byzantine", n=8, m=1, seed=0, budgets=(400.0,))
    rep = run_experiment(ExperimentConfig("byzantine", generator=gen, trials=3))
    assert {r["benchmark_kind"] for r in rep.rows} == {"brute_force"}
    assert all(r.get("error") is None for r in rep.rows)


def test_byzantine_green_value_excludes_decoys():
    gen = GeneratorConfig(family="byzantine", n=8, m=1, seed=0, budgets=(400.0,),
                          red_fraction=0.5, red_preset="value_decoys")
    rep = run_experiment(ExperimentConfig("byzantine", generator=gen, trials=3))
    assert all(r["base_value"] <= r["total_value"] for r in rep.rows)
    assert any(r["base_value"] < r["total_value"] for r in rep.rows)
    assert "np." not in rep.to_csv()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nope", generator=SMALL)
    with pytest.raises(ValueError):
        ExperimentConfig("exp_pricing", generator=SMALL, trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig("exp_pricing")
    with pytest.raises(ValueError):
        ExperimentConfig("byzantine", generator=SMALL)
    with pytest.raises(ValueError):
        ExperimentConfig("exp_pricing", generator=GeneratorConfig(family="byzantine"))
    cfg = ExperimentConfig("exp_pricing", generator=SMALL, trials=3)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def rows(ratios, kind="lp_ub", **extra):
    return [dict(trial=i, ratio=r, total_value=r, benchmark_kind=kind, **extra)
            for i, r in enumerate(ratios)]


def test_summarize_examples():
    (one,) = summarize(rows([0.8]))
    assert one["mean_ratio"] == 0.8 and one["se_ratio"] is None and one["trials"] == 1
    table = summarize(rows([0.5, 0.7, 0.9]))
    assert len(table) == 1
    assert table[0]["se_ratio"] == pytest.approx(0.2 / math.sqrt(3))
    mixed = rows([0.5]) + rows([0.6], kind="brute_force")
    with pytest.raises(ValueError):
        summarize(mixed)
    with pytest.raises(ValueError):
        summarize([])


def test_ea_heavy_flag():
    data = [dict(r, epsilon=0.25, ea=i < 2) for i, r in enumerate(rows([0.5] * 4))]
    (g,) = summarize(data)
    assert g["pr_ea"] == 0.5 and g["ea_heavy"] is True
    (h,) = summarize([dict(r, epsilon=0.25, ea=False) for r in rows([0.5] * 4)])
    assert h["ea_heavy"] is False
    assert summarize(rows([0.5]))[0]["ea_heavy"] is None


def test_summarize_grouping_and_trend():
    data = [dict(r, B=B) for B, rs in ((1, [0.5, 0.6]), (2, [0.7, 0.8]), (4, [0.75, 0.85]))
            for r in rows(rs)]
    table = summarize(data, ["B"])
    assert [g["B"] for g in table] == [1, 2, 4]
    assert is_trend_nondecreasing(table)
    assert not is_trend_nondecreasing(list(reversed(table)))


def test_csv_round_trip():
    cfg = ExperimentConfig("exp_pricing", generator=SMALL, trials=2, epsilon=0.5)
    rep = run_experiment(cfg)
    back = read_csv_rows(rep.to_csv())
    assert rows_to_csv(back) == rep.to_csv()


def test_concentration_examples():
    assert concentration_bound("hoeffding", N=100, a=0, b=1, eps=0.2) == pytest.approx(2 * math.exp(-8))
    assert concentration_bound("hoeffding", N=100, a=0, b=1, eps=0.2) == pytest.approx(6.7e-4, rel=0.01)
    assert concentration_bound("bernstein", sigma2=10, M=1, eps=10) == pytest.approx(math.exp(-3.75))
    whole = concentration_bound("bernstein_swor", u=10, v=10, M=1, mu=0.5, tau=1.0)
    assert 0 < whole <= 1
    with pytest.raises(ValueError):
        concentration_bound("bernstein_swor", u=5, v=6, M=1, mu=0.5, tau=1.0)
    with pytest.raises(ValueError):
        concentration_bound("hoeffding", N=0, a=0, b=1, eps=0.1)
    with pytest.raises(ValueError):
        concentration_bound("chernoff")


def test_hoeffding_trials_meets_target():
    N = hoeffding_trials(0.02, 1e-3)
    assert concentration_bound("hoeffding", N=N, a=0, b=1, eps=0.02) <= 1e-3
    assert concentration_bound("hoeffding", N=N - 1, a=0, b=1, eps=0.02) > 1e-3


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("ORABENCH_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("ORABENCH_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("ORABENCH_THREADS", "0")
    with pytest.raises(ValueError):
        thread_count()


def test_parallel_run_matches_serial(monkeypatch):
    cfg = ExperimentConfig("exp_pricing", generator=SMALL.with_(K_max=3), trials=4, epsilon=0.5)
    monkeypatch.setenv("ORABENCH_THREADS", "1")
    serial = run_experiment(cfg).to_csv()
    monkeypatch.setenv("ORABENCH_THREADS", "2")
    assert run_experiment(cfg).to_csv() == serial
