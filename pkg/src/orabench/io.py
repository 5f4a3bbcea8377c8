"""JSON and CSV serialization for instances, estimates, plans, scenarios and traces."""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .augmentation import AugmentationPlan
from .byzantine import ByzantineScenario
from .core import Instance, RequestDistribution, RequestType, Trace
from .pricing import Estimates


def _menu_to_json(t: RequestType) -> list[dict]:
    return [{"v": float(v), "a": [float(x) for x in a]} for v, a in zip(t.values, t.consumption)]


def _menu_from_json(rows, m: int, p: float = 1.0) -> RequestType:
    return RequestType.from_decisions([(d["v"], d["a"]) for d in rows], m, p)


def instance_to_json(inst: Instance) -> dict:
    return {
        "m": inst.m,
        "budgets": [float(b) for b in inst.budgets],
        "distributions": [[{"p": t.probability, "decisions": _menu_to_json(t)} for t in d.types]
                          for d in inst.distributions],
    }


def instance_from_json(doc: dict) -> Instance:
    m = int(doc["m"])
    budgets = np.asarray(doc["budgets"], dtype=float)
    if budgets.shape != (m,):
        raise ValueError(f"budgets has {budgets.size} entries, expected m={m}")
    dists = tuple(
        RequestDistribution(tuple(_menu_from_json(t["decisions"], m, t["p"]) for t in types))
        for types in doc["distributions"])
    return Instance(budgets, dists)


def estimates_to_json(est: Estimates) -> dict:
    return {"opt_hat": est.opt_hat, "beta": est.beta, "a_hat": est.a_hat.tolist()}


def estimates_from_json(doc: dict) -> Estimates:
    return Estimates(float(doc["opt_hat"]), np.asarray(doc["a_hat"], dtype=float),
                     float(doc.get("beta", 1.0)))


def plan_to_json(plan: AugmentationPlan) -> list[dict]:
    return plan.to_triplets()


def plan_from_json(rows) -> AugmentationPlan:
    return AugmentationPlan.from_triplets(rows)


def scenario_to_json(sc: ByzantineScenario) -> dict:
    return {
        "m": sc.m,
        "budgets": [float(b) for b in sc.budgets],
        "epsilon": sc.epsilon,
        "n_green": sc.n_green,
        "green": [_menu_to_json(g) for g in sc.green],
        "red": [{"t": t, "menu": _menu_to_json(r)} for t, r in sc.red],
        "opt_hat": sc.opt_hat,
        "beta": sc.beta,
    }


def scenario_from_json(doc: dict) -> ByzantineScenario:
    m = int(doc["m"])
    green = tuple(_menu_from_json(g, m) for g in doc["green"])
    if "n_green" in doc and int(doc["n_green"]) != len(green):
        raise ValueError(f"n_green={doc['n_green']} but {len(green)} green menus given")
    red = tuple((float(r["t"]), _menu_from_json(r["menu"], m)) for r in doc.get("red", []))
    return ByzantineScenario(green, red, np.asarray(doc["budgets"], dtype=float),
                             float(doc["epsilon"]), doc.get("opt_hat"), float(doc.get("beta", 1.0)))


def load_json(path) -> object:
    return json.loads(Path(path).read_text())


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def trace_to_jsonl(trace: Trace) -> str:
    """One JSON object per step."""
    out = []
    for rec in trace.steps:
        row = {
            "step": rec.step, "type_index": rec.type_index,
            "prices": [float(x) for x in rec.prices], "chosen": rec.chosen, "value": rec.value,
            "consumption": [float(x) for x in rec.consumption],
            "cumulative_consumption": [float(x) for x in rec.cumulative_consumption],
        }
        out.append(json.dumps(row))
    return "\n".join(out) + ("\n" if out else "")


TRACE_SUMMARY_COLUMNS = ("stop_time", "terminated_early", "total_value", "max_utilization",
                         "guard_activations")


def trace_summary_csv(traces, budgets) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_SUMMARY_COLUMNS)
    for tr in traces:
        w.writerow([tr.stop_time, int(tr.terminated_early), repr(tr.total_value),
                    repr(tr.max_utilization(budgets)), tr.guard_activations])
    return buf.getvalue()
