"""Packing LPs over explicit decision menus, an exact simplex solver, and
exhaustive offline oracles for tiny instances.

Every packing LP built here has the same shape::

    maximize    sum_c v_c x_c
    subject to  sum_c a_c x_c <= b          (m resource rows)
                sum_{c in g} x_c <= cap_g   (one cap row per group)
                x >= 0

where each variable belongs to exactly one group and every cap is at most 1,
so the box ``x <= 1`` is implied. The solver exploits that structure
(generalized upper bounding): the working basis is only ``m x m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Instance, RealizedRequest, check_instance

FEAS_TOL = 1e-9
OBJ_TOL = 1e-7
BRUTE_FORCE_GUARD = 10**7


class NumericalFailure(RuntimeError):
    """Simplex exceeded its iteration cap or hit a singular working basis."""


class TooLargeError(ValueError):
    """Exhaustive search space exceeds the configured guard."""


@dataclass(frozen=True)
class PackingLP:
    values: np.ndarray                 # (N,)
    A: np.ndarray                      # (m, N)
    rhs: np.ndarray                    # (m,)
    group: np.ndarray                  # (N,) group index of each variable
    caps: np.ndarray                   # (G,)
    request: np.ndarray                # (N,) request position of each variable
    keys: tuple                        # variable labels (i, k, theta) or (i, theta)
    n_requests: int
    kind: str = "configuration"

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def num_vars(self) -> int:
        return self.values.shape[0]

    @property
    def num_groups(self) -> int:
        return self.caps.shape[0]


@dataclass
class FractionalSolution:
    mass: np.ndarray
    objective: float
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    def as_dict(self, lp: PackingLP) -> dict:
        return {key: float(x) for key, x in zip(lp.keys, self.mass) if x != 0.0}


def _assemble(blocks, m: int, n_requests: int, kind: str, rhs) -> PackingLP:
    values, cols, group, caps, request, keys = [], [], [], [], [], []
    for g, (i, label, cap, vals, cons) in enumerate(blocks):
        caps.append(cap)
        for theta in range(vals.shape[0]):
            values.append(vals[theta])
            cols.append(cons[theta])
            group.append(g)
            request.append(i)
            keys.append(label + (theta,))
    A = np.array(cols, dtype=float).reshape(len(cols), m).T.copy()
    return PackingLP(
        values=np.array(values, dtype=float), A=A, rhs=np.asarray(rhs, dtype=float).copy(),
        group=np.array(group, dtype=np.int64), caps=np.array(caps, dtype=float),
        request=np.array(request, dtype=np.int64), keys=tuple(keys),
        n_requests=n_requests, kind=kind,
    )


def build_configuration_lp(inst: Instance, budget_scale: float = 1.0) -> PackingLP:
    """Configuration LP over ``(request, type, decision)`` with resource RHS ``budget_scale * B``."""
    if not 0.0 < budget_scale <= 1.0:
        raise ValueError(f"budget_scale must lie in (0, 1], got {budget_scale}")
    check_instance(inst)
    blocks = []
    for i, dist in enumerate(inst.distributions):
        for k, t in enumerate(dist.types):
            blocks.append((i, (i, k), t.probability, t.values, t.consumption))
    return _assemble(blocks, inst.m, inst.n, "configuration", budget_scale * inst.budgets)


def build_sample_lp(requests: Sequence[RealizedRequest], budget) -> PackingLP:
    """Per-realization LP: one cap row of 1 per request, resource RHS ``budget``."""
    if len(requests) == 0:
        raise ValueError("sample LP needs at least one request")
    budget = np.asarray(budget, dtype=float)
    if np.any(budget <= 0):
        raise ValueError(f"sample LP budgets must be positive, got {budget}")
    blocks = [(pos, (req.step,), 1.0, req.values, req.consumption)
              for pos, req in enumerate(requests)]
    return _assemble(blocks, budget.shape[0], len(requests), "sample", budget)


# --------------------------------------------------------------------------
# GUB revised simplex
# --------------------------------------------------------------------------

def _gub_simplex(v, A, b, group, caps, max_iter: int, tol: float = 1e-9):
    m, N = A.shape
    G = caps.shape[0]
    # Column layout: originals, one slack per group, one slack per resource row.
    V = np.concatenate([v, np.zeros(G), np.zeros(m)])
    AA = np.hstack([A, np.zeros((m, G)), np.eye(m)])
    grp = np.concatenate([group, np.arange(G), np.full(m, -1)]).astype(np.int64)
    scale = max(1.0, float(np.max(np.abs(v))) if N else 1.0)
    dtol = tol * scale

    # Crash basis: each group keyed on its best column; valid when it fits.
    key = np.arange(G, dtype=np.int64) + N
    if N:
        best = np.full(G, -np.inf)
        best_col = np.full(G, -1, dtype=np.int64)
        order = np.lexsort((np.arange(N), -v))
        for c in order:
            g = group[c]
            if best_col[g] < 0:
                best_col[g] = c
                best[g] = v[c]
        pos = (best_col >= 0) & (best > 0)
        trial = key.copy()
        trial[pos] = best_col[pos]
        if np.all(b - AA[:, trial] @ caps >= 0.0):
            key = trial
    nonkey = np.arange(m, dtype=np.int64) + N + G

    bland = False
    stall = 0
    last_obj = -np.inf
    it = 0
    while True:
        g_nk = grp[nonkey]
        has_g = g_nk >= 0
        key_of_nk = np.where(has_g, key[np.maximum(g_nk, 0)], -1)
        W = AA[:, nonkey].copy()
        if np.any(has_g):
            W[:, has_g] -= AA[:, key_of_nk[has_g]]
        try:
            xN = np.linalg.solve(W, b - AA[:, key] @ caps)
            cN = V[nonkey] - np.where(has_g, V[np.maximum(key_of_nk, 0)], 0.0)
            y = np.linalg.solve(W.T, cN)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular working basis") from exc
        sub = np.bincount(g_nk[has_g], weights=xN[has_g], minlength=G) if G else np.zeros(0)
        xK = caps - sub
        obj = float(V[nonkey] @ xN + V[key] @ xK)

        if obj > last_obj + 1e-12 * max(1.0, abs(obj)):
            stall = 0
            bland = False
        else:
            stall += 1
            if stall > 30:
                bland = True
        last_obj = max(last_obj, obj)

        u = V[key] - AA[:, key].T @ y
        d = V - y @ AA - np.where(grp >= 0, u[np.maximum(grp, 0)], 0.0)
        d[nonkey] = 0.0
        d[key] = 0.0
        cand = np.flatnonzero(d > dtol)
        if cand.size == 0:
            return key, nonkey, xK, xN, y, obj, it
        it += 1
        if it > max_iter:
            raise NumericalFailure(f"simplex exceeded {max_iter} iterations")
        q = int(cand[0]) if bland else int(cand[np.argmax(d[cand])])

        h = grp[q]
        alpha = AA[:, q] - (AA[:, key[h]] if h >= 0 else 0.0)
        dN = -np.linalg.solve(W, alpha)
        dK = -np.bincount(g_nk[has_g], weights=dN[has_g], minlength=G) if G else np.zeros(0)
        if h >= 0:
            dK[h] -= 1.0

        ptol = 1e-11
        cols = np.concatenate([nonkey, key])
        xs = np.maximum(np.concatenate([xN, xK]), 0.0)
        ds = np.concatenate([dN, dK])
        block = np.flatnonzero(ds < -ptol)
        if block.size == 0:
            raise NumericalFailure("unbounded direction in a bounded packing LP")
        ratios = xs[block] / -ds[block]
        theta = ratios.min()
        ties = block[ratios <= theta + 1e-12 * max(1.0, theta)]
        if bland:
            leave = int(ties[np.argmin(cols[ties])])
        else:
            leave = int(ties[np.argmin(ds[ties])])  # largest pivot magnitude

        if leave < m:
            nonkey[leave] = q
        else:
            g = leave - m
            members = np.flatnonzero(grp[nonkey] == g)
            if members.size:
                p = int(members[0])
                key[g] = nonkey[p]
                nonkey[p] = q
            else:
                key[g] = q


def solve_packing_lp(lp: PackingLP) -> FractionalSolution:
    """Solve to optimality; deterministic, feasible within ``FEAS_TOL``."""
    N, m, G = lp.num_vars, lp.m, lp.num_groups
    if N == 0 or not np.any(lp.values > 0):
        return FractionalSolution(np.zeros(N), 0.0, np.zeros(m))
    max_iter = 50 * (m + G + N)
    key, nonkey, xK, xN, y, _, it = _gub_simplex(
        lp.values, lp.A, np.maximum(lp.rhs, 0.0), lp.group, lp.caps, max_iter)
    x = np.zeros(N + G + m)
    x[key] = xK
    x[nonkey] = xN
    mass = x[:N].copy()
    mass[np.abs(mass) < 1e-13] = 0.0
    mass = np.clip(mass, 0.0, None)
    mass = _repair(lp, mass)
    return FractionalSolution(mass, float(lp.values @ mass), np.maximum(y, 0.0), it)


def _repair(lp: PackingLP, mass: np.ndarray) -> np.ndarray:
    # Shave round-off so every row holds within FEAS_TOL.
    over = np.bincount(lp.group, weights=mass, minlength=lp.num_groups) - lp.caps
    if np.any(over > 0):
        shrink = np.ones_like(over)
        pos = over > 0
        shrink[pos] = lp.caps[pos] / (lp.caps[pos] + over[pos])
        mass = mass * shrink[lp.group]
    use = lp.A @ mass
    bad = use > lp.rhs
    if np.any(bad):
        ratio = np.min(np.where(bad, lp.rhs / np.where(use > 0, use, 1.0), 1.0))
        mass = mass * ratio
    return mass


def row_violations(lp: PackingLP, mass: np.ndarray) -> np.ndarray:
    """Positive part of each row's excess: resource rows then cap rows."""
    res = lp.A @ mass - lp.rhs
    cap = np.bincount(lp.group, weights=mass, minlength=lp.num_groups) - lp.caps
    lo = -np.minimum(mass, 0.0)
    return np.concatenate([np.maximum(res, 0.0), np.maximum(cap, 0.0), lo])


def solution_consumption(lp: PackingLP, sol: FractionalSolution) -> np.ndarray:
    """Expected consumption per request and resource, shape ``(n, m)``."""
    out = np.zeros((lp.n_requests, lp.m))
    np.add.at(out, lp.request, (lp.A * sol.mass).T)
    return np.clip(out, 0.0, 1.0)


def lp_upper_bound(inst: Instance) -> float:
    """Configuration-LP optimum at full budget; upper-bounds the expected hindsight optimum."""
    return solve_packing_lp(build_configuration_lp(inst, 1.0)).objective


def dump_lp(lp: PackingLP) -> str:
    """Row-oriented text dump (CPLEX-LP flavoured) for external cross-checking."""
    def term(coef, idx):
        return f"{coef:+.17g} x{idx}"

    lines = ["maximize", " obj: " + " ".join(term(c, i) for i, c in enumerate(lp.values) if c != 0)]
    lines.append("subject to")
    for j in range(lp.m):
        nz = np.flatnonzero(lp.A[j])
        body = " ".join(term(lp.A[j, i], i) for i in nz) or "0 x0"
        lines.append(f" res{j}: {body} <= {lp.rhs[j]:.17g}")
    for g in range(lp.num_groups):
        members = np.flatnonzero(lp.group == g)
        lines.append(f" cap{g}: " + " ".join(f"+1 x{i}" for i in members) + f" <= {lp.caps[g]:.17g}")
    lines.append("bounds")
    lines.extend(f" 0 <= x{i} <= 1" for i in range(lp.num_vars))
    lines.append("end")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Exhaustive offline optimum
# --------------------------------------------------------------------------

def _classes(requests: Sequence[RealizedRequest]):
    classes: list[tuple[RealizedRequest, list[int]]] = []
    for pos, req in enumerate(requests):
        for rep, members in classes:
            if rep.rtype is req.rtype or rep.rtype.same_menu(req.rtype):
                members.append(pos)
                break
        else:
            classes.append((req, [pos]))
    return classes


def search_space_size(requests: Sequence[RealizedRequest]) -> int:
    """Number of distinct outcomes once identical requests are pooled."""
    total = 1
    for rep, members in _classes(requests):
        s = rep.rtype.size
        total *= math.comb(len(members) + s - 1, s - 1)
    return total


def brute_force_offline_opt(requests: Sequence[RealizedRequest], budgets,
                            guard: int = BRUTE_FORCE_GUARD) -> tuple[float, list[int]]:
    """Exact integral hindsight optimum by exhaustive branch-and-bound.

    Requests with identical menus are interchangeable, so the search runs over
    how many of each class take each decision. Returns ``(value, decisions)``
    with one decision id per request; among optimal assignments the first one
    reached in the fixed search order is returned.
    """
    budgets = np.asarray(budgets, dtype=float)
    if not requests:
        return 0.0, []
    size = search_space_size(requests)
    if size > guard:
        raise TooLargeError(f"search space {size} exceeds guard {guard}")

    classes = _classes(requests)
    # Highest-value classes first gives strong incumbents early.
    classes.sort(key=lambda c: (-c[0].max_value, c[1][0]))
    menus = []
    for rep, members in classes:
        vals, cons = rep.values, rep.consumption
        order = [int(t) for t in np.lexsort((np.arange(vals.size), -vals)) if vals[t] > 0]
        # Value per unit of resource j, used for the per-class capacity bound.
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.where(cons[order] > 0, vals[order, None] / cons[order], np.inf)
        best_density = dens.max(axis=0) if order else np.zeros(budgets.size)
        maxv = float(vals.max())
        menus.append((vals, cons, order, len(members), maxv, best_density))

    n_cls = len(menus)
    best_val = -1.0
    best_counts: list = []
    counts: list[list[tuple[int, int]]] = [[] for _ in range(n_cls)]
    eps = 1e-12

    def bound(ci: int, rem: np.ndarray) -> float:
        total = 0.0
        for c in range(ci, n_cls):
            _, _, order, cnt, maxv, dens = menus[c]
            if not order:
                continue
            cap = cnt * maxv
            with np.errstate(invalid="ignore"):
                lim = np.where(np.isfinite(dens), rem * dens, np.inf)
            total += min(cap, float(lim.min()))
        return total

    def rec(ci: int, di: int, left: int, rem: np.ndarray, val: float) -> None:
        nonlocal best_val, best_counts
        if ci == n_cls:
            if val > best_val + eps:
                best_val = val
                best_counts = [list(c) for c in counts]
            return
        vals, cons, order, cnt, maxv, dens = menus[ci]
        if di >= len(order) or left == 0:
            if val + bound(ci + 1, rem) <= best_val + eps:
                return
            rec(ci + 1, 0, menus[ci + 1][3] if ci + 1 < n_cls else 0, rem, val)
            return
        theta = order[di]
        a = cons[theta]
        nz = a > 0
        top = left
        if np.any(nz):
            top = min(left, int(np.floor(np.min((rem[nz] + FEAS_TOL) / a[nz]))))
        for k in range(top, -1, -1):
            new_rem = rem - k * a
            new_val = val + k * vals[theta]
            rest_here = (left - k) * (vals[order[di + 1]] if di + 1 < len(order) else 0.0)
            if new_val + rest_here + bound(ci + 1, new_rem) <= best_val + eps:
                continue
            if k:
                counts[ci].append((theta, k))
            rec(ci, di + 1, left - k, new_rem, new_val)
            if k:
                counts[ci].pop()

    rec(0, 0, menus[0][3], budgets.copy(), 0.0)

    decisions = [0] * len(requests)
    for (rep, members), alloc in zip(classes, best_counts):
        it = iter(members)
        for theta, k in alloc:
            for _ in range(k):
                decisions[next(it)] = theta
    return max(best_val, 0.0), decisions
