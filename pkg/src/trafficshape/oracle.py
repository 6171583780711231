"""Brute-force benchmarks on small instances and the approximation certificate.

Nothing here touches hulls or the covering program: the optimum over grid
mixtures is found by enumerating basic solutions directly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass

import numpy as np

from .model import ContractError, ProbeTable, Scenario, policy_expectation
from .policy import StochasticPolicy

MAX_GROUPS = 3
MAX_SETS = 3
MAX_GRID_K = 8


class OracleBudgetExceeded(RuntimeError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class MixtureOptimum:
    value: float
    per_set: tuple[float, ...]
    feasible: tuple[bool, ...]
    # (group, set) -> ((bonus, probability), ...)
    witness: dict

    @property
    def all_feasible(self) -> bool:
        return all(self.feasible)


def _check_budget(table: ProbeTable, max_groups: int, max_sets: int, max_grid_k: int) -> None:
    n, m, T = table.exposure.shape
    if n > max_groups or m > max_sets or T - 1 > max_grid_k:
        raise OracleBudgetExceeded(
            f"instance n={n}, m={m}, k={T - 1} exceeds the enumeration budget "
            f"n<={max_groups}, m<={max_sets}, k<={max_grid_k}")


def _pure_combos(n: int, T: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(T), repeat=n)), dtype=np.int64)


def _set_optimum(F: np.ndarray, G: np.ndarray, r: float):
    """Best mixture for one set. ``F``, ``G`` are ``(n, T)``.

    A basic optimal solution has at most one group mixing two grid points,
    so it suffices to scan pure profiles plus one-mixer profiles with the
    mixing weight that makes the floor tight.
    """
    n, T = F.shape
    tol = 1e-12 * max(1.0, abs(r), float(np.abs(F).max(initial=0.0)) * n)
    rows = np.arange(n)
    combos = _pure_combos(n, T)
    fs = F[rows, combos].sum(axis=1)
    gs = G[rows, combos].sum(axis=1)
    ok = fs >= r - tol
    best, best_w = -np.inf, None
    if ok.any():
        q = int(np.flatnonzero(ok)[np.argmax(gs[ok])])
        best = float(gs[q])
        best_w = {i: ((int(combos[q, i]), 1.0),) for i in range(n)}
    for i in range(n):
        others = [g for g in range(n) if g != i]
        oc = _pure_combos(n - 1, T)
        fo = F[others][np.arange(n - 1), oc].sum(axis=1) if others else np.zeros(1)
        go = G[others][np.arange(n - 1), oc].sum(axis=1) if others else np.zeros(1)
        for t1, t2 in itertools.combinations(range(T), 2):
            df = F[i, t2] - F[i, t1]
            if df == 0:
                continue
            lam = (r - fo - F[i, t1]) / df
            inside = (lam > 0) & (lam < 1)
            if not inside.any():
                continue
            g = go + (1 - lam) * G[i, t1] + lam * G[i, t2]
            g = np.where(inside, g, -np.inf)
            q = int(np.argmax(g))
            if g[q] > best:
                best = float(g[q])
                lq = float(lam[q])
                best_w = {g_: ((int(oc[q, k]), 1.0),) for k, g_ in enumerate(others)}
                best_w[i] = ((t1, 1.0 - lq), (t2, lq))
    return best, best_w


def mixture_optimum(table: ProbeTable, scenario: Scenario, max_groups: int = MAX_GROUPS,
                    max_sets: int = MAX_SETS, max_grid_k: int = MAX_GRID_K) -> MixtureOptimum:
    """Best expected reward over per-cell mixtures of grid points meeting every floor."""
    _check_budget(table, max_groups, max_sets, max_grid_k)
    if (table.n_groups, table.n_sets) != (scenario.n_groups, scenario.n_sets):
        raise ContractError("table shape does not match scenario")
    per_set, feasible, witness = [], [], {}
    for j in range(table.n_sets):
        val, w = _set_optimum(table.exposure[:, j, :], table.reward[:, j, :], scenario.requirements[j])
        per_set.append(val)
        feasible.append(w is not None)
        if w is not None:
            for i, mix in w.items():
                witness[(i, j)] = tuple((float(table.bonuses[t]), p) for t, p in mix)
    return MixtureOptimum(float(sum(per_set)), tuple(per_set), tuple(feasible), witness)


def deterministic_grid_optimum(table: ProbeTable, scenario: Scenario, max_groups: int = MAX_GROUPS,
                               max_sets: int = MAX_SETS, max_grid_k: int = MAX_GRID_K) -> float:
    """Best reward using one grid bonus per cell; ``-inf`` when some floor is unreachable."""
    _check_budget(table, max_groups, max_sets, max_grid_k)
    n, m, T = table.exposure.shape
    rows = np.arange(n)
    combos = _pure_combos(n, T)
    total = 0.0
    for j in range(m):
        F, G = table.exposure[:, j, :], table.reward[:, j, :]
        r = scenario.requirements[j]
        tol = 1e-12 * max(1.0, abs(r), float(np.abs(F).max(initial=0.0)) * n)
        fs = F[rows, combos].sum(axis=1)
        gs = G[rows, combos].sum(axis=1)
        ok = fs >= r - tol
        if not ok.any():
            return -np.inf
        total += float(gs[ok].max())
    return total


@dataclass(frozen=True)
class TheoremReport:
    expected_exposures: tuple[float, ...]
    expected_reward: float
    optimum: float | None
    eps_exposure: float
    eps_reward: float
    grid_gap: float
    exposure_margins: tuple[float, ...]
    reward_margin: float | None
    reward_margin_with_grid: float | None
    optimum_feasible: bool
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def certify(policy: StochasticPolicy, table: ProbeTable, scenario: Scenario,
            truth: ProbeTable | None = None, **budget) -> TheoremReport:
    """Check the exposure and reward guarantees of ``policy``.

    ``table`` supplies the error caps.  Expectations and the benchmark are
    computed on ``truth`` when given (e.g. exact simulator responses), else on
    ``table`` itself.  The reward check includes the finite-grid term
    ``n*m*grid_gap``, where ``grid_gap`` is the largest reward change between
    adjacent grid points.
    """
    ref = truth if truth is not None else table
    n, m = scenario.n_groups, scenario.n_sets
    f_hat, g_hat = policy_expectation(policy, ref)
    opt = mixture_optimum(ref, scenario, **budget)
    r = scenario.r
    delta = float(np.abs(np.diff(ref.reward, axis=2)).max(initial=0.0))
    exp_margins = f_hat + n * table.eps_exposure - r
    exp_ok = bool(np.all(exp_margins >= -1e-9 * np.maximum(1.0, r)))
    if opt.all_feasible:
        g_star = opt.value
        margin = g_hat + n * m * table.eps_reward - g_star
        margin_grid = margin + n * m * delta
        passed = exp_ok and margin_grid >= -1e-9 * max(1.0, abs(g_star))
    else:
        g_star = margin = margin_grid = None
        passed = False
    return TheoremReport(tuple(float(v) for v in f_hat), g_hat, g_star, table.eps_exposure,
                         table.eps_reward, delta, tuple(float(v) for v in exp_margins),
                         margin, margin_grid, opt.all_feasible, bool(passed))
