"""End-to-end harness: probe, solve, certify, and compare shaping systems."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .baseline import run_baseline_episode
from .hull import table_curves
from .model import ContractError, MetricsReport, ProbeTable, Scenario
from .oracle import TheoremReport, certify
from .policy import StochasticPolicy, derive_policy
from .program import ShapingProgram, SolveResult, build_program, solve_greedy
from .scenario import Experiment
from .simenv import exact_table, mc_probe, run_episode

SYSTEMS = ("no-shaping", "pid-bandit", "protocol")


def fmt(x: float) -> str:
    return f"{x:.12g}"


@dataclass(frozen=True)
class ProtocolOutcome:
    program: ShapingProgram
    result: SolveResult
    policy: StochasticPolicy


def run_protocol(table: ProbeTable, scenario: Scenario) -> ProtocolOutcome:
    """Hull every cell, solve the covering program greedily and derive the mixed policy."""
    if (table.n_groups, table.n_sets) != (scenario.n_groups, scenario.n_sets):
        raise ContractError(f"table is {table.n_groups}x{table.n_sets}, "
                            f"scenario is {scenario.n_groups}x{scenario.n_sets}")
    program = build_program(table_curves(table), scenario)
    result = solve_greedy(program)
    return ProtocolOutcome(program, result, derive_policy(result, program))


def probe(exp: Experiment, mode: str = "exact", sessions: int = 2000, seed: int = 0,
          workers: int = 1) -> ProbeTable:
    grid = exp.scenario.grid()
    if mode == "exact":
        return exact_table(exp.market, grid)
    if mode == "mc":
        return mc_probe(exp.market, grid, sessions, seed, workers=workers)
    raise ContractError(f"mode must be 'exact' or 'mc', got {mode!r}")


# -- probe artifacts ---------------------------------------------------------

def probe_csv(table: ProbeTable, scenario: Scenario) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "set", "grid_index", "bonus", "f_mean", "f_stderr", "g_mean", "g_stderr"])
    for i in range(table.n_groups):
        for j in range(table.n_sets):
            for t, x in enumerate(table.bonuses):
                w.writerow([scenario.group_ids[i], scenario.set_ids[j], t, fmt(x),
                            fmt(table.exposure[i, j, t]), fmt(table.exposure_se[i, j, t]),
                            fmt(table.reward[i, j, t]), fmt(table.reward_se[i, j, t])])
    return buf.getvalue()


def probe_to_dict(table: ProbeTable) -> dict:
    return {"bonuses": table.bonuses.tolist(), "exposure": table.exposure.tolist(),
            "reward": table.reward.tolist(), "exposure_se": table.exposure_se.tolist(),
            "reward_se": table.reward_se.tolist(), "eps_exposure": table.eps_exposure,
            "eps_reward": table.eps_reward}


def probe_from_dict(d: dict) -> ProbeTable:
    return ProbeTable(d["bonuses"], d["exposure"], d["reward"], d["exposure_se"], d["reward_se"],
                      float(d["eps_exposure"]), float(d["eps_reward"]))


def write_probe(table: ProbeTable, scenario: Scenario, out: Path) -> tuple[Path, Path]:
    out.mkdir(parents=True, exist_ok=True)
    c, j = out / "probe.csv", out / "probe.json"
    c.write_text(probe_csv(table, scenario))
    j.write_text(json.dumps(probe_to_dict(table), indent=2))
    return c, j


def read_probe(path: Path) -> ProbeTable:
    return probe_from_dict(json.loads(Path(path).read_text()))


# -- solving -----------------------------------------------------------------

def summary_line(outcome: ProtocolOutcome, report: TheoremReport | None, scenario: Scenario) -> str:
    parts = [f"objective={fmt(outcome.result.objective)}"]
    slack = outcome.result.slack
    for j, s in enumerate(scenario.set_ids):
        status = "OK" if outcome.result.feasible[j] else "BEST_EFFORT"
        margin = f" margin={fmt(report.exposure_margins[j])}" if report is not None else ""
        parts.append(f"set[{s}]={status} slack={fmt(slack[j])}{margin}")
    if report is None:
        parts.append("certificate=SKIPPED")
    else:
        parts.append("PASS" if report.passed else "FAIL")
    return " ".join(parts)


# -- comparison ----------------------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    seeds: tuple[int, ...]
    runs: dict  # system -> list[MetricsReport], one per seed
    policy: StochasticPolicy

    def column(self, system: str, name: str) -> np.ndarray:
        return np.array([_metric(r, name) for r in self.runs[system]])

    def summary_rows(self) -> list[dict]:
        rows = []
        base = {k: self.column("no-shaping", k).mean() for k in ("PR", "GMV", "expected_reward")}
        for system in SYSTEMS:
            row = {"system": system}
            for name in ("PR", "GMV", "CR", "expected_reward", "realized_reward"):
                v = self.column(system, name)
                row[name] = v.mean()
                spread = v.size > 1 and np.any(v != v[0])
                row[f"{name}_se"] = v.std(ddof=1) / np.sqrt(v.size) if spread else 0.0
            for name in ("PR", "GMV", "expected_reward"):
                row[f"{name}_gap"] = (row[name] - base[name]) / base[name] if base[name] else 0.0
            rows.append(row)
        return rows

    def summary_csv(self) -> str:
        rows = self.summary_rows()
        cols = list(rows[0])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] if c == "system" else fmt(row[c]) for c in cols])
        return buf.getvalue()

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = ("PR", "GMV", "CR", "expected_reward", "realized_reward")
        w.writerow(["system", "seed", *names])
        for system in SYSTEMS:
            for seed, rep in zip(self.seeds, self.runs[system]):
                w.writerow([system, seed, *(fmt(_metric(rep, n)) for n in names)])
        return buf.getvalue()


def _metric(rep: MetricsReport, name: str) -> float:
    return {"PR": rep.purchase_rate, "GMV": rep.realized_gmv, "CR": rep.compliance_rate,
            "expected_reward": rep.expected_reward, "realized_reward": rep.realized_reward}[name]


def compare(exp: Experiment, seeds: Sequence[int], mode: str = "exact", sessions: int = 2000,
            probe_seed: int = 0, redraw: str = "session", workers: int = 1,
            table: ProbeTable | None = None) -> Comparison:
    """Run no-shaping, PID + bandit and the protocol on the same seeds.

    All three systems share each seed's session randomness, so per-seed
    differences are paired.
    """
    if not seeds:
        raise ContractError("need at least one seed")
    sc, market = exp.scenario, exp.market
    if table is None:
        table = probe(exp, mode, sessions, probe_seed, workers)
    policy = run_protocol(table, sc).policy
    idle = StochasticPolicy.constant(sc.n_groups, sc.n_sets, sc.bonus_domain[0])

    def one(seed):
        return (run_episode(market, idle, seed, sc.requirements, redraw),
                run_baseline_episode(market, sc.requirements, exp.baseline, seed),
                run_episode(market, policy, seed, sc.requirements, redraw))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    runs = {name: [r[k] for r in results] for k, name in enumerate(SYSTEMS)}
    return Comparison(tuple(seeds), runs, policy)


def write_compare(cmp: Comparison, out: Path) -> tuple[Path, Path]:
    out.mkdir(parents=True, exist_ok=True)
    a, b = out / "compare.csv", out / "compare_runs.csv"
    a.write_text(cmp.summary_csv())
    b.write_text(cmp.runs_csv())
    return a, b
