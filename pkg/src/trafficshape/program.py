"""Linearized covering program over hull segments, and two ways to solve it."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .hull import HullCurve
from .model import ContractError, Scenario

DEGENERATE_WIDTH = 1e-12


@dataclass(frozen=True)
class Segment:
    """One hull edge of cell (group, set); ``index`` counts edges in hull order."""

    group: int
    set: int
    index: int
    exposure_left: float
    exposure_right: float
    reward_left: float
    reward_right: float
    bonus_left: float
    bonus_right: float

    @property
    def width(self) -> float:
        return self.exposure_right - self.exposure_left

    @property
    def loss_rate(self) -> float:
        """Reward given up per unit of exposure gained along this edge."""
        return (self.reward_left - self.reward_right) / self.width


@dataclass(frozen=True)
class ShapingProgram:
    n_groups: int
    n_sets: int
    segments: tuple[Segment, ...]
    curves: Mapping[tuple[int, int], HullCurve]
    requirements: np.ndarray
    baseline_exposures: np.ndarray
    baseline_reward: float

    @property
    def coverage_rhs(self) -> np.ndarray:
        return self.requirements - self.baseline_exposures

    @property
    def widths(self) -> np.ndarray:
        return np.array([s.width for s in self.segments])

    @property
    def loss_rates(self) -> np.ndarray:
        return np.array([s.loss_rate for s in self.segments])

    def capacity(self) -> np.ndarray:
        cap = np.zeros(self.n_sets)
        for s in self.segments:
            cap[s.set] += s.width
        return cap

    def set_matrix(self) -> np.ndarray:
        A = np.zeros((self.n_sets, len(self.segments)))
        for k, s in enumerate(self.segments):
            A[s.set, k] = 1.0
        return A


@dataclass(frozen=True, eq=False)
class SolveResult:
    allocations: np.ndarray
    objective: float
    feasible: np.ndarray
    slack: np.ndarray

    @property
    def all_feasible(self) -> bool:
        return bool(np.all(self.feasible))


def build_segments(curve: HullCurve, group: int, set_: int) -> list[Segment]:
    v = curve.vertices
    scale = max((abs(p.exposure) for p in v), default=0.0)
    out = []
    for a, b in zip(v[:-1], v[1:]):
        if b.exposure - a.exposure <= DEGENERATE_WIDTH * scale:
            continue
        out.append(Segment(group, set_, len(out), a.exposure, b.exposure,
                           a.reward, b.reward, a.bonus, b.bonus))
    return out


def build_program(curves: Mapping[tuple[int, int], HullCurve], scenario: Scenario) -> ShapingProgram:
    n, m = scenario.n_groups, scenario.n_sets
    segments = []
    b = np.zeros(m)
    C = 0.0
    for i in range(n):
        for j in range(m):
            if (i, j) not in curves:
                raise ContractError(f"missing hull curve for cell ({i}, {j})")
            curve = curves[(i, j)]
            base = curve.vertices[0]
            b[j] += base.exposure
            C += base.reward
            segments.extend(build_segments(curve, i, j))
    return ShapingProgram(n, m, tuple(segments), dict(curves), scenario.r.copy(), b, C)


def _finish(program: ShapingProgram, alloc: np.ndarray, feasible: np.ndarray) -> SolveResult:
    A = program.set_matrix()
    objective = program.baseline_reward - float(program.loss_rates @ alloc) if alloc.size else program.baseline_reward
    slack = A @ alloc - program.coverage_rhs if alloc.size else -program.coverage_rhs
    return SolveResult(alloc, objective, feasible, slack)


def solve_greedy(program: ShapingProgram) -> SolveResult:
    """Fill each set's cheapest segments first.

    Segments with negative loss rate raise reward and are always taken in
    full; the rest are filled only until the set's coverage is met.
    """
    segs = program.segments
    alloc = np.zeros(len(segs))
    rhs = program.coverage_rhs
    feasible = program.capacity() >= rhs - 1e-12 * np.maximum(1.0, np.abs(program.requirements))
    by_set = defaultdict(list)
    for k, s in enumerate(segs):
        by_set[s.set].append(k)
    for j, ks in by_set.items():
        ks.sort(key=lambda k: (segs[k].loss_rate, segs[k].group, segs[k].index))
        covered = 0.0
        for k in ks:
            s = segs[k]
            if s.loss_rate < 0:
                alloc[k] = s.width
            elif covered < rhs[j]:
                alloc[k] = min(s.width, rhs[j] - covered)
            else:
                break
            covered += alloc[k]
    return _finish(program, alloc, feasible)


def solve_reference(program: ShapingProgram) -> SolveResult:
    """Solve the same LP with a general-purpose LP solver, then put it in prefix form.

    Each set gets an elastic shortfall variable priced above every loss rate,
    so one solve yields the best-effort allocation and the per-set
    infeasibility flags together.
    """
    widths = program.widths
    rhs = program.coverage_rhs
    tol = 1e-9 * np.maximum(1.0, np.abs(program.requirements))
    if not program.segments:
        return _finish(program, np.zeros(0), rhs <= tol)
    m = program.n_sets
    rates = program.loss_rates
    penalty = 1.0 + 2.0 * float(np.abs(rates).max())
    c = np.concatenate([rates, np.full(m, penalty)])
    # A x + s >= R  written as  -A x - s <= -R
    A_ub = -np.hstack([program.set_matrix(), np.eye(m)])
    bounds = [(0.0, w) for w in widths] + [(0.0, None)] * m
    sol = linprog(c, A_ub=A_ub, b_ub=-rhs, bounds=bounds, method="highs")
    if sol.status != 0:
        raise ContractError(f"reference LP failed: {sol.message}")
    x = np.clip(sol.x[:len(widths)], 0.0, widths)
    feasible = sol.x[len(widths):] <= tol
    alloc = canonicalize_prefix(x, program.segments)
    return _finish(program, alloc, feasible)


def canonicalize_prefix(allocations: Sequence[float], segments: Sequence[Segment]) -> np.ndarray:
    """Refill each cell's total allocation left to right along its hull."""
    alloc = np.asarray(allocations, dtype=float)
    out = np.zeros_like(alloc)
    cells = defaultdict(list)
    for k, s in enumerate(segments):
        cells[(s.group, s.set)].append(k)
    for ks in cells.values():
        ks.sort(key=lambda k: segments[k].index)
        remaining = float(alloc[ks].sum())
        for k in ks:
            if remaining <= 0:
                break
            take = min(segments[k].width, remaining)
            out[k] = take
            remaining -= take
    return out


def is_prefix_form(allocations: Sequence[float], segments: Sequence[Segment], tol: float = 1e-9) -> bool:
    alloc = np.asarray(allocations, dtype=float)
    cells = defaultdict(list)
    for k, s in enumerate(segments):
        cells[(s.group, s.set)].append(k)
    for ks in cells.values():
        ks.sort(key=lambda k: segments[k].index)
        for pos, k in enumerate(ks):
            if alloc[k] > tol * max(1.0, segments[k].width):
                if any(alloc[q] < segments[q].width * (1 - tol) - tol for q in ks[:pos]):
                    return False
    return True
