"""Turn an LP allocation into a randomized bonus assignment and sample it."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .model import ContractError
from .program import ShapingProgram, SolveResult, is_prefix_form


@dataclass(frozen=True)
class MixedAssignment:
    group: int
    set: int
    bonus_low: float
    bonus_high: float
    p_high: float

    def __post_init__(self):
        if not 0.0 <= self.p_high <= 1.0:
            raise ContractError(f"p_high={self.p_high} outside [0, 1]")

    @property
    def deterministic(self) -> bool:
        return self.p_high in (0.0, 1.0) or self.bonus_low == self.bonus_high


@dataclass(frozen=True)
class StochasticPolicy:
    n_groups: int
    n_sets: int
    assignments: tuple[MixedAssignment, ...]

    def __post_init__(self):
        cells = sorted((a.group, a.set) for a in self.assignments)
        want = [(i, j) for i in range(self.n_groups) for j in range(self.n_sets)]
        if cells != want:
            raise ContractError("policy must hold exactly one assignment per (group, set)")
        object.__setattr__(self, "assignments",
                           tuple(sorted(self.assignments, key=lambda a: (a.group, a.set))))

    def __getitem__(self, cell: tuple[int, int]) -> MixedAssignment:
        i, j = cell
        return self.assignments[i * self.n_sets + j]

    @classmethod
    def constant(cls, n_groups: int, n_sets: int, bonus: float) -> "StochasticPolicy":
        return cls(n_groups, n_sets, tuple(MixedAssignment(i, j, bonus, bonus, 0.0)
                                           for i in range(n_groups) for j in range(n_sets)))

    def to_json(self) -> str:
        return json.dumps([asdict(a) for a in self.assignments], indent=2)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "StochasticPolicy":
        items = [MixedAssignment(int(r["group"]), int(r["set"]), float(r["bonus_low"]),
                                 float(r["bonus_high"]), float(r["p_high"])) for r in records]
        n = 1 + max(a.group for a in items)
        m = 1 + max(a.set for a in items)
        return cls(n, m, tuple(items))

    @classmethod
    def from_json(cls, text: str) -> "StochasticPolicy":
        return cls.from_records(json.loads(text))


def derive_policy(result: SolveResult, program: ShapingProgram) -> StochasticPolicy:
    """Mix the two endpoints of each cell's last used segment.

    The mixing weight is measured in exposure units: playing the right
    endpoint with probability ``allocation / width`` lands exactly on the
    allocated point of the hull edge in expectation.
    """
    segs = program.segments
    alloc = result.allocations
    if not is_prefix_form(alloc, segs):
        raise ContractError("allocation is not in prefix form; canonicalize it first")
    last: dict[tuple[int, int], int] = {}
    for k, s in enumerate(segs):
        if alloc[k] > 0:
            cell = (s.group, s.set)
            if cell not in last or s.index > segs[last[cell]].index:
                last[cell] = k
    items = []
    for i in range(program.n_groups):
        for j in range(program.n_sets):
            k = last.get((i, j))
            if k is None:
                b = program.curves[(i, j)].vertices[0].bonus
                items.append(MixedAssignment(i, j, b, b, 0.0))
                continue
            s = segs[k]
            p = float(min(1.0, max(0.0, alloc[k] / s.width)))
            if s.bonus_left == s.bonus_right:
                items.append(MixedAssignment(i, j, s.bonus_left, s.bonus_left, 0.0))
            else:
                items.append(MixedAssignment(i, j, s.bonus_left, s.bonus_right, p))
    return StochasticPolicy(program.n_groups, program.n_sets, tuple(items))


def cell_rng(seed: int, group: int, set_: int, *stream: int) -> np.random.Generator:
    """Generator for one (group, set) cell; independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([seed, group, set_, *stream]))


_COIN_STREAM = 7


def sample_policy(policy: StochasticPolicy, seed: int, size: int | None = None) -> np.ndarray:
    """Draw bonuses per cell: shape ``(n, m)``, or ``(size, n, m)`` for repeated draws."""
    shape = (policy.n_groups, policy.n_sets) if size is None else (size, policy.n_groups, policy.n_sets)
    out = np.empty(shape)
    for a in policy.assignments:
        u = cell_rng(seed, a.group, a.set, _COIN_STREAM).random(size)
        out[..., a.group, a.set] = np.where(u < a.p_high, a.bonus_high, a.bonus_low)
    return out
