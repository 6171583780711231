"""Shared domain types and the compliance / expectation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .policy import StochasticPolicy

REWARD_CHANNELS = ("clicks", "purchases")


class ContractError(ValueError):
    """Raised when a caller violates an operation's precondition."""


@dataclass(frozen=True)
class Scenario:
    """Problem shape: groups, target sets, exposure floors and the bonus grid.

    ``requirements`` are expected exposure counts per horizon, one per set.
    """

    n_groups: int
    n_sets: int
    requirements: tuple[float, ...]
    grid_k: int
    bonus_domain: tuple[float, float] = (0.0, 1.0)
    reward_channel: str = "clicks"
    group_ids: tuple[str, ...] = ()
    set_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "requirements", tuple(float(r) for r in self.requirements))
        object.__setattr__(self, "bonus_domain", tuple(float(b) for b in self.bonus_domain))
        if not self.group_ids:
            object.__setattr__(self, "group_ids", tuple(f"g{i}" for i in range(self.n_groups)))
        if not self.set_ids:
            object.__setattr__(self, "set_ids", tuple(f"s{j}" for j in range(self.n_sets)))

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.requirements, dtype=float)

    def grid(self) -> "BonusGrid":
        return BonusGrid.uniform(self.grid_k, self.bonus_domain)

    def with_requirements(self, requirements: Sequence[float]) -> "Scenario":
        return Scenario(self.n_groups, self.n_sets, tuple(requirements), self.grid_k,
                        self.bonus_domain, self.reward_channel, self.group_ids, self.set_ids)

    def with_grid(self, grid_k: int) -> "Scenario":
        return Scenario(self.n_groups, self.n_sets, self.requirements, grid_k,
                        self.bonus_domain, self.reward_channel, self.group_ids, self.set_ids)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def validate_scenario(scenario: Scenario) -> list[Violation]:
    """Return every invariant violation of ``scenario``; empty means ok."""
    out = []
    if scenario.n_groups < 1:
        out.append(Violation("NO_GROUPS", f"n_groups={scenario.n_groups}, need >= 1"))
    if scenario.n_sets < 1:
        out.append(Violation("NO_SETS", f"n_sets={scenario.n_sets}, need >= 1"))
    if len(scenario.requirements) != scenario.n_sets:
        out.append(Violation("REQUIREMENT_COUNT",
                             f"{len(scenario.requirements)} floors for {scenario.n_sets} sets"))
    for j, r in enumerate(scenario.requirements):
        if not np.isfinite(r):
            out.append(Violation("NONFINITE_REQUIREMENT", f"set {j}: floor {r}"))
        elif r < 0:
            out.append(Violation("NEGATIVE_REQUIREMENT", f"set {j}: floor {r} < 0"))
    if scenario.grid_k < 1:
        out.append(Violation("GRID_TOO_COARSE", f"grid_k={scenario.grid_k}, need >= 1"))
    lo, hi = scenario.bonus_domain
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        out.append(Violation("DEGENERATE_DOMAIN", f"bonus_domain=[{lo}, {hi}]"))
    if scenario.reward_channel not in REWARD_CHANNELS:
        out.append(Violation("UNKNOWN_REWARD_CHANNEL", repr(scenario.reward_channel)))
    if len(scenario.group_ids) != scenario.n_groups or len(set(scenario.group_ids)) != len(scenario.group_ids):
        out.append(Violation("BAD_GROUP_IDS", "group ids must be unique, one per group"))
    if len(scenario.set_ids) != scenario.n_sets or len(set(scenario.set_ids)) != len(scenario.set_ids):
        out.append(Violation("BAD_SET_IDS", "set ids must be unique, one per set"))
    return out


@dataclass(frozen=True)
class BonusGrid:
    points: tuple[float, ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size < 2 or np.any(np.diff(pts) <= 0):
            raise ContractError("bonus grid must be strictly increasing with >= 2 points")

    @classmethod
    def uniform(cls, k: int, domain: tuple[float, float] = (0.0, 1.0)) -> "BonusGrid":
        if k < 1:
            raise ContractError(f"grid_k must be >= 1, got {k}")
        lo, hi = domain
        # exact endpoints; linspace already pins both
        return cls(tuple(float(x) for x in np.linspace(lo, hi, k + 1)))

    @property
    def k(self) -> int:
        return len(self.points) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class ProbeTable:
    """Estimated exposure / reward per (group, set, grid index).

    Arrays have shape ``(n_groups, n_sets, len(bonuses))``.  ``eps_exposure``
    and ``eps_reward`` are the global error caps used by the certificate.
    """

    bonuses: np.ndarray
    exposure: np.ndarray
    reward: np.ndarray
    exposure_se: np.ndarray
    reward_se: np.ndarray
    eps_exposure: float = 0.0
    eps_reward: float = 0.0

    def __post_init__(self):
        for name in ("bonuses", "exposure", "reward", "exposure_se", "reward_se"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        shape = self.exposure.shape
        if len(shape) != 3 or shape[2] != self.bonuses.size:
            raise ContractError(f"table arrays must be (n, m, {self.bonuses.size}), got {shape}")
        for name in ("reward", "exposure_se", "reward_se"):
            if getattr(self, name).shape != shape:
                raise ContractError(f"{name} shape {getattr(self, name).shape} != {shape}")
        if not np.all(np.isfinite(self.exposure)) or not np.all(np.isfinite(self.reward)):
            raise ContractError("table entries must be finite")
        if np.any(self.exposure < 0) or np.any(self.reward < 0):
            raise ContractError("exposure and reward estimates must be >= 0")
        if self.eps_exposure < 0 or self.eps_reward < 0:
            raise ContractError("error caps must be >= 0")

    @classmethod
    def exact(cls, bonuses, exposure, reward) -> "ProbeTable":
        exposure = np.asarray(exposure, dtype=float)
        return cls(bonuses, exposure, reward, np.zeros_like(exposure), np.zeros_like(exposure))

    @property
    def n_groups(self) -> int:
        return self.exposure.shape[0]

    @property
    def n_sets(self) -> int:
        return self.exposure.shape[1]

    def grid_index(self, bonus: float) -> int:
        """Index of ``bonus`` on the table's grid; raises if it is not a grid point."""
        hit = np.flatnonzero(np.isclose(self.bonuses, bonus, rtol=0.0, atol=1e-12))
        if hit.size == 0:
            raise ContractError(f"bonus {bonus!r} is not on the probe grid")
        return int(hit[0])

    def scaled(self, alpha: float) -> "ProbeTable":
        return ProbeTable(self.bonuses, alpha * self.exposure, alpha * self.reward,
                          alpha * self.exposure_se, alpha * self.reward_se,
                          alpha * self.eps_exposure, alpha * self.eps_reward)

    def __eq__(self, other):
        if not isinstance(other, ProbeTable):
            return NotImplemented
        return (all(np.array_equal(getattr(self, a), getattr(other, a))
                    for a in ("bonuses", "exposure", "reward", "exposure_se", "reward_se"))
                and self.eps_exposure == other.eps_exposure
                and self.eps_reward == other.eps_reward)

    __hash__ = None


@dataclass(frozen=True)
class MetricsReport:
    expected_exposures: tuple[float, ...]
    expected_reward: float
    realized_exposures: tuple[float, ...]
    realized_clicks: float
    realized_purchases: float
    realized_gmv: float
    realized_reward: float
    sessions: int
    purchase_rate: float
    compliance_rate: float
    extra: dict = field(default_factory=dict, compare=False)


def compliance_rate(achieved: Sequence[float], required: Sequence[float]) -> float:
    """Mean over sets of ``min(achieved, required) / required``.

    A set with a zero floor is vacuously met and contributes 1.0.
    """
    c = np.asarray(achieved, dtype=float)
    r = np.asarray(required, dtype=float)
    if c.shape != r.shape or c.ndim != 1:
        raise ContractError(f"achieved {c.shape} and required {r.shape} must be equal-length vectors")
    if c.size == 0:
        raise ContractError("need at least one set")
    if np.any(r < 0):
        raise ContractError("required floors must be >= 0")
    ratios = np.ones_like(r)
    pos = r > 0
    ratios[pos] = np.minimum(c[pos], r[pos]) / r[pos]
    return float(ratios.mean())


def policy_expectation(policy: "StochasticPolicy", table: ProbeTable) -> tuple[np.ndarray, float]:
    """Per-set expected exposures and total expected reward of ``policy`` on ``table``.

    Each (group, set) cell flips its own coin, so expectations add up cell by cell.
    """
    n, m = table.n_groups, table.n_sets
    exposures = np.zeros(m)
    reward = 0.0
    seen = set()
    for a in policy.assignments:
        if not (0 <= a.group < n and 0 <= a.set < m):
            raise ContractError(f"assignment ({a.group}, {a.set}) outside the {n}x{m} table")
        lo, hi = table.grid_index(a.bonus_low), table.grid_index(a.bonus_high)
        f, g = table.exposure[a.group, a.set], table.reward[a.group, a.set]
        exposures[a.set] += (1.0 - a.p_high) * f[lo] + a.p_high * f[hi]
        reward += (1.0 - a.p_high) * g[lo] + a.p_high * g[hi]
        seen.add((a.group, a.set))
    if len(seen) != n * m:
        raise ContractError("policy does not cover every (group, set) cell")
    return exposures, float(reward)
