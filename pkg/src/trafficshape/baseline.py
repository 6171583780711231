"""PID exposure control with an epsilon-greedy group selector.

This is the comparison system: each target set has a PID loop driving one
bonus value toward the exposure-rate target, and a bandit decides which user
groups receive that bonus in each control epoch (the rest get the domain
minimum).  The update law and the bandit are simple stand-ins with documented
defaults, not a tuned production controller.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .model import ContractError, MetricsReport
from .simenv import (EXPOSURE, EnumerationCapExceeded, Marketplace, episode_tapes, exact_cell,
                     metrics_report, simulate_sessions)

BANDIT_STREAM = 11


@dataclass(frozen=True)
class BaselineConfig:
    k_p: float = 0.3
    k_i: float = 0.05
    k_d: float = 0.0
    epsilon_explore: float = 0.1
    epochs: int = 50
    push_groups: int = 1

    def __post_init__(self):
        if min(self.k_p, self.k_i, self.k_d) < 0:
            raise ContractError("PID gains must be >= 0")
        if not 0.0 <= self.epsilon_explore <= 1.0:
            raise ContractError("epsilon_explore must be in [0, 1]")
        if self.epochs < 1 or self.push_groups < 1:
            raise ContractError("epochs and push_groups must be >= 1")


@dataclass(frozen=True)
class PidState:
    bonus: float
    k_p: float
    k_i: float
    k_d: float
    domain: tuple[float, float] = (0.0, 1.0)
    integral: float = 0.0
    prev_error: float = 0.0


def pid_step(state: PidState, observed_exposure_rate: float, target_rate: float) -> PidState:
    """One control update; the integral is clamped so ``k_i * integral`` cannot exceed the domain width."""
    if observed_exposure_rate < 0 or target_rate < 0:
        raise ContractError("rates must be >= 0")
    lo, hi = state.domain
    e = target_rate - observed_exposure_rate
    integral = state.integral + e
    if state.k_i > 0:
        limit = (hi - lo) / state.k_i
        integral = min(max(integral, -limit), limit)
    step = state.k_p * e + state.k_i * integral + state.k_d * (e - state.prev_error)
    bonus = min(max(state.bonus + step, lo), hi)
    return dataclasses.replace(state, bonus=bonus, integral=integral, prev_error=e)


@dataclass
class BanditState:
    """Per-set arm statistics; arm ``i`` means pushing the set to group ``i``."""

    values: np.ndarray
    counts: np.ndarray
    epsilon_explore: float

    @classmethod
    def fresh(cls, n_groups: int, epsilon_explore: float) -> "BanditState":
        return cls(np.zeros(n_groups), np.zeros(n_groups, dtype=np.int64), epsilon_explore)

    def select(self, k: int, epoch: int, rng: np.random.Generator) -> np.ndarray:
        n = self.values.size
        k = min(k, n)
        eps = self.epsilon_explore / np.sqrt(epoch)
        if eps > 0 and rng.random() < eps:
            return np.sort(rng.choice(n, size=k, replace=False))
        # stable sort: ties go to the lower group index
        return np.sort(np.argsort(-self.values, kind="stable")[:k])

    def update(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.values[arm] += (reward - self.values[arm]) / self.counts[arm]


def run_baseline_episode(market: Marketplace, requirements, config: BaselineConfig = BaselineConfig(),
                         seed: int = 0) -> MetricsReport:
    """Simulate one horizon under PID + bandit control.

    Uses the same per-seed session randomness as :func:`simenv.run_episode`,
    so systems compared on one seed see identical users.
    """
    n, m = market.n_groups, market.n_sets
    r = np.asarray(requirements, dtype=float)
    lo, hi = market.bonus_domain
    sessions = market.sessions
    per_set = sessions.sum(axis=0)
    target = np.divide(r, per_set, out=np.zeros(m), where=per_set > 0)
    tapes = episode_tapes(market, seed)
    windows = {c: np.array_split(np.arange(len(t)), config.epochs) for c, t in tapes.items()}
    rng = np.random.default_rng(np.random.SeedSequence([seed, BANDIT_STREAM]))

    pids = [PidState(lo, config.k_p, config.k_i, config.k_d, (lo, hi)) for _ in range(m)]
    bandits = [BanditState.fresh(n, config.epsilon_explore) for _ in range(m)]
    realized = np.zeros((4, n, m))
    expected = np.zeros((4, n, m))
    trajectory = []
    exact_ok = True
    k = market.reward_index
    for epoch in range(1, config.epochs + 1):
        pushed = [set(bandits[j].select(config.push_groups, epoch, rng).tolist()) for j in range(m)]
        bonuses = np.full((n, m), lo)
        for j in range(m):
            for i in pushed[j]:
                bonuses[i, j] = pids[j].bonus
        trajectory.append(bonuses.copy())
        epoch_out = np.zeros((4, n, m))
        epoch_sessions = np.zeros((n, m))
        for i in range(n):
            for j in range(m):
                idx = windows[(i, j)][epoch - 1]
                if idx.size == 0:
                    continue
                tape = tapes[(i, j)].window(int(idx[0]), int(idx[-1]) + 1)
                epoch_out[:, i, j] = simulate_sessions(market.template(i, j), tape, bonuses[i, j]).sum(axis=1)
                epoch_sessions[i, j] = idx.size
                if exact_ok:
                    try:
                        share = idx.size / sessions[i, j]
                        expected[:, i, j] += share * exact_cell(market, i, j, bonuses[i, j])
                    except EnumerationCapExceeded:
                        exact_ok = False
        realized += epoch_out
        for j in range(m):
            for i in pushed[j]:
                if epoch_sessions[i, j] > 0:
                    bandits[j].update(i, epoch_out[k, i, j] / epoch_sessions[i, j])
            s = epoch_sessions[:, j].sum()
            if s > 0:
                pids[j] = pid_step(pids[j], epoch_out[EXPOSURE, :, j].sum() / s, target[j])
    if not exact_ok:
        expected = realized.copy()
    return metrics_report(market, r, realized, expected,
                          expected_source="exact" if exact_ok else "realized",
                          bonus_trajectory=np.array(trajectory))
