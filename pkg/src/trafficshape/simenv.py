"""Synthetic marketplace: ranked sessions with top-K slots and a bonus on target items.

Every session belongs to one (group, set) cell.  Candidates are ranked by
``base_score + noise + bonus * is_target``; ties go to the higher score, then
targets before fillers, then the lower candidate index.  Scores are rounded to
12 decimals before comparison so that ties do not depend on float summation
order.

Noise is drawn from a finite discrete support, which keeps the exact response
computable by enumerating every joint noise realization.
"""

from __future__ import annotations

import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import ContractError, MetricsReport, BonusGrid, ProbeTable, compliance_rate
from .policy import StochasticPolicy, cell_rng

DEFAULT_NOISE = ((-0.2, -0.1, 0.0, 0.1, 0.2), (0.2, 0.2, 0.2, 0.2, 0.2))
ENUMERATION_CAP = 10**6
_CHUNK = 65536

# seed-stream tags, see cell_rng
PROBE_STREAM = 1
EPISODE_STREAM = 2
SESSION_COIN_STREAM = 3
EPISODE_COIN_STREAM = 4

# index into per-cell totals
EXPOSURE, CLICKS, PURCHASES, GMV = range(4)
CHANNEL_INDEX = {"clicks": CLICKS, "purchases": PURCHASES}


class EnumerationCapExceeded(RuntimeError):
    """Exact enumeration is too large; use Monte Carlo probing instead."""


@dataclass(frozen=True)
class ItemSpec:
    base_score: float
    click_prob: float
    purchase_prob: float
    price: float
    target: bool

    def __post_init__(self):
        if not (0.0 <= self.purchase_prob <= self.click_prob <= 1.0):
            raise ContractError(f"need 0 <= purchase_prob <= click_prob <= 1, got {self}")
        if self.price < 0:
            raise ContractError(f"negative price {self.price}")


@dataclass(frozen=True)
class SessionTemplate:
    group: int
    set: int
    candidates: tuple[ItemSpec, ...]
    slots: int
    noise_support: tuple[float, ...] = DEFAULT_NOISE[0]
    noise_probs: tuple[float, ...] = DEFAULT_NOISE[1]
    session_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "noise_support", tuple(float(x) for x in self.noise_support))
        object.__setattr__(self, "noise_probs", tuple(float(x) for x in self.noise_probs))
        if not self.candidates:
            raise ContractError("template needs at least one candidate")
        if not 1 <= self.slots <= len(self.candidates):
            raise ContractError(f"slots={self.slots} must be in [1, {len(self.candidates)}]")
        if len(self.noise_support) != len(self.noise_probs) or not self.noise_support:
            raise ContractError("noise support and probabilities must be non-empty and equal length")
        if any(p < 0 for p in self.noise_probs) or abs(sum(self.noise_probs) - 1.0) > 1e-9:
            raise ContractError("noise probabilities must be >= 0 and sum to 1")
        if self.session_weight < 0:
            raise ContractError("session_weight must be >= 0")
        targets = [c.click_prob for c in self.candidates if c.target]
        fillers = [c.click_prob for c in self.candidates if not c.target]
        if targets and fillers and max(targets) > min(fillers):
            raise ContractError("every target must click no more often than every filler")

    @functools.cached_property
    def _arrays(self):
        c = self.candidates
        base = np.array([x.base_score for x in c])
        target = np.array([x.target for x in c])
        # lower tie key wins: targets first, then index
        tie = np.where(target, 0, len(c)) + np.arange(len(c))
        return (base, target, tie, np.array([x.click_prob for x in c]),
                np.array([x.purchase_prob for x in c]), np.array([x.price for x in c]))

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class Tape:
    """Pre-drawn randomness for a run of sessions: per-item noise and uniforms."""

    noise: np.ndarray
    uniform: np.ndarray

    def window(self, start: int, stop: int) -> "Tape":
        return Tape(self.noise[start:stop], self.uniform[start:stop])

    def __len__(self):
        return self.noise.shape[0]


def draw_tape(template: SessionTemplate, n: int, rng: np.random.Generator) -> Tape:
    shape = (n, template.n_candidates)
    noise = rng.choice(np.asarray(template.noise_support), size=shape, p=np.asarray(template.noise_probs))
    return Tape(noise, rng.random(shape))


def displayed_mask(template: SessionTemplate, noise: np.ndarray, bonus) -> np.ndarray:
    """Boolean ``(N, C)`` mask of the items that make the top ``slots``."""
    base, target, tie, *_ = template._arrays
    bonus = np.asarray(bonus, dtype=float).reshape(-1, 1)
    scores = np.round(base + noise + bonus * target, 12)
    sa, sb = scores[:, :, None], scores[:, None, :]
    beats = (sa > sb) | ((sa == sb) & (tie[:, None] < tie[None, :]))
    rank = beats.sum(axis=1)
    return rank < template.slots


def simulate_sessions(template: SessionTemplate, tape: Tape, bonus) -> np.ndarray:
    """Per-session outcomes ``(4, N)``: exposures, clicks, purchases, gmv.

    Clicks and purchases share one uniform per item, so a purchase implies a click.
    """
    _, target, _, cp, pp, price = template._arrays
    if len(tape) == 0:
        return np.zeros((4, 0))
    shown = displayed_mask(template, tape.noise, bonus)
    clicks = shown & (tape.uniform < cp)
    buys = shown & (tape.uniform < pp)
    return np.stack([(shown & target).sum(axis=1), clicks.sum(axis=1),
                     buys.sum(axis=1), (buys * price).sum(axis=1)]).astype(float)


@functools.lru_cache(maxsize=4096)
def _exact_per_session(template: SessionTemplate, bonus: float, cap: int) -> np.ndarray:
    support = np.asarray(template.noise_support)
    probs = np.asarray(template.noise_probs)
    s, c = support.size, template.n_candidates
    total = s ** c
    if total > cap:
        raise EnumerationCapExceeded(
            f"{total} joint noise realizations exceed the cap {cap}; use Monte Carlo")
    _, target, _, cp, pp, price = template._arrays
    per_item = np.stack([target.astype(float), cp, pp, pp * price])  # (4, C)
    out = np.zeros(4)
    mass = 0.0
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(total, start + _CHUNK))
        idx = np.stack(np.unravel_index(flat, (s,) * c), axis=1)
        weight = probs[idx].prod(axis=1)
        shown = displayed_mask(template, support[idx], bonus)
        out += (shown * weight[:, None]).sum(axis=0) @ per_item.T
        mass += weight.sum()
    out /= mass
    out.setflags(write=False)
    return out


class Response(NamedTuple):
    exposure: float
    clicks: float
    purchases: float
    gmv: float


@dataclass(frozen=True)
class Marketplace:
    n_groups: int
    n_sets: int
    templates: tuple[SessionTemplate, ...]
    horizon: int
    reward_channel: str = "clicks"
    bonus_domain: tuple[float, float] = (0.0, 1.0)
    enumeration_cap: int = ENUMERATION_CAP

    def __post_init__(self):
        ts = tuple(sorted(self.templates, key=lambda t: (t.group, t.set)))
        object.__setattr__(self, "templates", ts)
        cells = [(t.group, t.set) for t in ts]
        if cells != [(i, j) for i in range(self.n_groups) for j in range(self.n_sets)]:
            raise ContractError("marketplace needs exactly one template per (group, set)")
        if self.horizon < 0:
            raise ContractError("horizon must be >= 0")
        if self.reward_channel not in CHANNEL_INDEX:
            raise ContractError(f"unknown reward channel {self.reward_channel!r}")

    def template(self, group: int, set_: int) -> SessionTemplate:
        return self.templates[group * self.n_sets + set_]

    @functools.cached_property
    def sessions(self) -> np.ndarray:
        """Integer sessions per cell over the horizon (largest-remainder apportionment)."""
        w = np.array([t.session_weight for t in self.templates], dtype=float)
        out = np.zeros(w.size, dtype=np.int64)
        if self.horizon > 0 and w.sum() > 0:
            quota = self.horizon * w / w.sum()
            out = np.floor(quota).astype(np.int64)
            rest = self.horizon - int(out.sum())
            order = np.lexsort((np.arange(w.size), -(quota - out)))
            out[order[:rest]] += 1
        out = out.reshape(self.n_groups, self.n_sets)
        out.setflags(write=False)
        return out

    @property
    def reward_index(self) -> int:
        return CHANNEL_INDEX[self.reward_channel]


def _check_bonus(market: Marketplace, bonus: float) -> None:
    lo, hi = market.bonus_domain
    if not lo - 1e-12 <= bonus <= hi + 1e-12:
        raise ContractError(f"bonus {bonus} outside domain [{lo}, {hi}]")


def exact_cell(market: Marketplace, group: int, set_: int, bonus: float) -> np.ndarray:
    _check_bonus(market, bonus)
    per = _exact_per_session(market.template(group, set_), float(bonus), market.enumeration_cap)
    return per * market.sessions[group, set_]


def exact_response(market: Marketplace, group: int, set_: int, bonus: float) -> Response:
    """Expected (exposure, clicks, purchases, gmv) of one cell over the horizon."""
    return Response(*(float(v) for v in exact_cell(market, group, set_, bonus)))


def exact_table(market: Marketplace, grid: BonusGrid | Sequence[float]) -> ProbeTable:
    """Probe table built from exact expectations (zero error)."""
    bonuses = grid.as_array() if isinstance(grid, BonusGrid) else np.asarray(grid, dtype=float)
    vals = np.array([[[exact_cell(market, i, j, x) for x in bonuses]
                      for j in range(market.n_sets)] for i in range(market.n_groups)])
    return ProbeTable.exact(bonuses, vals[..., EXPOSURE], vals[..., market.reward_index])


def _probe_cell(market, bonuses, sessions_per_point, seed, cell):
    i, j, t = cell
    tmpl = market.template(i, j)
    tape = draw_tape(tmpl, sessions_per_point, cell_rng(seed, i, j, PROBE_STREAM, t))
    out = simulate_sessions(tmpl, tape, bonuses[t])
    f, g = out[EXPOSURE], out[market.reward_index]
    n = sessions_per_point
    fse = f.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    gse = g.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return f.mean(), g.mean(), fse, gse


def mc_probe(market: Marketplace, grid: BonusGrid | Sequence[float], sessions_per_point: int,
             seed: int, eps_multiplier: float = 3.0, workers: int = 1) -> ProbeTable:
    """Estimate exposure and reward on the grid from simulated sessions.

    Each (group, set, grid point) cell draws its own randomness from the seed,
    so the table does not depend on ``workers``.
    """
    if sessions_per_point < 1:
        raise ContractError("sessions_per_point must be >= 1")
    bonuses = grid.as_array() if isinstance(grid, BonusGrid) else np.asarray(grid, dtype=float)
    for x in bonuses:
        _check_bonus(market, x)
    n, m, T = market.n_groups, market.n_sets, bonuses.size
    cells = [(i, j, t) for i in range(n) for j in range(m) for t in range(T)]
    probe = functools.partial(_probe_cell, market, bonuses, sessions_per_point, seed)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(probe, cells))
    else:
        rows = [probe(c) for c in cells]
    vals = np.array(rows).reshape(n, m, T, 4)
    scale = market.sessions[:, :, None].astype(float)
    f, g, fse, gse = (vals[..., k] * scale for k in range(4))
    return ProbeTable(bonuses, f, g, fse, gse,
                      eps_multiplier * float(fse.max(initial=0.0)),
                      eps_multiplier * float(gse.max(initial=0.0)))


def episode_tapes(market: Marketplace, seed: int) -> dict[tuple[int, int], Tape]:
    """Session randomness for a whole horizon, shared by every system run on this seed."""
    return {(t.group, t.set): draw_tape(t, int(market.sessions[t.group, t.set]),
                                        cell_rng(seed, t.group, t.set, EPISODE_STREAM))
            for t in market.templates}


def metrics_report(market: Marketplace, requirements, realized: np.ndarray,
                   expected: np.ndarray, **extra) -> MetricsReport:
    """Assemble a report from per-cell totals of shape ``(4, n, m)``."""
    sessions = int(market.sessions.sum())
    r_exp = realized[EXPOSURE].sum(axis=0)
    purchases = float(realized[PURCHASES].sum())
    k = market.reward_index
    extra.update(expected_clicks=float(expected[CLICKS].sum()),
                 expected_purchases=float(expected[PURCHASES].sum()),
                 expected_gmv=float(expected[GMV].sum()))
    return MetricsReport(
        expected_exposures=tuple(float(v) for v in expected[EXPOSURE].sum(axis=0)),
        expected_reward=float(expected[k].sum()),
        realized_exposures=tuple(float(v) for v in r_exp),
        realized_clicks=float(realized[CLICKS].sum()),
        realized_purchases=purchases,
        realized_gmv=float(realized[GMV].sum()),
        realized_reward=float(realized[k].sum()),
        sessions=sessions,
        purchase_rate=purchases / sessions if sessions else 0.0,
        compliance_rate=compliance_rate(r_exp, requirements),
        extra=extra,
    )


def run_episode(market: Marketplace, policy: StochasticPolicy, seed: int,
                requirements: Sequence[float], redraw: str = "episode") -> MetricsReport:
    """Play ``policy`` for one horizon.

    ``redraw="episode"`` flips each cell's coin once for the whole horizon;
    ``"session"`` flips it per session.  Expected metrics are the policy's
    mixture of exact responses and do not depend on the seed.
    """
    if redraw not in ("episode", "session"):
        raise ContractError(f"redraw must be 'episode' or 'session', got {redraw!r}")
    n, m = market.n_groups, market.n_sets
    tapes = episode_tapes(market, seed)
    realized = np.zeros((4, n, m))
    expected = np.zeros((4, n, m))
    source = "exact"
    for a in policy.assignments:
        i, j = a.group, a.set
        tmpl, tape = market.template(i, j), tapes[(i, j)]
        if redraw == "episode":
            u = cell_rng(seed, i, j, EPISODE_COIN_STREAM).random()
            bonus = a.bonus_high if u < a.p_high else a.bonus_low
        else:
            u = cell_rng(seed, i, j, SESSION_COIN_STREAM).random(len(tape))
            bonus = np.where(u < a.p_high, a.bonus_high, a.bonus_low)
        out = simulate_sessions(tmpl, tape, bonus)
        realized[:, i, j] = out.sum(axis=1)
        try:
            expected[:, i, j] = ((1 - a.p_high) * exact_cell(market, i, j, a.bonus_low)
                                 + a.p_high * exact_cell(market, i, j, a.bonus_high))
        except EnumerationCapExceeded:
            expected[:, i, j] = realized[:, i, j]
            source = "realized"
    return metrics_report(market, requirements, realized, expected, expected_source=source)
