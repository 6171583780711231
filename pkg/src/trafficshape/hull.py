"""Outer convex curve (upper hull) of probed (exposure, reward) points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import ContractError, ProbeTable

DUPLICATE_RTOL = 1e-9


@dataclass(frozen=True)
class FrontierPoint:
    exposure: float
    reward: float
    bonus: float


@dataclass(frozen=True)
class HullCurve:
    """Concave piecewise-linear frontier; vertices sorted by exposure."""

    vertices: tuple[FrontierPoint, ...]

    @property
    def exposures(self) -> np.ndarray:
        return np.array([v.exposure for v in self.vertices])

    @property
    def rewards(self) -> np.ndarray:
        return np.array([v.reward for v in self.vertices])

    @property
    def segment_slopes(self) -> np.ndarray:
        return np.diff(self.rewards) / np.diff(self.exposures)

    def __len__(self):
        return len(self.vertices)


def _cross_below(x, y, x1, y1, x2, y2) -> bool:
    return (y - y1) * (x2 - x1) < (x - x1) * (y2 - y1)


def eliminate_predicate(candidate: FrontierPoint, left: FrontierPoint, right: FrontierPoint) -> bool:
    """True iff ``candidate`` lies strictly below the chord from ``left`` to ``right``."""
    if not left.exposure <= candidate.exposure <= right.exposure:
        raise ContractError("need left.exposure <= candidate.exposure <= right.exposure")
    return _cross_below(candidate.exposure, candidate.reward,
                        left.exposure, left.reward, right.exposure, right.reward)


def _collapse(points: Sequence[FrontierPoint]) -> list[FrontierPoint]:
    # stack of equal exposures -> keep max reward, then smaller bonus
    pts = sorted(points, key=lambda p: (p.exposure, -p.reward, p.bonus))
    scale = max(abs(p.exposure) for p in pts)
    tol = DUPLICATE_RTOL * scale
    out = [pts[0]]
    anchor = pts[0].exposure
    for p in pts[1:]:
        if p.exposure - anchor <= tol:
            best = out[-1]
            if (p.reward, -p.bonus) > (best.reward, -best.bonus):
                out[-1] = p
        else:
            out.append(p)
            anchor = p.exposure
    return out


def outer_convex_curve(points: Iterable[FrontierPoint]) -> HullCurve:
    """Upper hull by a monotone-chain scan over exposure.

    A point is dropped only when it is strictly below the chord of its
    neighbours, so collinear points stay on the curve.
    """
    pts = list(points)
    if not pts:
        raise ContractError("outer_convex_curve needs at least one point")
    hull: list[FrontierPoint] = []
    for p in _collapse(pts):
        while len(hull) >= 2 and _cross_below(hull[-1].exposure, hull[-1].reward,
                                              hull[-2].exposure, hull[-2].reward,
                                              p.exposure, p.reward):
            hull.pop()
        hull.append(p)
    return HullCurve(tuple(hull))


def hull_value_at(curve: HullCurve, exposure: float) -> float:
    xs, ys = curve.exposures, curve.rewards
    span = max(1.0, abs(xs[-1]))
    if exposure < xs[0] - 1e-12 * span or exposure > xs[-1] + 1e-12 * span:
        raise ValueError(f"exposure {exposure} outside curve range [{xs[0]}, {xs[-1]}]")
    if len(xs) == 1:
        return float(ys[0])
    return float(np.interp(exposure, xs, ys))


def curve_for_cell(table: ProbeTable, group: int, set_: int) -> HullCurve:
    f, g = table.exposure[group, set_], table.reward[group, set_]
    return outer_convex_curve(FrontierPoint(float(f[t]), float(g[t]), float(table.bonuses[t]))
                              for t in range(table.bonuses.size))


def table_curves(table: ProbeTable) -> dict[tuple[int, int], HullCurve]:
    return {(i, j): curve_for_cell(table, i, j)
            for i in range(table.n_groups) for j in range(table.n_sets)}
