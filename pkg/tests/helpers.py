"""Instance generators and brute-force references shared by the tests."""

import itertools

import numpy as np

from trafficshape.hull import FrontierPoint
from trafficshape.model import ProbeTable, Scenario
from trafficshape.simenv import ItemSpec, Marketplace, SessionTemplate

RUNNING_BONUSES = (0.0, 0.5, 1.0)


def running_table():
    return ProbeTable.exact(RUNNING_BONUSES, [[[0.0, 1.0, 3.0]]], [[[10.0, 9.0, 4.0]]])


def running_scenario(r=2.0):
    return Scenario(1, 1, (r,), 2)


def survivors_brute_force(points):
    """Points not strictly below any chord, checked over every (candidate, left, right) triple."""
    x = np.array([p.exposure for p in points])
    y = np.array([p.reward for p in points])
    X, Y = x[:, None, None], y[:, None, None]
    xa, ya = x[None, :, None], y[None, :, None]
    xb, yb = x[None, None, :], y[None, None, :]
    between = (xa <= X) & (X <= xb)
    below = (Y - ya) * (xb - xa) < (X - xa) * (yb - ya)
    killed = (between & below).any(axis=(1, 2))
    return [p for p, k in zip(points, killed) if not k]


def upper_envelope_brute_force(points, x):
    """Max reward reachable at exposure ``x`` by mixing any two input points."""
    best = -np.inf
    for a, b in itertools.product(points, repeat=2):
        if a.exposure == x:
            best = max(best, a.reward)
        if a.exposure < x < b.exposure:
            lam = (x - a.exposure) / (b.exposure - a.exposure)
            best = max(best, (1 - lam) * a.reward + lam * b.reward)
    return best


def random_points(rng, n_max=64, integer=False):
    n = int(rng.integers(1, n_max + 1))
    if integer:
        xs = rng.integers(0, 20, n).astype(float)
        ys = rng.integers(0, 20, n).astype(float)
    else:
        xs = rng.random(n) * 10
        ys = rng.random(n) * 10
    return [FrontierPoint(float(x), float(y), float(t) / max(1, n - 1)) for t, (x, y) in enumerate(zip(xs, ys))]


def random_table(rng, n=None, m=None, k=None, monotone=False):
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    k = k or int(rng.integers(1, 9))
    shape = (n, m, k + 1)
    f = rng.random(shape) * 100
    g = rng.random(shape) * 100
    if monotone:
        f = np.sort(f, axis=2)
        g = -np.sort(-g, axis=2)
    # some ties in exposure to exercise duplicate collapsing
    if rng.random() < 0.3:
        f = np.round(f / 20) * 20
    return ProbeTable.exact(np.linspace(0, 1, k + 1), f, g)


def feasible_scenario(rng, table, k=None):
    n, m, T = table.exposure.shape
    cap = table.exposure.max(axis=2).sum(axis=0)
    r = rng.random(m) * cap
    return Scenario(n, m, tuple(r), k or T - 1)


def random_market(rng, n=None, m=None, horizon=None):
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    templates = []
    for i in range(n):
        for j in range(m):
            n_t = int(rng.integers(1, 3))
            n_f = int(rng.integers(1, 3))
            t_cp = rng.random() * 0.1
            cands = [ItemSpec(float(rng.random() * 0.5), float(t_cp), float(t_cp * 0.3), 10.0, True)
                     for _ in range(n_t)]
            for _ in range(n_f):
                f_cp = float(t_cp + rng.random() * 0.3)
                cands.append(ItemSpec(float(0.3 + rng.random() * 0.5), f_cp, 0.2 * f_cp, 20.0, False))
            slots = int(rng.integers(1, len(cands) + 1))
            templates.append(SessionTemplate(i, j, tuple(cands), slots, (-0.15, 0.0, 0.15),
                                             (0.25, 0.5, 0.25), float(1 + rng.random())))
    return Marketplace(n, m, tuple(templates), horizon or int(rng.integers(50, 500)))


# verdict lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE: list[str] = []
