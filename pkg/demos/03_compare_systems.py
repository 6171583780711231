"""No shaping, a PID controller with a bandit, and the LP protocol, side by side.

All three systems see the same simulated users on each seed, so the
per-seed differences are paired.  Shaping costs clicks; the question is
how much compliance each system buys for what it gives up.
"""

import numpy as np

from trafficshape import compare, load_bundled

exp = load_bundled("default")
seeds = list(range(20))
result = compare(exp, seeds)
print(result.summary_csv())

for a, b in (("protocol", "pid-bandit"), ("protocol", "no-shaping")):
    for name in ("CR", "realized_reward"):
        d = result.column(a, name) - result.column(b, name)
        print(f"{a} - {b} {name}: {d.mean():+.4g} (se {d.std(ddof=1) / np.sqrt(len(d)):.2g})")

# %% How the PID controller moved its bonuses on the first seed
traj = result.runs["pid-bandit"][0].extra["bonus_trajectory"]
print("PID bonus per set, every 10th epoch:")
print(np.round(traj.max(axis=1)[::10], 3))
