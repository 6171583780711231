"""A finer bonus grid never hurts when each grid contains the previous one.

On the ``smooth`` scenario the click cost of extra exposure rises steadily,
so a coarse grid cuts corners off the true trade-off curve.  Nested grids
(2, 4, 8, 16, 32 steps) keep every earlier point, so the hull only grows.
A refinement that adds no new hull corner leaves the value unchanged.
"""

from trafficshape import load_bundled, policy_expectation, probe, run_protocol

exp = load_bundled("smooth")
previous = None
for k in (2, 4, 8, 16, 32):
    e = exp.with_grid(k)
    table = probe(e, "exact")
    outcome = run_protocol(table, e.scenario)
    exposure, clicks = policy_expectation(outcome.policy, table)
    gain = "" if previous is None else f"  (+{clicks - previous:.2f})"
    print(f"grid_k={k:2d}: expected clicks {clicks:.2f} at exposure {exposure[0]:.0f}{gain}")
    previous = clicks
