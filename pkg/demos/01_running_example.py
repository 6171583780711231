"""A single group and a single target set, solved by hand and by the library.

Three bonus levels give exposures (0, 1, 3) and clicks (10, 9, 4).  The set
needs 2 exposures.  No single bonus level is both feasible and good: 1.0
meets the floor but keeps only 4 clicks.  Randomizing between 0.5 and 1.0
reaches exactly 2 exposures while keeping 6.5 clicks.
"""

from trafficshape import (FrontierPoint, ProbeTable, Scenario, certify, deterministic_grid_optimum,
                          mixture_optimum, outer_convex_curve, policy_expectation, run_protocol)
from trafficshape.hull import curve_for_cell

table = ProbeTable.exact([0.0, 0.5, 1.0], [[[0.0, 1.0, 3.0]]], [[[10.0, 9.0, 4.0]]])
scenario = Scenario(n_groups=1, n_sets=1, requirements=(2.0,), grid_k=2)

# %% The upper hull of (exposure, clicks) keeps all three points here.
curve = curve_for_cell(table, 0, 0)
print("hull vertices:", [(v.exposure, v.reward, v.bonus) for v in curve.vertices])

# %% Each hull edge becomes one LP variable with a per-exposure click cost.
outcome = run_protocol(table, scenario)
for seg, x in zip(outcome.program.segments, outcome.result.allocations):
    print(f"segment {seg.index}: width {seg.width:g}, loss {seg.loss_rate:g}/exposure, allocated {x:g}")
print("objective:", outcome.result.objective)

# %% The last partly used edge turns into a coin flip between its two bonuses.
a = outcome.policy[0, 0]
print(f"play bonus {a.bonus_high} with probability {a.p_high}, else {a.bonus_low}")
print("expected (exposure, clicks):", policy_expectation(outcome.policy, table))

# %% Brute force agrees, and shows what a deterministic rule would lose.
print("best mixture:", mixture_optimum(table, scenario).value)
print("best single bonus:", deterministic_grid_optimum(table, scenario))
print("certificate passed:", certify(outcome.policy, table, scenario).passed)

# %% A fourth probe point at (2, 5) would sit under the chord from (1, 9) to (3, 4).
points = [FrontierPoint(0, 10, 0.0), FrontierPoint(1, 9, 1 / 3), FrontierPoint(2, 5, 2 / 3), FrontierPoint(3, 4, 1.0)]
print("with an extra point:", [(v.exposure, v.reward) for v in outer_convex_curve(points).vertices])
