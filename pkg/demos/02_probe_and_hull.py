"""Probing a simulated marketplace and looking at what the solver sees.

The bundled ``small`` scenario has two user groups and two target sets.
Exact probing enumerates every ranking-noise draw; Monte Carlo probing
simulates sessions and reports standard errors, which become the error
caps used by the certificate.
"""

import numpy as np

from trafficshape import load_bundled, mc_probe, exact_table, run_protocol, certify
from trafficshape.hull import table_curves

exp = load_bundled("small")
grid = exp.scenario.grid()
exact = exact_table(exp.market, grid)
noisy = mc_probe(exp.market, grid, sessions_per_point=2000, seed=0)

np.set_printoptions(precision=1, suppress=True)
print("bonus grid:", grid.as_array())
for (i, j), curve in table_curves(exact).items():
    g, s = exp.scenario.group_ids[i], exp.scenario.set_ids[j]
    print(f"{g}/{s} exact exposure {exact.exposure[i, j]}  mc {noisy.exposure[i, j]}")
    print(f"      hull keeps bonuses {[v.bonus for v in curve.vertices]}")
print(f"error caps from the noisy probe: exposure {noisy.eps_exposure:.1f}, clicks {noisy.eps_reward:.1f}")

# %% Solve on the noisy table, then judge the policy against the exact responses.
policy = run_protocol(noisy, exp.scenario).policy
report = certify(policy, noisy, exp.scenario, truth=exact)
print("true per-set exposure:", np.round(report.expected_exposures, 1), "floors:", exp.scenario.requirements)
print("exposure margins:", np.round(report.exposure_margins, 1))
print(f"reward margin {report.reward_margin:.1f} (with grid term {report.reward_margin_with_grid:.1f})")
print("passed:", report.passed)
