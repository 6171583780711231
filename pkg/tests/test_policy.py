import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import feasible_scenario, random_table
from trafficshape.hull import table_curves
from trafficshape.model import ContractError, policy_expectation
from trafficshape.pipeline import run_protocol
from trafficshape.policy import (MixedAssignment, StochasticPolicy, derive_policy, sample_policy)
from trafficshape.program import SolveResult, build_program, solve_greedy


def test_running_example_policy(running):
    table, scen = running
    out = run_protocol(table, scen)
    a = out.policy[0, 0]
    assert (a.bonus_low, a.bonus_high, a.p_high) == (0.5, 1.0, 0.5)
    f, g = policy_expectation(out.policy, table)
    assert f.tolist() == [2.0] and g == 6.5


def test_saturated_last_segment_is_deterministic(running):
    table, scen = running
    a = run_protocol(table, scen.with_requirements((3.0,))).policy[0, 0]
    assert a.p_high == 1.0 and a.bonus_high == 1.0 and a.deterministic


def test_zero_allocation_plays_baseline(running):
    table, scen = running
    pol = run_protocol(table, scen.with_requirements((0.0,))).policy
    assert pol[0, 0] == MixedAssignment(0, 0, 0.0, 0.0, 0.0)
    assert policy_expectation(pol, table)[1] == 10.0


def test_non_prefix_allocation_rejected(running):
    table, scen = running
    prog = build_program(table_curves(table), scen)
    bad = SolveResult(np.array([0.0, 1.0]), 7.5, np.array([True]), np.array([-1.0]))
    with pytest.raises(ContractError):
        derive_policy(bad, prog)


def test_assignment_and_policy_contracts():
    with pytest.raises(ContractError):
        MixedAssignment(0, 0, 0.0, 1.0, 1.5)
    with pytest.raises(ContractError):
        StochasticPolicy(1, 2, (MixedAssignment(0, 0, 0.0, 1.0, 0.5),))


def test_sampling_degenerate_probabilities():
    lo = StochasticPolicy(1, 1, (MixedAssignment(0, 0, 0.2, 0.8, 0.0),))
    hi = StochasticPolicy(1, 1, (MixedAssignment(0, 0, 0.2, 0.8, 1.0),))
    assert set(sample_policy(lo, 3, 1000).ravel()) == {0.2}
    assert set(sample_policy(hi, 3, 1000).ravel()) == {0.8}


def test_sampling_frequency_half():
    pol = StochasticPolicy(1, 1, (MixedAssignment(0, 0, 0.5, 1.0, 0.5),))
    freq = float(np.mean(sample_policy(pol, 2024, 100_000) == 1.0))
    assert abs(freq - 0.5) <= 0.01


def test_sampling_is_seeded_and_cellwise_independent():
    pol = StochasticPolicy(2, 2, tuple(MixedAssignment(i, j, 0.0, 1.0, 0.5) for i in range(2) for j in range(2)))
    a, b = sample_policy(pol, 9, 500), sample_policy(pol, 9, 500)
    np.testing.assert_array_equal(a, b)
    assert sample_policy(pol, 9).shape == (2, 2)
    # a cell's stream depends only on (seed, cell), not on how many cells exist
    single = StochasticPolicy(1, 1, (MixedAssignment(0, 0, 0.0, 1.0, 0.5),))
    np.testing.assert_array_equal(sample_policy(single, 9, 500)[:, 0, 0], a[:, 0, 0])


def test_json_round_trip(running):
    table, scen = running
    pol = run_protocol(table, scen).policy
    assert StochasticPolicy.from_json(pol.to_json()) == pol


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_policy_reproduces_solved_coverage(seed):
    rng = np.random.default_rng(seed)
    table = random_table(rng)
    scen = feasible_scenario(rng, table)
    prog = build_program(table_curves(table), scen)
    res = solve_greedy(prog)
    pol = derive_policy(res, prog)
    assert derive_policy(res, prog) == pol
    f, g = policy_expectation(pol, table)
    want = prog.baseline_exposures + prog.set_matrix() @ res.allocations
    np.testing.assert_allclose(f, want, rtol=1e-9, atol=1e-9)
    assert g == pytest.approx(res.objective, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_sampled_exposure_is_unbiased(seed):
    rng = np.random.default_rng(seed)
    table = random_table(rng, n=2, m=2)
    scen = feasible_scenario(rng, table)
    pol = run_protocol(table, scen).policy
    draws = sample_policy(pol, seed, 20_000)
    for a in pol.assignments:
        lo, hi = table.grid_index(a.bonus_low), table.grid_index(a.bonus_high)
        f_lo, f_hi = table.exposure[a.group, a.set, lo], table.exposure[a.group, a.set, hi]
        f = np.where(draws[:, a.group, a.set] == a.bonus_high, f_hi, f_lo)
        se = abs(f_hi - f_lo) * np.sqrt(a.p_high * (1 - a.p_high) / len(f))
        assert abs(f.mean() - ((1 - a.p_high) * f_lo + a.p_high * f_hi)) <= 3 * se + 1e-9
