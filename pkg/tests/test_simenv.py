import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_market
from trafficshape.model import BonusGrid, ContractError
from trafficshape.policy import MixedAssignment, StochasticPolicy
from trafficshape.simenv import (EnumerationCapExceeded, ItemSpec, Marketplace, SessionTemplate,
                                 exact_response, exact_table, mc_probe, run_episode)


def one_cell(candidates, slots, noise=((0.0,), (1.0,)), horizon=1, weight=1.0):
    t = SessionTemplate(0, 0, tuple(candidates), slots, noise[0], noise[1], weight)
    return Marketplace(1, 1, (t,), horizon)


TARGET = ItemSpec(0.3, 0.1, 0.02, 10.0, True)
FILLER = ItemSpec(0.5, 0.4, 0.1, 20.0, False)


def brute_force_response(template, bonus):
    """Enumerate every noise draw and rank items with plain sorting."""
    c = template.candidates
    exp = clicks = 0.0
    for draw in itertools.product(range(len(template.noise_support)), repeat=len(c)):
        p = np.prod([template.noise_probs[d] for d in draw])
        keyed = []
        for idx, (item, d) in enumerate(zip(c, draw)):
            score = round(item.base_score + template.noise_support[d] + (bonus if item.target else 0.0), 12)
            keyed.append((-score, 0 if item.target else 1, idx))
        shown = [k[2] for k in sorted(keyed)[:template.slots]]
        exp += p * sum(c[k].target for k in shown)
        clicks += p * sum(c[k].click_prob for k in shown)
    return exp, clicks


def test_hand_example_single_slot():
    m = one_cell([TARGET, FILLER], 1)
    r0 = exact_response(m, 0, 0, 0.0)
    assert r0.exposure == 0.0 and r0.clicks == pytest.approx(0.4)
    r1 = exact_response(m, 0, 0, 0.2)
    # 0.3 + 0.2 ties the filler at 0.5 and targets win ties
    assert r1.exposure == 1.0 and r1.clicks == pytest.approx(0.1)


def test_no_targets_means_no_exposure():
    m = one_cell([FILLER, ItemSpec(0.1, 0.3, 0.0, 5.0, False)], 1)
    assert exact_response(m, 0, 0, 1.0).exposure == 0.0


def test_all_slots_show_everything():
    m = one_cell([TARGET, TARGET, FILLER], 3, noise=((-0.2, 0.0, 0.2), (0.3, 0.4, 0.3)), horizon=10)
    for b in (0.0, 0.4, 1.0):
        assert exact_response(m, 0, 0, b).exposure == pytest.approx(20.0)


def test_bonus_outside_domain():
    with pytest.raises(ContractError):
        exact_response(one_cell([TARGET, FILLER], 1), 0, 0, 1.5)


def test_template_contracts():
    with pytest.raises(ContractError):
        SessionTemplate(0, 0, (TARGET, FILLER), 3)
    with pytest.raises(ContractError):
        SessionTemplate(0, 0, (ItemSpec(0.3, 0.9, 0.1, 1.0, True), FILLER), 1)
    with pytest.raises(ContractError):
        ItemSpec(0.1, 0.2, 0.3, 1.0, False)


def test_enumeration_cap():
    t = SessionTemplate(0, 0, (TARGET, FILLER, FILLER), 1)
    m = Marketplace(1, 1, (t,), 10, enumeration_cap=100)
    with pytest.raises(EnumerationCapExceeded):
        exact_response(m, 0, 0, 0.5)


def test_sessions_apportioned_by_weight():
    rng = np.random.default_rng(5)
    m = random_market(rng, 2, 3, 1001)
    assert m.sessions.sum() == 1001


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_exact_matches_sorting_oracle(seed, bonus):
    m = random_market(np.random.default_rng(seed), 1, 1, 1)
    t = m.template(0, 0)
    m = Marketplace(1, 1, (SessionTemplate(0, 0, t.candidates, t.slots, t.noise_support,
                                           t.noise_probs, 1.0),), 1)
    exp, clicks = brute_force_response(m.template(0, 0), bonus)
    r = exact_response(m, 0, 0, bonus)
    assert r.exposure == pytest.approx(exp, abs=1e-12)
    assert r.clicks == pytest.approx(clicks, abs=1e-12)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_response_monotone_in_bonus(seed):
    m = random_market(np.random.default_rng(seed))
    table = exact_table(m, BonusGrid.uniform(10))
    assert np.all(np.diff(table.exposure, axis=2) >= -1e-9)
    assert np.all(np.diff(table.reward, axis=2) <= 1e-9)


def test_noise_free_probe_is_exact():
    m = one_cell([TARGET, FILLER, ItemSpec(0.4, 0.2, 0.0, 3.0, False)], 2, horizon=50)
    grid = BonusGrid.uniform(5)
    mc, ex = mc_probe(m, grid, 200, seed=1), exact_table(m, grid)
    np.testing.assert_allclose(mc.exposure, ex.exposure, atol=1e-9)
    assert np.all(mc.exposure_se == 0)


def test_large_probe_within_three_se():
    m = random_market(np.random.default_rng(8), 2, 2, 400)
    grid = BonusGrid.uniform(4)
    mc, ex = mc_probe(m, grid, 100_000, seed=3), exact_table(m, grid)
    se = np.maximum(mc.exposure_se, 1e-12)
    assert np.all(np.abs(mc.exposure - ex.exposure) <= 3 * se + 1e-9)


def test_probe_unbiased_across_seeds():
    m = random_market(np.random.default_rng(21), 2, 2, 400)
    grid = BonusGrid.uniform(4)
    ex = exact_table(m, grid)
    hits = total = 0
    for seed in range(100):
        mc = mc_probe(m, grid, 10_000, seed=seed)
        ok = np.abs(mc.exposure - ex.exposure) <= 3 * mc.exposure_se + 1e-9
        hits += int(ok.sum())
        total += ok.size
    assert hits / total >= 0.99


def test_probe_independent_of_workers():
    m = random_market(np.random.default_rng(2), 3, 2, 300)
    a = mc_probe(m, BonusGrid.uniform(4), 500, seed=4, workers=1)
    b = mc_probe(m, BonusGrid.uniform(4), 500, seed=4, workers=4)
    assert a == b


def _policy(m, bonus, hi=None, p=0.0):
    return StochasticPolicy(m.n_groups, m.n_sets, tuple(
        MixedAssignment(i, j, bonus, bonus if hi is None else hi, p)
        for i in range(m.n_groups) for j in range(m.n_sets)))


def test_zero_bonus_policy_is_no_shaping():
    m = random_market(np.random.default_rng(4), 2, 2, 300)
    a = run_episode(m, _policy(m, 0.0), 1, [0.0, 0.0])
    b = run_episode(m, _policy(m, 0.0, 1.0, 0.0), 1, [0.0, 0.0])
    assert a.realized_exposures == b.realized_exposures and a.realized_clicks == b.realized_clicks


def test_max_bonus_expected_exposure_is_exact():
    m = random_market(np.random.default_rng(6), 2, 2, 300)
    rep = run_episode(m, _policy(m, 1.0), 0, [0.0, 0.0])
    want = [sum(exact_response(m, i, j, 1.0).exposure for i in range(2)) for j in range(2)]
    assert rep.expected_exposures == pytest.approx(want, rel=1e-12)


def test_seeds_change_realized_not_expected():
    m = random_market(np.random.default_rng(7), 2, 2, 500)
    pol = _policy(m, 0.0, 1.0, 0.5)
    a = run_episode(m, pol, 0, [10.0, 10.0], redraw="session")
    b = run_episode(m, pol, 1, [10.0, 10.0], redraw="session")
    assert a.expected_reward == b.expected_reward
    assert a.realized_clicks != b.realized_clicks
    assert run_episode(m, pol, 0, [10.0, 10.0], redraw="session") == a


def test_zero_horizon_episode():
    m = random_market(np.random.default_rng(1), 2, 1, 1)
    m = Marketplace(m.n_groups, m.n_sets, m.templates, 0)
    rep = run_episode(m, _policy(m, 0.5), 0, [1.0])
    assert rep.realized_reward == 0 and rep.expected_reward == 0 and rep.sessions == 0
