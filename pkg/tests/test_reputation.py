from __future__ import annotations

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import q_direct
from mrlpos.core import AttackKind, BehaviorId, BehaviorScores, StrategyDescriptor, new_node, replace
from mrlpos.detection import Weights, aggregate_attack_probability
from mrlpos.reputation import (
    LearningParams,
    apply_penalty,
    apply_reward,
    decay_attack_age,
    deactivate_if_bankrupt,
    observe_misbehavior,
    q_update,
    update_behavior_scores,
)

B = BehaviorId
LP = LearningParams()
W = Weights()


def fresh(stake=10.0, balance=100.0):
    return new_node(0, stake, StrategyDescriptor.honest(), balance)


def with_scores(node, values, w=W):
    scores = BehaviorScores(tuple(values))
    rep = replace(node.reputation, behavior_scores=scores, attack_probability=aggregate_attack_probability(scores, w))
    return replace(node, reputation=rep)


# q_update -------------------------------------------------------------------

def test_q_update_examples():
    assert q_update(0, 0.5, 1, 0.9, 0) == 0.5
    assert q_update(1, 1.0, 0.7, 0.9, 0.2) == 0.7 + 0.9 * 0.2
    assert q_update(0.5, 0.1, -1, 0.9, 0.5) == pytest.approx(0.395, abs=1e-15)


def test_q_update_random_draws():
    rng = random.Random(0)
    for _ in range(10_000):
        q, r, m = (rng.uniform(-1, 1) for _ in range(3))
        a, g = rng.uniform(1e-6, 1), rng.uniform(0, 0.999999)
        assert abs(q_update(q, a, r, g, m) - q_direct(q, a, r, g, m)) <= 1e-12


@pytest.mark.parametrize("alpha, gamma", [(0, 0.5), (1.1, 0.5), (0.5, 1.0), (0.5, -0.1)])
def test_q_update_rejects_params(alpha, gamma):
    with pytest.raises(ValueError):
        q_update(0, alpha, 0, gamma, 0)


@given(
    st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
    st.floats(0.01, 1), st.floats(0, 0.99),
)
def test_q_update_linear_in_q(q1, q2, r, m, a, g):
    # the difference of two updates depends only on the q difference
    lhs = q_update(q1, a, r, g, m) - q_update(q2, a, r, g, m)
    assert lhs == pytest.approx((1 - a) * (q1 - q2), abs=1e-12)


# behavior scores ------------------------------------------------------------

def test_honest_step_from_zero():
    out = update_behavior_scores(BehaviorScores(), {}, LP, acted_honestly=True)
    assert out.values == (-0.3,) * 16


def test_signal_step_from_zero():
    out = update_behavior_scores(BehaviorScores(), {B.B4: 1.0}, LP, acted_honestly=False)
    assert out[B.B4] == pytest.approx(0.3, abs=1e-15)
    assert all(out[b] == 0 for b in BehaviorId if b is not B.B4)


def test_non_participant_is_identity():
    assert update_behavior_scores(BehaviorScores(), {}, LP, acted_honestly=False) == BehaviorScores()


def test_honest_rounds_converge_monotonically():
    # equal scores s follow s' = (1 - a)s + a(r + g s); fixed point r / (1 - g) = -10 is clamped at -1
    scores = BehaviorScores((0.8,) * 16)
    prev = scores.values[0]
    for _ in range(200):
        scores = update_behavior_scores(scores, {}, LP, acted_honestly=True)
        cur = scores.values[0]
        assert cur <= prev
        prev = cur
    assert math.isclose(prev, -1.0, abs_tol=1e-9)


# penalty / reward -----------------------------------------------------------

def test_penalty_example():
    n = apply_penalty(fresh(), {B.B4: 1.0}, W, LP)
    assert n.balance == 90
    assert n.reputation.attack_probability == pytest.approx(W[B.B4] * 0.3, abs=1e-15)
    assert n.reputation.last_attack_age == 3
    assert n.reputation.restrictions == (AttackKind.DOUBLE_SPEND,)


def test_penalty_bankrupts():
    n = apply_penalty(fresh(balance=5), {B.B9: 1.0}, W, LP)
    assert n.balance == -5 and not n.is_active


def test_penalty_deactivates_on_probability():
    node = with_scores(fresh(), [1.0] * 15 + [0.9])
    assert node.reputation.attack_probability > 0.95 - 0.1
    n = apply_penalty(node, {B.B1: 1.0}, W, LP)
    assert n.reputation.attack_probability >= 0.95 and not n.is_active


def test_penalty_with_empty_row_rejected():
    with pytest.raises(ValueError):
        apply_penalty(fresh(), {B.B1: 0.0}, W, LP)


def test_reward_example():
    n = apply_reward(fresh(), W, LP)
    assert n.balance == 101
    assert n.reputation.behavior_scores.values == (-0.3,) * 16
    assert n.reputation.attack_probability == 0


def test_reward_lifts_one_restriction():
    node = replace(fresh(), reputation=replace(fresh().reputation, restrictions=(AttackKind.DOUBLE_SPEND, AttackKind.SYBIL)))
    n = apply_reward(node, W, LP)
    assert n.reputation.restrictions == (AttackKind.SYBIL,)


def test_reward_lowers_probability():
    node = with_scores(fresh(), [0.4] * 16)
    assert node.reputation.attack_probability == pytest.approx(0.4)
    assert apply_reward(node, W, LP).reputation.attack_probability < 0.4


def test_reward_rejects_signals():
    with pytest.raises(ValueError):
        apply_reward(fresh(), W, LP, report_row={B.B2: 1.0})


def test_decay_examples():
    def aged(a):
        return replace(fresh(), reputation=replace(fresh().reputation, last_attack_age=a))

    assert decay_attack_age(aged(3)).reputation.last_attack_age == 2
    assert decay_attack_age(aged(0)).reputation.last_attack_age == 0
    assert decay_attack_age(aged(1)).reputation.last_attack_age == 0


def test_observation_keeps_stake_and_restrictions():
    n = observe_misbehavior(fresh(), {B.B9: 1.0}, W, LP)
    assert n.balance == 100 and n.reputation.restrictions == ()
    assert n.reputation.last_attack_age == 3 and n.reputation.attack_probability > 0


def test_params_validation_names_field():
    with pytest.raises(ValueError, match="learning.alpha"):
        LearningParams(alpha=1.5)
    with pytest.raises(ValueError, match="learning.honest_reward_signal"):
        LearningParams(honest_reward_signal=0.5)


# random operation sequences -------------------------------------------------

ops = st.lists(
    st.tuples(
        st.sampled_from(["penalty", "reward", "observe", "decay"]),
        st.sets(st.sampled_from(list(BehaviorId)), min_size=1, max_size=3),
    ),
    max_size=25,
)


@given(ops, st.floats(1, 20), st.floats(-10, 200))
def test_operation_sequences(seq, stake, balance):
    node = fresh(stake, balance)
    node = deactivate_if_bankrupt(node)
    was_inactive = not node.is_active
    for op, bs in seq:
        before = node
        row = {b: 1.0 for b in bs}
        if op == "penalty":
            node = apply_penalty(node, row, W, LP)
            assert node.reputation.attack_probability > 0
            assert node.reputation.last_attack_age == LP.attack_age_max
            assert node.balance == before.balance - stake
        elif op == "reward":
            node = apply_reward(node, W, LP)
            assert node.reputation.attack_probability <= before.reputation.attack_probability
            assert len(node.reputation.restrictions) <= len(before.reputation.restrictions)
            assert node.balance == before.balance + LP.fee
        elif op == "observe":
            node = observe_misbehavior(node, row, W, LP)
            assert node.balance == before.balance
        else:
            node = decay_attack_age(node)
        rep = node.reputation
        assert 0 <= rep.attack_probability <= 1
        assert all(-1 <= v <= 1 for v in rep.behavior_scores.values)
        assert rep.attack_probability == aggregate_attack_probability(rep.behavior_scores, W)
        if was_inactive:
            assert not node.is_active
        was_inactive = not node.is_active
