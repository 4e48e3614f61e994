"""Penalty-reward mechanism and the Q-learning update behind it.

Each behavior score plays the role of a Q-value: detected misbehavior feeds
its signal in as the reward term, honest validation feeds
``honest_reward_signal`` (negative), and the bootstrap term is the node's
current largest behavior score.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Mapping, Optional, Sequence

from .core import (
    N_BEHAVIORS,
    BehaviorScores,
    NodeState,
    ReputationTable,
    Signals,
    behavior_attack_kind,
)
from .detection import Weights, aggregate_attack_probability


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.3
    gamma: float = 0.9
    honest_reward_signal: float = -1.0
    attack_age_max: int = 3
    deactivation_probability: float = 0.95
    fee: float = 1.0
    threshold: float = 1.0

    def __post_init__(self) -> None:
        checks = {
            "alpha": 0 < self.alpha <= 1,
            "gamma": 0 <= self.gamma < 1,
            "honest_reward_signal": self.honest_reward_signal < 0,
            "attack_age_max": self.attack_age_max >= 0 and int(self.attack_age_max) == self.attack_age_max,
            "deactivation_probability": 0 < self.deactivation_probability <= 1,
            "fee": self.fee >= 0,
            "threshold": self.threshold > 0,
        }
        for name, ok in checks.items():
            if not ok:
                raise ValueError(f"learning.{name} out of range: {getattr(self, name)}")


def q_update(q: float, alpha: float, r: float, gamma: float, max_next: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    return (1 - alpha) * q + alpha * (r + gamma * max_next)


def _step(values: Sequence[float], rewards: Sequence[float], params: LearningParams) -> BehaviorScores:
    a = params.alpha
    boot = params.gamma * max(values)
    # same operation order as q_update, so results agree bit for bit
    return BehaviorScores(tuple([(1 - a) * q + a * (r + boot) for q, r in zip(values, rewards)]))


def update_behavior_scores(
    scores: BehaviorScores,
    report_row: Mapping,
    params: LearningParams,
    acted_honestly: bool,
) -> BehaviorScores:
    """One Q-learning step over all sixteen scores.

    With ``acted_honestly`` every behavior receives ``honest_reward_signal``;
    otherwise each behavior's reward is its detection signal (so an all-zero
    row describes a non-participant).
    """
    if acted_honestly:
        rewards = (params.honest_reward_signal,) * N_BEHAVIORS
    else:
        rewards = _dense(report_row)
    return _step(scores.values, rewards, params)


def _dense(report_row: Mapping) -> list[float]:
    out = [0.0] * N_BEHAVIORS
    for b, v in report_row.items():
        out[b - 1] = float(v)
    return out


def _check_row(report_row: Mapping) -> bool:
    return any(v > 0 for v in report_row.values())


def _penalized_scores(scores: BehaviorScores, report_row: Mapping, params: LearningParams) -> BehaviorScores:
    # credit earned on a behavior is forfeited once that behavior is observed,
    # so a detected offense always leaves a positive trace
    values = list(scores.values)
    for b, v in report_row.items():
        if v > 0 and values[b - 1] < 0:
            values[b - 1] = 0.0
    return _step(values, _dense(report_row), params)


@lru_cache(maxsize=4096)
def _offended_scores(
    scores: BehaviorScores, row: tuple[tuple[int, float], ...], w: Weights, params: LearningParams
) -> tuple[BehaviorScores, float]:
    # attackers of one family tend to share a state, so this pure step is memoized
    new = _penalized_scores(scores, dict(row), params)
    return new, aggregate_attack_probability(new, w)


def _offended(
    rep: ReputationTable, report_row: Mapping, w: Weights, params: LearningParams, restrict: bool
) -> ReputationTable:
    scores, ap = _offended_scores(rep.behavior_scores, tuple(report_row.items()), w, params)
    restrictions = rep.restrictions
    if restrict:
        added = [behavior_attack_kind(b) for b in sorted(report_row) if report_row[b] > 0]
        restrictions = restrictions + tuple(k for k in dict.fromkeys(added) if k not in restrictions)
    return ReputationTable(
        attack_probability=ap,
        last_attack_age=params.attack_age_max,
        restrictions=restrictions,
        is_active=rep.is_active and ap < params.deactivation_probability,
        behavior_scores=scores,
    )


def observe_misbehavior(
    node: NodeState, report_row: Signals, w: Weights, params: LearningParams
) -> NodeState:
    """Reputation effect of misbehavior seen on a node that was not the validator.

    Scores, attack probability and attack age move exactly as under
    :func:`apply_penalty`; no stake is forfeited and no restriction is added.
    """
    if not _check_row(report_row):
        raise ValueError(f"node {node.id}: nothing observed")
    rep = _offended(node.reputation, report_row, w, params, restrict=False)
    return NodeState(node.id, node.stake, node.balance, rep, node.strategy)


def forfeit_stake(node: NodeState) -> NodeState:
    node = replace(node, balance=node.balance - node.stake)
    return deactivate_if_bankrupt(node)


def deactivate_if_bankrupt(node: NodeState) -> NodeState:
    if node.balance < 0 and node.reputation.is_active:
        return replace(node, reputation=replace(node.reputation, is_active=False))
    return node


def apply_penalty(
    node: NodeState, report_row: Signals, w: Weights, params: LearningParams
) -> NodeState:
    if not _check_row(report_row):
        raise ValueError(f"apply_penalty on node {node.id} with an all-zero report row")
    rep = _offended(node.reputation, report_row, w, params, restrict=True)
    return forfeit_stake(replace(node, reputation=rep))


def apply_reward(
    node: NodeState,
    w: Weights,
    params: LearningParams,
    report_row: Optional[Signals] = None,
    lift: bool = True,
) -> NodeState:
    """Pay the validator fee and move every score toward honesty.

    ``lift=False`` defers restriction removal to a later :func:`lift_restriction`.
    """
    if report_row is not None and _check_row(report_row):
        raise ValueError(f"apply_reward on node {node.id} with detected misbehavior")
    scores = update_behavior_scores(node.reputation.behavior_scores, {}, params, acted_honestly=True)
    rep = replace(node.reputation, behavior_scores=scores, attack_probability=aggregate_attack_probability(scores, w))
    node = replace(node, balance=node.balance + params.fee, reputation=rep)
    return lift_restriction(node) if lift else node


def lift_restriction(node: NodeState) -> NodeState:
    restrictions = node.reputation.restrictions
    if not restrictions:
        return node
    return replace(node, reputation=replace(node.reputation, restrictions=restrictions[1:]))


def decay_attack_age(node: NodeState) -> NodeState:
    rep = node.reputation
    if rep.last_attack_age <= 0:
        return node
    rep = ReputationTable(
        rep.attack_probability, rep.last_attack_age - 1, rep.restrictions, rep.is_active, rep.behavior_scores
    )
    return NodeState(node.id, node.stake, node.balance, rep, node.strategy)
