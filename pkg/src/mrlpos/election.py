"""Validator selection: reputation-aware election plus PoS and DPoS baselines."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

from .core import AttackKind, NodeId, NodeState, Signals, behavior_attack_kind
from .reputation import LearningParams, decay_attack_age, deactivate_if_bankrupt

# behaviors of these families make the produced block invalid
FAILURE_FAMILIES = frozenset({AttackKind.DOUBLE_SPEND, AttackKind.REPLAY})


@dataclass(frozen=True)
class ElectionOutcome:
    """Result of one election; ``elected`` is None when every candidate was excluded."""

    elected: Optional[NodeId]
    eligible: tuple[NodeId, ...] = ()
    excluded: tuple[tuple[NodeId, str], ...] = ()
    scores: dict[NodeId, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.elected is not None and self.elected not in self.eligible:
            raise ValueError("elected node must be eligible")
        if set(self.eligible) & {n for n, _ in self.excluded}:
            raise ValueError("eligible and excluded overlap")

    @property
    def skipped(self) -> bool:
        return self.elected is None

    def to_dict(self) -> dict[str, Any]:
        return {
            "elected": self.elected,
            "eligible": list(self.eligible),
            "excluded": [[n, why] for n, why in self.excluded],
            "scores": {str(k): v for k, v in self.scores.items()},
        }


def agent_score(node: NodeState) -> float:
    rep = node.reputation
    return -1 * rep.attack_probability * rep.last_attack_age * node.stake


def is_threshold_excluded(node: NodeState, params: LearningParams) -> bool:
    rep = node.reputation
    return rep.attack_probability * rep.last_attack_age >= params.threshold


def elect_validator(
    candidates: Sequence[NodeState], params: LearningParams, rng: random.Random
) -> tuple[ElectionOutcome, list[NodeState]]:
    """Reputation-aware election.

    Candidates are ranked by agent score, then stake, then a uniform random
    draw.  Every active participant's attack age is decayed, excluded or not.
    """
    if not candidates:
        raise ValueError("election needs at least one candidate")

    eligible: list[NodeState] = []
    excluded: list[tuple[NodeId, str]] = []
    scores: dict[NodeId, float] = {}
    updated: list[NodeState] = []
    threshold = params.threshold
    for n in candidates:
        rep = n.reputation
        if not rep.is_active:
            excluded.append((n.id, "inactive"))
            updated.append(n)
            continue
        # inlined is_threshold_excluded / agent_score; this loop runs for every node every round
        if rep.attack_probability * rep.last_attack_age >= threshold:
            excluded.append((n.id, "threshold"))
        else:
            scores[n.id] = -1 * rep.attack_probability * rep.last_attack_age * n.stake
            eligible.append(n)
        updated.append(decay_attack_age(n) if rep.last_attack_age > 0 else n)

    if not eligible:
        return ElectionOutcome(None, (), tuple(excluded), scores), updated

    best = max(scores[n.id] for n in eligible)
    top = [n for n in eligible if scores[n.id] == best]
    top_stake = max(n.stake for n in top)
    tied = [n for n in top if n.stake == top_stake]
    winner = tied[0] if len(tied) == 1 else rng.choice(tied)
    outcome = ElectionOutcome(winner.id, tuple(n.id for n in eligible), tuple(excluded), scores)
    return outcome, updated


def _split_active(candidates: Sequence[NodeState]) -> tuple[list[NodeState], list[tuple[NodeId, str]]]:
    active = [n for n in candidates if n.is_active]
    inactive = [(n.id, "inactive") for n in candidates if not n.is_active]
    if not active:
        raise ValueError("no active candidate")
    return active, inactive


def pos_elect(candidates: Sequence[NodeState], rng: random.Random) -> ElectionOutcome:
    """Stake-proportional lottery over the active candidates."""
    active, inactive = _split_active(candidates)
    winner = rng.choices(active, weights=[n.stake for n in active], k=1)[0]
    return ElectionOutcome(winner.id, tuple(n.id for n in active), tuple(inactive))


def delegate_set(candidates: Sequence[NodeState], delegate_count: int) -> list[NodeState]:
    active = [n for n in candidates if n.is_active]
    # stake ties resolve by node id so the set is stable between rounds
    ranked = sorted(active, key=lambda n: (-n.stake, n.id))
    return ranked[:delegate_count]


def dpos_elect(
    candidates: Sequence[NodeState],
    delegate_count: int,
    round: int,
    rng: Optional[random.Random] = None,
) -> ElectionOutcome:
    """Top-``delegate_count`` active nodes by stake produce in round-robin order."""
    if delegate_count < 1:
        raise ValueError("delegate_count must be >= 1")
    active, inactive = _split_active(candidates)
    delegates = delegate_set(active, delegate_count)
    producer = delegates[round % len(delegates)]
    return ElectionOutcome(producer.id, tuple(n.id for n in delegates), tuple(inactive))


def causes_failure(report_row: Signals) -> bool:
    return any(v > 0 and behavior_attack_kind(b) in FAILURE_FAMILIES for b, v in report_row.items())


def baseline_settle(elected: NodeState, caused_failure: bool, params: LearningParams) -> NodeState:
    if caused_failure:
        elected = replace(elected, balance=elected.balance - elected.stake)
    else:
        elected = replace(elected, balance=elected.balance + params.fee)
    return deactivate_if_bankrupt(elected)
