"""Activity tracker: per-round detectors for the six attack families.

Every detector is a pure function of ``(events, history, cfg)`` and returns a
sparse mapping ``node -> {behavior: signal}`` holding only the nonzero signals
of its own family; anything absent is 0.  Signals are binary (1.0 when the
criterion trips) even though reports accept anything in [0, 1].
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, fields
from operator import itemgetter
from typing import Iterable, Mapping, Sequence

from .core import (
    BEHAVIORS,
    N_BEHAVIORS,
    BehaviorId,
    BehaviorScores,
    DetectionReport,
    NodeId,
    RoundEvents,
    Signals,
    Transaction,
    ledger_deltas,
)

B = BehaviorId
FamilySignals = dict[NodeId, dict[BehaviorId, float]]

_tx_id, _amount, _contract_ref = itemgetter(0), itemgetter(3), itemgetter(6)

# relative tolerance for ledger replay comparisons (b6) and vote claims (b8)
_REL_TOL = 1e-9


@dataclass(frozen=True)
class DetectionConfig:
    block_share_threshold: float = 0.5
    hash_rate_factor: float = 2.0
    fork_rate_threshold: int = 3
    window: int = 10
    join_spike_threshold: int = 5
    address_prefix_octets: int = 3
    spam_message_threshold: int = 50
    fee_spike_factor: float = 3.0
    large_transfer_factor: float = 10.0
    contract_activity_threshold: int = 20
    error_threshold: int = 10
    resource_threshold: float = 0.9

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise ValueError(f"detection.{f.name} must be positive, got {v}")
        for name in ("hash_rate_factor", "fee_spike_factor", "large_transfer_factor"):
            if not getattr(self, name) > 1:
                raise ValueError(f"detection.{name} must be > 1")
        for name in ("block_share_threshold", "resource_threshold"):
            if getattr(self, name) > 1:
                raise ValueError(f"detection.{name} must be in (0, 1]")
        if not 1 <= self.address_prefix_octets <= 4:
            raise ValueError("detection.address_prefix_octets must be in 1..4")


@dataclass(frozen=True)
class Weights:
    """Non-negative per-behavior weights, normalized to sum to 1."""

    values: tuple[float, ...] = (1.0 / N_BEHAVIORS,) * N_BEHAVIORS

    def __post_init__(self) -> None:
        if len(self.values) != N_BEHAVIORS:
            raise ValueError(f"expected {N_BEHAVIORS} weights")
        if any(v < 0 for v in self.values):
            raise ValueError("weights must be non-negative")
        total = sum(self.values)
        if not total > 0:
            raise ValueError("weights must not all be zero")
        object.__setattr__(self, "values", tuple(v / total for v in self.values))

    def __getitem__(self, b: BehaviorId) -> float:
        return self.values[BehaviorId(b).index]

    @classmethod
    def uniform(cls) -> "Weights":
        return cls()

    @classmethod
    def from_mapping(cls, data: Mapping[str, float]) -> "Weights":
        """Build from ``{"b1": w1, ...}``; omitted behaviors get weight 0."""
        raw = [0.0] * N_BEHAVIORS
        for k, v in data.items():
            raw[BehaviorId.parse(k).index] = float(v)
        return cls(tuple(raw))

    def to_dict(self) -> dict[str, float]:
        return {b.key: self.values[b.index] for b in BEHAVIORS}


def aggregate_attack_probability(scores: BehaviorScores, w: Weights) -> float:
    total = sum([wi * s for wi, s in zip(w.values, scores.values) if s > 0])
    return min(max(total, 0.0), 1.0)


def _flag(out: FamilySignals, events: RoundEvents, node: NodeId, b: BehaviorId) -> None:
    if node in events.node_set:
        out.setdefault(node, {})[b] = 1.0


def _window(events: RoundEvents, history: Sequence[RoundEvents], cfg: DetectionConfig) -> list[RoundEvents]:
    past = list(history)[-(cfg.window - 1):] if cfg.window > 1 else []
    return past + [events]


def detect_fifty_one(
    events: RoundEvents, history: Sequence[RoundEvents], cfg: DetectionConfig
) -> FamilySignals:
    out: FamilySignals = {}
    window = _window(events, history, cfg)

    produced: Counter[NodeId] = Counter()
    forks: Counter[NodeId] = Counter()
    for ev in window:
        for blk in ev.proposed_blocks:
            produced[blk.proposer] += 1
            if not blk.confirmed:
                forks[blk.proposer] += 1
    total = sum(produced.values())
    if total:
        # a short history must not turn one honest block into a "majority"
        slots = max(total, cfg.window)
        for node, k in produced.items():
            if k / slots > cfg.block_share_threshold:
                _flag(out, events, node, B.B1)
    for node, k in forks.items():
        if k >= cfg.fork_rate_threshold:
            _flag(out, events, node, B.B3)

    rates = events.per_node_hash_rate
    if rates:
        mean = sum(rates.values()) / len(rates)
        for node, h in rates.items():
            if h > cfg.hash_rate_factor * mean:
                _flag(out, events, node, B.B2)
    return out


def implied_balance(events: RoundEvents, node: NodeId) -> float:
    """Start-of-round balance replayed through the round's confirmed transactions."""
    return events.balances[node] + events.confirmed_deltas.get(node, 0.0)


def detect_double_spend(events: RoundEvents, cfg: DetectionConfig) -> FamilySignals:
    out: FamilySignals = {}

    blocks_with: dict[str, set[int]] = defaultdict(set)
    sender_of: dict[str, NodeId] = {}
    for i, blk in enumerate(events.unconfirmed_pool):
        for t in blk.transactions:
            blocks_with[t.tx_id].add(i)
            sender_of[t.tx_id] = t.sender
    for tx_id, where in blocks_with.items():
        if len(where) >= 2:
            _flag(out, events, sender_of[tx_id], B.B4)

    for node, (count, amount_sum, _, _) in events.sender_totals.items():
        balance = events.balances.get(node)
        # a same-amount group can only overspend if everything together does
        if balance is None or count < 2 or amount_sum <= balance:
            continue
        by_amount: dict[float, list[Transaction]] = defaultdict(list)
        for t in events.txs_by_sender[node]:
            by_amount[t.amount].append(t)
        for amount, group in by_amount.items():
            if len(group) >= 2 and amount * len(group) > balance:
                _flag(out, events, node, B.B5)
                break

    deltas = events.confirmed_deltas
    for node, reported in events.reported_balances.items():
        if node not in events.balances:
            continue
        implied = events.balances[node] + deltas.get(node, 0.0)
        if reported != implied and abs(reported - implied) > _REL_TOL * max(1.0, abs(implied)):
            _flag(out, events, node, B.B6)
    return out


def address_prefix(address: str, octets: int) -> str:
    return ".".join(address.split(".")[:octets])


def detect_sybil(events: RoundEvents, cfg: DetectionConfig) -> FamilySignals:
    out: FamilySignals = {}

    if len(events.joins) >= cfg.join_spike_threshold:
        groups: dict[str, list[NodeId]] = defaultdict(list)
        for node, addr in events.joins:
            groups[address_prefix(addr, cfg.address_prefix_octets)].append(node)
        for members in groups.values():
            if len(members) >= 2:
                for node in members:
                    _flag(out, events, node, B.B7)

    for node, claim in events.votes.items():
        entitled = events.stakes.get(node)
        if entitled is not None and claim > entitled * (1 + _REL_TOL):
            _flag(out, events, node, B.B8)

    for node, count in events.per_node_message_count.items():
        if count >= cfg.spam_message_threshold:
            _flag(out, events, node, B.B9)
    return out


def _conflicts(t: Transaction, past: Sequence[RoundEvents]) -> bool:
    for ev in past:
        old = ev.confirmed_index.get(t.tx_id)
        if old is not None:
            return (old.sender, old.receiver, old.amount) != (t.sender, t.receiver, t.amount)
    return False


def detect_replay(
    events: RoundEvents, history: Sequence[RoundEvents], cfg: DetectionConfig
) -> FamilySignals:
    out: FamilySignals = {}
    past = [ev for ev in list(history)[-cfg.window:] if ev.confirmed_txs]

    if past:
        current = set(map(_tx_id, events.confirmed_txs))
        current.update(map(_tx_id, events.pool_txs))
        known: set[str] = set()
        for ev in past:
            known |= current & ev.confirmed_index.keys()
        if known:
            for t in itertools.chain(events.confirmed_txs, events.pool_txs):
                if t.tx_id not in known:
                    continue
                for ev in past:
                    if t.tx_id in ev.confirmed_index:
                        if not ev.confirmed_at(t.tx_id, t.timestamp):
                            _flag(out, events, t.sender, B.B10)
                            break
            for blk in events.proposed_blocks:
                if not blk.confirmed or out.get(blk.proposer, {}).get(B.B11):
                    continue
                for t in blk.transactions:
                    if t.tx_id in known and _conflicts(t, past):
                        _flag(out, events, blk.proposer, B.B11)
                        break

    fees = [f for _, f in events.fee_history[-cfg.window:]]
    if fees:
        trailing = sum(fees) / len(fees)
        limit = cfg.fee_spike_factor * trailing
        for node, (count, _, fee_sum, _) in events.sender_totals.items():
            if fee_sum / count > limit:
                _flag(out, events, node, B.B12)
    return out


def detect_contract(events: RoundEvents, cfg: DetectionConfig) -> FamilySignals:
    out: FamilySignals = {}
    by_sender = events.txs_by_sender

    if events.confirmed_txs:
        mean_amount = sum(map(_amount, events.confirmed_txs)) / len(events.confirmed_txs)
        limit = cfg.large_transfer_factor * mean_amount
        for node, (_, _, _, largest) in events.sender_totals.items():
            if largest > limit:
                _flag(out, events, node, B.B13)

    for node, txs in by_sender.items():
        if len(txs) < cfg.contract_activity_threshold:
            continue
        per_contract = Counter(map(_contract_ref, txs))
        per_contract.pop(None, None)
        if per_contract and max(per_contract.values()) >= cfg.contract_activity_threshold:
            _flag(out, events, node, B.B14)
    return out


def detect_ddos(events: RoundEvents, cfg: DetectionConfig) -> FamilySignals:
    out: FamilySignals = {}
    for node, errors in events.per_node_error_count.items():
        if errors >= cfg.error_threshold:
            _flag(out, events, node, B.B15)
    for node, use in events.per_node_resource_use.items():
        if use >= cfg.resource_threshold:
            _flag(out, events, node, B.B16)
    return out


def merge_signals(nodes: Iterable[NodeId], parts: Iterable[FamilySignals]) -> DetectionReport:
    signals: dict[NodeId, Signals] = {}
    for part in parts:
        for node, row in part.items():
            signals.setdefault(node, {}).update(row)
    return DetectionReport(tuple(nodes), signals)


def compile_report(
    events: RoundEvents,
    history: Sequence[RoundEvents] = (),
    cfg: DetectionConfig | None = None,
) -> DetectionReport:
    cfg = cfg or DetectionConfig()
    return merge_signals(
        events.nodes,
        (
            detect_fifty_one(events, history, cfg),
            detect_double_spend(events, cfg),
            detect_sybil(events, cfg),
            detect_replay(events, history, cfg),
            detect_contract(events, cfg),
            detect_ddos(events, cfg),
        ),
    )
