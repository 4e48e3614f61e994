"""Round engine and scenario runner.

A round is: generate events -> compile the detection report -> elect ->
settle the validator (penalty/reward or baseline settlement) -> update the
reputation of every other node the tracker flagged -> deactivate bankrupt
nodes -> record.
"""

from __future__ import annotations

import enum
import functools
import itertools
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np

from .core import (
    AttackKind,
    BehaviorId,
    Block,
    DetectionReport,
    NodeId,
    NodeState,
    ReputationTable,
    RoundEvents,
    StrategyDescriptor,
    Transaction,
    new_node,
)
from .detection import DetectionConfig, Weights, compile_report, ledger_deltas
from .election import (
    ElectionOutcome,
    is_threshold_excluded,
    baseline_settle,
    causes_failure,
    dpos_elect,
    elect_validator,
    pos_elect,
)
from .reputation import (
    LearningParams,
    apply_penalty,
    apply_reward,
    deactivate_if_bankrupt,
    decay_attack_age,
    lift_restriction,
    forfeit_stake,
    observe_misbehavior,
)


class Elector(enum.Enum):
    MRLPOS = "mrlpos"
    POS = "pos"
    DPOS = "dpos"


class PenaltyScope(enum.Enum):
    # only the elected validator forfeits stake
    VALIDATOR = "validator"
    # every node the tracker flags forfeits stake
    NETWORK = "network"


@dataclass(frozen=True)
class NodeGroup:
    count: int
    strategy: StrategyDescriptor = field(default_factory=StrategyDescriptor.honest)
    stake: float = 10.0
    initial_balance: float = 100.0

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if not self.stake > 0:
            raise ValueError("stake must be positive")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"count": self.count}
        if self.strategy.attack is not None:
            out["attack"] = self.strategy.attack.value
            out["persistence"] = self.strategy.persistence
        out["stake"] = self.stake
        out["initial_balance"] = self.initial_balance
        return out


@dataclass(frozen=True)
class TrafficParams:
    """Honest background traffic; every range keeps clear of the default detection thresholds."""

    tx_min: int = 1
    tx_max: int = 3
    amount_min: float = 1.0
    amount_max: float = 5.0
    fee_min: float = 0.8
    fee_max: float = 1.2
    contract_call_probability: float = 0.1
    contracts: int = 5
    message_min: int = 5
    message_max: int = 20
    error_max: int = 2
    resource_min: float = 0.1
    resource_max: float = 0.6
    hash_rate_min: float = 0.8
    hash_rate_max: float = 1.2
    join_probability: float = 0.02

    def __post_init__(self) -> None:
        pairs = [
            ("tx_min", "tx_max"), ("amount_min", "amount_max"), ("fee_min", "fee_max"),
            ("message_min", "message_max"), ("resource_min", "resource_max"),
            ("hash_rate_min", "hash_rate_max"),
        ]
        for lo, hi in pairs:
            if getattr(self, lo) < 0 or getattr(self, lo) > getattr(self, hi):
                raise ValueError(f"traffic.{lo}/{hi} must satisfy 0 <= {lo} <= {hi}")
        for name in ("contract_call_probability", "join_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"traffic.{name} must be in [0, 1]")
        if self.resource_max > 1:
            raise ValueError("traffic.resource_max must be <= 1")
        if self.contracts < 1 or self.error_max < 0:
            raise ValueError("traffic.contracts must be >= 1 and traffic.error_max >= 0")


@dataclass(frozen=True)
class AttackParams:
    """Magnitudes of each archetype's signature events."""

    fork_blocks: int = 20
    hash_rate: float = 25.0
    double_spend_fraction: float = 0.8
    sybil_joins: int = 6
    vote_inflation: float = 5.0
    spam_messages: int = 80
    replay_fee: float = 50.0
    large_transfer: float = 500.0
    contract_burst: int = 20
    burst_amount: float = 0.1
    ddos_errors: int = 30
    ddos_resource: float = 0.99

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"attacks.{name} must be >= 0")
        if not 0 < self.double_spend_fraction <= 1 or self.ddos_resource > 1:
            raise ValueError("attacks.double_spend_fraction and attacks.ddos_resource must be in (0, 1]")


@dataclass(frozen=True)
class Scenario:
    seed: int
    rounds: int
    nodes: tuple[NodeGroup, ...]
    elector: Elector = Elector.MRLPOS
    delegate_count: int = 5
    penalty_scope: PenaltyScope = PenaltyScope.VALIDATOR
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    weights: Weights = field(default_factory=Weights)
    learning: LearningParams = field(default_factory=LearningParams)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    attacks: AttackParams = field(default_factory=AttackParams)
    name: str = "scenario"

    def __post_init__(self) -> None:
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if sum(g.count for g in self.nodes) < 1:
            raise ValueError("scenario needs at least one node")
        if self.delegate_count < 1:
            raise ValueError("delegate_count must be >= 1")

    @property
    def node_count(self) -> int:
        return sum(g.count for g in self.nodes)

    def to_dict(self) -> dict[str, Any]:
        """Plain mapping in the scenario-file layout; loading it back gives an equal Scenario."""
        return {
            "name": self.name,
            "seed": self.seed,
            "rounds": self.rounds,
            "elector": self.elector.value,
            "delegate_count": self.delegate_count,
            "penalty_scope": self.penalty_scope.value,
            "nodes": [g.to_dict() for g in self.nodes],
            "detection": asdict(self.detection),
            "weights": self.weights.to_dict(),
            "learning": asdict(self.learning),
            "traffic": asdict(self.traffic),
            "attacks": asdict(self.attacks),
        }


class NodeSnapshot(NamedTuple):
    """Per-node state at the end of a round."""

    node: NodeId
    attack_probability: float
    last_attack_age: int
    restrictions: int
    balance: float
    is_active: bool

    @classmethod
    def of(cls, n: NodeState) -> "NodeSnapshot":
        rep = n.reputation
        return tuple.__new__(
            cls, (n.id, rep.attack_probability, rep.last_attack_age, len(rep.restrictions), n.balance, rep.is_active)
        )


@dataclass(frozen=True)
class RoundRecord:
    round: int
    elected: Optional[NodeId]
    elected_was_malicious: bool
    behaviors_detected: tuple[tuple[NodeId, BehaviorId], ...]
    penalty_applied: bool
    reward_applied: bool
    fee_paid: float
    forfeitures: tuple[tuple[NodeId, float], ...]
    excluded: int
    snapshots: tuple[NodeSnapshot, ...]

    @property
    def skipped(self) -> bool:
        return self.elected is None


@dataclass(frozen=True)
class Summary:
    rounds_run: int
    halted_early: bool
    malicious_total: int
    honest_total: int
    final_active_malicious: int
    final_active_honest: int
    rounds_to_elimination: Optional[int]
    penalties: int
    rewards: int
    skipped_rounds: int

    @property
    def eliminated_malicious(self) -> int:
        return self.malicious_total - self.final_active_malicious

    @property
    def eliminated_honest(self) -> int:
        return self.honest_total - self.final_active_honest

    def to_dict(self) -> dict[str, Any]:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["eliminated_malicious"] = self.eliminated_malicious
        d["eliminated_honest"] = self.eliminated_honest
        return d


@dataclass(frozen=True)
class SimulationResult:
    scenario: Scenario
    records: tuple[RoundRecord, ...]
    summary: Summary
    malicious: frozenset[NodeId]
    final_nodes: tuple[NodeState, ...]


@dataclass
class World:
    """Mutable engine state carried between rounds."""

    nodes: list[NodeState]
    history: list[RoundEvents] = field(default_factory=list)
    prev_validator: Optional[NodeId] = None
    height: int = 0
    events_rng: np.random.Generator = field(default_factory=np.random.default_rng)
    election_rng: random.Random = field(default_factory=random.Random)

    def node(self, node_id: NodeId) -> NodeState:
        return self.nodes[node_id]


_EVENTS_STREAM = 0x6576

# generated amounts and fees are non-negative by construction, so bulk
# construction skips the validating constructor
_tx = functools.partial(tuple.__new__, Transaction)


def build_world(scenario: Scenario) -> World:
    """Expand node groups, shuffle the population with the seed, assign ids 0..N-1."""
    specs = [g for g in scenario.nodes for _ in range(g.count)]
    random.Random(f"{scenario.seed}:world").shuffle(specs)
    nodes = [new_node(i, g.stake, g.strategy, g.initial_balance) for i, g in enumerate(specs)]
    return World(
        nodes=nodes,
        events_rng=np.random.default_rng([scenario.seed % 2**64, _EVENTS_STREAM]),
        election_rng=random.Random(f"{scenario.seed}:election"),
    )


def _fee_history(history: Sequence[RoundEvents], window: int) -> tuple[tuple[int, float], ...]:
    out = []
    for ev in list(history)[-window:]:
        mean = ev.mean_confirmed_fee
        if mean is not None:
            out.append((ev.round, mean))
    return tuple(out)


def generate_events(
    world: Sequence[NodeState],
    round: int,
    rng: np.random.Generator,
    scenario: Scenario,
    history: Sequence[RoundEvents] = (),
    prev_validator: Optional[NodeId] = None,
    height: int = 0,
) -> RoundEvents:
    tr, atk = scenario.traffic, scenario.attacks
    active = [n for n in world if n.is_active]
    ids = [n.id for n in active]
    k = len(ids)

    # background traffic, drawn in bulk
    acts = rng.random(k).tolist()
    messages = dict(zip(ids, rng.integers(tr.message_min, tr.message_max + 1, k).tolist()))
    errors = dict(zip(ids, rng.integers(0, tr.error_max + 1, k).tolist()))
    resource = dict(zip(ids, rng.uniform(tr.resource_min, tr.resource_max, k).tolist()))
    hash_rate = dict(zip(ids, rng.uniform(tr.hash_rate_min, tr.hash_rate_max, k).tolist()))
    n_txs = rng.integers(tr.tx_min, tr.tx_max + 1, k)
    total = int(n_txs.sum())
    contract_hit = (rng.random(total) < tr.contract_call_probability).tolist()
    contract_no = rng.integers(0, tr.contracts, total).tolist()
    # receiver offset in 1..k-1 never lands on the sender
    offsets = rng.integers(1, max(k, 2), total)
    amounts = rng.uniform(tr.amount_min, tr.amount_max, total).tolist()
    fees = rng.uniform(tr.fee_min, tr.fee_max, total).tolist()
    join_hit = (rng.random(k) < tr.join_probability).tolist()
    join_addr = rng.integers(0, 256, (k, 3)).tolist()
    # receiver offsets for attack transactions
    atk_off = rng.integers(1, max(k, 2), (k, 2)).tolist()

    def receiver(pos: int, off: int) -> NodeId:
        return ids[(pos + off) % k] if k > 1 else ids[pos]

    stakes = {n.id: n.stake for n in active}
    balances = {n.id: n.balance for n in active}
    votes = dict(stakes)

    ids_arr = np.array(ids, dtype=np.int64)
    sender_pos = np.repeat(np.arange(k), n_txs)
    starts = np.repeat(np.cumsum(n_txs) - n_txs, n_txs)
    seq = (np.arange(total) - starts).tolist()
    senders = ids_arr[sender_pos].tolist()
    receivers = (ids_arr[(sender_pos + offsets) % k] if k > 1 else ids_arr[sender_pos]).tolist()
    prefix = f"r{round}n"
    txs: list[Transaction] = [
        _tx((f"{prefix}{s}t{j}", s, r, amt, fee, round, f"c{c}" if hit else None))
        for s, j, r, amt, fee, hit, c in zip(senders, seq, receivers, amounts, fees, contract_hit, contract_no)
    ]
    joins: list[tuple[NodeId, str]] = [
        (ids[p], f"172.{a}.{b}.{c % 254 + 1}")
        for p, (a, b, c) in enumerate(join_addr) if join_hit[p]
    ]

    acting: dict[NodeId, AttackKind] = {}
    acting_pos: list[int] = []
    for pos, n in enumerate(active):
        if n.strategy.attack is not None and acts[pos] < n.strategy.persistence:
            acting[n.id] = n.strategy.attack
            acting_pos.append(pos)

    # txs each replaying node originated in the previous round (replays are not re-replayed)
    last_own: dict[NodeId, list[Transaction]] = {}
    if history:
        prev = history[-1]
        for i, kind in acting.items():
            if kind is AttackKind.REPLAY:
                prefix = f"r{prev.round}n{i}t"
                # pooled txs never carry this prefix
                last_own[i] = [t for t in prev.txs_by_sender.get(i, ()) if t.tx_id.startswith(prefix)]

    pool: list[Block] = []
    lie: dict[NodeId, float] = {}
    for pos in acting_pos:
        n = active[pos]
        i = n.id
        kind = acting[i]
        if kind is AttackKind.FIFTY_ONE_PERCENT:
            hash_rate[i] = atk.hash_rate
        elif kind is AttackKind.DOUBLE_SPEND:
            amount = atk.double_spend_fraction * max(n.balance, 1.0)
            for off in atk_off[pos]:
                dup = Transaction(f"r{round}n{i}ds", i, receiver(pos, off), amount, tr.fee_min, round)
                pool.append(Block(height + 1, i, (dup,), height, False))
            lie[i] = amount
        elif kind is AttackKind.SYBIL:
            base = f"10.{i // 256}.{i % 256}"
            joins.extend((i, f"{base}.{m + 1}") for m in range(atk.sybil_joins))
            votes[i] = n.stake * atk.vote_inflation
            messages[i] = atk.spam_messages
        elif kind is AttackKind.REPLAY:
            txs += [t._replace(timestamp=round, fee=atk.replay_fee) for t in last_own.get(i, ())]
        elif kind is AttackKind.CONTRACT_EXPLOIT:
            big_to, burst_to = (receiver(pos, off) for off in atk_off[pos])
            txs.append(Transaction(f"r{round}n{i}big", i, big_to, atk.large_transfer, tr.fee_min, round))
            tail = (i, burst_to, atk.burst_amount, tr.fee_min, round, f"x{i}")
            prefix = f"r{round}n{i}x"
            n_burst = atk.contract_burst
            burst_ids = [prefix + str(m) for m in range(n_burst)]
            txs += map(_tx, zip(burst_ids, *(itertools.repeat(v, n_burst) for v in tail)))
        elif kind is AttackKind.DDOS:
            errors[i] = atk.ddos_errors
            resource[i] = atk.ddos_resource

    blocks: list[Block] = []
    proposer = prev_validator if prev_validator in set(ids) else None
    if proposer is not None:
        block_txs = list(txs)
        ptype = acting.get(proposer)
        if ptype is AttackKind.REPLAY and last_own.get(proposer):
            # re-confirm one of its own txs with altered content
            t = last_own[proposer][0]
            forged = t.replace(amount=t.amount * 2 + 1, timestamp=round)
            block_txs.append(forged)
            txs.append(forged)
        blocks.append(Block(height + 1, proposer, tuple(block_txs), height, True))
        if ptype is AttackKind.FIFTY_ONE_PERCENT:
            blocks.extend(Block(height + 1, proposer, (), height, False) for _ in range(atk.fork_blocks))

    deltas = ledger_deltas(txs)
    reported = {i: balances[i] + deltas.get(i, 0.0) + lie.get(i, 0.0) for i in ids}

    events = RoundEvents(
        round=round,
        nodes=tuple(ids),
        proposed_blocks=tuple(blocks),
        unconfirmed_pool=tuple(pool),
        confirmed_txs=tuple(txs),
        votes=votes,
        stakes=stakes,
        joins=tuple(joins),
        per_node_message_count=messages,
        per_node_error_count=errors,
        per_node_resource_use=resource,
        per_node_hash_rate=hash_rate,
        balances=balances,
        reported_balances=reported,
        fork_count=sum(1 for b in blocks if not b.confirmed),
        fee_history=_fee_history(history, scenario.detection.window),
    )
    # seed the cached property with the replay already done above
    events.__dict__["confirmed_deltas"] = deltas
    return events


def _elect(world: World, scenario: Scenario, round: int) -> ElectionOutcome:
    if scenario.elector is Elector.MRLPOS:
        outcome, world.nodes = elect_validator(world.nodes, scenario.learning, world.election_rng)
        return outcome
    if scenario.elector is Elector.POS:
        return pos_elect(world.nodes, world.election_rng)
    return dpos_elect(world.nodes, scenario.delegate_count, round, world.election_rng)


def settle_round(
    nodes: list[NodeState],
    outcome: ElectionOutcome,
    report: DetectionReport,
    scenario: Scenario,
) -> tuple[bool, bool]:
    """Apply penalty/reward and tracker updates in place; returns (penalty, reward)."""
    w, lp = scenario.weights, scenario.learning
    penalty = reward = False
    active_at_start = {n.id for n in nodes if n.is_active}

    if outcome.elected is not None:
        v = outcome.elected
        row = report.row(v)
        if scenario.elector is Elector.MRLPOS:
            if report.flagged(v):
                nodes[v] = apply_penalty(nodes[v], row, w, lp)
                penalty = True
            else:
                nodes[v] = apply_reward(nodes[v], w, lp, row)
                reward = True
        else:
            failed = causes_failure(row)
            nodes[v] = baseline_settle(nodes[v], failed, lp)
            penalty, reward = failed, not failed

    if scenario.elector is Elector.MRLPOS:
        for i in sorted(active_at_start & report.signals.keys()):
            if i == outcome.elected:
                continue
            nodes[i] = observe_misbehavior(nodes[i], report.signals[i], w, lp)
            if scenario.penalty_scope is PenaltyScope.NETWORK:
                nodes[i] = forfeit_stake(nodes[i])

    for i, n in enumerate(nodes):
        if n.balance < 0 and n.is_active:
            nodes[i] = deactivate_if_bankrupt(n)
    return penalty, reward


def run_round(world: World, round: int, scenario: Scenario) -> Optional[RoundRecord]:
    """Advance ``world`` by one round; None when no active node is left."""
    if not any(n.is_active for n in world.nodes):
        return None
    events = generate_events(
        world.nodes, round, world.events_rng, scenario,
        world.history, world.prev_validator, world.height,
    )
    report = compile_report(events, world.history, scenario.detection)
    before = {n.id: n.balance for n in world.nodes}

    outcome = _elect(world, scenario, round)
    penalty, reward = settle_round(world.nodes, outcome, report, scenario)

    if any(b.confirmed for b in events.proposed_blocks):
        world.height += 1
    world.history.append(events)
    del world.history[: -scenario.detection.window]
    world.prev_validator = outcome.elected

    forfeits = []
    fee_paid = 0.0
    for n in world.nodes:
        d = n.balance - before[n.id]
        if d < 0:
            forfeits.append((n.id, -d))
        elif d > 0:
            fee_paid += d
    elected = outcome.elected
    return RoundRecord(
        round=round,
        elected=elected,
        elected_was_malicious=elected is not None and world.nodes[elected].is_malicious,
        behaviors_detected=tuple(report.detected()),
        penalty_applied=penalty,
        reward_applied=reward,
        fee_paid=fee_paid,
        forfeitures=tuple(forfeits),
        excluded=sum(1 for _, why in outcome.excluded if why == "threshold"),
        snapshots=tuple(map(NodeSnapshot.of, world.nodes)),
    )


def summarize(scenario: Scenario, records: Sequence[RoundRecord], malicious: frozenset[NodeId]) -> Summary:
    n = scenario.node_count
    honest = n - len(malicious)
    if records:
        last = records[-1].snapshots
        act_mal = sum(1 for s in last if s.is_active and s.node in malicious)
        act_hon = sum(1 for s in last if s.is_active and s.node not in malicious)
    else:
        act_mal, act_hon = len(malicious), honest

    rte: Optional[int] = 0 if not malicious else None
    if malicious:
        for rec in records:
            if not any(s.is_active for s in rec.snapshots if s.node in malicious):
                rte = rec.round + 1
                break
    return Summary(
        rounds_run=len(records),
        halted_early=len(records) < scenario.rounds,
        malicious_total=len(malicious),
        honest_total=honest,
        final_active_malicious=act_mal,
        final_active_honest=act_hon,
        rounds_to_elimination=rte,
        penalties=sum(r.penalty_applied for r in records),
        rewards=sum(r.reward_applied for r in records),
        skipped_rounds=sum(r.skipped for r in records),
    )


def run_simulation(scenario: Scenario) -> SimulationResult:
    world = build_world(scenario)
    malicious = frozenset(n.id for n in world.nodes if n.is_malicious)
    records: list[RoundRecord] = []
    for r in range(scenario.rounds):
        rec = run_round(world, r, scenario)
        if rec is None:
            break
        records.append(rec)
    return SimulationResult(
        scenario=scenario,
        records=tuple(records),
        summary=summarize(scenario, records, malicious),
        malicious=malicious,
        final_nodes=tuple(world.nodes),
    )


def run_comparison(scenario: Scenario) -> dict[Elector, SimulationResult]:
    return {e: run_simulation(replace(scenario, elector=e)) for e in Elector}


def active_malicious_series(result: SimulationResult) -> list[int]:
    return [
        sum(1 for s in rec.snapshots if s.is_active and s.node in result.malicious)
        for rec in result.records
    ]


# ---------------------------------------------------------------------------
# learning-stage trace


@dataclass(frozen=True)
class TraceStep:
    """One scripted round for the trace subject.

    ``behaviors`` empty means the subject acts honestly this round.
    """

    elected: bool = False
    behaviors: tuple[BehaviorId, ...] = ()

    @property
    def malicious(self) -> bool:
        return bool(self.behaviors)


@dataclass(frozen=True)
class TraceScript:
    steps: tuple[TraceStep, ...]
    stake: float = 10.0
    initial_balance: float = 100.0
    learning: LearningParams = field(default_factory=LearningParams)
    weights: Weights = field(default_factory=Weights)
    name: str = "trace"

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("trace script needs at least one round")
        if not self.stake > 0:
            raise ValueError("subject.stake must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "subject": {"stake": self.stake, "initial_balance": self.initial_balance},
            "learning": asdict(self.learning),
            "weights": self.weights.to_dict(),
            "rounds": [
                {"elected": st.elected, "behaviors": [b.key for b in st.behaviors]} for st in self.steps
            ],
        }


@dataclass(frozen=True)
class TraceRow:
    round: int
    attack_probability: float
    last_attack_age: int
    restrictions: int
    balance: float
    is_active: bool
    reputation: ReputationTable


def run_learning_trace(script: TraceScript) -> list[TraceRow]:
    """Replay per-round forced outcomes for a single subject node.

    Every round the subject takes part in the election, so its attack age
    decays first.  An elected offender is penalized at once.  An honest
    validation is credited when the block is confirmed one round later
    (fee and score update), and the oldest restriction is lifted the round
    after that.  Misbehavior seen while not elected updates the scores only.
    """
    lp, w = script.learning, script.weights
    node = new_node(0, script.stake, StrategyDescriptor.honest(), script.initial_balance)
    credit_due: Optional[int] = None
    lift_due: Optional[int] = None
    rows: list[TraceRow] = []
    for r, step in enumerate(script.steps):
        if not node.is_active:
            raise ValueError(f"round {r}: subject is inactive and cannot participate")
        if step.elected and is_threshold_excluded(node, lp):
            raise ValueError(f"round {r}: subject is excluded by the threshold and cannot be elected")
        node = decay_attack_age(node)

        if lift_due == r:
            node = lift_restriction(node)
            lift_due = None
        if credit_due == r:
            node = apply_reward(node, w, lp, lift=False)
            credit_due, lift_due = None, r + 1

        if step.malicious:
            row = {b: 1.0 for b in step.behaviors}
            if step.elected:
                node = apply_penalty(node, row, w, lp)
            else:
                node = observe_misbehavior(node, row, w, lp)
        elif step.elected:
            credit_due = r + 1

        rep = node.reputation
        rows.append(TraceRow(
            r, rep.attack_probability, rep.last_attack_age, len(rep.restrictions),
            node.balance, rep.is_active, rep,
        ))
    return rows
