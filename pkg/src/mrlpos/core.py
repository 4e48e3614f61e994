"""Domain types shared across the simulator.

Everything here is a frozen value; reputation and simulation code produce new
values with :func:`dataclasses.replace` instead of mutating in place.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from collections import defaultdict
from functools import cached_property
from operator import itemgetter
from typing import Any, NamedTuple, Optional

NodeId = int

DEFAULT_INITIAL_BALANCE = 100.0


class BehaviorId(enum.IntEnum):
    """The sixteen observable malicious behaviors, ``b1`` .. ``b16``."""

    B1 = 1   # one node generates a majority of new blocks
    B2 = 2   # hash rate far above the network average
    B3 = 3   # frequent forks / reorganisations
    B4 = 4   # same tx id in several unconfirmed blocks
    B5 = 5   # the same funds spent twice
    B6 = 6   # balance discrepancy against the ledger
    B7 = 7   # burst of joins from similar addresses
    B8 = 8   # manipulated vote weight
    B9 = 9   # spam / flooding
    B10 = 10  # confirmed tx reappearing with a new timestamp
    B11 = 11  # conflicting transaction confirmations
    B12 = 12  # unexplained fee spike
    B13 = 13  # large unexplained fund movement
    B14 = 14  # abnormal activity on one contract
    B15 = 15  # frequent network errors
    B16 = 16  # resource depletion

    @property
    def key(self) -> str:
        return f"b{self.value}"

    @classmethod
    def parse(cls, text: str) -> "BehaviorId":
        text = text.strip().lower()
        if not text.startswith("b") or not text[1:].isdigit():
            raise ValueError(f"not a behavior id: {text!r}")
        return cls(int(text[1:]))

    @property
    def index(self) -> int:
        return self.value - 1


BEHAVIORS: tuple[BehaviorId, ...] = tuple(BehaviorId)
N_BEHAVIORS = len(BEHAVIORS)


class AttackKind(enum.Enum):
    FIFTY_ONE_PERCENT = "fifty_one_percent"
    DOUBLE_SPEND = "double_spend"
    SYBIL = "sybil"
    REPLAY = "replay"
    CONTRACT_EXPLOIT = "contract_exploit"
    DDOS = "ddos"


_FAMILY: dict[AttackKind, tuple[int, ...]] = {
    AttackKind.FIFTY_ONE_PERCENT: (1, 2, 3),
    AttackKind.DOUBLE_SPEND: (4, 5, 6),
    AttackKind.SYBIL: (7, 8, 9),
    AttackKind.REPLAY: (10, 11, 12),
    AttackKind.CONTRACT_EXPLOIT: (13, 14),
    AttackKind.DDOS: (15, 16),
}
_KIND_OF: dict[BehaviorId, AttackKind] = {
    BehaviorId(b): kind for kind, bs in _FAMILY.items() for b in bs
}


def behavior_attack_kind(b: BehaviorId) -> AttackKind:
    return _KIND_OF[BehaviorId(b)]


def family_behaviors(kind: AttackKind) -> tuple[BehaviorId, ...]:
    return tuple(BehaviorId(b) for b in _FAMILY[kind])


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True, slots=True)
class BehaviorScores:
    """Learned score per behavior, each clamped to [-1, 1]."""

    values: tuple[float, ...] = (0.0,) * N_BEHAVIORS

    def __post_init__(self) -> None:
        if len(self.values) != N_BEHAVIORS:
            raise ValueError(f"expected {N_BEHAVIORS} scores, got {len(self.values)}")
        vals = tuple(map(float, self.values))
        if min(vals) < -1.0 or max(vals) > 1.0:
            vals = tuple([-1.0 if v < -1.0 else 1.0 if v > 1.0 else v for v in vals])
        object.__setattr__(self, "values", vals)

    def __getitem__(self, b: BehaviorId) -> float:
        return self.values[BehaviorId(b).index]

    def max(self) -> float:
        return max(self.values)

    def to_dict(self) -> dict[str, float]:
        return {b.key: self.values[b.index] for b in BEHAVIORS}

    @classmethod
    def from_dict(cls, data: dict[str, float]) -> "BehaviorScores":
        vals = [0.0] * N_BEHAVIORS
        for k, v in data.items():
            vals[BehaviorId.parse(k).index] = float(v)
        return cls(tuple(vals))


@dataclass(frozen=True, slots=True)
class ReputationTable:
    attack_probability: float = 0.0
    last_attack_age: int = 0
    # ordered oldest-first; reward lifts restrictions[0]
    restrictions: tuple[AttackKind, ...] = ()
    is_active: bool = True
    behavior_scores: BehaviorScores = field(default_factory=BehaviorScores)

    def __post_init__(self) -> None:
        if not 0.0 <= self.attack_probability <= 1.0:
            raise ValueError(f"attack_probability out of [0,1]: {self.attack_probability}")
        if self.last_attack_age < 0:
            raise ValueError(f"last_attack_age must be >= 0: {self.last_attack_age}")
        if len(self.restrictions) > 1 and len(set(self.restrictions)) != len(self.restrictions):
            raise ValueError("duplicate restriction")

    def to_dict(self) -> dict[str, Any]:
        return {
            "attack_probability": self.attack_probability,
            "last_attack_age": self.last_attack_age,
            "restrictions": [k.value for k in self.restrictions],
            "is_active": self.is_active,
            "behavior_scores": self.behavior_scores.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ReputationTable":
        return cls(
            attack_probability=float(data["attack_probability"]),
            last_attack_age=int(data["last_attack_age"]),
            restrictions=tuple(AttackKind(k) for k in data["restrictions"]),
            is_active=bool(data["is_active"]),
            behavior_scores=BehaviorScores.from_dict(data["behavior_scores"]),
        )


@dataclass(frozen=True, slots=True)
class StrategyDescriptor:
    """Honest when ``attack`` is None; otherwise attacks with probability ``persistence``."""

    attack: Optional[AttackKind] = None
    persistence: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.persistence <= 1.0:
            raise ValueError(f"persistence out of [0,1]: {self.persistence}")

    @property
    def is_honest(self) -> bool:
        return self.attack is None

    @classmethod
    def honest(cls) -> "StrategyDescriptor":
        return cls(None, 0.0)

    @classmethod
    def attacker(cls, kind: AttackKind, persistence: float = 1.0) -> "StrategyDescriptor":
        return cls(kind, persistence)

    @property
    def label(self) -> str:
        return "honest" if self.attack is None else self.attack.value

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.label, "persistence": self.persistence}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StrategyDescriptor":
        kind = data["kind"]
        if kind == "honest":
            return cls(None, float(data.get("persistence", 0.0)))
        return cls(AttackKind(kind), float(data.get("persistence", 1.0)))


@dataclass(frozen=True, slots=True)
class NodeState:
    id: NodeId
    stake: float
    balance: float
    reputation: ReputationTable
    strategy: StrategyDescriptor

    @property
    def is_active(self) -> bool:
        return self.reputation.is_active

    @property
    def is_malicious(self) -> bool:
        return not self.strategy.is_honest

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "stake": self.stake,
            "balance": self.balance,
            "reputation": self.reputation.to_dict(),
            "strategy": self.strategy.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NodeState":
        return cls(
            id=data["id"],
            stake=float(data["stake"]),
            balance=float(data["balance"]),
            reputation=ReputationTable.from_dict(data["reputation"]),
            strategy=StrategyDescriptor.from_dict(data["strategy"]),
        )


def new_node(
    id: NodeId,
    stake: float,
    strategy: StrategyDescriptor,
    initial_balance: float = DEFAULT_INITIAL_BALANCE,
) -> NodeState:
    if not stake > 0:
        raise ValueError(f"stake must be positive, got {stake}")
    return NodeState(id, float(stake), float(initial_balance), ReputationTable(), strategy)


class _TxFields(NamedTuple):
    tx_id: str
    sender: NodeId
    receiver: NodeId
    amount: float
    fee: float
    timestamp: int
    contract_ref: Optional[str] = None


class Transaction(_TxFields):
    """Immutable transfer record.

    A named tuple rather than a dataclass: simulations build tens of
    thousands of these per run and tuple construction is several times cheaper.
    """

    __slots__ = ()

    def __new__(
        cls,
        tx_id: str,
        sender: NodeId,
        receiver: NodeId,
        amount: float,
        fee: float,
        timestamp: int,
        contract_ref: Optional[str] = None,
    ) -> "Transaction":
        if amount < 0 or fee < 0:
            raise ValueError("amount and fee must be non-negative")
        return tuple.__new__(cls, (tx_id, sender, receiver, amount, fee, timestamp, contract_ref))

    def replace(self, **changes: Any) -> "Transaction":
        return Transaction(**{**self._asdict(), **changes})

    def to_dict(self) -> dict[str, Any]:
        return self._asdict()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Transaction":
        return cls(**data)


_tx_id, _fee = itemgetter(0), itemgetter(4)


def ledger_deltas(txs) -> dict[NodeId, float]:
    """Net balance change per node from replaying ``txs`` in order."""
    delta: dict[NodeId, float] = {}
    get = delta.get
    for _, sender, receiver, amount, fee, _, _ in txs:
        delta[sender] = get(sender, 0.0) - (amount + fee)
        delta[receiver] = get(receiver, 0.0) + amount
    return delta


@dataclass(frozen=True, slots=True)
class Block:
    height: int
    proposer: NodeId
    transactions: tuple[Transaction, ...] = ()
    parent: Optional[int] = None
    confirmed: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "proposer": self.proposer,
            "transactions": [t.to_dict() for t in self.transactions],
            "parent": self.parent,
            "confirmed": self.confirmed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Block":
        return cls(
            height=data["height"],
            proposer=data["proposer"],
            transactions=tuple(Transaction.from_dict(t) for t in data["transactions"]),
            parent=data["parent"],
            confirmed=data["confirmed"],
        )


@dataclass(frozen=True)
class RoundEvents:
    """Everything the activity tracker can observe in one round.

    ``balances`` is each node's ledger balance at round start and
    ``reported_balances`` what the node claims afterwards; ``stakes`` gives the
    stake-entitled vote weight used to judge ``votes``.
    """

    round: int
    nodes: tuple[NodeId, ...] = ()
    proposed_blocks: tuple[Block, ...] = ()
    unconfirmed_pool: tuple[Block, ...] = ()
    confirmed_txs: tuple[Transaction, ...] = ()
    votes: dict[NodeId, float] = field(default_factory=dict)
    stakes: dict[NodeId, float] = field(default_factory=dict)
    joins: tuple[tuple[NodeId, str], ...] = ()
    per_node_message_count: dict[NodeId, int] = field(default_factory=dict)
    per_node_error_count: dict[NodeId, int] = field(default_factory=dict)
    per_node_resource_use: dict[NodeId, float] = field(default_factory=dict)
    per_node_hash_rate: dict[NodeId, float] = field(default_factory=dict)
    balances: dict[NodeId, float] = field(default_factory=dict)
    reported_balances: dict[NodeId, float] = field(default_factory=dict)
    fork_count: int = 0
    fee_history: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for name in (
            "votes", "stakes", "per_node_message_count", "per_node_error_count",
            "per_node_resource_use", "per_node_hash_rate", "balances", "reported_balances",
        ):
            keys = getattr(self, name)
            if not known.issuperset(keys):
                raise ValueError(f"{name} keyed by unknown nodes {sorted(set(keys) - known)}")
        stray = {n for n, _ in self.joins} - known
        if stray:
            raise ValueError(f"joins from unknown nodes {sorted(stray)}")

    @cached_property
    def node_set(self) -> frozenset[NodeId]:
        return frozenset(self.nodes)

    @cached_property
    def pool_txs(self) -> tuple[Transaction, ...]:
        return tuple(t for b in self.unconfirmed_pool for t in b.transactions)

    @cached_property
    def confirmed_index(self) -> dict[str, Transaction]:
        """tx_id -> first confirmed occurrence."""
        txs = self.confirmed_txs[::-1]
        # later entries win in a dict, so feed the list backwards
        return dict(zip(map(_tx_id, txs), txs))

    @cached_property
    def repeated_timestamps(self) -> dict[str, frozenset[int]]:
        """Every confirmed timestamp, only for tx_ids confirmed more than once."""
        if len(self.confirmed_index) == len(self.confirmed_txs):
            return {}
        seen: dict[str, set[int]] = defaultdict(set)
        for t in self.confirmed_txs:
            seen[t.tx_id].add(t.timestamp)
        return {k: frozenset(v) for k, v in seen.items() if len(v) > 1}

    def confirmed_at(self, tx_id: str, timestamp: int) -> bool:
        """Whether ``tx_id`` was confirmed with this timestamp in this round."""
        many = self.repeated_timestamps.get(tx_id)
        if many is not None:
            return timestamp in many
        t = self.confirmed_index.get(tx_id)
        return t is not None and t.timestamp == timestamp

    def _group_senders(self) -> None:
        # one pass fills both per-sender views
        groups: dict[NodeId, list[Transaction]] = {}
        totals: dict[NodeId, list] = {}
        for t in self.confirmed_txs + self.pool_txs:
            s, amount, fee = t[1], t[3], t[4]
            acc = totals.get(s)
            if acc is None:
                groups[s] = [t]
                totals[s] = [1, amount, fee, amount]
            else:
                groups[s].append(t)
                acc[0] += 1
                acc[1] += amount
                acc[2] += fee
                if amount > acc[3]:
                    acc[3] = amount
        self.__dict__["txs_by_sender"] = groups
        self.__dict__["sender_totals"] = {s: tuple(acc) for s, acc in totals.items()}

    @cached_property
    def txs_by_sender(self) -> dict[NodeId, list[Transaction]]:
        """Confirmed then pooled transactions, grouped by sender."""
        self._group_senders()
        return self.__dict__["txs_by_sender"]

    @cached_property
    def sender_totals(self) -> dict[NodeId, tuple[int, float, float, float]]:
        """Per sender over confirmed then pooled txs: (count, amount sum, fee sum, max amount)."""
        self._group_senders()
        return self.__dict__["sender_totals"]

    @cached_property
    def confirmed_deltas(self) -> dict[NodeId, float]:
        return ledger_deltas(self.confirmed_txs)

    @cached_property
    def mean_confirmed_fee(self) -> Optional[float]:
        if not self.confirmed_txs:
            return None
        return sum(map(_fee, self.confirmed_txs)) / len(self.confirmed_txs)

    def to_dict(self) -> dict[str, Any]:
        def keyed(m: dict) -> dict[str, Any]:
            return {str(k): v for k, v in m.items()}

        return {
            "round": self.round,
            "nodes": list(self.nodes),
            "proposed_blocks": [b.to_dict() for b in self.proposed_blocks],
            "unconfirmed_pool": [b.to_dict() for b in self.unconfirmed_pool],
            "confirmed_txs": [t.to_dict() for t in self.confirmed_txs],
            "votes": keyed(self.votes),
            "stakes": keyed(self.stakes),
            "joins": [[n, a] for n, a in self.joins],
            "per_node_message_count": keyed(self.per_node_message_count),
            "per_node_error_count": keyed(self.per_node_error_count),
            "per_node_resource_use": keyed(self.per_node_resource_use),
            "per_node_hash_rate": keyed(self.per_node_hash_rate),
            "balances": keyed(self.balances),
            "reported_balances": keyed(self.reported_balances),
            "fork_count": self.fork_count,
            "fee_history": [[r, f] for r, f in self.fee_history],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RoundEvents":
        def unkey(m: dict) -> dict[int, Any]:
            return {int(k): v for k, v in m.items()}

        return cls(
            round=data["round"],
            nodes=tuple(data["nodes"]),
            proposed_blocks=tuple(Block.from_dict(b) for b in data["proposed_blocks"]),
            unconfirmed_pool=tuple(Block.from_dict(b) for b in data["unconfirmed_pool"]),
            confirmed_txs=tuple(Transaction.from_dict(t) for t in data["confirmed_txs"]),
            votes=unkey(data["votes"]),
            stakes=unkey(data["stakes"]),
            joins=tuple((n, a) for n, a in data["joins"]),
            per_node_message_count=unkey(data["per_node_message_count"]),
            per_node_error_count=unkey(data["per_node_error_count"]),
            per_node_resource_use=unkey(data["per_node_resource_use"]),
            per_node_hash_rate=unkey(data["per_node_hash_rate"]),
            balances=unkey(data["balances"]),
            reported_balances=unkey(data["reported_balances"]),
            fork_count=data["fork_count"],
            fee_history=tuple((r, f) for r, f in data["fee_history"]),
        )


Signals = dict[BehaviorId, float]


def zero_signals() -> Signals:
    return {b: 0.0 for b in BEHAVIORS}


@dataclass(frozen=True)
class DetectionReport:
    """Per-node, per-behavior signals in [0, 1] for one round.

    Only nonzero signals are stored; :meth:`row` fills in zeros, so every
    (node, behavior) pair of ``nodes`` is readable.
    """

    nodes: tuple[NodeId, ...] = ()
    signals: dict[NodeId, Signals] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[NodeId, Signals] = {}
        for n, row in self.signals.items():
            kept = {}
            for b, v in row.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"signal out of [0,1] for node {n}, {BehaviorId(b).key}: {v}")
                if v > 0:
                    kept[BehaviorId(b)] = float(v)
            if kept:
                clean[n] = kept
        object.__setattr__(self, "signals", clean)

    def row(self, node: NodeId) -> Signals:
        out = zero_signals()
        out.update(self.signals.get(node, {}))
        return out

    def flagged(self, node: NodeId) -> bool:
        return node in self.signals

    def detected(self) -> list[tuple[NodeId, BehaviorId]]:
        return [(n, b) for n in sorted(self.signals) for b in sorted(self.signals[n])]

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "signals": {
                str(n): {b.key: v for b, v in sorted(row.items())}
                for n, row in sorted(self.signals.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DetectionReport":
        return cls(
            tuple(data["nodes"]),
            {
                int(n): {BehaviorId.parse(k): float(v) for k, v in row.items()}
                for n, row in data["signals"].items()
            },
        )


__all__ = [
    "AttackKind",
    "BEHAVIORS",
    "BehaviorId",
    "BehaviorScores",
    "Block",
    "DEFAULT_INITIAL_BALANCE",
    "DetectionReport",
    "NodeId",
    "NodeState",
    "ReputationTable",
    "RoundEvents",
    "Signals",
    "StrategyDescriptor",
    "Transaction",
    "behavior_attack_kind",
    "family_behaviors",
    "new_node",
    "replace",
    "zero_signals",
]
