"""Reference implementations the tests compare the package against.

These are deliberately naive: plain loops written from the definitions,
sharing no helpers with the code under test unless a test says otherwise.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from fractions import Fraction
from pathlib import Path

from mrlpos.core import AttackKind, BehaviorId, StrategyDescriptor, behavior_attack_kind, new_node
from mrlpos.detection import DetectionConfig, Weights
from mrlpos.reputation import (
    LearningParams,
    apply_penalty,
    apply_reward,
    deactivate_if_bankrupt,
    decay_attack_age,
    forfeit_stake,
    observe_misbehavior,
)


def q_direct(q: float, alpha: float, r: float, gamma: float, max_next: float) -> float:
    """The update rule evaluated in exact rational arithmetic, rounded once."""
    fq, fa, fr, fg, fm = map(Fraction, (q, alpha, r, gamma, max_next))
    return float((1 - fa) * fq + fa * (fr + fg * fm))


def window_counts(elected_flags: list[bool | None], size: int) -> list[tuple[int, int, int]]:
    """(malicious, honest, skipped) per window; ``None`` marks a skipped round."""
    out = []
    for lo in range(0, len(elected_flags), size):
        chunk = elected_flags[lo:lo + size]
        out.append((chunk.count(True), chunk.count(False), chunk.count(None)))
    return out


# ---------------------------------------------------------------------------
# naive detectors for the threshold-style criteria


def naive_ddos(events, cfg: DetectionConfig) -> set[tuple[int, BehaviorId]]:
    hits = set()
    for node in events.nodes:
        if events.per_node_error_count.get(node, 0) >= cfg.error_threshold:
            hits.add((node, BehaviorId.B15))
        if events.per_node_resource_use.get(node, 0.0) >= cfg.resource_threshold:
            hits.add((node, BehaviorId.B16))
    return hits


def naive_hash_rate(events, cfg: DetectionConfig) -> set[tuple[int, BehaviorId]]:
    rates = list(events.per_node_hash_rate.items())
    if not rates:
        return set()
    total = 0.0
    for _, h in rates:
        total += h
    mean = total / len(rates)
    return {(n, BehaviorId.B2) for n, h in rates if h > cfg.hash_rate_factor * mean and n in events.nodes}


def naive_sybil(events, cfg: DetectionConfig) -> set[tuple[int, BehaviorId]]:
    hits = set()
    if len(events.joins) >= cfg.join_spike_threshold:
        prefixes = Counter(".".join(a.split(".")[: cfg.address_prefix_octets]) for _, a in events.joins)
        for node, addr in events.joins:
            if prefixes[".".join(addr.split(".")[: cfg.address_prefix_octets])] >= 2:
                hits.add((node, BehaviorId.B7))
    for node, claim in events.votes.items():
        if node in events.stakes and claim > events.stakes[node] * (1 + 1e-9):
            hits.add((node, BehaviorId.B8))
    for node, count in events.per_node_message_count.items():
        if count >= cfg.spam_message_threshold:
            hits.add((node, BehaviorId.B9))
    return {h for h in hits if h[0] in events.nodes}


def naive_duplicate_ids(events) -> set[tuple[int, BehaviorId]]:
    where: dict[str, set[int]] = {}
    sender: dict[str, int] = {}
    for i, blk in enumerate(events.unconfirmed_pool):
        for t in blk.transactions:
            where.setdefault(t.tx_id, set()).add(i)
            sender[t.tx_id] = t.sender
    return {(sender[k], BehaviorId.B4) for k, v in where.items() if len(v) >= 2 and sender[k] in events.nodes}


def naive_contract(events, cfg: DetectionConfig) -> set[tuple[int, BehaviorId]]:
    hits = set()
    every = list(events.confirmed_txs) + [t for b in events.unconfirmed_pool for t in b.transactions]
    if events.confirmed_txs:
        mean = sum(t.amount for t in events.confirmed_txs) / len(events.confirmed_txs)
        for t in every:
            if t.amount > cfg.large_transfer_factor * mean:
                hits.add((t.sender, BehaviorId.B13))
    per = Counter((t.sender, t.contract_ref) for t in every if t.contract_ref is not None)
    for (node, _), k in per.items():
        if k >= cfg.contract_activity_threshold:
            hits.add((node, BehaviorId.B14))
    return {h for h in hits if h[0] in events.nodes}


def naive_fee_spike(events, cfg: DetectionConfig) -> set[tuple[int, BehaviorId]]:
    fees = [f for _, f in events.fee_history[-cfg.window:]]
    if not fees:
        return set()
    trailing = sum(fees) / len(fees)
    every = list(events.confirmed_txs) + [t for b in events.unconfirmed_pool for t in b.transactions]
    per: dict[int, list[float]] = {}
    for t in every:
        per.setdefault(t.sender, []).append(t.fee)
    return {
        (n, BehaviorId.B12) for n, fs in per.items()
        if sum(fs) / len(fs) > cfg.fee_spike_factor * trailing and n in events.nodes
    }


# ---------------------------------------------------------------------------
# audit replay from exported files


def _params(scenario: dict) -> tuple[LearningParams, Weights]:
    return LearningParams(**scenario["learning"]), Weights.from_mapping(scenario["weights"])


def read_rounds(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_snapshots(path: Path) -> dict[int, dict[int, dict]]:
    out: dict[int, dict[int, dict]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["round"]), {})[int(row["node"])] = row
    return out


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def replay_run(out_dir: Path) -> list[str]:
    """Rebuild every node snapshot from rounds.csv and summary.json alone.

    Returns a list of mismatches (empty when the audit trail is consistent).
    """
    summary = json.loads((out_dir / "summary.json").read_text())
    scenario = summary["scenario"]
    lp, w = _params(scenario)
    elector = scenario["elector"]
    network = scenario["penalty_scope"] == "network"
    nodes = [
        new_node(n["id"], n["stake"], StrategyDescriptor.honest(), n["initial_balance"])
        for n in summary["nodes"]
    ]
    rows = read_rounds(out_dir / "rounds.csv")
    snaps = read_snapshots(out_dir / "snapshots.csv")
    problems: list[str] = []

    for row in rows:
        r = int(row["round"])
        flagged: dict[int, dict[BehaviorId, float]] = {}
        for item in filter(None, row["behaviors_detected"].split(";")):
            n, b = item.split(":")
            flagged.setdefault(int(n), {})[BehaviorId.parse(b)] = 1.0
        active_at_start = {n.id for n in nodes if n.is_active}
        elected = int(row["elected"]) if row["elected"] else None

        if elector == "mrlpos":
            nodes = [decay_attack_age(n) if n.is_active else n for n in nodes]
        if elected is not None:
            v = nodes[elected]
            if elector == "mrlpos":
                if row["penalty_applied"] == "1":
                    nodes[elected] = apply_penalty(v, flagged[elected], w, lp)
                elif row["reward_applied"] == "1":
                    nodes[elected] = apply_reward(v, w, lp)
            elif row["penalty_applied"] == "1":
                nodes[elected] = deactivate_if_bankrupt(forfeit_stake(v))
            else:
                nodes[elected] = deactivate_if_bankrupt(
                    type(v)(v.id, v.stake, v.balance + lp.fee, v.reputation, v.strategy)
                )
        if elector == "mrlpos":
            for i in sorted(flagged):
                if i == elected or i not in active_at_start:
                    continue
                nodes[i] = observe_misbehavior(nodes[i], flagged[i], w, lp)
                if network:
                    nodes[i] = forfeit_stake(nodes[i])
        nodes = [deactivate_if_bankrupt(n) for n in nodes]

        for n in nodes:
            got = snaps[r][n.id]
            rep = n.reputation
            want = {
                "attack_probability": _fmt(rep.attack_probability),
                "last_attack_age": _fmt(rep.last_attack_age),
                "restrictions": _fmt(len(rep.restrictions)),
                "balance": _fmt(n.balance),
                "is_active": _fmt(rep.is_active),
            }
            for key, value in want.items():
                if got[key] != value:
                    problems.append(f"round {r} node {n.id} {key}: file {got[key]} replay {value}")
    return problems


def family_of(b: BehaviorId) -> AttackKind:
    return behavior_attack_kind(b)
