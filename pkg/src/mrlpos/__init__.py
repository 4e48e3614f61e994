"""Reputation-driven proof-of-stake simulator with PoS and DPoS baselines."""

from .core import (
    BEHAVIORS,
    AttackKind,
    BehaviorId,
    BehaviorScores,
    Block,
    DetectionReport,
    NodeState,
    ReputationTable,
    RoundEvents,
    StrategyDescriptor,
    Transaction,
    new_node,
)
from .detection import DetectionConfig, Weights, aggregate_attack_probability, compile_report
from .election import ElectionOutcome, dpos_elect, elect_validator, pos_elect
from .reputation import (
    LearningParams,
    apply_penalty,
    apply_reward,
    decay_attack_age,
    observe_misbehavior,
    q_update,
    update_behavior_scores,
)
from .sim import (
    Elector,
    NodeGroup,
    PenaltyScope,
    Scenario,
    SimulationResult,
    TraceScript,
    TraceStep,
    run_comparison,
    run_learning_trace,
    run_simulation,
)

__version__ = "0.1.0"

__all__ = [
    "BEHAVIORS", "AttackKind", "BehaviorId", "BehaviorScores", "Block", "DetectionReport",
    "NodeState", "ReputationTable", "RoundEvents", "StrategyDescriptor", "Transaction", "new_node",
    "DetectionConfig", "Weights", "aggregate_attack_probability", "compile_report",
    "ElectionOutcome", "dpos_elect", "elect_validator", "pos_elect",
    "LearningParams", "apply_penalty", "apply_reward", "decay_attack_age", "observe_misbehavior",
    "q_update", "update_behavior_scores",
    "Elector", "NodeGroup", "PenaltyScope", "Scenario", "SimulationResult", "TraceScript",
    "TraceStep", "run_comparison", "run_learning_trace", "run_simulation",
]
