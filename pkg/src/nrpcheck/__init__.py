"""Explicit-state model checker for the NRP FD redundancy failover protocol."""

from .analysis import NO_DUAL_PRIMARY, Assertion, Proposition, evaluate, export_graph, extract_trace, stats
from .kernel import ExplorationResult, GlobalState, MessageEnvelope, Verdict, explore
from .protocol import Mode, ProtocolParams, Variant
from .scenarios import ScenarioConfig, build_reference_topology, load_config, preset_case

__version__ = "0.1.0"

__all__ = [
    "Assertion", "ExplorationResult", "GlobalState", "MessageEnvelope", "Mode", "NO_DUAL_PRIMARY",
    "Proposition", "ProtocolParams", "ScenarioConfig", "Variant", "Verdict", "build_reference_topology",
    "evaluate", "explore", "export_graph", "extract_trace", "load_config", "preset_case", "stats",
]
