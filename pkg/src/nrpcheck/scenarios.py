"""Reference topology, failure plans, Table-style presets and scenario files.

Scenario files are line-oriented ``key = value`` documents whose keys are
the model's environment constants (``heartbeat_period``,
``switchA1failtime``, ...) plus a few extensions (``variant``,
``interleaving``, ``max_states``, ...).  ``#`` starts a comment.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, fields, replace

from .kernel import FULL, INTERLEAVINGS, PRIORITY, GlobalState, MessageEnvelope, System, initial_state
from .protocol import (
    NODE_CAPACITY,
    SWITCH_CAPACITY,
    ModelOptions,
    Mode,
    NodeState,
    ProtocolParams,
    SwitchState,
    Variant,
    dispatch,
)


class ConfigError(ValueError):
    """Invalid scenario configuration or topology."""


class ParseError(ConfigError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownKey(ConfigError):
    def __init__(self, name: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}unknown key {name!r}")
        self.name = name


class InvariantViolation(ConfigError):
    pass


@dataclass(frozen=True)
class SwitchSpec:
    name: str
    id: int
    network: int
    terminal: bool
    toward_low: str
    toward_high: str
    node: str | None = None


@dataclass(frozen=True)
class NodeSpec:
    name: str
    id: int
    candidates: tuple[int, int]
    outs: tuple[str, str]


@dataclass(frozen=True)
class Topology:
    switches: tuple[SwitchSpec, ...]
    nodes: tuple[NodeSpec, ...]

    @classmethod
    def reference(cls) -> Topology:
        """Two disjoint three-switch chains with DCN1 and DCN2 at opposite ends."""
        return cls(
            switches=(
                SwitchSpec("switchA1", 1, 0, True, "switchA2", "switchA2", "DCN1"),
                SwitchSpec("switchA2", 2, 0, False, "switchA1", "switchA3"),
                SwitchSpec("switchA3", 3, 0, True, "switchA2", "switchA2", "DCN2"),
                SwitchSpec("switchB1", 4, 1, True, "switchB2", "switchB2", "DCN1"),
                SwitchSpec("switchB2", 5, 1, False, "switchB1", "switchB3"),
                SwitchSpec("switchB3", 6, 1, True, "switchB2", "switchB2", "DCN2"),
            ),
            nodes=(
                NodeSpec("DCN1", 100, (1, 4), ("switchA1", "switchB1")),
                NodeSpec("DCN2", 101, (3, 6), ("switchA3", "switchB3")),
            ),
        )

    def validate(self, max_switches: int) -> None:
        names = [s.name for s in self.switches] + [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate actor names")
        by_id = {s.id: s for s in self.switches}
        if len(by_id) != len(self.switches):
            raise ConfigError("duplicate switch ids")
        switch_names = {s.name for s in self.switches}
        node_names = {n.name for n in self.nodes}
        for s in self.switches:
            if not 0 < s.id <= max_switches:
                raise ConfigError(f"switch id {s.id} must lie in 1..{max_switches}")
            for nb in (s.toward_low, s.toward_high):
                if nb not in switch_names:
                    raise ConfigError(f"{s.name} references unknown switch {nb!r}")
            if s.terminal != (s.node is not None):
                raise ConfigError(f"{s.name}: terminal switches need exactly one attached node")
            if s.node is not None and s.node not in node_names:
                raise ConfigError(f"{s.name} references unknown node {s.node!r}")
        for n in self.nodes:
            if n.id <= max_switches:
                raise ConfigError(f"node id {n.id} must exceed max_switches={max_switches}")
            for net, (cand, out) in enumerate(zip(n.candidates, n.outs)):
                sw = by_id.get(cand)
                if sw is None:
                    raise ConfigError(f"{n.name}: NRP candidate {cand} is not a switch")
                if sw.network != net or not sw.terminal:
                    raise ConfigError(f"{n.name}: NRP candidate {cand} is not a terminal switch of network {net}")
                if out not in switch_names:
                    raise ConfigError(f"{n.name}: unknown output switch {out!r}")

    def switch_id(self, name: str) -> int:
        return next(s.id for s in self.switches if s.name == name)

    def node_id(self, name: str) -> int:
        return next(n.id for n in self.nodes if n.name == name)


REFERENCE = Topology.reference()


@dataclass(frozen=True)
class ScenarioConfig:
    params: ProtocolParams = field(default_factory=ProtocolParams)
    variant: Variant = Variant.BASELINE
    initial_primary: int = 100
    node_fail_times: dict[int, int] = field(default_factory=dict)
    switch_fail_times: dict[int, int] = field(default_factory=dict)
    event_based_failures: bool = False
    suppress_heartbeat_periods: tuple[int, int] | None = None
    interleaving: str = PRIORITY
    max_states: int = 1_000_000
    max_depth: int | None = None
    abdication: Mode | None = None
    name: str = "custom"

    def options(self) -> ModelOptions:
        return ModelOptions(
            params=self.params,
            variant=self.variant,
            event_based_failures=self.event_based_failures,
            suppress_heartbeat_periods=self.suppress_heartbeat_periods,
            abdication=self.abdication,
        )

    def with_variant(self, variant: Variant | str) -> ScenarioConfig:
        """Same failure plan under another variant, with that variant's timing defaults."""
        variant = Variant(variant)
        return replace(self, variant=variant, params=ProtocolParams.defaults(variant))

    def check(self) -> None:
        try:
            self.params.check()
        except ValueError as exc:
            raise InvariantViolation(str(exc)) from None
        if self.interleaving not in INTERLEAVINGS:
            raise ConfigError(f"unknown interleaving {self.interleaving!r}")
        if self.max_states < 1 or (self.max_depth is not None and self.max_depth < 1):
            raise ConfigError("limits must be positive")
        if any(t < 0 for t in list(self.node_fail_times.values()) + list(self.switch_fail_times.values())):
            raise ConfigError("fail times must be non-negative")
        window = self.suppress_heartbeat_periods
        if window is not None and not 1 <= window[0] <= window[1]:
            raise ConfigError(f"bad suppression window {window}")


def build_reference_topology(cfg: ScenarioConfig, topology: Topology = REFERENCE) -> GlobalState:
    """Run every actor constructor and return the initial global state."""
    cfg.check()
    topology.validate(cfg.params.max_switches)
    node_ids = {n.id for n in topology.nodes}
    switch_ids = {s.id for s in topology.switches}
    if cfg.initial_primary not in node_ids:
        raise ConfigError(f"initial primary {cfg.initial_primary} is not a node")
    if not set(cfg.node_fail_times) <= node_ids:
        raise ConfigError(f"fail times for unknown nodes {sorted(set(cfg.node_fail_times) - node_ids)}")
    if not set(cfg.switch_fail_times) <= switch_ids:
        raise ConfigError(f"fail times for unknown switches {sorted(set(cfg.switch_fail_times) - switch_ids)}")

    actors = {}
    messages = []
    priority = {}
    capacity = {}
    for s in topology.switches:
        fail_time = cfg.switch_fail_times.get(s.id, 0)
        actors[s.name] = SwitchState(
            id=s.id, network_id=s.network, terminal=s.terminal,
            neighbor_toward_low=s.toward_low, neighbor_toward_high=s.toward_high,
            attached_node=s.node, fail_time=fail_time,
        )
        if fail_time:
            messages.append(MessageEnvelope(s.name, s.name, "switchFail", (), fail_time))
        priority[s.name] = 1
        capacity[s.name] = SWITCH_CAPACITY
    for n in topology.nodes:
        fail_time = cfg.node_fail_times.get(n.id, 0)
        actors[n.name] = NodeState(
            id=n.id, primary=cfg.initial_primary, nrp_candidates=n.candidates,
            fail_time=fail_time, network_out=n.outs,
        )
        if fail_time:
            messages.append(MessageEnvelope(n.name, n.name, "nodeFail", (), fail_time))
        messages.append(MessageEnvelope(n.name, n.name, "runMe", (), 0))
        priority[n.name] = 2
        capacity[n.name] = NODE_CAPACITY
    system = System(
        order=tuple(s.name for s in topology.switches) + tuple(n.name for n in topology.nodes),
        priority=priority,
        capacity=capacity,
        dispatch=functools.partial(dispatch, cfg.options()),
        interleaving=cfg.interleaving,
    )
    return initial_state(system, actors, messages)


CASE_DESCRIPTIONS = {
    1: "Without failure",
    2: "Failures on each event",
    3: "DCN1 fails at time 2500",
    4: "switchA1 fails at time 2500",
    5: "switchA3 fails at time 2500",
    6: "switchA1 fails at time 2500 and switchB1 at time 3500",
    7: "switchA1 and switchB1 fail simultaneously at time 2500",
    8: "Heartbeats are missing because of transient errors",
}


def preset_case(k: int, variant: Variant | str = Variant.BASELINE, **overrides) -> ScenarioConfig:
    """Failure plan of test case ``k`` (1..8).

    Case 8 drops the primary's heartbeats during primary periods
    1..max_missed_heartbeats+1 (i.e. [1, 3] with the defaults) and then lets
    them resume, so the primary stays alive and NRP-connected throughout.
    """
    if k not in CASE_DESCRIPTIONS:
        raise ConfigError(f"case must be in 1..8, got {k}")
    variant = Variant(variant)
    params = ProtocolParams.defaults(variant)
    plan: dict = {}
    if k == 2:
        plan["event_based_failures"] = True
    elif k == 3:
        plan["node_fail_times"] = {100: 2500}
    elif k == 4:
        plan["switch_fail_times"] = {1: 2500}
    elif k == 5:
        plan["switch_fail_times"] = {3: 2500}
    elif k == 6:
        plan["switch_fail_times"] = {1: 2500, 4: 3500}
    elif k == 7:
        plan["switch_fail_times"] = {1: 2500, 4: 2500}
    elif k == 8:
        plan["suppress_heartbeat_periods"] = (1, params.max_missed_heartbeats + 1)
    plan.update(overrides)
    return ScenarioConfig(params=params, variant=variant, name=f"case {k}", **plan)


# -- scenario files ----------------------------------------------------------

_PARAM_KEYS = {
    "heartbeat_period": "heartbeat_period",
    "max_missed_heartbeats": "max_missed_heartbeats",
    "ping_timeout": "ping_timeout",
    "nrp_timeout": "nrp_timeout",
    "NumberOfNetworks": "number_of_networks",
    "networkDelay": "network_delay",
    "networkDelayForNRPPing": "network_delay_for_nrp_ping",
    "MAX_SWITCHES": "max_switches",
    "ping_send_offset_primary": "ping_send_offset_primary",
    "ping_send_offset_backup": "ping_send_offset_backup",
}

_SWITCH_FAIL_KEYS = {f"switch{s.name[len('switch'):]}failtime": s.id for s in REFERENCE.switches}
_NODE_FAIL_KEYS = {"node1failtime": 100, "node2failtime": 101}

_EXTRA_KEYS = (
    "variant", "interleaving", "max_states", "max_depth", "event_based_failures",
    "suppress_heartbeat_periods", "initial_primary", "abdication",
)

KNOWN_KEYS = frozenset(_PARAM_KEYS) | frozenset(_SWITCH_FAIL_KEYS) | frozenset(_NODE_FAIL_KEYS) | frozenset(_EXTRA_KEYS)


def _int(value: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(line, f"expected an integer, got {value!r}") from None


def _bool(value: str, line: int) -> bool:
    v = value.lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ParseError(line, f"expected a boolean, got {value!r}")


def load_config(text: str) -> ScenarioConfig:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip().rstrip(";").strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("env "):
            # tolerate "env int heartbeat_period = 1000"
            key = key.split()[-1]
        if key not in KNOWN_KEYS:
            raise UnknownKey(key, lineno)
        if key in entries:
            raise ParseError(lineno, f"duplicate key {key!r}")
        if not value:
            raise ParseError(lineno, f"missing value for {key!r}")
        entries[key] = (value, lineno)

    def take(key, convert, default):
        if key not in entries:
            return default
        value, lineno = entries[key]
        return convert(value, lineno)

    def variant_of(value, lineno):
        try:
            return Variant(value)
        except ValueError:
            raise ParseError(lineno, f"unknown variant {value!r}") from None

    def mode_of(value, lineno):
        try:
            return Mode[value.upper()]
        except KeyError:
            raise ParseError(lineno, f"unknown mode {value!r}") from None

    def window_of(value, lineno):
        if value.lower() == "none":
            return None
        parts = [p.strip() for p in value.strip("[]").split(",")]
        if len(parts) != 2:
            raise ParseError(lineno, f"expected start,end window, got {value!r}")
        return (_int(parts[0], lineno), _int(parts[1], lineno))

    def optional_int(value, lineno):
        return None if value.lower() == "none" else _int(value, lineno)

    def text_of(value, lineno):
        return value

    variant = take("variant", variant_of, Variant.BASELINE)
    overrides = {attr: take(key, _int, None) for key, attr in _PARAM_KEYS.items()}
    params = ProtocolParams.defaults(variant, **{k: v for k, v in overrides.items() if v is not None})
    switch_fail = {sid: take(key, _int, 0) for key, sid in _SWITCH_FAIL_KEYS.items()}
    node_fail = {nid: take(key, _int, 0) for key, nid in _NODE_FAIL_KEYS.items()}
    cfg = ScenarioConfig(
        params=params,
        variant=variant,
        initial_primary=take("initial_primary", _int, 100),
        node_fail_times={k: v for k, v in node_fail.items() if v},
        switch_fail_times={k: v for k, v in switch_fail.items() if v},
        event_based_failures=take("event_based_failures", _bool, False),
        suppress_heartbeat_periods=take("suppress_heartbeat_periods", window_of, None),
        interleaving=take("interleaving", text_of, PRIORITY),
        max_states=take("max_states", _int, 1_000_000),
        max_depth=take("max_depth", optional_int, None),
        abdication=take("abdication", mode_of, None),
    )
    cfg.check()
    return cfg


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize ``cfg`` so that ``load_config(dump_config(cfg))`` equals it."""
    lines = [f"variant = {cfg.variant.value}"]
    for key, attr in _PARAM_KEYS.items():
        lines.append(f"{key} = {getattr(cfg.params, attr)}")
    for key, sid in _SWITCH_FAIL_KEYS.items():
        lines.append(f"{key} = {cfg.switch_fail_times.get(sid, 0)}")
    for key, nid in _NODE_FAIL_KEYS.items():
        lines.append(f"{key} = {cfg.node_fail_times.get(nid, 0)}")
    window = cfg.suppress_heartbeat_periods
    lines += [
        f"initial_primary = {cfg.initial_primary}",
        f"event_based_failures = {str(cfg.event_based_failures).lower()}",
        f"suppress_heartbeat_periods = {'none' if window is None else f'{window[0]},{window[1]}'}",
        f"interleaving = {cfg.interleaving}",
        f"max_states = {cfg.max_states}",
        f"max_depth = {'none' if cfg.max_depth is None else cfg.max_depth}",
    ]
    if cfg.abdication is not None:
        lines.append(f"abdication = {cfg.abdication.name.lower()}")
    return "\n".join(lines) + "\n"


def same_config(a: ScenarioConfig, b: ScenarioConfig) -> bool:
    """Equality ignoring the display name."""
    return all(getattr(a, f.name) == getattr(b, f.name) for f in fields(ScenarioConfig) if f.name != "name")


#: Expected NoDualPrimary verdicts (True = satisfied) for cases 1..8.
#: The baseline-noopt vector was pinned from an exhaustive run.
EXPECTED_VERDICTS = {
    Variant.BASELINE: (True, False, True, True, True, True, False, False),
    Variant.BASELINE_NOOPT: (True, True, True, True, True, True, True, False),
    Variant.LEASING: (True,) * 8,
}


__all__ = [
    "CASE_DESCRIPTIONS", "ConfigError", "EXPECTED_VERDICTS", "FULL", "InvariantViolation", "KNOWN_KEYS", "ParseError",
    "PRIORITY", "REFERENCE", "ScenarioConfig", "Topology", "UnknownKey", "build_reference_topology",
    "dump_config", "load_config", "preset_case", "same_config",
]
