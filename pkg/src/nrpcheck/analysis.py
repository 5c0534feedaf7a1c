"""Propositions, safety assertions, counterexample traces and graph export."""

from __future__ import annotations

import hashlib
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, fields

from .kernel import ExplorationResult, GlobalState, TransitionLabel, Verdict, canonicalize
from .protocol import Mode, NodeState


class UnknownActor(LookupError):
    pass


class UnknownField(LookupError):
    pass


class NotViolated(Exception):
    pass


class PropertySyntaxError(ValueError):
    pass


# Field names as written in the Rebeca model, mapped onto snapshot attributes.
_NODE_ALIASES = {
    "NRP_switch_id": "nrp_switch_id",
    "NRP_network": "nrp_network",
    "NRP_pending": "nrp_pending",
    "which": "lease_strikes",
    "prevWhich": "prev_lease_flag",
}
_SWITCH_ALIASES = {
    "amINRP": "am_i_nrp",
    "mynetworkId": "network_id",
    "primary": "registered_primary",
    "which": "last_ping_from_primary",
    "prevWhich": "prev_ping_from_primary",
}


def field_value(state: GlobalState, actor: str, name: str):
    try:
        snap = state.actor(actor)
    except KeyError:
        raise UnknownActor(actor) from None
    if name in ("heartbeats_missed_1", "heartbeats_missed_2") and isinstance(snap, NodeState):
        return snap.heartbeats_missed[int(name[-1]) - 1]
    aliases = _NODE_ALIASES if isinstance(snap, NodeState) else _SWITCH_ALIASES
    attr = aliases.get(name, name)
    if not hasattr(snap, attr):
        raise UnknownField(f"{actor}.{name}")
    return getattr(snap, attr)


# -- expressions -------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+|-\d+)|(true|false)\b|([A-Za-z_]\w*)|(==|!=|<=|>=|&&|\|\||[<>!().]))")

_COMPARE = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _tokenize(text: str) -> list[tuple[str, object]]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PropertySyntaxError(f"unexpected input at {text[pos:]!r}")
        num, boolean, ident, op = m.groups()
        if num is not None:
            tokens.append(("lit", int(num)))
        elif boolean is not None:
            tokens.append(("lit", boolean == "true"))
        elif ident is not None:
            tokens.append(("id", ident))
        else:
            tokens.append(("op", op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            raise PropertySyntaxError(f"expected {value or kind}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.disjunction()
        if self.i != len(self.tokens):
            raise PropertySyntaxError(f"trailing input {self.peek()[1]!r}")
        return node

    def disjunction(self):
        node = self.conjunction()
        while self.peek() == ("op", "||"):
            self.take()
            node = ("or", node, self.conjunction())
        return node

    def conjunction(self):
        node = self.unary()
        while self.peek() == ("op", "&&"):
            self.take()
            node = ("and", node, self.unary())
        return node

    def unary(self):
        kind, value = self.peek()
        if (kind, value) == ("op", "!"):
            self.take()
            return ("not", self.unary())
        if (kind, value) == ("op", "("):
            self.take()
            node = self.disjunction()
            self.take("op", ")")
            return node
        if kind == "lit":
            self.take()
            return ("const", bool(value))
        name = self.take("id")[1]
        if self.peek() != ("op", "."):
            return ("ref", name)
        self.take()
        attr = self.take("id")[1]
        kind, value = self.peek()
        if kind == "op" and value in _COMPARE:
            self.take()
            literal = self.take("lit")[1]
            return ("cmp", name, attr, value, literal)
        return ("cmp", name, attr, "==", True)


def parse_expression(text: str):
    return _Parser(text).parse()


def _eval(node, state: GlobalState, env: dict[str, Proposition]) -> bool:
    tag = node[0]
    if tag == "cmp":
        _, actor, attr, op, literal = node
        return bool(_COMPARE[op](field_value(state, actor, attr), literal))
    if tag == "not":
        return not _eval(node[1], state, env)
    if tag == "and":
        return _eval(node[1], state, env) and _eval(node[2], state, env)
    if tag == "or":
        return _eval(node[1], state, env) or _eval(node[2], state, env)
    if tag == "const":
        return node[1]
    if tag == "ref":
        prop = env.get(node[1])
        if prop is None:
            raise PropertySyntaxError(f"undefined proposition {node[1]!r}")
        return _eval(prop.tree, state, env)
    raise AssertionError(tag)


@dataclass(frozen=True)
class Proposition:
    name: str
    source: str

    def __post_init__(self):
        object.__setattr__(self, "tree", parse_expression(self.source))

    def __reduce__(self):
        return (Proposition, (self.name, self.source))

    def __call__(self, state: GlobalState) -> bool:
        return _eval(self.tree, state, {})


@dataclass(frozen=True)
class Assertion:
    """An invariant: ``formula`` must hold in every reachable state."""

    name: str
    formula: str
    propositions: tuple[Proposition, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_tree", parse_expression(self.formula))
        object.__setattr__(self, "_env", {p.name: p for p in self.propositions})

    def __call__(self, state: GlobalState) -> bool:
        return _eval(self._tree, state, self._env)

    def __reduce__(self):
        return (Assertion, (self.name, self.formula, self.propositions))


DCN1_PRIMARY = Proposition("DCN1Primary", "DCN1.mode == 1")
DCN2_PRIMARY = Proposition("DCN2Primary", "DCN2.mode == 1")
NO_DUAL_PRIMARY = Assertion("NoDualPrimary", "!(DCN1Primary && DCN2Primary)", (DCN1_PRIMARY, DCN2_PRIMARY))


def evaluate(assertion: Assertion, state: GlobalState) -> bool:
    return assertion(state)


def parse_property(text: str) -> list[Assertion]:
    """Read a ``property { define {...} Assertion {...} }`` block."""
    define = re.search(r"define\s*\{(.*?)\}", text, re.S)
    asserts = re.search(r"Assertion\s*\{(.*?)\}", text, re.S)
    if asserts is None:
        raise PropertySyntaxError("no Assertion block")
    props = []
    if define:
        for item in filter(str.strip, define.group(1).split(";")):
            name, _, expr = item.partition("=")
            if not expr or expr.startswith("="):
                raise PropertySyntaxError(f"bad definition {item.strip()!r}")
            props.append(Proposition(name.strip(), expr.strip()))
    out = []
    for item in filter(str.strip, asserts.group(1).split(";")):
        name, sep, formula = item.partition(":")
        if not sep:
            raise PropertySyntaxError(f"bad assertion {item.strip()!r}")
        out.append(Assertion(name.strip(), formula.strip(), tuple(props)))
    return out


# -- traces ------------------------------------------------------------------

def digest(state: GlobalState) -> str:
    """Hex digest of the canonical serialization; stable across runs."""
    return hashlib.sha1(state.serialize().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class TraceStep:
    digest: str
    label: TransitionLabel
    now: int
    state: GlobalState  # absolute-time state reached by this step


@dataclass(frozen=True)
class CounterexampleTrace:
    initial: GlobalState
    steps: tuple[TraceStep, ...]
    violating_state: GlobalState

    def states(self) -> list[GlobalState]:
        return [self.initial] + [s.state for s in self.steps]


def extract_trace(result: ExplorationResult) -> CounterexampleTrace:
    if result.verdict is not Verdict.VIOLATED or result.violation is None:
        raise NotViolated(f"verdict is {result.verdict.value}")
    return _trace_to(result, result.violation)


def extract_path(result: ExplorationResult, index: int) -> CounterexampleTrace:
    """Shortest explored path to any state, in the same shape as a counterexample."""
    return _trace_to(result, index)


def _trace_to(result: ExplorationResult, index: int) -> CounterexampleTrace:
    steps = []
    last = result.initial
    for _, label, target in result.replay(index):
        steps.append(TraceStep(digest(canonicalize(target)), label, target.now, target))
        last = target
    return CounterexampleTrace(result.initial, tuple(steps), last)


def _value(v) -> str:
    if isinstance(v, Mode):
        return v.name
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, tuple):
        return "[" + ",".join(_value(x) for x in v) + "]"
    return str(v)


def dump_state(state: GlobalState) -> list[str]:
    lines = [f"now={state.now}"]
    for name, snap in state.named_actors().items():
        for f in fields(snap):
            lines.append(f"{name}.{f.name}={_value(getattr(snap, f.name))}")
    for env in state.bag:
        lines.append(f"pending={env}@{env.arrival}")
    return lines


def format_trace(trace: CounterexampleTrace) -> str:
    lines = []
    for i, step in enumerate(trace.steps, start=1):
        env = step.label.executed
        choices = ",".join(_value(c) for c in step.label.choices)
        lines.append(f"step {i} @{step.now} {env} choices=[{choices}]")
    lines.append("")
    lines.extend(dump_state(trace.violating_state))
    return "\n".join(lines) + "\n"


# -- export ------------------------------------------------------------------

def _modes(state: GlobalState) -> list[tuple[str, str]]:
    return [(name, snap.mode.name) for name, snap in state.named_actors().items() if isinstance(snap, NodeState)]


def export_graph(result: ExplorationResult, format: str = "dot", variant: str = "", case: str = "") -> str:
    if format == "dot":
        return _to_dot(result)
    if format == "xml":
        return _to_xml(result, variant, case)
    raise ValueError(f"unknown graph format {format!r}")


def _to_dot(result: ExplorationResult) -> str:
    out = ["digraph statespace {", "  node [shape=box];"]
    for i, state in enumerate(result.states):
        modes = " ".join(f"{n}:{m}" for n, m in _modes(state))
        attrs = f'label="S{i}\\n@{result.abs_time[i]}\\n{modes}"'
        if i == result.violation:
            attrs += ', violating="true", color=red, style=filled, fillcolor="#ffd0d0"'
        out.append(f"  S{i} [{attrs}];")
    for src, label, dst in result.edges:
        env = label.executed
        text = f"{env.receiver}.{env.handler}"
        if label.choices:
            text += " [" + ",".join(_value(c) for c in label.choices) + "]"
        out.append(f'  S{src} -> S{dst} [label="{text}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def _to_xml(result: ExplorationResult, variant: str, case: str) -> str:
    root = ET.Element("statespace", {
        "variant": str(variant),
        "case": str(case),
        "verdict": result.verdict.value,
        "states": str(result.n_states),
        "transitions": str(result.transitions),
    })
    states = ET.SubElement(root, "states")
    for i, state in enumerate(result.states):
        attrs = {"id": f"S{i}", "digest": digest(state), "now": str(result.abs_time[i])}
        attrs.update(_modes(state))
        if i == result.violation:
            attrs["violating"] = "true"
        ET.SubElement(states, "state", attrs)
    transitions = ET.SubElement(root, "transitions")
    for src, label, dst in result.edges:
        env = label.executed
        ET.SubElement(transitions, "transition", {
            "source": f"S{src}",
            "destination": f"S{dst}",
            "receiver": env.receiver,
            "handler": env.handler,
            "choices": ",".join(_value(c) for c in label.choices),
        })
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def stats(result: ExplorationResult) -> dict:
    return {
        "states": result.n_states,
        "transitions": result.transitions,
        "verdict": result.verdict.value,
        "elapsed": result.elapsed,
    }


def mode_changes(result: ExplorationResult) -> set[tuple[Mode, Mode]]:
    """Every (before, after) mode pair of a node changed by some explored edge."""
    changes = set()
    for src, _, dst in result.edges:
        a, b = result.states[src], result.states[dst]
        for (_, before), (_, after) in zip(_modes(a), _modes(b)):
            if before != after:
                changes.add((Mode[before], Mode[after]))
    return changes
