"""Timed-actor execution semantics and breadth-first state-space exploration.

A global state is a snapshot of every actor plus a bag of time-tagged
messages.  Execution always consumes a message with the minimal arrival
time; handlers run atomically and may schedule further messages.  States
that differ only by a uniform shift of logical time are identified, which
keeps the state space of periodic models finite.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Sequence

#: Receiver placeholder that resolves to the sending actor.
SELF = "self"

PRIORITY = "priority"
FULL = "full"
INTERLEAVINGS = (PRIORITY, FULL)


class ModelError(Exception):
    """Base class for errors raised while executing a model."""


class BagOverflow(ModelError):
    def __init__(self, actor: str, capacity: int):
        super().__init__(f"message bag of {actor} exceeds its capacity {capacity}")
        self.actor = actor
        self.capacity = capacity


class UnknownHandler(ModelError):
    pass


class ChoiceUnderflow(ModelError):
    pass


class EmptyBag(ModelError):
    pass


class NotEnabled(ModelError):
    pass


@dataclass(frozen=True, slots=True)
class MessageEnvelope:
    sender: str
    receiver: str
    handler: str
    payload: tuple = ()
    arrival: int = 0
    deadline: int | None = None

    def shifted(self, delta: int) -> MessageEnvelope:
        deadline = None if self.deadline is None else self.deadline - delta
        return replace(self, arrival=self.arrival - delta, deadline=deadline)

    def sort_key(self):
        return (
            self.receiver,
            self.handler,
            self.arrival,
            self.payload,
            self.sender,
            -1 if self.deadline is None else self.deadline,
        )

    def __str__(self):
        args = ", ".join(_fmt(v) for v in self.payload)
        return f"{self.receiver}.{self.handler}({args})"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass(frozen=True, slots=True)
class Send:
    """A message emitted by a handler, ``after`` time units from now."""

    receiver: str
    handler: str
    payload: tuple = ()
    after: int = 0
    deadline: int | None = None


@dataclass(frozen=True, slots=True)
class TransitionLabel:
    executed: MessageEnvelope
    choices: tuple[bool, ...] = ()


# dispatch(snapshot, envelope, choose) -> (new snapshot, sends)
Dispatch = Callable[[Any, MessageEnvelope, Callable[[], bool]], "tuple[Any, Sequence[Send]]"]


@dataclass(frozen=True)
class System:
    """Static description of a model: actors, priorities, bag bounds, behaviour."""

    order: tuple[str, ...]
    priority: Mapping[str, int]
    capacity: Mapping[str, int]
    dispatch: Dispatch
    interleaving: str = PRIORITY

    def __post_init__(self):
        if self.interleaving not in INTERLEAVINGS:
            raise ValueError(f"unknown interleaving policy {self.interleaving!r}")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.order)})

    def index(self, actor: str) -> int:
        return self._index[actor]

    def rank(self, env: MessageEnvelope):
        """Service order among messages with equal arrival time."""
        return (
            self.priority.get(env.receiver, 0),
            self._index[env.receiver],
            env.handler,
            env.payload,
            env.sender,
        )


@dataclass(frozen=True)
class GlobalState:
    now: int
    actors: tuple  # snapshots, aligned with system.order
    bag: tuple[MessageEnvelope, ...]
    system: System = field(compare=False, repr=False)

    def actor(self, name: str):
        try:
            return self.actors[self.system.index(name)]
        except KeyError:
            raise KeyError(f"unknown actor {name!r}") from None

    def named_actors(self) -> dict[str, Any]:
        return dict(zip(self.system.order, self.actors))

    def with_actor(self, name: str, snapshot) -> GlobalState:
        i = self.system.index(name)
        actors = self.actors[:i] + (snapshot,) + self.actors[i + 1:]
        return replace(self, actors=actors)

    def serialize(self) -> str:
        """Stable textual form: fixed field order, sorted bag."""
        lines = [f"now={self.now}"]
        for name, snap in zip(self.system.order, self.actors):
            lines.append(f"{name}={snap!r}")
        for env in self.bag:
            lines.append(
                f"msg {env.sender}->{env.receiver}.{env.handler}{env.payload!r}"
                f"@{env.arrival} deadline={env.deadline}"
            )
        return "\n".join(lines)


def initial_state(system: System, actors: Mapping[str, Any], messages: Iterable[MessageEnvelope] = ()) -> GlobalState:
    state = GlobalState(0, tuple(actors[name] for name in system.order), (), system)
    for env in messages:
        state = schedule(state, env)
    return state


def schedule(state: GlobalState, env: MessageEnvelope) -> GlobalState:
    if env.arrival < state.now:
        raise ValueError(f"cannot schedule {env} in the past (now={state.now})")
    capacity = state.system.capacity.get(env.receiver)
    if capacity is not None:
        pending = sum(1 for e in state.bag if e.receiver == env.receiver)
        if pending + 1 > capacity:
            raise BagOverflow(env.receiver, capacity)
    bag = tuple(sorted(state.bag + (env,), key=MessageEnvelope.sort_key))
    return replace(state, bag=bag)


def _expired(env: MessageEnvelope, now: int) -> bool:
    return env.deadline is not None and max(now, env.arrival) > env.deadline


def advance_time(state: GlobalState) -> int:
    if not state.bag:
        raise EmptyBag("no pending messages")
    return min(env.arrival for env in state.bag)


def enabled_at_now(state: GlobalState) -> list[MessageEnvelope]:
    """Live messages with minimal arrival, in service order."""
    live = [env for env in state.bag if not _expired(env, state.now)]
    if not live:
        return []
    t = min(env.arrival for env in live)
    return sorted((env for env in live if env.arrival == t), key=state.system.rank)


def selected(state: GlobalState) -> list[MessageEnvelope]:
    """Messages that the interleaving policy lets the explorer branch on."""
    enabled = enabled_at_now(state)
    if state.system.interleaving == PRIORITY:
        return enabled[:1]
    return enabled


class _Oracle:
    def __init__(self, prefix: Sequence[bool], strict: bool):
        self.prefix = tuple(prefix)
        self.strict = strict
        self.taken: list[bool] = []

    def __call__(self) -> bool:
        i = len(self.taken)
        if i < len(self.prefix):
            value = self.prefix[i]
        elif self.strict:
            raise ChoiceUnderflow(f"handler needs more than {len(self.prefix)} choices")
        else:
            value = False
        self.taken.append(value)
        return value


def _fire(state: GlobalState, env: MessageEnvelope, oracle: _Oracle) -> GlobalState:
    system = state.system
    now = env.arrival
    bag = list(state.bag)
    bag.remove(env)
    bag = tuple(e for e in bag if not _expired(e, now))
    snapshot = state.actor(env.receiver)
    new_snapshot, sends = system.dispatch(snapshot, env, oracle)
    out = replace(state, now=now, bag=bag).with_actor(env.receiver, new_snapshot)
    for s in sends:
        receiver = env.receiver if s.receiver == SELF else s.receiver
        deadline = None if s.deadline is None else now + s.deadline
        out = schedule(out, MessageEnvelope(env.receiver, receiver, s.handler, tuple(s.payload), now + s.after, deadline))
    return out


def execute_event(state: GlobalState, env: MessageEnvelope, choices: Sequence[bool] = ()) -> tuple[GlobalState, TransitionLabel]:
    """Run the handler for ``env`` atomically, resolving choice points from ``choices``."""
    if env not in enabled_at_now(state):
        raise NotEnabled(f"{env} is not enabled at time {state.now}")
    oracle = _Oracle(choices, strict=True)
    target = _fire(state, env, oracle)
    return target, TransitionLabel(env, tuple(oracle.taken))


def canonicalize(state: GlobalState) -> GlobalState:
    if state.now == 0:
        return state
    delta = state.now
    return replace(state, now=0, bag=tuple(env.shifted(delta) for env in state.bag))


def successors(state: GlobalState) -> list[tuple[TransitionLabel, GlobalState]]:
    """All (label, canonical target) pairs: policy-selected messages x choice vectors."""
    out = []
    for env in selected(state):
        pending = deque([()])
        while pending:
            prefix = pending.popleft()
            oracle = _Oracle(prefix, strict=False)
            target = _fire(state, env, oracle)
            taken = tuple(oracle.taken)
            out.append((TransitionLabel(env, taken), canonicalize(target)))
            for j in range(len(prefix), len(taken)):
                pending.append(taken[:j] + (True,))
    return out


class Verdict(str, enum.Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    UNKNOWN = "unknown"


@dataclass
class ExplorationResult:
    verdict: Verdict
    initial: GlobalState
    states: list[GlobalState]
    depth: list[int]
    abs_time: list[int]
    parent: list[tuple[int, TransitionLabel] | None]
    edges: list[tuple[int, TransitionLabel, int]]
    transitions: int
    violation: int | None = None
    limit: str | None = None
    elapsed: float = 0.0

    @property
    def n_states(self) -> int:
        return len(self.states)

    def path_to(self, index: int) -> list[tuple[int, TransitionLabel]]:
        """(source index, label) steps of the BFS tree path from the initial state."""
        steps = []
        while self.parent[index] is not None:
            src, label = self.parent[index]
            steps.append((src, label))
            index = src
        steps.reverse()
        return steps

    def replay(self, index: int) -> list[tuple[GlobalState, TransitionLabel, GlobalState]]:
        """Absolute-time (source, label, target) steps leading to state ``index``."""
        state = self.initial
        steps = []
        for _, label in self.path_to(index):
            env = label.executed.shifted(-state.now)
            target, _ = execute_event(state, env, label.choices)
            steps.append((state, TransitionLabel(env, label.choices), target))
            state = target
        return steps


def _expand_chunk(states: list[GlobalState]):
    return [successors(s) for s in states]


def explore(
    initial: GlobalState,
    holds: Callable[[GlobalState], bool],
    max_states: int = 1_000_000,
    max_depth: int | None = None,
    workers: int = 1,
    keep_edges: bool = True,
) -> ExplorationResult:
    """Breadth-first search over canonical states, checking ``holds`` as an invariant.

    Stops at the first violating state.  The frontier is expanded level by
    level; with ``workers > 1`` successor generation runs in a process pool
    but results are merged in frontier order, so counts and verdicts do not
    depend on the worker count.
    """
    if max_states < 1 or (max_depth is not None and max_depth < 0):
        raise ValueError("exploration limits must be positive")
    started = time.perf_counter()
    root = canonicalize(initial)
    states = [root]
    index = {root: 0}
    depth = [0]
    abs_time = [initial.now]
    parent: list = [None]
    edges: list = []
    transitions = 0
    result = ExplorationResult(Verdict.SATISFIED, initial, states, depth, abs_time, parent, edges, 0)

    def finish(verdict, violation=None, limit=None):
        result.verdict = verdict
        result.violation = violation
        result.limit = limit
        result.transitions = transitions
        result.elapsed = time.perf_counter() - started
        return result

    if not holds(initial):
        return finish(Verdict.VIOLATED, violation=0)

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        level = [0]
        while level:
            if pool is not None:
                chunk = max(1, len(level) // (workers * 4))
                batches = [level[i:i + chunk] for i in range(0, len(level), chunk)]
                expanded = []
                for part in pool.map(_expand_chunk, [[states[i] for i in b] for b in batches]):
                    expanded.extend(part)
            else:
                expanded = None
            next_level = []
            for pos, src in enumerate(level):
                succ = expanded[pos] if expanded is not None else successors(states[src])
                for label, target in succ:
                    dst = index.get(target)
                    if dst is None:
                        if len(states) >= max_states:
                            return finish(Verdict.UNKNOWN, limit="states")
                        d = depth[src] + 1
                        if max_depth is not None and d > max_depth:
                            return finish(Verdict.UNKNOWN, limit="depth")
                        dst = len(states)
                        index[target] = dst
                        states.append(target)
                        depth.append(d)
                        abs_time.append(abs_time[src] + label.executed.arrival)
                        parent.append((src, label))
                        next_level.append(dst)
                        transitions += 1
                        if keep_edges:
                            edges.append((src, label, dst))
                        if not holds(target):
                            return finish(Verdict.VIOLATED, violation=dst)
                    else:
                        transitions += 1
                        if keep_edges:
                            edges.append((src, label, dst))
            level = next_level
    finally:
        if pool is not None:
            pool.shutdown()
    return finish(Verdict.SATISFIED)
