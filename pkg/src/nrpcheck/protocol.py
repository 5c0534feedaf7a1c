"""Node (DCN) and switch automata of NRP FD and its leasing variant.

Every handler is a pure function from an actor snapshot and the message
arguments to a new snapshot plus a list of :class:`~nrpcheck.kernel.Send`
emissions.  :func:`dispatch` maps kernel envelopes onto these handlers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .kernel import SELF, MessageEnvelope, Send, UnknownHandler


class Mode(enum.IntEnum):
    WAITING = 0
    PRIMARY = 1
    BACKUP = 2
    FAILED = 3


class Variant(str, enum.Enum):
    BASELINE = "baseline"
    BASELINE_NOOPT = "baseline-noopt"
    LEASING = "leasing"

    @property
    def leasing(self) -> bool:
        return self is Variant.LEASING


@dataclass(frozen=True)
class ProtocolParams:
    heartbeat_period: int = 1000
    max_missed_heartbeats: int = 2
    ping_timeout: int = 500
    nrp_timeout: int = 500
    number_of_networks: int = 2
    network_delay: int = 1
    network_delay_for_nrp_ping: int = 1
    ping_send_offset_primary: int = 5
    ping_send_offset_backup: int = 5
    max_switches: int = 99

    @classmethod
    def defaults(cls, variant: Variant | str = Variant.BASELINE, **overrides) -> ProtocolParams:
        variant = Variant(variant)
        base = {}
        if variant.leasing:
            base = dict(ping_timeout=100, nrp_timeout=100, ping_send_offset_backup=15)
        base.update(overrides)
        return cls(**base)

    def check(self) -> None:
        """Raise ValueError unless every per-period event resolves within the period."""
        if self.number_of_networks != 2:
            raise ValueError("only two networks are supported")
        if min(self.heartbeat_period, self.max_missed_heartbeats, self.ping_timeout, self.nrp_timeout) < 1:
            raise ValueError("timing parameters and max_missed_heartbeats must be positive")
        if min(self.network_delay, self.network_delay_for_nrp_ping,
               self.ping_send_offset_primary, self.ping_send_offset_backup) < 0:
            raise ValueError("delays must be non-negative")
        offset = max(self.ping_send_offset_primary, self.ping_send_offset_backup)
        budget = offset + self.ping_timeout + 2 * self.network_delay
        if self.heartbeat_period <= budget:
            raise ValueError(
                f"heartbeat_period={self.heartbeat_period} must exceed ping offset + "
                f"ping_timeout + 2*network_delay = {budget}"
            )


@dataclass(frozen=True)
class ModelOptions:
    """Behavioural knobs shared by all handlers of one model instance."""

    params: ProtocolParams = ProtocolParams()
    variant: Variant = Variant.BASELINE
    event_based_failures: bool = False
    # inclusive window of primary periods whose heartbeats are dropped
    suppress_heartbeat_periods: tuple[int, int] | None = None
    # mode a primary falls back to when no NRP candidate answers
    abdication: Mode | None = None

    @property
    def abdication_mode(self) -> Mode:
        if self.abdication is not None:
            return self.abdication
        return Mode.WAITING if self.variant.leasing else Mode.FAILED

    @property
    def attacker_ceiling(self) -> int:
        if self.suppress_heartbeat_periods is None:
            return 0
        return self.suppress_heartbeat_periods[1] + 1

    def heartbeats_suppressed(self, attacker: int) -> bool:
        window = self.suppress_heartbeat_periods
        return window is not None and window[0] <= attacker <= window[1]


@dataclass(frozen=True, slots=True)
class NodeState:
    id: int
    mode: Mode = Mode.WAITING
    primary: int = -1
    nrp_candidates: tuple[int, int] = (-1, -1)
    nrp_network: int = -1
    nrp_switch_id: int = -1
    heartbeats_missed: tuple[int, int] = (0, 0)
    ping_pending: bool = False
    nrp_pending: bool = True
    become_primary_on_ping_response: bool = False
    init: bool = True
    attacker: int = 0
    lease_strikes: int = 0
    prev_lease_flag: bool = True
    fail_time: int = 0
    network_out: tuple[str, str] = ("", "")

    @property
    def failed(self) -> bool:
        return self.mode is Mode.FAILED


@dataclass(frozen=True, slots=True)
class SwitchState:
    id: int
    network_id: int
    terminal: bool
    neighbor_toward_low: str
    neighbor_toward_high: str
    attached_node: str | None = None
    failed: bool = False
    am_i_nrp: bool = False
    registered_primary: int = 0
    last_ping_from_primary: bool = True
    prev_ping_from_primary: bool = False
    fail_time: int = 0


NODE_CAPACITY = 4
SWITCH_CAPACITY = 10

FAIL_HANDLERS = frozenset({"nodeFail", "switchFail"})


# -- node handlers -----------------------------------------------------------

def _clamp(missed: tuple[int, int], limit: int) -> tuple[int, int]:
    return (min(missed[0], limit), min(missed[1], limit))


def _ping(n: NodeState, network: int, offset: int, opts: ModelOptions) -> list[Send]:
    return [
        Send(n.network_out[network], "pingNRP", (n.id, n.id, n.nrp_switch_id), offset),
        Send(SELF, "ping_timed_out", (), opts.params.ping_timeout),
    ]


def _known_network(n: NodeState, opts: ModelOptions) -> bool:
    return 0 <= n.nrp_network < opts.params.number_of_networks


def _take_over(n: NodeState) -> NodeState:
    return replace(n, mode=Mode.PRIMARY, primary=n.id, heartbeats_missed=(0, 0), nrp_pending=True)


def _next_nrp(n: NodeState, opts: ModelOptions) -> tuple[NodeState, list[Send]]:
    """Move to the next NRP candidate and announce it, or report exhaustion."""
    network = n.nrp_network + 1
    if network < opts.params.number_of_networks:
        switch_id = n.nrp_candidates[network]
        n = replace(n, nrp_network=network, nrp_switch_id=switch_id)
        return n, [Send(n.network_out[network], "new_NRP", (n.id, n.id, network, switch_id))]
    return replace(n, nrp_network=opts.params.number_of_networks), []


def node_run_me(n: NodeState, opts: ModelOptions) -> tuple[NodeState, list[Send]]:
    p = opts.params
    limit = p.max_missed_heartbeats
    sends: list[Send] = []
    if n.mode is Mode.WAITING:
        if n.init:
            if n.id == n.primary:
                n, sends = _next_nrp(replace(n, mode=Mode.PRIMARY), opts)
            else:
                n = replace(n, mode=Mode.BACKUP)
            n = replace(n, init=False)
    elif n.mode is Mode.PRIMARY:
        n = replace(n, attacker=min(n.attacker + 1, opts.attacker_ceiling), nrp_pending=True)
        if _known_network(n, opts):
            sends = _ping(n, n.nrp_network, p.ping_send_offset_primary, opts)
        else:
            # no NRP to ask: let the timeout treat it as unreachable
            sends = [Send(SELF, "ping_timed_out", (), p.ping_timeout)]
        n = replace(n, ping_pending=True)
    elif n.mode is Mode.BACKUP:
        m1, m2 = n.heartbeats_missed[0] + 1, n.heartbeats_missed[1] + 1
        if m1 > limit and m2 > limit:
            if opts.variant is Variant.BASELINE and m1 == m2 == limit + 1:
                n = _take_over(n)
            else:
                n = replace(n, heartbeats_missed=_clamp((m1, m2), limit + 2), nrp_pending=True)
                if _known_network(n, opts):
                    sends = _ping(n, n.nrp_network, p.ping_send_offset_backup, opts)
                    n = replace(n, ping_pending=True,
                                become_primary_on_ping_response=not opts.variant.leasing)
        elif m1 > limit or m2 > limit:
            affected = 0 if m1 > limit else 1
            if n.nrp_network == affected:
                sends = _ping(n, n.nrp_network, p.ping_send_offset_primary, opts)
                n = replace(n, ping_pending=True)
            n = replace(n, heartbeats_missed=_clamp((m1, m2), limit + 2))
        else:
            n = replace(n, heartbeats_missed=(m1, m2))
    sends.append(Send(SELF, "runMe", (), p.heartbeat_period))
    return n, sends


def node_heartbeat(n: NodeState, network_id: int, sender: int) -> NodeState:
    if n.mode is not Mode.BACKUP:
        return n
    missed = list(n.heartbeats_missed)
    missed[0 if network_id == 0 else 1] = 0
    return replace(n, heartbeats_missed=tuple(missed))


def node_ping_nrp_response(n: NodeState, responder: int, lease_now: bool, lease_prev: bool,
                           opts: ModelOptions) -> NodeState:
    if n.mode is Mode.PRIMARY:
        return replace(n, ping_pending=False)
    if n.mode is not Mode.BACKUP:
        return n
    if not opts.variant.leasing:
        return replace(n, ping_pending=False)
    strikes = n.lease_strikes + 1 if not lease_now and not lease_prev else 0
    n = replace(n, lease_strikes=strikes)
    if strikes > 1:
        n = replace(n, ping_pending=False)
    return n


def node_ping_timed_out(n: NodeState, opts: ModelOptions) -> tuple[NodeState, list[Send]]:
    p = opts.params
    if n.mode is Mode.BACKUP:
        if n.ping_pending:
            return replace(n, ping_pending=False, become_primary_on_ping_response=False), []
        if not opts.variant.leasing:
            return replace(_take_over(n), become_primary_on_ping_response=False), []
        if n.lease_strikes > 1:
            n = _take_over(n)
            announce = (n.id, n.id, n.nrp_network, n.nrp_switch_id)
            out = n.network_out[0 if n.nrp_network == 0 else 1]
            return n, [Send(out, "new_NRPBack", announce)]
        return replace(n, nrp_pending=True), []
    if n.mode is Mode.PRIMARY:
        if n.ping_pending:
            n, sends = _next_nrp(n, opts)
            if n.nrp_network >= p.number_of_networks:
                if opts.abdication_mode is Mode.FAILED:
                    n = node_fail(n)
                else:
                    n = replace(n, mode=opts.abdication_mode)
            return replace(n, nrp_pending=True), sends
        if opts.heartbeats_suppressed(n.attacker):
            return n, []
        return n, [
            Send(n.network_out[0], "heartBeat", (0, n.id), p.network_delay),
            Send(n.network_out[1], "heartBeat", (1, n.id), p.network_delay),
        ]
    return n, []


def node_new_nrp(n: NodeState, announced_primary: int, network: int, switch_id: int) -> NodeState:
    if n.mode is Mode.FAILED:
        return n
    return replace(n, nrp_network=network, nrp_switch_id=switch_id)


def node_new_nrp_request_timed_out(n: NodeState) -> NodeState:
    if n.mode is Mode.BACKUP and n.nrp_pending:
        return replace(n, nrp_pending=False, become_primary_on_ping_response=False)
    return n


def node_fail(n: NodeState) -> NodeState:
    return replace(
        n,
        mode=Mode.FAILED,
        primary=-1,
        nrp_network=-1,
        nrp_switch_id=-1,
        heartbeats_missed=(0, 0),
        nrp_pending=True,
        become_primary_on_ping_response=False,
        ping_pending=False,
    )


# -- switch handlers ---------------------------------------------------------

def _route(s: SwitchState, prev_hop: int, opts: ModelOptions, to_node: bool = True) -> str:
    if to_node and s.terminal and prev_hop <= opts.params.max_switches:
        return s.attached_node
    if prev_hop > s.id:
        return s.neighbor_toward_low
    return s.neighbor_toward_high


def switch_forward(s: SwitchState, kind: str, payload: tuple, opts: ModelOptions) -> tuple[SwitchState, list[Send]]:
    """Relay a heartBeat, new_NRP or new_NRPBack one hop; payload[0] is the previous hop."""
    if s.failed:
        return s, []
    if kind == "heartBeat":
        # heartBeat(networkId, senderNode)
        network_id, prev_hop = payload
        target = _route(s, prev_hop, opts)
        return s, [Send(target, kind, (network_id, s.id), opts.params.network_delay)]
    if kind in ("new_NRP", "new_NRPBack"):
        # new_NRP(senderNode, prim, network, switch_id)
        prev_hop, rest = payload[0], tuple(payload[1:])
        prim, _, switch_id = rest
        if s.id == switch_id:
            s = replace(s, am_i_nrp=True, registered_primary=prim)
        else:
            s = replace(s, am_i_nrp=False)
        return s, [Send(_route(s, prev_hop, opts), kind, (s.id,) + rest)]
    raise UnknownHandler(f"switch cannot forward {kind}")


def switch_ping_nrp(s: SwitchState, prev_hop: int, origin_node: int, nrp_id: int,
                    opts: ModelOptions) -> tuple[SwitchState, list[Send]]:
    if s.failed:
        return s, []
    if s.terminal and nrp_id == s.id:
        if opts.variant.leasing:
            s = replace(s, prev_ping_from_primary=s.last_ping_from_primary,
                        last_ping_from_primary=origin_node == s.registered_primary)
            payload = (s.id, s.last_ping_from_primary, s.prev_ping_from_primary)
        else:
            payload = (s.id,)
        if prev_hop <= opts.params.max_switches:
            target = s.neighbor_toward_low
        else:
            target = s.attached_node
        return s, [Send(target, "pingNRP_response", payload)]
    target = _route(s, prev_hop, opts, to_node=False)
    return s, [Send(target, "pingNRP", (s.id, origin_node, nrp_id))]


def switch_ping_nrp_response(s: SwitchState, prev_hop: int, flags: tuple,
                             opts: ModelOptions) -> tuple[SwitchState, list[Send]]:
    if s.failed:
        return s, []
    return s, [Send(_route(s, prev_hop, opts), "pingNRP_response", (s.id,) + tuple(flags))]


def switch_fail(s: SwitchState) -> SwitchState:
    return replace(s, failed=True, am_i_nrp=False)


# -- dispatch ----------------------------------------------------------------

def _node(n: NodeState, env: MessageEnvelope, opts: ModelOptions) -> tuple[NodeState, list[Send]]:
    h, a = env.handler, env.payload
    if h == "runMe":
        return node_run_me(n, opts)
    if h == "ping_timed_out":
        return node_ping_timed_out(n, opts)
    if h == "heartBeat":
        return node_heartbeat(n, a[0], a[1]), []
    if h == "pingNRP_response":
        lease_now, lease_prev = (a[1], a[2]) if len(a) >= 3 else (False, False)
        return node_ping_nrp_response(n, a[0], lease_now, lease_prev, opts), []
    if h in ("new_NRP", "new_NRPBack"):
        return node_new_nrp(n, a[1], a[2], a[3]), []
    if h == "new_NRP_request_timed_out":
        return node_new_nrp_request_timed_out(n), []
    if h == "nodeFail":
        return node_fail(n), []
    raise UnknownHandler(f"Node has no message server {h!r}")


def _switch(s: SwitchState, env: MessageEnvelope, opts: ModelOptions) -> tuple[SwitchState, list[Send]]:
    h, a = env.handler, env.payload
    if h in ("heartBeat", "new_NRP", "new_NRPBack"):
        return switch_forward(s, h, a, opts)
    if h == "pingNRP":
        return switch_ping_nrp(s, a[0], a[1], a[2], opts)
    if h == "pingNRP_response":
        return switch_ping_nrp_response(s, a[0], a[1:], opts)
    if h == "switchFail":
        return switch_fail(s), []
    raise UnknownHandler(f"Switch has no message server {h!r}")


def dispatch(opts: ModelOptions, snapshot, env: MessageEnvelope, choose):
    """Kernel entry point; bind ``opts`` with functools.partial."""
    if opts.event_based_failures and env.handler not in FAIL_HANDLERS and not snapshot.failed:
        # nondeterministic failure before the handler body runs
        if choose():
            if isinstance(snapshot, NodeState):
                return node_fail(snapshot), []
            return switch_fail(snapshot), []
    if isinstance(snapshot, NodeState):
        return _node(snapshot, env, opts)
    if isinstance(snapshot, SwitchState):
        return _switch(snapshot, env, opts)
    raise UnknownHandler(f"no behaviour for {type(snapshot).__name__}")
