"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary.  Set NRPCHECK_UPDATE_SNAPSHOT=1 to rewrite the count snapshot.
"""

import json
import os
import time
import warnings
from collections import Counter
from pathlib import Path

import pytest

from nrpcheck.analysis import NO_DUAL_PRIMARY, extract_path, extract_trace, format_trace, mode_changes, stats
from nrpcheck.kernel import Verdict, canonicalize, execute_event, explore
from nrpcheck.protocol import Mode, NodeState, SwitchState
from nrpcheck.scenarios import EXPECTED_VERDICTS, build_reference_topology, preset_case

SNAPSHOT = Path(__file__).parent / "data" / "count_snapshot.json"
PERIOD = 1000

REPORT: list[str] = []


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


def timed(case, variant="baseline", **kw):
    cfg = preset_case(case, variant)
    start = time.perf_counter()
    result = explore(build_reference_topology(cfg), NO_DUAL_PRIMARY, max_states=1_000_000, **kw)
    return result, time.perf_counter() - start


def test_1_baseline_verdicts():
    got, slowest = [], 0.0
    for k in range(1, 9):
        r, secs = timed(k)
        got.append(r.verdict is Verdict.SATISFIED)
        slowest = max(slowest, secs)
    marks = "".join("✓" if g else "✗" for g in got)
    ok = tuple(got) == EXPECTED_VERDICTS["baseline"] == (True, False, True, True, True, True, False, False)
    report(1, ok and slowest < 60, f"baseline verdicts {marks}, slowest case {slowest:.2f}s (< 60s)")


def test_2_leasing_soundness(explored):
    rows = [explored(k, "leasing") for k in range(1, 9)]
    all_sat = all(r.verdict is Verdict.SATISFIED and r.limit is None for r in rows)
    full = rows[1]  # failures on every event: the exhaustive run
    ratios = (full.n_states / 15891, full.transitions / 34053)
    within = all(0.1 <= x <= 10 for x in ratios)
    report(2, all_sat and within,
           f"leasing all satisfied={all_sat}; case 2 {full.n_states}/{full.transitions} vs 15891/34053 "
           f"(x{ratios[0]:.2f}/x{ratios[1]:.2f}, within one order of magnitude={within})")


def test_3_case7_counterexample(explored):
    trace = extract_trace(explored(7))
    steps = [(s.now, s.label.executed) for s in trace.steps]

    fails = [(i, now, e.receiver) for i, (now, e) in enumerate(steps) if e.handler == "switchFail"]
    a = sorted(f[2] for f in fails) == ["switchA1", "switchB1"] and all(f[1] == 2500 for f in fails)

    pings = [(i, now) for i, (now, e) in enumerate(steps)
             if e.handler == "pingNRP" and e.receiver == "switchA1" and now > 2500]
    unanswered = bool(pings) and not any(e.handler == "pingNRP_response" and e.receiver == "DCN1"
                                         for now, e in steps[pings[0][0]:])
    b = unanswered and abs(pings[0][1] - 3005) <= 5

    rotate = [(i, now) for i, (now, e) in enumerate(steps)
              if e.receiver == "DCN1" and e.handler == "ping_timed_out" and now > pings[0][1]]
    last = trace.violating_state
    dcn1 = last.actor("DCN1")
    no_nrp = not any(isinstance(x, SwitchState) and x.am_i_nrp and not x.failed for x in last.actors)
    c = bool(rotate) and dcn1.nrp_network == len(dcn1.nrp_candidates) - 1 and no_nrp

    both = all(last.actor(n).mode is Mode.PRIMARY for n in ("DCN1", "DCN2"))
    d = both and last.now >= 4000 and abs(last.now - 4000) <= PERIOD

    ordered = bool(fails and pings and rotate) and max(f[0] for f in fails) < pings[0][0] < rotate[0][0] < len(steps)
    report(3, a and b and c and d and ordered,
           f"case 7: fails@2500={a}, ping@{pings[0][1] if pings else '-'} unanswered={b}, "
           f"candidates exhausted={c}, dual primary @{last.now}={d}, ordering={ordered}")


def _heartbeat_free_periods(trace, backup="DCN2"):
    """Longest run of backup monitoring periods (runMe to runMe) without a heartbeat delivery."""
    best = run = 0
    started = heard = False
    for s in trace.steps:
        e = s.label.executed
        if e.receiver != backup:
            continue
        if e.handler == "heartBeat":
            heard = True
        elif e.handler == "runMe":
            if started:
                run = 0 if heard else run + 1
                best = max(best, run)
            started, heard = True, False
    return best


def test_4_case8_transient(explored):
    params = preset_case(8).params
    trace = extract_trace(explored(8))
    gap = _heartbeat_free_periods(trace)
    primary_alive = all(not s.actor("DCN1").failed for s in trace.states())
    takeover = trace.steps[-1].state.actor("DCN2").mode is Mode.PRIMARY and \
        trace.states()[-2].actor("DCN2").mode is Mode.BACKUP
    baseline_ok = gap > params.max_missed_heartbeats and primary_alive and takeover

    leasing = explored(8, "leasing")
    log = extract_path(leasing, leasing.n_states - 1)
    resets = 0
    for before, step in zip(log.states(), log.steps):
        e = step.label.executed
        if e.receiver == "DCN2" and e.handler == "pingNRP_response" and before.actor("DCN2").mode is Mode.BACKUP:
            resets += step.state.actor("DCN2").lease_strikes == 0
    text = format_trace(log)
    leasing_ok = leasing.verdict is Verdict.SATISFIED and resets >= 1 and "DCN2.pingNRP_response(" in text
    report(4, baseline_ok and leasing_ok,
           f"case 8: {gap} heartbeat-free periods (> {params.max_missed_heartbeats}), primary alive={primary_alive}, "
           f"backup takeover={takeover}; leasing {leasing.verdict.value} with {resets} lease-strike resets")


REFERENCE_COUNTS = {1: (38, 49), 2: (3539, 4677), 3: (113, 138), 4: (114, 134),
                5: (146, 179), 6: (187, 223), 7: (70, 88), 8: (35, 42)}


def test_5_count_regression(explored):
    current = {}
    for k in range(1, 9):
        r = explored(k)
        ref_s, ref_t = REFERENCE_COUNTS[k]
        current[str(k)] = {
            "verdict": r.verdict.value,
            "states": r.n_states,
            "transitions": r.transitions,
            "reference_states": ref_s,
            "reference_transitions": ref_t,
            "delta_states": r.n_states - ref_s,
            "delta_transitions": r.transitions - ref_t,
        }
    if os.environ.get("NRPCHECK_UPDATE_SNAPSHOT"):
        SNAPSHOT.write_text(json.dumps({"baseline": current}, indent=2) + "\n", encoding="utf-8")
    frozen = json.loads(SNAPSHOT.read_text(encoding="utf-8"))["baseline"]
    verdicts_ok = all(frozen[k]["verdict"] == current[k]["verdict"] for k in frozen)
    drift = [k for k in frozen if (frozen[k]["states"], frozen[k]["transitions"])
             != (current[k]["states"], current[k]["transitions"])]
    if drift:
        warnings.warn(f"state/transition counts drifted from snapshot for cases {drift}")
    deltas = ", ".join(f"{k}:{v['delta_states']:+d}/{v['delta_transitions']:+d}" for k, v in current.items())
    report(5, verdicts_ok, f"verdicts match snapshot; count drift in {drift or 'no'} cases; "
                           f"delta vs reference (states/transitions) {deltas}")


def test_6_property_suites(explored):
    # (a) replay soundness on every edge of presets 1 and 7
    replay = all(canonicalize(execute_event(r.states[s], lab.executed, lab.choices)[0]) == r.states[d]
                 for r in (explored(1), explored(7)) for s, lab, d in r.edges)
    # (b) canonical closure of preset 1
    closure = explored(1).verdict is Verdict.SATISFIED and explored(1).limit is None
    # (c) counter clamp and mode-transition closure over every preset and variant
    allowed = {(Mode.WAITING, Mode.PRIMARY), (Mode.WAITING, Mode.BACKUP), (Mode.BACKUP, Mode.PRIMARY),
               (Mode.PRIMARY, Mode.FAILED), (Mode.BACKUP, Mode.FAILED), (Mode.WAITING, Mode.FAILED)}
    clamp = modes = True
    for variant in ("baseline", "baseline-noopt", "leasing"):
        extra = {(Mode.PRIMARY, Mode.WAITING)} if variant == "leasing" else set()
        for k in range(1, 9):
            r = explored(k, variant)
            limit = preset_case(k, variant).params.max_missed_heartbeats + 2
            clamp &= all(max(a.heartbeats_missed) <= limit for s in r.states for a in s.actors
                         if isinstance(a, NodeState))
            modes &= mode_changes(r) <= allowed | extra
    # (d) determinism of preset 2
    runs = [timed(2)[0] for _ in range(2)]
    det = Counter(str(sorted((k, v) for k, v in stats(r).items() if k != "elapsed")) for r in runs)
    determinism = len(det) == 1 and runs[0].states == runs[1].states
    # (e) workers 1 vs 4 on preset 7
    one, four = timed(7, workers=1)[0], timed(7, workers=4)[0]
    workers = (one.n_states, one.transitions, one.verdict) == (four.n_states, four.transitions, four.verdict)
    report(6, replay and closure and clamp and modes and determinism and workers,
           f"(a) replay={replay} (b) closure={closure} (c) clamp={clamp} modes={modes} "
           f"(d) determinism={determinism} (e) workers={workers}")


def _takeover_step(trace, node="DCN2"):
    for before, step in zip(trace.states(), trace.steps):
        if before.actor(node).mode is Mode.BACKUP and step.state.actor(node).mode is Mode.PRIMARY:
            return step.label.executed.handler
    return None


def test_7_optimization_isolation(explored):
    differing = []
    for k in range(1, 9):
        base, noopt = explored(k), explored(k, "baseline-noopt")
        if base.verdict is not Verdict.VIOLATED:
            continue
        direct = _takeover_step(extract_trace(base))
        via = _takeover_step(extract_trace(noopt)) if noopt.verdict is Verdict.VIOLATED else None
        if direct == "runMe" and via != "runMe":
            differing.append(f"case {k}: baseline takes over in runMe, noopt "
                             f"{'via ' + via if via else 'never violates'}")
    report(7, bool(differing), "; ".join(differing) or "no preset separates the two variants")


@pytest.fixture(scope="module", autouse=True)
def _snapshot_exists():
    if not SNAPSHOT.exists() and not os.environ.get("NRPCHECK_UPDATE_SNAPSHOT"):
        pytest.fail(f"missing {SNAPSHOT}; run with NRPCHECK_UPDATE_SNAPSHOT=1 once")
