"""Command-line front end.

    nrpcheck run --case 7 --variant baseline --export-trace trace.txt
    nrpcheck run --config scenario.env --export-dot graph.dot
    nrpcheck suite --variant leasing

Exit codes: 0 assertion satisfied (suite: all verdicts as expected),
1 violated (suite: some verdict differs), 2 exploration limit exceeded,
3 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis
from .kernel import INTERLEAVINGS, ModelError, Verdict, explore
from .protocol import Variant
from .scenarios import (
    CASE_DESCRIPTIONS,
    EXPECTED_VERDICTS,
    ConfigError,
    ScenarioConfig,
    build_reference_topology,
    load_config,
    preset_case,
)

EXIT_SATISFIED, EXIT_VIOLATED, EXIT_UNKNOWN, EXIT_CONFIG = 0, 1, 2, 3

_EXIT = {Verdict.SATISFIED: EXIT_SATISFIED, Verdict.VIOLATED: EXIT_VIOLATED, Verdict.UNKNOWN: EXIT_UNKNOWN}


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--interleaving", choices=INTERLEAVINGS)
    p.add_argument("--max-states", type=_positive)
    p.add_argument("--max-depth", type=_positive)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrpcheck", description="Model-check NRP FD failover scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="explore one scenario")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--case", type=int)
    source.add_argument("--config", type=Path)
    run.add_argument("--export-dot", type=Path)
    run.add_argument("--export-xml", type=Path)
    run.add_argument("--export-trace", type=Path)
    _common(run)

    suite = sub.add_parser("suite", help="run all eight preset cases")
    _common(suite)
    return parser


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.interleaving:
        changes["interleaving"] = args.interleaving
    if args.max_states:
        changes["max_states"] = args.max_states
    if args.max_depth:
        changes["max_depth"] = args.max_depth
    return replace(cfg, **changes)


def _scenario(args) -> ScenarioConfig:
    if args.case is not None:
        cfg = preset_case(args.case, args.variant or Variant.BASELINE)
    else:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        cfg = replace(load_config(text), name=str(args.config))
        if args.variant:
            cfg = replace(cfg, variant=Variant(args.variant))
    return _apply_overrides(cfg, args)


def _explore(cfg: ScenarioConfig, workers: int):
    initial = build_reference_topology(cfg)
    return explore(initial, analysis.NO_DUAL_PRIMARY, max_states=cfg.max_states,
                   max_depth=cfg.max_depth, workers=workers)


def run(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        cfg = _scenario(args)
        result = _explore(cfg, args.workers)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG

    description = CASE_DESCRIPTIONS.get(args.case, "") if args.case is not None else ""
    info = analysis.stats(result)
    if not args.quiet:
        title = f"{cfg.name}: {description}" if description else cfg.name
        print(f"{title} [variant={cfg.variant.value}, interleaving={cfg.interleaving}]", file=out)
    print(f"verdict: {info['verdict']}", file=out)
    print(f"states: {info['states']}", file=out)
    print(f"transitions: {info['transitions']}", file=out)
    if result.limit:
        print(f"limit exceeded: {result.limit}", file=out)
    print(f"elapsed: {info['elapsed']:.3f}s", file=out)

    case = args.case if args.case is not None else ""
    if args.export_dot:
        args.export_dot.write_text(analysis.export_graph(result, "dot"), encoding="utf-8")
    if args.export_xml:
        args.export_xml.write_text(
            analysis.export_graph(result, "xml", variant=cfg.variant.value, case=case), encoding="utf-8")
    if result.verdict is Verdict.VIOLATED:
        text = analysis.format_trace(analysis.extract_trace(result))
        if args.export_trace:
            args.export_trace.write_text(text, encoding="utf-8")
        elif not args.quiet:
            print("counterexample:", file=out)
            out.write(text)
    return _EXIT[result.verdict]


def run_suite(args, out=sys.stdout, err=sys.stderr) -> int:
    variant = Variant(args.variant or Variant.BASELINE)
    expected = EXPECTED_VERDICTS[variant]
    rows = []
    ok = True
    for k in range(1, 9):
        try:
            result = _explore(_apply_overrides(preset_case(k, variant), args), args.workers)
        except (ConfigError, ModelError) as exc:
            print(f"error in case {k}: {exc}", file=err)
            return EXIT_CONFIG
        if result.verdict is Verdict.UNKNOWN:
            mark = "?"
            ok = False
        else:
            satisfied = result.verdict is Verdict.SATISFIED
            mark = "✓" if satisfied else "✗"
            ok = ok and satisfied == expected[k - 1]
        rows.append((k, CASE_DESCRIPTIONS[k], mark, result.n_states, result.transitions))

    if not args.quiet:
        print(f"variant: {variant.value}", file=out)
    width = max(len(r[1]) for r in rows)
    print(f"{'Case':<5} {'Configuration for failures':<{width}} Result  States  Transitions", file=out)
    for k, desc, mark, n, t in rows:
        print(f"{k:<5} {desc:<{width}} {mark:<7} {n:>6}  {t:>11}", file=out)
    expected_marks = "".join("✓" if e else "✗" for e in expected)
    print(f"expected: {expected_marks}  got: {''.join(r[2] for r in rows)}  "
          f"{'MATCH' if ok else 'MISMATCH'}", file=out)
    return EXIT_SATISFIED if ok else EXIT_VIOLATED


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    if args.command == "run":
        return run(args)
    return run_suite(args)


if __name__ == "__main__":
    sys.exit(main())
