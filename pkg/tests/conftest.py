import functools
import sys

import pytest

from nrpcheck.analysis import NO_DUAL_PRIMARY
from nrpcheck.kernel import explore
from nrpcheck.scenarios import build_reference_topology, preset_case


@functools.lru_cache(maxsize=None)
def _explored(case, variant="baseline", interleaving="priority"):
    cfg = preset_case(case, variant, interleaving=interleaving)
    return explore(build_reference_topology(cfg), NO_DUAL_PRIMARY, max_states=cfg.max_states)


@pytest.fixture(scope="session")
def explored():
    """explored(case, variant="baseline", interleaving="priority") -> cached ExplorationResult"""
    return _explored


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.REPORT:
            terminalreporter.write_line(line)
