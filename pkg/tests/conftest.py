import math

import pytest

from remotebell.detection import DetectorBank
from remotebell.model import EffectiveTwoPhotonState

REF_ETA = 0.81 * math.pi / 4
REF_ETA_F = 1.12 * math.pi / 4
CHSH_ANGLES = (78.5, 33.5, 45.0, 0.0)


@pytest.fixture
def reference_state():
    return EffectiveTwoPhotonState(REF_ETA_F, 0.0, p_pair=1.0)


@pytest.fixture
def ideal_bank():
    return DetectorBank()


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict; printed in the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
