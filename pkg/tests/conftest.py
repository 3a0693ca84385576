import pytest

from lipsafe.environments import hilly_jumper, muddy_jumper
from lipsafe.safety import ground_truth_safe


@pytest.fixture(scope="session")
def muddy():
    return muddy_jumper()


@pytest.fixture(scope="session")
def hilly():
    return hilly_jumper()


@pytest.fixture(scope="session")
def muddy_oracle(muddy):
    return ground_truth_safe(muddy)


@pytest.fixture(scope="session")
def hilly_oracle(hilly):
    return ground_truth_safe(hilly)


#: criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
