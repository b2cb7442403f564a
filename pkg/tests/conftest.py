import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

_outcomes = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_outcomes] = {}


@pytest.fixture
def criterion(request):
    """``criterion(k, passed, detail)`` records the outcome of acceptance criterion ``k``.

    Parametrised criteria call it once per case; the summary line joins them.
    """
    outcomes = request.config.stash[_outcomes]

    def record(k: int, passed: bool, detail: str) -> bool:
        prev_ok, prev = outcomes.get(k, (True, ""))
        outcomes[k] = (prev_ok and bool(passed), f"{prev}; {detail}" if prev else detail)
        print(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = config.stash.get(_outcomes, {})
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(outcomes):
        passed, detail = outcomes[k]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {k:2d}: {detail}")
