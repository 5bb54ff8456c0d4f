import pytest

from privbess.config import load_scenario
from privbess.engine import run


@pytest.fixture(scope="session")
def discharge():
    return load_scenario("discharge_paper")


@pytest.fixture(scope="session")
def discharge_trace(discharge):
    return run(discharge)


@pytest.fixture(scope="session")
def charge_trace():
    return run(load_scenario("charge_paper"))


@pytest.fixture(scope="session")
def attack_traces():
    sc = load_scenario("attack_privacy")
    return run(sc.replace(scheme="baseline")), run(sc)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Recorder for acceptance sub-checks: ``acceptance(criterion, name, ok, detail)``."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(criterion, name, ok, detail):
        store.setdefault(criterion, []).append((name, bool(ok), detail))
        print(f"criterion {criterion} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPTANCE, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(store):
        checks = store[criterion]
        ok = all(c[1] for c in checks)
        parts = "; ".join(f"{name} {'PASS' if good else 'FAIL'}: {detail}" for name, good, detail in checks)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {parts}")
