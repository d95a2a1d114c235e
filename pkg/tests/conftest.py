import pytest

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long exhaustive sweeps")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _record
