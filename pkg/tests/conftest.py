import pytest

_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(cid, ok, detail)`` records an acceptance outcome and asserts it."""

    def record(cid: str, ok: bool, detail: str):
        _RESULTS[cid] = (bool(ok), detail)
        print(f"{cid}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{cid}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: int(c.split()[-1])):
        ok, detail = _RESULTS[cid]
        terminalreporter.write_line(f"{cid}: {'PASS' if ok else 'FAIL'}  {detail}")
