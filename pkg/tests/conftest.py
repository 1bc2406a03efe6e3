import pytest

_VERDICTS: dict[int, tuple[str, str]] = {}


class Verdicts:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, number: int, ok: bool, detail: str) -> None:
        line = (("PASS" if ok else "FAIL"), detail)
        _VERDICTS[number] = line
        print(f"criterion {number}: {line[0]} - {detail}")


@pytest.fixture(scope="session")
def verdicts():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        status, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")
