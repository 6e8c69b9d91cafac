import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, max_examples=20, derandomize=True, print_blob=True)
settings.load_profile("repo")

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Store the outcome of an acceptance criterion for the end-of-run summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        prev = _CRITERIA.get(number)
        if prev is not None:
            passed = passed and prev[0]
            detail = f"{prev[1]}; {detail}"
        _CRITERIA[number] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
