from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def golden_sfc_rows():
    rows = []
    path = Path(__file__).parent / "data" / "golden_sfc_b2.txt"
    for line in path.read_text().splitlines():
        pat, b, key, x, y, z = line.split()
        rows.append((pat, int(b), int(key), int(x), int(y), int(z)))
    return rows


# The acceptance tests (tests/test_acceptance.py, test_criterion_*) each carry
# a one-line docstring; echo a PASS/FAIL line per criterion at the end of the
# run so the verdicts are visible regardless of output capture.

@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.name.startswith("test_criterion_"):
        doc = (item.function.__doc__ or "").strip().splitlines()
        rep.criterion_line = doc[0] if doc else item.name


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            label = getattr(rep, "criterion_line", None)
            if label is not None:
                lines.append((label, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for label, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {label}")
