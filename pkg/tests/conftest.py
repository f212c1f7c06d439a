"""Collects acceptance-criterion outcomes and prints them after the run."""

import pytest

_CRITERIA = {}


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the criterion summary."""

    def add(text):
        request.node.user_properties.append(("note", text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or rep.outcome != "passed":
        notes = "; ".join(v for k, v in item.user_properties if k == "note")
        prev = _CRITERIA.get(mark.args[0])
        status = {"passed": "PASS", "failed": "FAIL"}.get(rep.outcome, "SKIP")
        # a criterion split over several tests passes only if all of them do
        if prev is not None:
            status = max(prev[0], status, key=("PASS", "SKIP", "FAIL").index)
            if prev[2]:
                notes = prev[2] + ("; " + notes if notes else "")
        _CRITERIA[mark.args[0]] = (status, mark.args[1], notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, notes = _CRITERIA[num]
        line = f"C{num:<3}{status}  {title}"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))
