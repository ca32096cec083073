from collections import defaultdict

import pytest

from phyauth.scenario import load_scenario, reference_scenario_path

# criterion number -> [title, outcomes, notes]
_CRITERIA: dict[int, list] = {}
_NOTES: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture(scope="session")
def reference():
    return load_scenario(reference_scenario_path())


@pytest.fixture
def note(request):
    """Attach a diagnostic line to the test's acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")

    def add(text: str) -> None:
        if marker is not None:
            _NOTES[marker.args[0]].append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry = _CRITERIA.setdefault(marker.args[0], [marker.args[1], []])
        entry[1].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        status = "PASS" if outcomes and all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({sum(outcomes)}/{len(outcomes)} checks)")
        for text in _NOTES.get(number, []):
            terminalreporter.write_line(f"    {text}")
