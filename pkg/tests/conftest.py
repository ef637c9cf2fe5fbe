import pytest

# criterion -> [title, passed so far, seconds]
_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    label, title = marker.args
    entry = _RESULTS.setdefault(label, [title, True, 0.0])
    entry[1] = entry[1] and rep.passed
    entry[2] += rep.duration


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_RESULTS, key=str):
        title, ok, seconds = _RESULTS[label]
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  criterion {label}: {title} ({seconds:.1f} s)")
