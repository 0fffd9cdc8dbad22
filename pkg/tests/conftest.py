"""Collects the outcome of every acceptance criterion and prints one line per criterion at the end of the run."""

_RESULTS = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _RESULTS[props["criterion"]] = (report.outcome, props.get("summary", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        outcome, summary = _RESULTS[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {summary}")
