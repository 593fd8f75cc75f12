"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    key = props["criterion"]
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _, prev, notes = _ACCEPTANCE.get(key, (None, "PASS", []))
        status = "FAIL" if failed or prev == "FAIL" else "PASS"
        if "detail" in props:
            notes = notes + [props["detail"]]
        _ACCEPTANCE[key] = (props.get("label", ""), status, notes)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        label, status, notes = _ACCEPTANCE[key]
        suffix = f" ({'; '.join(notes)})" if notes else ""
        terminalreporter.write_line(f"[{status}] criterion {key}: {label}{suffix}")
