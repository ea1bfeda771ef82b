import pytest

_acceptance_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if rep.passed:
        status = "PASS"
    elif rep.skipped:
        status = "FAIL (expected)" if hasattr(rep, "wasxfail") else "SKIP"
    else:
        status = "FAIL"
    _acceptance_results[item.nodeid] = (doc, status)


def _criterion_key(item):
    doc = item[1][0]
    head = doc.split()[0]
    digits = "".join(ch for ch in head if ch.isdigit())
    return (int(digits) if digits else 10**6, doc)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for _, (doc, status) in sorted(_acceptance_results.items(), key=_criterion_key):
        terminalreporter.write_line(f"{status:16s} {doc}")
