import os

# single-threaded BLAS keeps training runs bitwise reproducible
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import pytest

_OUTCOMES: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _OUTCOMES.setdefault(number, {"title": title, "passed": True, "ran": False, "details": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["ran"] = True
        entry["passed"] &= rep.passed
        details = [str(v) for k, v in item.user_properties if k == "detail"]
        entry["details"] += details
        if rep.failed and not details and call.excinfo is not None:
            entry["details"].append(str(call.excinfo.value).splitlines()[0][:160])


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        e = _OUTCOMES[number]
        status = ("PASS" if e["passed"] else "FAIL") if e["ran"] else "NOT RUN"
        detail = "; ".join(dict.fromkeys(d for d in e["details"] if d))
        terminalreporter.write_line(f"criterion {number:>2} {status:<7} {e['title']}" + (f"  [{detail}]" if detail else ""))
