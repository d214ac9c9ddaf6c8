import pytest


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run opt-in reproductions that take minutes")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction, needs --run-slow")
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by the test")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            case = item.callspec.id if hasattr(item, "callspec") else ""
            item.user_properties.append(("criterion", mark.args[0].format(case=case)))
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="opt-in, use --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for key in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(key, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" not in props or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and key != "skipped":
                continue
            status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[key]
            lines.append((props["criterion"], status, props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(lines):
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())
