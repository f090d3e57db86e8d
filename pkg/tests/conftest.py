import pytest


def pytest_runtest_makereport(item, call):
    # One visible pass/fail line per acceptance criterion.
    if call.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    name = item.name
    status = "PASS" if call.excinfo is None else "FAIL"
    print(f"\n[ACCEPTANCE] {name}: {status}")
