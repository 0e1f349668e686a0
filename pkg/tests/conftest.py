import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, elapsed = results[number]
        terminalreporter.write_line(f"ACCEPTANCE {number} {status} {title} ({elapsed:.1f}s)")
