from acceptance_log import RESULTS, ordered_labels


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in ordered_labels():
        ok, title, detail = RESULTS[label]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label:>3}. {title}: {detail}")
