def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines after the run, in criterion order."""
    module = None
    for name, mod in list(__import__("sys").modules.items()):
        if name.endswith("test_acceptance") and hasattr(mod, "SUMMARY"):
            module = mod
    if module is None or not module.SUMMARY:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.SUMMARY, key=lambda text: int(text.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
