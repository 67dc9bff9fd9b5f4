import functools
import time

# criterion number -> (title, passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def criterion(number: int, title: str):
    """Record a pass/fail line for an acceptance test; the test itself still raises."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except Exception as exc:
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                ACCEPTANCE[number] = (title, False, f"{msg} [{time.perf_counter() - t0:.1f}s]")
                raise
            ACCEPTANCE[number] = (title, True, f"{detail or ''} [{time.perf_counter() - t0:.1f}s]".strip())

        return run

    return wrap


def acceptance_lines() -> list[str]:
    return [f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}" for n, (title, ok, detail) in sorted(ACCEPTANCE.items())]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_lines():
            terminalreporter.write_line(line)
