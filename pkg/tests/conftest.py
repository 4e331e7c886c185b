import time

import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


class AcceptanceLog:
    """Records one pass/fail line per criterion, then asserts."""

    def __init__(self):
        self._t0 = None

    def start(self):
        self._t0 = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._t0

    def check(self, number: int, label: str, ok: bool, limit: float | None = None, **metrics):
        runtime = self.elapsed()
        within = limit is None or runtime < limit
        metrics["runtime_s"] = f"{runtime:.3f}" + (f" (< {limit:g})" if limit else "")
        detail = "  ".join(f"{k}={v}" for k, v in metrics.items())
        passed = bool(ok) and within
        _RESULTS[number] = (label, passed, detail)
        assert ok, f"criterion {number} failed: {detail}"
        assert within, f"criterion {number} too slow: {runtime:.2f}s"


@pytest.fixture
def acceptance():
    log = AcceptanceLog()
    log.start()
    return log


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        label, passed, detail = _RESULTS[number]
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{tag} [{number:2d}] {label}  {detail}")
