import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vemsg.mesh import generate_voronoi

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: list[str] = []


class CriterionLog:
    """Collects sub-checks of one acceptance criterion and emits a single line."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.parts: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.parts.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.parts) and all(ok for _, ok, _ in self.parts)

    def line(self) -> str:
        body = "; ".join(f"{n} {'ok' if ok else 'FAILED'}{f' ({d})' if d else ''}" for n, ok, d in self.parts)
        return f"CRITERION {self.number} {'PASS' if self.passed else 'FAIL'}: {self.title} | {body}"

    def finish(self) -> None:
        text = self.line()
        _CRITERIA.append(text)
        print(text)
        failed = [f"{n} ({d})" for n, ok, d in self.parts if not ok]
        assert not failed, "; ".join(failed)


@pytest.fixture
def criterion():
    def make(number: int, title: str) -> CriterionLog:
        return CriterionLog(number, title)

    return make


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def voronoi100():
    return generate_voronoi((0.0, 1.0, 0.0, 1.0), 100, 20, 42)


def polygon_moments(xy: np.ndarray) -> dict[str, float]:
    """Exact integrals of 1, x, y, x^2, xy, y^2 over a simple CCW polygon (Green's theorem)."""
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    return {
        "1": c.sum() / 2,
        "x": ((x + xn) * c).sum() / 6,
        "y": ((y + yn) * c).sum() / 6,
        "xx": ((x * x + x * xn + xn * xn) * c).sum() / 12,
        "yy": ((y * y + y * yn + yn * yn) * c).sum() / 12,
        "xy": ((x * yn + 2 * x * y + 2 * xn * yn + xn * y) * c).sum() / 24,
    }


@pytest.fixture(scope="session")
def moments():
    return polygon_moments
