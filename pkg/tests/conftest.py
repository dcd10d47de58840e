import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from greyshield.commissioning import commission  # noqa: E402
from greyshield.fallback import FallbackConfig, FallbackPolicy  # noqa: E402
from greyshield.plant import Plant, default_assets  # noqa: E402


@pytest.fixture(scope="session")
def assets():
    return default_assets()


@pytest.fixture(scope="session")
def commissioned():
    """Nominal models, holdout scores and sweep log of the seed-0 plant."""
    return commission(Plant(), 0)


@pytest.fixture(scope="session")
def models(commissioned):
    return commissioned[0]


@pytest.fixture(scope="session")
def fallback(models, assets):
    return FallbackPolicy(FallbackConfig.from_models(models, assets))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary and echo it."""

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
