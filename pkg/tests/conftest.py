from pathlib import Path

import numpy as np
import pytest

from rsucoal import Scenario

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def two_rsu(alpha=0.0, delta=1.0, policy="discount"):
    """Two RSUs, two vehicles each way, one chunk each, every pair meets at delta=1."""
    return Scenario(
        positions=[[0.0, 0.0], [1.0, 0.0]],
        traffic=[[0, 2], [2, 0]],
        chunks_per_vehicle=1,
        class_weights=(0.6, 0.5),
        beta=1.0,
        alpha=alpha,
        delta=delta,
        duplicate_class_policy=policy,
    )


def random_scenario(seed, n, n_classes=3, delta=0.8, alpha=10.0, policy="discount",
                    integer_pairs=False, per_rsu=True):
    rng = np.random.default_rng(seed)
    if integer_pairs:
        # all RSUs on one spot, delta = 1: meeting counts equal min(K_ij, K_ji)
        positions = np.zeros((n, 2))
        delta = 1.0
    else:
        positions = rng.uniform(0, 3, size=(n, 2))
    if per_rsu:
        k = rng.integers(1, 26, size=n).astype(float)
        traffic = np.repeat(k[:, None], n, axis=1)
    else:
        traffic = rng.integers(0, 26, size=(n, n)).astype(float)
    np.fill_diagonal(traffic, 0)
    weights = tuple(sorted(rng.uniform(0.3, 1.0, size=n_classes), reverse=True))
    return Scenario(positions=positions, traffic=traffic, chunks_per_vehicle=10,
                    class_weights=weights, beta=1.0, alpha=alpha, delta=delta,
                    duplicate_class_policy=policy)


@pytest.fixture
def example():
    return two_rsu()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for text in ACCEPTANCE_LINES:
            terminalreporter.write_line(text)
