"""Exhaustive baselines: set-partition enumeration and the optimal partition."""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from . import kernels
from .formation import Partition
from .model import MONEY_TOL, Scenario

MAX_N = 12


class PartitionSizeError(ValueError):
    pass


def _check_size(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise PartitionSizeError(f"exhaustive search supports 1 <= n <= {MAX_N}, got n={n}")


@lru_cache(maxsize=None)
def bell_number(n: int) -> int:
    """B(n) via B(n+1) = sum_k C(n, k) B(k)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1
    return sum(comb(n - 1, k) * bell_number(k) for k in range(n))


class PartitionIterator:
    """Restricted growth strings of length ``n`` in lexicographic order.

    ``a[0] = 0`` and ``a[k] <= 1 + max(a[:k])``; each string names one set
    partition of ``range(n)`` (element ``k`` sits in block ``a[k]``).
    """

    def __init__(self, n: int):
        _check_size(n)
        self.n = n
        self.current = [0] * n
        self.exhausted = False
        self._started = False
        # prefix maxima: self._top[k] = max(a[:k+1])
        self._top = [0] * n

    def __iter__(self):
        return self

    def __next__(self) -> Partition:
        return Partition.from_rgs(self.next_rgs())

    def next_rgs(self) -> tuple[int, ...]:
        if self.exhausted:
            raise StopIteration
        if not self._started:
            self._started = True
            return tuple(self.current)
        a, top = self.current, self._top
        k = self.n - 1
        while k > 0 and a[k] > top[k - 1]:
            k -= 1
        if k == 0:
            self.exhausted = True
            raise StopIteration
        a[k] += 1
        top[k] = max(top[k - 1], a[k])
        for j in range(k + 1, self.n):
            a[j] = 0
            top[j] = top[k]
        return tuple(a)


def enumerate_partitions(n: int):
    """Yield every partition of ``range(n)`` exactly once (B(n) in total)."""
    return PartitionIterator(n)


def subset_values(scenario: Scenario) -> np.ndarray:
    """``v(S)`` for every member bitmask; entry 0 (empty set) is 0."""
    game = scenario.game
    values = np.zeros(1 << scenario.n)
    for mask in range(1, 1 << scenario.n):
        values[mask] = game.value(mask)
    return values


def optimal_partition(scenario: Scenario) -> tuple[Partition, float]:
    """Partition maximising total value (equivalently, mean payoff per RSU).

    Ties keep the first partition in restricted-growth order.
    """
    _check_size(scenario.n)
    total, rgs = kernels.partition_search(subset_values(scenario), scenario.n, MONEY_TOL)
    return Partition.from_rgs(rgs), float(total)
