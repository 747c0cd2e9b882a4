"""Pure-Python (numpy) twins of the compiled kernels in ``_kernels.pyx``.

Floating-point additions happen in the same order as in the compiled code so
both backends agree bit for bit.
"""
from __future__ import annotations

import numpy as np


def assignment_search(unary, pair, base, tol):
    """Maximise a pairwise class-assignment objective by full enumeration.

    The objective of a tuple ``b`` of length ``s`` is::

        base + sum_k (unary[k, b_k] + sum_{j<k} pair[j, k, b_j, b_k])

    Tuples are visited in lexicographic order (member 0 most significant).
    Returns the first tuple whose objective is within ``tol`` of the maximum,
    together with that tuple's own objective.
    """
    unary = np.ascontiguousarray(unary, dtype=np.float64)
    pair = np.ascontiguousarray(pair, dtype=np.float64)
    size, n_classes = unary.shape
    if size == 0:
        raise ValueError("empty coalition")

    values = np.array([base], dtype=np.float64)
    for depth in range(size):
        n_prefix = values.shape[0]
        prefix_ids = np.arange(n_prefix)
        acc = np.broadcast_to(unary[depth], (n_prefix, n_classes))
        for j in range(depth):
            digit_j = (prefix_ids // n_classes ** (depth - 1 - j)) % n_classes
            acc = acc + pair[j, depth][digit_j]
        values = (values[:, None] + acc).ravel()

    best = values.max()
    index = int(np.argmax(values >= best - tol))
    digits = [0] * size
    rest = index
    for k in range(size - 1, -1, -1):
        rest, digits[k] = divmod(rest, n_classes)
    return float(values[index]), digits


def partition_search(values, n, tol):
    """Scan every set partition of ``range(n)`` for the largest total value.

    ``values[mask]`` is the value of the coalition whose members are the set
    bits of ``mask``. Partitions are walked in restricted-growth-string order;
    a later partition replaces the incumbent only if it beats it by more than
    ``tol``. Returns ``(best_total, rgs)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    values = [float(v) for v in values]
    if len(values) != 1 << n:
        raise ValueError("values must be indexed by all 2**n subset masks")

    best = -np.inf
    best_rgs: list[int] = []
    rgs = [0] * n
    masks = [0] * n

    def walk(k: int, n_blocks: int) -> None:
        nonlocal best, best_rgs
        if k == n:
            total = 0.0
            for b in range(n_blocks):
                total = total + values[masks[b]]
            if total > best + tol:
                best = total
                best_rgs = rgs.copy()
            return
        bit = 1 << k
        for b in range(n_blocks + 1):
            rgs[k] = b
            if b == n_blocks:
                masks[b] = bit
                walk(k + 1, n_blocks + 1)
            else:
                masks[b] |= bit
                walk(k + 1, n_blocks)
            masks[b] &= ~bit

    walk(0, 0)
    return best, best_rgs
