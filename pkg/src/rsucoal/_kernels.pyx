# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernels.

Both routines mirror ``rsucoal._purepy`` operation for operation, so the two
backends return bitwise-identical values and the same argmax.
"""
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free


cdef double _leaf_max(const double[:, ::1] unary, const double[:, :, :, ::1] pair,
                      int* digits, int depth, int size, int n_classes,
                      double prefix) noexcept nogil:
    cdef double best = -INFINITY
    cdef double acc, val
    cdef int c, j
    for c in range(n_classes):
        acc = unary[depth, c]
        for j in range(depth):
            acc = acc + pair[j, depth, digits[j], c]
        val = prefix + acc
        if depth + 1 < size:
            digits[depth] = c
            val = _leaf_max(unary, pair, digits, depth + 1, size, n_classes, val)
        if val > best:
            best = val
    return best


cdef bint _first_at_least(const double[:, ::1] unary, const double[:, :, :, ::1] pair,
                          int* digits, int depth, int size, int n_classes,
                          double prefix, double threshold, double* found) noexcept nogil:
    cdef double acc, val
    cdef int c, j
    for c in range(n_classes):
        acc = unary[depth, c]
        for j in range(depth):
            acc = acc + pair[j, depth, digits[j], c]
        val = prefix + acc
        digits[depth] = c
        if depth + 1 < size:
            if _first_at_least(unary, pair, digits, depth + 1, size, n_classes,
                               val, threshold, found):
                return True
        elif val >= threshold:
            found[0] = val
            return True
    return False


def assignment_search(const double[:, ::1] unary, const double[:, :, :, ::1] pair,
                      double base, double tol):
    """Exhaustive class-assignment search; see ``_purepy.assignment_search``."""
    cdef int size = unary.shape[0]
    cdef int n_classes = unary.shape[1]
    cdef int* digits
    cdef double best, found = 0.0
    if size == 0:
        raise ValueError("empty coalition")
    digits = <int*> malloc(size * sizeof(int))
    if digits == NULL:
        raise MemoryError()
    try:
        with nogil:
            best = _leaf_max(unary, pair, digits, 0, size, n_classes, base)
            _first_at_least(unary, pair, digits, 0, size, n_classes, base,
                            best - tol, &found)
        return found, [digits[k] for k in range(size)]
    finally:
        free(digits)


cdef void _partition_walk(const double[::1] values, int n, int k, int n_blocks,
                          long* masks, int* rgs, int* best_rgs,
                          double* best, double tol) noexcept nogil:
    cdef int b, e
    cdef double total
    if k == n:
        total = 0.0
        for b in range(n_blocks):
            total = total + values[masks[b]]
        if total > best[0] + tol:
            best[0] = total
            for e in range(n):
                best_rgs[e] = rgs[e]
        return
    for b in range(n_blocks + 1):
        rgs[k] = b
        if b == n_blocks:
            masks[b] = 0
        masks[b] = masks[b] | (1L << k)
        if b == n_blocks:
            _partition_walk(values, n, k + 1, n_blocks + 1, masks, rgs, best_rgs, best, tol)
        else:
            _partition_walk(values, n, k + 1, n_blocks, masks, rgs, best_rgs, best, tol)
        masks[b] = masks[b] & ~(1L << k)


def partition_search(const double[::1] values, int n, double tol):
    """Best partition by total block value; see ``_purepy.partition_search``."""
    cdef long* masks
    cdef int* rgs
    cdef int* best_rgs
    cdef double best = -INFINITY
    if n < 1:
        raise ValueError("n must be positive")
    if values.shape[0] != (1 << n):
        raise ValueError("values must be indexed by all 2**n subset masks")
    masks = <long*> malloc(n * sizeof(long))
    rgs = <int*> malloc(n * sizeof(int))
    best_rgs = <int*> malloc(n * sizeof(int))
    if masks == NULL or rgs == NULL or best_rgs == NULL:
        free(masks); free(rgs); free(best_rgs)
        raise MemoryError()
    try:
        with nogil:
            _partition_walk(values, n, 0, 0, masks, rgs, best_rgs, &best, tol)
        return best, [best_rgs[e] for e in range(n)]
    finally:
        free(masks)
        free(rgs)
        free(best_rgs)
