"""Shared combinatorial structures for the subspace-scan kernels.

Both kernel backends consume the same canonical enumeration of subspaces so
their outputs are index-for-index identical.  A t-dimensional subspace of an
M-dimensional GF(2) space is represented by its unique reduced row-echelon
basis; enumeration order is: pivot-column combinations in lexicographic
order, then the free-entry bit pattern as an increasing integer (first free
position, scanned row-major, takes the most significant bit).

Bit convention matches gf2.py: component 0 of an M-bit vector is bit M-1.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=None)
def subspace_structures(M: int, t: int) -> np.ndarray:
    """RREF bases of all t-dim subspaces of F_2^M as a (S, t) uint64 array."""
    if t == 0:
        return np.zeros((1, 0), dtype=np.uint64)
    if t > M:
        raise ValueError(f"subspace dimension {t} exceeds space dimension {M}")
    out = []
    for pivots in combinations(range(M), t):
        pivot_set = set(pivots)
        # free positions, row-major; entry (i, c) is free iff c > pivots[i]
        # and c is not itself a pivot column
        free = [
            (i, c)
            for i in range(t)
            for c in range(pivots[i] + 1, M)
            if c not in pivot_set
        ]
        nfree = len(free)
        base = [1 << (M - 1 - p) for p in pivots]
        for x in range(1 << nfree):
            rows = list(base)
            for k, (i, c) in enumerate(free):
                if (x >> (nfree - 1 - k)) & 1:
                    rows[i] |= 1 << (M - 1 - c)
            out.append(rows)
    return np.array(out, dtype=np.uint64)


def lift_rows(rows_q: np.ndarray, free_cols: np.ndarray, M: int, nbits: int) -> np.ndarray:
    """Scatter quotient-space rows into the ambient nbits-bit space.

    Quotient component i becomes ambient component free_cols[i].
    """
    rows_q = np.asarray(rows_q, dtype=np.uint64)
    out = np.zeros_like(rows_q)
    for i, c in enumerate(np.asarray(free_cols, dtype=np.int64)):
        bit = (rows_q >> np.uint64(M - 1 - i)) & np.uint64(1)
        out |= bit << np.uint64(nbits - 1 - int(c))
    return out


def span_elements(basis_rows: np.ndarray) -> np.ndarray:
    """All XOR combinations of each row-set: (S, k) uint64 -> (S, 2^k)."""
    basis_rows = np.asarray(basis_rows, dtype=np.uint64)
    S, k = basis_rows.shape
    el = np.zeros((S, 1), dtype=np.uint64)
    for j in range(k):
        el = np.concatenate([el, el ^ basis_rows[:, j : j + 1]], axis=1)
    return el
