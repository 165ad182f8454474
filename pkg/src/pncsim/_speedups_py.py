"""Pure-NumPy implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (or when
PNCSIM_PURE=1).  Semantics are identical to _speedups.pyx; the parity test
suite asserts element-wise equality between the two backends.
"""

from __future__ import annotations

import numpy as np

from .kernels_common import span_elements

BACKEND_NAME = "python"

_VITERBI_G1 = 0o171
_VITERBI_G2 = 0o133


def xor_min_dist2(points: np.ndarray) -> np.ndarray:
    """delta[e] = min_i |p[i] - p[i^e]|^2 over a power-of-two point table."""
    p = np.asarray(points, dtype=complex)
    n = p.size
    idx = np.arange(n)
    d2 = np.abs(p[:, None] - p[None, :]) ** 2
    per_pair = d2[idx[:, None], idx[:, None] ^ idx[None, :]]  # [i, e]
    delta = per_pair.min(axis=0)
    delta[0] = 0.0
    return delta


def sfs_delta_tables(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Coincidence-aware distance tables at a singular-fade channel.

    Returns (delta_pos, coinc): delta_pos[e] is the minimum squared distance
    over non-coincident pairs (i, i^e) (+inf when every pair coincides) and
    coinc[e] counts coincident unordered pairs with XOR difference e.
    """
    p = np.asarray(points, dtype=complex)
    n = p.size
    idx = np.arange(n)
    ix = idx[:, None] ^ idx[None, :]
    d2 = np.abs(p[:, None] - p[None, :]) ** 2
    per_pair = d2[idx[:, None], ix]
    tol2 = tol * tol
    coincident = per_pair <= tol2
    coincident[:, 0] = False
    delta_pos = np.where(coincident, np.inf, per_pair).min(axis=0)
    delta_pos[0] = np.inf
    coinc = (coincident & (idx[:, None] < ix)).sum(axis=0).astype(np.int64)
    return delta_pos, coinc


def subspace_scan(
    rows_lifted: np.ndarray,
    d_basis: np.ndarray,
    delta_pos: np.ndarray,
    coinc: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Score every kernel subspace K = span(d_basis) + span(rows_lifted[s]).

    Returns (viol, score) per subspace: viol counts coincident pairs whose
    difference falls outside K (unresolved ambiguity), score is the smallest
    delta_pos value outside K (the separation the mapping achieves).
    """
    rows_lifted = np.asarray(rows_lifted, dtype=np.uint64)
    d_basis = np.asarray(d_basis, dtype=np.uint64)
    S = rows_lifted.shape[0]
    el = span_elements(rows_lifted)  # (S, 2^t)
    for b in d_basis:
        el = np.concatenate([el, el ^ b], axis=1)
    elems = el.astype(np.int64)  # (S, 2^q), values < 2^nbits

    total_coinc = int(coinc.sum())
    viol = total_coinc - coinc[elems].sum(axis=1)

    # rank elements in the delta_pos ascending order; the first rank gap is
    # the cheapest difference the subspace fails to absorb
    n = delta_pos.size
    order = np.lexsort((np.arange(n), delta_pos))
    rank_of = np.empty(n, dtype=np.int64)
    rank_of[order] = np.arange(n)
    sorted_vals = delta_pos[order]
    ranks = np.sort(rank_of[elems], axis=1)
    width = ranks.shape[1]
    hit = ranks == np.arange(width)[None, :]
    gap = np.where(hit.all(axis=1), width, np.argmin(hit, axis=1))
    score = sorted_vals[gap]
    return viol.astype(np.int64), score.astype(np.float64)


def viterbi_decode_pairs(llr_pairs: np.ndarray) -> np.ndarray:
    """ML sequence decode of the terminated 64-state (171,133) mother code.

    llr_pairs[t] holds the two output-bit LLRs of step t (0.0 = punctured);
    positive LLR favors bit 0.  The path is constrained to start and end in
    state 0.  Returns the decoded input bits, tail steps included.
    """
    llr = np.asarray(llr_pairs, dtype=np.float64)
    steps = llr.shape[0]
    states = np.arange(64)
    # branch structure: from state s with input b, window w = (b<<6)|s
    out1 = np.empty((64, 2), dtype=np.int64)
    out2 = np.empty((64, 2), dtype=np.int64)
    for b in (0, 1):
        w = (b << 6) | states
        out1[:, b] = _popcount_parity(w & _VITERBI_G1)
        out2[:, b] = _popcount_parity(w & _VITERBI_G2)
    # next state = w >> 1 = (b<<5) | (s>>1); predecessors of ns are
    # s in {2k, 2k+1} with k = ns & 0x1F and input b = ns >> 5
    big = 1e18
    pm = np.full(64, big)
    pm[0] = 0.0
    tb = np.empty((steps, 64), dtype=np.uint8)
    for t in range(steps):
        l1, l2 = llr[t, 0], llr[t, 1]
        cost = out1 * l1 + out2 * l2  # (64, 2): cost of emitting these bits
        cand = pm[:, None] + cost  # from state s with input b
        # regroup by destination: ns = (b<<5)|k, predecessors s = 2k, 2k+1
        by_dest = np.empty((64, 2))
        for b in (0, 1):
            c = cand[:, b].reshape(32, 2)  # k = s>>1
            dest = (b << 5) + np.arange(32)
            pick = np.argmin(c, axis=1)
            by_dest[dest, 0] = c[np.arange(32), pick]
            by_dest[dest, 1] = pick
        pm = by_dest[:, 0]
        tb[t] = by_dest[:, 1].astype(np.uint8)
    bits = np.empty(steps, dtype=np.uint8)
    s = 0
    for t in range(steps - 1, -1, -1):
        bits[t] = s >> 5
        s = ((s & 0x1F) << 1) | int(tb[t, s])
    return bits


def _popcount_parity(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x) & 1
