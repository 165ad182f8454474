"""Rate-2/3 punctured convolutional code.

Mother code: rate 1/2, constraint length 7, generators 171/133 (octal), with
the newest input bit aligned to the generators' most significant bit.
Puncturing pattern over two-step periods: [1,1 ; 1,0] (first output stream
kept at both steps, second stream kept at even steps only).  Frames are
terminated with 6 zero tail bits, so a B-bit frame encodes to
3*B/2 + 9 coded bits (B even).

Decoding is soft-input maximum-likelihood sequence detection on the
terminated trellis (punctured positions enter with zero LLR).
"""

from __future__ import annotations

import numpy as np

from . import kernels

G1 = 0o171
G2 = 0o133
TAIL_STEPS = 6


def coded_length(n_info: int) -> int:
    if n_info % 2:
        raise ValueError("info frame length must be even for the 2/3 puncturing")
    return 3 * n_info // 2 + 9


def conv_encode(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.size
    if n % 2:
        raise ValueError("info frame length must be even for the 2/3 puncturing")
    out = np.empty(coded_length(n), dtype=np.uint8)
    w = 0
    pos = 0
    for t in range(n + TAIL_STEPS):
        b = int(bits[t]) if t < n else 0
        w = ((w >> 1) | (b << 6)) & 0x7F
        out[pos] = bin(w & G1).count("1") & 1
        pos += 1
        if t % 2 == 0:
            out[pos] = bin(w & G2).count("1") & 1
            pos += 1
    assert pos == out.size
    return out


def depuncture(llrs: np.ndarray, n_info: int) -> np.ndarray:
    """Rebuild the (steps, 2) mother-code LLR array, zeros at punctured slots."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size != coded_length(n_info):
        raise ValueError(
            f"expected {coded_length(n_info)} coded LLRs for {n_info} info bits, got {llrs.size}"
        )
    steps = n_info + TAIL_STEPS
    out = np.zeros((steps, 2))
    pos = 0
    for t in range(steps):
        out[t, 0] = llrs[pos]
        pos += 1
        if t % 2 == 0:
            out[t, 1] = llrs[pos]
            pos += 1
    return out


def conv_decode(llrs: np.ndarray, n_info: int) -> np.ndarray:
    """ML decode of one coded frame; returns the n_info info bits."""
    pairs = depuncture(llrs, n_info)
    bits = kernels.viterbi_decode_pairs(pairs)
    return np.asarray(bits[:n_info], dtype=np.uint8)
