"""Square-QAM constellations with Gray labeling and joint-message indexing.

Labeling is pinned for reproducibility of the mapping search: the first m/2
label bits select the I level, the last m/2 the Q level, most significant
first, with per-axis Gray coding (bits 0..0 map to the most positive level).
Under this convention 4QAM label [0,0] is (1+j)/sqrt(2).

Joint messages of u terminals concatenate per-terminal labels with terminal
0 occupying the most significant bits, so joint index p == the concatenated
bit string read as an integer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf2 import BinVector

JOINT_BUDGET_BITS = 20


class UnsupportedModulationError(ValueError):
    """Raised for constellation orders outside the supported square QAMs."""


def _gray_levels(k: int) -> np.ndarray:
    """Axis levels indexed by the k-bit label value, Gray-coded.

    Positions hold levels (2^k-1, ..., 1, -1, ..., -(2^k-1)); position p has
    Gray label p ^ (p >> 1), so adjacent levels differ in exactly one bit.
    """
    n = 1 << k
    levels_by_pos = np.arange(n - 1, -n, -2, dtype=float)
    gray = np.arange(n) ^ (np.arange(n) >> 1)
    out = np.empty(n)
    out[gray] = levels_by_pos
    return out


@dataclass(frozen=True)
class Constellation:
    """2^m labeled complex points with unit average energy."""

    m: int
    points: np.ndarray  # complex128, indexed by label value

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def size(self) -> int:
        return 1 << self.m

    @property
    def name(self) -> str:
        return f"qam{self.size}"


def build_qam(m: int) -> Constellation:
    """Gray-labeled square QAM, unit average energy; m must be 2 or 4."""
    if m not in (2, 4):
        raise UnsupportedModulationError(
            f"only square QAM with m in {{2, 4}} is supported, got m={m}"
        )
    k = m // 2
    axis = _gray_levels(k)
    n = 1 << m
    labels = np.arange(n)
    i_level = axis[labels >> k]
    q_level = axis[labels & ((1 << k) - 1)]
    pts = i_level + 1j * q_level
    pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(m, pts)


def constellation_by_name(name: str) -> Constellation:
    table = {"qam4": 2, "qam16": 4}
    if name not in table:
        raise UnsupportedModulationError(
            f"unknown modulation {name!r}; expected one of {sorted(table)}"
        )
    return build_qam(table[name])


def modulate(c: Constellation, bits: BinVector) -> complex:
    if bits.length != c.m:
        raise ValueError(f"label needs {c.m} bits, got {bits.length}")
    return complex(c.points[bits.word])


def bits_of(c: Constellation, point: complex) -> BinVector:
    """Inverse label lookup; exact for points produced by modulate()."""
    idx = int(np.argmin(np.abs(c.points - point)))
    if abs(c.points[idx] - point) > 1e-9:
        raise ValueError(f"{point} is not a constellation point")
    return BinVector(c.m, idx)


def joint_dim(c: Constellation, u: int) -> int:
    if u < 2:
        raise ValueError(f"joint message sets need u >= 2 terminals, got {u}")
    mu = c.m * u
    if mu > JOINT_BUDGET_BITS:
        raise ValueError(f"joint set of 2^{mu} messages exceeds the 2^{JOINT_BUDGET_BITS} budget")
    return mu


def split_joint_index(p: int, m: int, u: int) -> tuple[int, ...]:
    """Per-terminal label values of joint message p (terminal 0 first)."""
    mask = (1 << m) - 1
    return tuple((p >> (m * (u - 1 - l))) & mask for l in range(u))


def joint_symbols(c: Constellation, u: int) -> np.ndarray:
    """(2^(m*u), u) complex array; row p holds the per-terminal symbols of
    joint message p, positionally consistent with the joint-message order."""
    mu = joint_dim(c, u)
    p = np.arange(1 << mu)
    cols = []
    mask = (1 << c.m) - 1
    for l in range(u):
        labels = (p >> (c.m * (u - 1 - l))) & mask
        cols.append(c.points[labels])
    return np.stack(cols, axis=1)


def superposition_table(c: Constellation, h, u: int) -> np.ndarray:
    """All 2^(m*u) noiseless superimposed values sum_l h[l]*symbol_l."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (u,):
        raise ValueError(f"need {u} channel coefficients, got shape {h.shape}")
    return joint_symbols(c, u) @ h
