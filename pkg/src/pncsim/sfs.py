"""Singular fade states: enumeration, clash partitions, and separation scores.

A singular fade state (SFS) is a channel ratio v at which two different
transmitted symbol pairs superimpose to the same value, i.e.
s1 + v*s2 == s1' + v*s2' with s1 != s1' and s2 != s2'.  Each SFS carries the
partition of joint messages into clashes (groups whose superimposed values
coincide at channel [1, v]) plus a witness tuple proving the defining ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .gf2 import BinMatrix, mul_word
from .modem import Constellation, superposition_table
from .util import wilson_ci

COINCIDENCE_TOL = 1e-9
ACTIVITY_DELTA_DEFAULT = 0.05


@dataclass(frozen=True)
class SingularFadeState:
    value: complex
    witness: tuple[int, int, int, int]  # (s1, s1', s2, s2') point labels
    partition: tuple[tuple[int, ...], ...]
    activity: Optional[float] = None
    activity_ci: Optional[tuple[float, float]] = None

    def with_activity(self, p: float, ci: tuple[float, float]) -> "SingularFadeState":
        return SingularFadeState(self.value, self.witness, self.partition, p, ci)


@dataclass(frozen=True)
class SuperimposedSet:
    channel: tuple[complex, ...]
    values: np.ndarray  # aligned with joint-message order

    def __post_init__(self):
        self.values.setflags(write=False)


def superimpose(c: Constellation, h: Sequence[complex], u: int) -> SuperimposedSet:
    h = tuple(complex(x) for x in h)
    return SuperimposedSet(h, superposition_table(c, h, u))


def partition_clashes(s: SuperimposedSet, tol: float = COINCIDENCE_TOL) -> tuple[tuple[int, ...], ...]:
    """Group joint-message indices whose superimposed values coincide.

    Groups are ordered by smallest member; members ascending.
    """
    return _partition_values(s.values, tol)


class _ToleranceGrouper:
    """Groups complex values that coincide within ``tol``.

    Bucketing on a grid much coarser than ``tol`` but much finer than any
    true gap; neighbors of a value's cell are checked so boundary straddles
    cannot split a group.  (A plain sorted-adjacency sweep is unsound here:
    distinct values sharing a real part interleave in the sort.)
    """

    def __init__(self, tol: float):
        self.tol = tol
        self.cell = max(tol * 1000.0, 1e-12)
        self.buckets: dict[tuple[int, int], list[int]] = {}
        self.reps: list[complex] = []

    def index_of(self, v: complex) -> Optional[int]:
        ix = int(np.floor(v.real / self.cell))
        iy = int(np.floor(v.imag / self.cell))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for ri in self.buckets.get((ix + dx, iy + dy), ()):
                    if abs(v - self.reps[ri]) <= self.tol:
                        return ri
        return None

    def add(self, v: complex) -> tuple[int, bool]:
        """Returns (group index, is_new)."""
        ri = self.index_of(v)
        if ri is not None:
            return ri, False
        ix = int(np.floor(v.real / self.cell))
        iy = int(np.floor(v.imag / self.cell))
        self.reps.append(v)
        self.buckets.setdefault((ix, iy), []).append(len(self.reps) - 1)
        return len(self.reps) - 1, True


def _partition_values(values: np.ndarray, tol: float) -> tuple[tuple[int, ...], ...]:
    grouper = _ToleranceGrouper(tol)
    groups: dict[int, list[int]] = {}
    for p, v in enumerate(values):
        gi, _ = grouper.add(complex(v))
        groups.setdefault(gi, []).append(p)
    out = sorted(groups.values(), key=lambda g: g[0])
    return tuple(tuple(g) for g in out)


def enumerate_sfs(c: Constellation, tol: float = COINCIDENCE_TOL) -> list[SingularFadeState]:
    """All singular fade states of the two-terminal superposition.

    Ratios (s1-s1')/(s2'-s2) over all symbol pairs with both differences
    nonzero, deduplicated within ``tol``; zero/infinite ratios are excluded
    (they describe single-terminal deep fades, not clash geometry).  Results
    are ordered by (real, imag) of the ratio.
    """
    pts = c.points
    n = pts.size
    # nonzero differences with their defining (a, b) label pairs
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    d = np.array([pts[a] - pts[b] for a, b in pairs])
    ratios = d[:, None] / d[None, :]  # v = (s1-s1') / (s2'-s2)
    flat = ratios.ravel()
    npairs = len(pairs)
    grouper = _ToleranceGrouper(tol)
    witnesses: list[tuple[int, int, int, int]] = []
    for k in range(flat.size):
        i, j = divmod(k, npairs)
        w = (pairs[i][0], pairs[i][1], pairs[j][1], pairs[j][0])
        gi, new = grouper.add(complex(flat[k]))
        if new:
            witnesses.append(w)
        elif w < witnesses[gi]:
            witnesses[gi] = w
    order = sorted(
        range(len(grouper.reps)),
        key=lambda gi: (grouper.reps[gi].real, grouper.reps[gi].imag),
    )
    return [_make_state(c, grouper.reps[gi], witnesses[gi], tol) for gi in order]


def _make_state(c, v, wit, tol) -> SingularFadeState:
    part = _partition_values(superposition_table(c, np.array([1.0, v]), 2), tol)
    return SingularFadeState(v, wit, part)


def cluster_dmin(s: SuperimposedSet, g: BinMatrix, tol: float = COINCIDENCE_TOL) -> float:
    """Minimum squared distance between superimposed values mapped to
    different network-coded vectors; 0.0 when the mapping splits a clash
    (or separates nothing at all).

    Direct pairwise evaluation; the search modules use the XOR-difference
    tables in ``kernels`` for the same quantity.
    """
    values = s.values
    n = values.size
    nbits = int(np.log2(n))
    if g.cols != nbits:
        raise ValueError(f"mapping has {g.cols} columns, joint messages have {nbits} bits")
    ncv = np.zeros(n, dtype=np.int64)
    idx = np.arange(n)
    for row in g.row_words:
        ncv = (ncv << 1) | (np.bitwise_count(idx & row) & 1)
    d2 = np.abs(values[:, None] - values[None, :]) ** 2
    diff = ncv[:, None] != ncv[None, :]
    if not diff.any():
        return 0.0
    dmin = float(d2[diff].min())
    if dmin <= tol * tol:
        return 0.0
    return dmin


def sfs_channel(v: complex) -> np.ndarray:
    return np.array([1.0 + 0.0j, complex(v)])


def ratio_density(z: complex) -> float:
    """Density of h2/h1 for i.i.d. unit-variance circular Gaussians."""
    a = 1.0 + abs(z) ** 2
    return 1.0 / (np.pi * a * a)


def estimate_activity(
    v: complex,
    trials: int,
    delta: float = ACTIVITY_DELTA_DEFAULT,
    rng: Optional[np.random.Generator] = None,
    fading: str = "rayleigh",
) -> tuple[float, tuple[float, float]]:
    """Monte-Carlo probability that a random fading ratio lands within
    relative radius ``delta`` of the fade state: P(|h2/h1 - v| < delta*|v|).

    Returns (estimate, Wilson 95% CI).
    """
    if trials < 1:
        raise ValueError("activity estimation needs at least one trial")
    if fading != "rayleigh":
        raise ValueError(f"unsupported fading model {fading!r}")
    if delta < 0:
        raise ValueError("radius must be non-negative")
    if rng is None:
        rng = np.random.default_rng(0)
    hits = 0
    chunk = 1 << 20
    left = trials
    while left > 0:
        nn = min(left, chunk)
        h = rng.standard_normal((2, nn, 2)) / np.sqrt(2.0)
        ratio = (h[1, :, 0] + 1j * h[1, :, 1]) / (h[0, :, 0] + 1j * h[0, :, 1])
        hits += int((np.abs(ratio - v) < delta * abs(v)).sum())
        left -= nn
    return hits / trials, wilson_ci(hits, trials)


def delta_tables(values: np.ndarray, tol: float = COINCIDENCE_TOL):
    """(delta_pos, coinc) XOR-difference tables for a superimposed set."""
    return kernels.sfs_delta_tables(values, tol)
