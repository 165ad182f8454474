"""Two-stage adaptive mapping selection.

Off-line stage: for every (retained) singular fade state, find the full-row-
rank binary mappings that keep each clash inside one network-coded vector
and maximize the separation between different vectors.  The search runs over
null spaces rather than raw matrices: a full-row-rank r x mu mapping is
determined up to an invertible left factor by its null space, and both the
separation score and global invertibility depend on the null space alone, so
one canonical representative (the RREF basis of the row space) is stored per
null space.

At fade states whose clash-difference span exceeds the null-space dimension
no mapping can absorb every clash (this happens for 16QAM); candidates are
then ranked lexicographically by (unresolved coincident pairs ascending,
separation descending), which reduces to the strict criterion whenever full
consistency is attainable.

On-line stage: per access point, candidates of the nearest fade state are
re-scored on the actual channel and a combination maximizing the minimum
per-AP separation is assembled under the constraint that the stacked global
matrix is invertible.  If the nearest-state lists cannot produce an
invertible stack, the search widens to the whole table; only when that is
exhausted too does it fall back to a degraded canonical assignment.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .gf2 import (
    BinMatrix,
    BudgetError,
    ENUM_BUDGET_BITS_DEFAULT,
    nullspace_words,
    rank_words,
    rref_basis,
    span_words,
    stack_rows,
    try_invert,
)
from .kernels_common import lift_rows, subspace_structures
from .modem import Constellation, constellation_by_name, superposition_table
from .sfs import (
    ACTIVITY_DELTA_DEFAULT,
    COINCIDENCE_TOL,
    SingularFadeState,
    enumerate_sfs,
    estimate_activity,
    sfs_channel,
)

CANDIDATE_CAP_DEFAULT = 32


@dataclass(frozen=True)
class PruneSettings:
    """Off-line search configuration: fade-state retention and list caps."""

    keep: Optional[int] = None  # retain the keep most active states; None = all
    delta: float = ACTIVITY_DELTA_DEFAULT
    trials: int = 100_000
    seed: int = 20_240_601
    cap: int = CANDIDATE_CAP_DEFAULT


@dataclass(frozen=True)
class MappingCandidate:
    """One stored mapping: canonical representative of its null space."""

    matrix: BinMatrix
    dmin_at_sfs: float  # strict cluster separation at the fade state (0 when violating)
    separation: float  # coincidence-excluded separation used for ranking
    violations: int  # coincident pairs the mapping fails to absorb
    kernel_mask: int  # bitset over joint differences: bit e set <=> e in null space


@dataclass(frozen=True)
class SfsEntry:
    state: SingularFadeState
    candidates: tuple[MappingCandidate, ...]
    partition_key: str


@dataclass
class CandidateTable:
    modulation: str
    u: int
    r: int
    entries: list[SfsEntry]
    meta: dict = field(default_factory=dict)


class SearchConsistencyError(RuntimeError):
    """Internal failure of the off-line search (empty candidate list)."""


def partition_hash(partition) -> str:
    blob = ";".join(",".join(str(i) for i in g) for g in partition)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_candidate(matrix: BinMatrix, dmin: float, sep: float, viol: int) -> MappingCandidate:
    mask = 0
    for e in span_words(nullspace_words(matrix.row_words, matrix.cols)):
        mask |= 1 << e
    return MappingCandidate(matrix, dmin, sep, viol, mask)


def _difference_basis(partition, mu: int) -> tuple[int, ...]:
    """RREF basis of the span of within-clash index differences."""
    diffs = []
    for group in partition:
        base = group[0]
        diffs.extend(base ^ other for other in group[1:])
    if not diffs:
        return ()
    return rref_basis(diffs, mu)


def _admissible_kernels(mu: int, r: int, d_basis: tuple[int, ...]):
    """Kernel-subspace enumeration for one clash partition.

    Strict case (difference span fits inside the null space): enumerate the
    null spaces containing the span, via subspaces of the complement
    coordinates.  Otherwise enumerate every null space of the right dimension
    and let the violation count rank them.
    """
    q = mu - r
    d = len(d_basis)
    if d <= q:
        pivots = {mu - int(w).bit_length() for w in d_basis}
        free_cols = np.array([c for c in range(mu) if c not in pivots], dtype=np.int64)
        rows_q = subspace_structures(len(free_cols), q - d)
        rows_lifted = lift_rows(rows_q, free_cols, len(free_cols), mu)
        return rows_lifted, np.array(d_basis, dtype=np.uint64), True
    rows_lifted = subspace_structures(mu, q)
    return rows_lifted, np.zeros(0, dtype=np.uint64), False


def offline_search(
    c: Constellation,
    u: int,
    r: int,
    prune: Optional[PruneSettings] = None,
    budget_bits: int = ENUM_BUDGET_BITS_DEFAULT,
    tol: float = COINCIDENCE_TOL,
) -> CandidateTable:
    """Build the per-fade-state candidate table for r-row mappings."""
    prune = prune or PruneSettings()
    if u != 2:
        raise ValueError("the off-line search covers terminal pairs; u must be 2")
    mu = c.m * u
    if r < 1 or r > mu:
        raise ValueError(f"row count {r} outside 1..{mu}")
    if r * mu > budget_bits:
        raise BudgetError(
            f"search space of {r}x{mu} mappings spans 2^{r * mu} candidates, over the "
            f"{budget_bits}-bit budget; raise budget_bits to override"
        )
    if prune.cap < 1 or (prune.keep is not None and prune.keep < 1):
        raise ValueError("prune cap/keep must be >= 1")

    states = enumerate_sfs(c, tol)
    scored = []
    for i, st in enumerate(states):
        rng = np.random.default_rng(np.random.SeedSequence(prune.seed, spawn_key=(i,)))
        p, ci = estimate_activity(st.value, prune.trials, prune.delta, rng)
        scored.append(st.with_activity(p, ci))
    retained = list(range(len(scored)))
    if prune.keep is not None and prune.keep < len(scored):
        retained = sorted(retained, key=lambda i: (-scored[i].activity, i))[: prune.keep]
        retained.sort()

    # group by clash partition: kernel admissibility is partition-determined
    by_partition: dict[str, list[int]] = {}
    for i in retained:
        by_partition.setdefault(partition_hash(scored[i].partition), []).append(i)

    entries: dict[int, SfsEntry] = {}
    relaxed_states = 0
    for key, members in by_partition.items():
        part = scored[members[0]].partition
        d_basis = _difference_basis(part, mu)
        rows_lifted, basis, strict = _admissible_kernels(mu, r, d_basis)
        if not strict:
            relaxed_states += len(members)
        for i in members:
            st = scored[i]
            values = superposition_table(c, sfs_channel(st.value), 2)
            delta_pos, coinc = kernels.sfs_delta_tables(values, tol)
            viol, score = kernels.subspace_scan(rows_lifted, basis, delta_pos, coinc)
            cands = _rank_candidates(rows_lifted, basis, mu, r, viol, score, prune.cap)
            if not cands:
                raise SearchConsistencyError(
                    f"no admissible mapping at fade state {st.value!r}; partition {part!r}"
                )
            entries[i] = SfsEntry(st, tuple(cands), key)

    table_entries = [entries[i] for i in retained]
    distinct = {cd.matrix.canonical_int() for e in table_entries for cd in e.candidates}
    meta = {
        "format_version": 1,
        "sfs_total": len(states),
        "sfs_retained": len(retained),
        "sfs_relaxed": relaxed_states,
        "distinct_partitions": len(by_partition),
        "distinct_matrices": len(distinct),
        "budget_bits": budget_bits,
        "prune_keep": prune.keep,
        "prune_delta": prune.delta,
        "prune_trials": prune.trials,
        "prune_seed": prune.seed,
        "cap": prune.cap,
        "tol": tol,
    }
    return CandidateTable(c.name, u, r, table_entries, meta)


def _rank_candidates(rows_lifted, basis, mu, r, viol, score, cap) -> list[MappingCandidate]:
    """Top kernels by (violations asc, separation desc, canonical matrix asc)."""
    S = viol.shape[0]
    order = np.lexsort((np.arange(S), -score, viol))
    cut = min(cap, S)
    chosen = list(order[:cut])
    last = (int(viol[order[cut - 1]]), float(score[order[cut - 1]]))
    for i in order[cut:]:
        if (int(viol[i]), float(score[i])) != last:
            break
        chosen.append(i)  # keep full tie class so the canonical tie-break is exact
    cands = []
    d_words = [int(b) for b in basis]
    for i in chosen:
        kb = [int(x) for x in rows_lifted[i]] + d_words
        kb = [x for x in kb if x]
        rowspace = nullspace_words(kb, mu) if kb else tuple(1 << (mu - 1 - j) for j in range(mu))
        rep_rows = rref_basis(rowspace, mu)
        assert len(rep_rows) == r
        mat = BinMatrix(r, mu, rep_rows)
        v = int(viol[i])
        sep = float(score[i])
        cands.append(make_candidate(mat, sep if v == 0 else 0.0, sep, v))
    cands.sort(key=lambda cd: (cd.violations, -cd.separation, cd.matrix.canonical_int()))
    return cands[:cap]


# ---------------------------------------------------------------------------
# on-line stage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairBlock:
    pair: tuple[int, int]  # (stronger, weaker) terminal indices
    rows: int


@dataclass(frozen=True)
class PairingPlan:
    blocks: tuple[tuple[PairBlock, ...], ...]  # per access point
    fallback: bool = False


@dataclass(frozen=True)
class ApChoice:
    matrix: BinMatrix  # r_j x mu, embedded in the full joint-message space
    score: float
    source: tuple  # provenance (fade-state index, candidate rank, ...)


@dataclass(frozen=True)
class Assignment:
    per_ap: tuple[ApChoice, ...]
    global_matrix: BinMatrix
    global_inv: BinMatrix
    global_dmin: float
    degraded: bool


def row_allocation(mu: int, n: int, channels: np.ndarray) -> list[int]:
    """Rows per access point: equal split, remainder to the strongest APs."""
    base = mu // n
    rem = mu - base * n
    rows = [base] * n
    if rem:
        power = np.abs(np.asarray(channels)) ** 2
        order = sorted(range(n), key=lambda j: (-float(power[j].sum()), j))
        for j in order[:rem]:
            rows[j] += 1
    return rows


def pair_mts(channels: np.ndarray, m: int, rows_per_ap: Sequence[int]) -> PairingPlan:
    """Terminal pairing per access point, by received power.

    Each AP pairs its two strongest terminals (ties to the lower index); when
    its row budget exceeds m, the remainder rows pair the strongest with the
    third terminal.  In the three-terminal three-AP layout the three distinct
    pairs are assigned to the APs maximizing total received power over pair
    members, which also covers every terminal twice.  Should some terminal
    still end up unpaired everywhere, a round-robin fallback is used and
    flagged.
    """
    channels = np.asarray(channels)
    n, u = channels.shape
    if u < 2:
        raise ValueError("pairing needs at least two terminals")
    power = np.abs(channels) ** 2
    if u == 2:
        return PairingPlan(tuple((PairBlock((0, 1), rows_per_ap[j]),) for j in range(n)))

    def by_power(j):
        return sorted(range(u), key=lambda l: (-power[j, l], l))

    if u == 3 and n == 3 and all(rj <= m for rj in rows_per_ap):
        pairs = [(0, 1), (0, 2), (1, 2)]
        best = None
        for perm in (
            (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0),
        ):
            total = sum(
                float(power[j, pairs[perm[j]][0]] + power[j, pairs[perm[j]][1]])
                for j in range(3)
            )
            key = (-total, perm)
            if best is None or key < best:
                best = key
        perm = best[1]
        blocks = []
        for j in range(3):
            a, b = pairs[perm[j]]
            if power[j, b] > power[j, a]:
                a, b = b, a
            blocks.append((PairBlock((a, b), rows_per_ap[j]),))
        return PairingPlan(tuple(blocks))

    blocks = []
    for j in range(n):
        o = by_power(j)
        r_j = rows_per_ap[j]
        if r_j <= m:
            blocks.append((PairBlock((o[0], o[1]), r_j),))
        else:
            extra = r_j - m
            if extra > m or u < 3:
                raise ValueError(f"row budget {r_j} cannot be covered by two pair blocks")
            blocks.append((PairBlock((o[0], o[1]), m), PairBlock((o[0], o[2]), extra)))
    covered = {t for ap in blocks for blk in ap for t in blk.pair}
    if covered == set(range(u)):
        return PairingPlan(tuple(blocks))
    blocks = []
    for j in range(n):
        a, b = j % u, (j + 1) % u
        r_j = rows_per_ap[j]
        if r_j <= m:
            blocks.append((PairBlock((min(a, b), max(a, b)), r_j),))
        else:
            blocks.append(
                (
                    PairBlock((min(a, b), max(a, b)), m),
                    PairBlock((min(a, (j + 2) % u), max(a, (j + 2) % u)), r_j - m),
                )
            )
    return PairingPlan(tuple(blocks), fallback=True)


def nearest_sfs(table: CandidateTable, ratio: complex) -> tuple[int, float]:
    """Retained fade state minimizing the relative distance |ratio - v| / |v|."""
    if not table.entries:
        raise ValueError("empty candidate table")
    if not np.isfinite(ratio):
        ratio = complex(1e30)
    best_i, best_d = 0, float("inf")
    for i, e in enumerate(table.entries):
        v = e.state.value
        d = abs(ratio - v) / abs(v)
        if d < best_d:
            best_i, best_d = i, d
    return best_i, best_d


def _embed_rows(rows: Sequence[int], pair: tuple[int, int], m: int, u: int) -> tuple[int, ...]:
    """Spread 2m-bit pair-space rows onto the mu-bit joint space."""
    out = []
    mask = (1 << m) - 1
    for w in rows:
        e = 0
        for k, term in enumerate(pair):
            chunk = (w >> (m * (1 - k))) & mask
            e |= chunk << (m * (u - 1 - term))
        out.append(e)
    return tuple(out)


def _pair_projection(pair: tuple[int, int], m: int, u: int, size: int) -> np.ndarray:
    """Map each mu-bit difference to its 2m-bit projection onto a pair."""
    e = np.arange(size)
    mask = (1 << m) - 1
    a = (e >> (m * (u - 1 - pair[0]))) & mask
    b = (e >> (m * (u - 1 - pair[1]))) & mask
    return (a << m) | b


def _mask_to_bools(mask: int, size: int) -> np.ndarray:
    raw = mask.to_bytes((size + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:size].astype(bool)


@dataclass(frozen=True)
class _Unit:
    rows: tuple[int, ...]
    member: np.ndarray  # bool[size]: True where the difference is mapped to zero
    score: float
    source: tuple


def _score_member(member: np.ndarray, vals: np.ndarray, es: np.ndarray) -> float:
    for val, e in zip(vals, es):
        if not member[e]:
            return float(val)
    return 0.0


def _ap_units(
    c: Constellation,
    u: int,
    blocks: Sequence[PairBlock],
    pools: Sequence[Sequence[tuple[int, MappingCandidate]]],
    delta_order: tuple[np.ndarray, np.ndarray],
    unit_cap: int,
) -> list[ApChoice]:
    """Scored candidate row-blocks for one access point."""
    m = c.m
    mu = m * u
    size = 1 << mu
    vals, es = delta_order

    def block_options(blk: PairBlock, pool):
        opts = []
        seen: set[tuple[int, ...]] = set()
        identity_embed = u == 2
        proj = None if identity_embed else _pair_projection(blk.pair, m, u, size)
        for rank, (sfs_i, cand) in enumerate(pool):
            if blk.rows == cand.matrix.rows:
                row_sets = [(cand.matrix.row_words, cand.kernel_mask, (sfs_i, rank))]
            elif blk.rows == 1:
                row_sets = []
                for k, w in enumerate(sw for sw in span_words(cand.matrix.row_words) if sw):
                    mask = 0
                    for el in span_words(nullspace_words((w,), 2 * m)):
                        mask |= 1 << el
                    row_sets.append(((w,), mask, (sfs_i, rank, k)))
            else:
                raise ValueError(
                    f"block of {blk.rows} rows cannot be drawn from stored "
                    f"{cand.matrix.rows}-row mappings"
                )
            for rows, pair_mask, src in row_sets:
                erows = _embed_rows(rows, blk.pair, m, u)
                if erows in seen:
                    continue
                seen.add(erows)
                pair_member = _mask_to_bools(pair_mask, 1 << (2 * m))
                member = pair_member if identity_embed else pair_member[proj]
                opts.append((erows, member, src))
        return opts

    per_block = [block_options(blk, pool) for blk, pool in zip(blocks, pools)]
    combos = [((), np.ones(size, dtype=bool), ())]
    for opts in per_block:
        combos = [
            (rows + o_rows, member & o_member, src + (o_src,))
            for rows, member, src in combos
            for o_rows, o_member, o_src in opts
        ]
    units = []
    for rows, member, src in combos:
        if rank_words(rows, mu) != len(rows):
            continue
        units.append(ApChoice(BinMatrix(len(rows), mu, rows), _score_member(member, vals, es), src))
    units.sort(key=lambda ap: (-ap.score, ap.source))
    return units[:unit_cap]


def _backtrack(units_per_ap: list[list[ApChoice]], mu: int):
    """Max-min assignment subject to global invertibility.

    Depth-first over APs, candidates sorted by score; a branch is pruned when
    its running minimum cannot beat the best complete assembly, or when the
    stacked rows are already linearly dependent.
    """
    n = len(units_per_ap)
    best: Optional[tuple[float, list[ApChoice]]] = None

    def reduce_rows(basis: list[int], rows) -> Optional[list[int]]:
        new = list(basis)
        for w in rows:
            for b in new:
                if w & (1 << (int(b).bit_length() - 1)):
                    w ^= b
            if w == 0:
                return None
            new.append(w)
        new.sort(reverse=True)
        return new

    def dfs(j: int, basis: list[int], chosen: list[ApChoice], cur_min: float):
        nonlocal best
        if j == n:
            best = (cur_min, list(chosen))
            return
        for unit in units_per_ap[j]:
            new_min = min(cur_min, unit.score)
            if best is not None and new_min <= best[0]:
                break  # lists sorted by score: nothing further can do better
            nb = reduce_rows(basis, unit.matrix.row_words)
            if nb is None:
                continue
            chosen.append(unit)
            dfs(j + 1, nb, chosen, new_min)
            chosen.pop()

    dfs(0, [], [], float("inf"))
    return best


def online_select(
    table: CandidateTable, channels: np.ndarray, unit_cap: int = 256
) -> Assignment:
    """Select per-AP mappings for one channel realization (n APs x u MTs)."""
    channels = np.asarray(channels, dtype=complex)
    n, u = channels.shape
    c = constellation_by_name(table.modulation)
    m = c.m
    mu = m * u
    rows = row_allocation(mu, n, channels)
    if u == 2:
        if any(rj != table.r for rj in rows):
            raise ValueError(
                f"scenario needs {rows} rows per AP but the table stores "
                f"{table.r}-row mappings"
            )
    elif table.r != m:
        raise ValueError(f"multi-terminal pairing needs an r={m} pair table, got r={table.r}")
    plan = pair_mts(channels, m, rows)

    delta_orders = []
    for j in range(n):
        delta = kernels.xor_min_dist2(superposition_table(c, channels[j], u))
        order = np.lexsort((np.arange(delta.size), delta))
        delta_orders.append((delta[order], order))

    def pools_for(j: int, widen: bool):
        out = []
        for blk in plan.blocks[j]:
            if widen:
                pool = [(i, cd) for i, e in enumerate(table.entries) for cd in e.candidates]
            else:
                a, b = blk.pair
                ratio = (
                    channels[j, b] / channels[j, a]
                    if channels[j, a] != 0
                    else complex(1e30)
                )
                i, _ = nearest_sfs(table, ratio)
                pool = [(i, cd) for cd in table.entries[i].candidates]
            out.append(pool)
        return out

    for widen in (False, True):
        units = [
            _ap_units(c, u, plan.blocks[j], pools_for(j, widen), delta_orders[j], unit_cap)
            for j in range(n)
        ]
        if any(not us for us in units):
            continue
        found = _backtrack(units, mu)
        if found is not None:
            _, chosen = found
            return _finish(chosen, min(ap.score for ap in chosen), degraded=False)

    # canonical fallback: systematic split of the identity
    chosen = []
    at = 0
    for j in range(n):
        words = tuple(1 << (mu - 1 - (at + i)) for i in range(rows[j]))
        vals, es = delta_orders[j]
        member = np.zeros(1 << mu, dtype=bool)
        for el in span_words(nullspace_words(words, mu)):
            member[el] = True
        chosen.append(
            ApChoice(BinMatrix(rows[j], mu, words), _score_member(member, vals, es), ("fallback",))
        )
        at += rows[j]
    return _finish(chosen, min(ap.score for ap in chosen), degraded=True)


def _finish(chosen, dmin, degraded) -> Assignment:
    g = stack_rows([ap.matrix for ap in chosen])
    inv = try_invert(g)
    assert inv is not None, "assembly invariant broken: stacked matrix is singular"
    return Assignment(tuple(chosen), g, inv, dmin, degraded)
