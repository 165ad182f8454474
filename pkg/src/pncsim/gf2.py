"""Exact dense linear algebra over GF(2) on bit-packed rows.

Matrices here are tiny (at most ~8x12) but are touched billions of times by
the off-line mapping search, so every row is packed into a single Python int
and all elimination runs on machine-word XORs.

Bit convention: component 0 of a length-L vector is the most significant bit
(bit L-1 of the packed int).  A whole matrix maps to its "canonical integer"
by concatenating rows MSB-first, which fixes the enumeration and tie-break
order used everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

ENUM_BUDGET_BITS_DEFAULT = 32


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class BudgetError(ValueError):
    """Raised when an exhaustive enumeration would exceed the bit budget."""


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@dataclass(frozen=True)
class BinVector:
    """Immutable bit vector; ``word`` packs component 0 as the MSB."""

    length: int
    word: int

    def __post_init__(self):
        if self.length < 1:
            raise ShapeError(f"vector length must be >= 1, got {self.length}")
        if self.word < 0 or self.word >> self.length:
            raise ValueError("word has bits outside the stated length")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BinVector":
        word = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"entries must be 0/1, got {b}")
            word = (word << 1) | b
        return cls(len(bits), word)

    def bit(self, i: int) -> int:
        return (self.word >> (self.length - 1 - i)) & 1

    def bits(self) -> list[int]:
        return [self.bit(i) for i in range(self.length)]

    def __xor__(self, other: "BinVector") -> "BinVector":
        if self.length != other.length:
            raise ShapeError(f"length mismatch: {self.length} vs {other.length}")
        return BinVector(self.length, self.word ^ other.word)


@dataclass(frozen=True)
class BinMatrix:
    """Immutable binary matrix with one packed int per row."""

    rows: int
    cols: int
    row_words: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ShapeError(f"shape must be >= 1x1, got {self.rows}x{self.cols}")
        if len(self.row_words) != self.rows:
            raise ShapeError("row_words length does not match row count")
        for w in self.row_words:
            if w < 0 or w >> self.cols:
                raise ValueError("row word has bits outside the column range")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "BinMatrix":
        words = tuple(BinVector.from_bits(r).word for r in rows)
        ncols = len(rows[0])
        if any(len(r) != ncols for r in rows):
            raise ShapeError("ragged rows")
        return cls(len(rows), ncols, words)

    @classmethod
    def identity(cls, n: int) -> "BinMatrix":
        return cls(n, n, tuple(1 << (n - 1 - i) for i in range(n)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinMatrix":
        return cls(rows, cols, (0,) * rows)

    @classmethod
    def from_canonical_int(cls, rows: int, cols: int, value: int) -> "BinMatrix":
        mask = (1 << cols) - 1
        words = tuple((value >> ((rows - 1 - i) * cols)) & mask for i in range(rows))
        return cls(rows, cols, words)

    def entry(self, i: int, j: int) -> int:
        return (self.row_words[i] >> (self.cols - 1 - j)) & 1

    def to_lists(self) -> list[list[int]]:
        return [[self.entry(i, j) for j in range(self.cols)] for i in range(self.rows)]

    def canonical_int(self) -> int:
        v = 0
        for w in self.row_words:
            v = (v << self.cols) | w
        return v

    def transpose(self) -> "BinMatrix":
        words = []
        for j in range(self.cols):
            w = 0
            for i in range(self.rows):
                w = (w << 1) | self.entry(i, j)
            words.append(w)
        return BinMatrix(self.cols, self.rows, tuple(words))

    # -- text form used inside atlas files: "rows cols hexbits" ------------
    def to_text(self) -> str:
        width = (self.rows * self.cols + 3) // 4
        return f"{self.rows} {self.cols} {self.canonical_int():0{width}x}"

    @classmethod
    def from_text(cls, text: str) -> "BinMatrix":
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"bad matrix text {text!r}")
        r, c, hexbits = int(parts[0]), int(parts[1]), int(parts[2], 16)
        return cls.from_canonical_int(r, c, hexbits)


def mul(a: BinMatrix, b):
    """GF(2) product a@b for ``b`` a BinMatrix or BinVector."""
    if isinstance(b, BinVector):
        if a.cols != b.length:
            raise ShapeError(f"shape mismatch: {a.rows}x{a.cols} @ len-{b.length}")
        w = 0
        for rw in a.row_words:
            w = (w << 1) | _parity(rw & b.word)
        return BinVector(a.rows, w)
    if a.cols != b.rows:
        raise ShapeError(f"shape mismatch: {a.rows}x{a.cols} @ {b.rows}x{b.cols}")
    bt = b.transpose()
    words = []
    for rw in a.row_words:
        w = 0
        for cw in bt.row_words:
            w = (w << 1) | _parity(rw & cw)
        words.append(w)
    return BinMatrix(a.rows, b.cols, tuple(words))


def mul_word(a: BinMatrix, word: int) -> int:
    """Packed-word product: apply ``a`` to a packed length-cols vector."""
    w = 0
    for rw in a.row_words:
        w = (w << 1) | _parity(rw & word)
    return w


def _eliminate(words: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """In-place forward elimination; returns (reduced rows, pivot columns)."""
    pivots = []
    rank = 0
    for c in range(ncols):
        bit = 1 << (ncols - 1 - c)
        piv = None
        for i in range(rank, len(words)):
            if words[i] & bit:
                piv = i
                break
        if piv is None:
            continue
        words[rank], words[piv] = words[piv], words[rank]
        for i in range(len(words)):
            if i != rank and (words[i] & bit):
                words[i] ^= words[rank]
        pivots.append(c)
        rank += 1
    return words, pivots


def rank(a: BinMatrix) -> int:
    _, pivots = _eliminate(list(a.row_words), a.cols)
    return len(pivots)


def rank_words(words: Sequence[int], ncols: int) -> int:
    _, pivots = _eliminate(list(words), ncols)
    return len(pivots)


def rref(a: BinMatrix) -> BinMatrix:
    """Reduced row-echelon form with zero rows kept at the bottom."""
    words, _ = _eliminate(list(a.row_words), a.cols)
    return BinMatrix(a.rows, a.cols, tuple(words))


def rref_basis(words: Sequence[int], ncols: int) -> tuple[int, ...]:
    """Canonical (RREF) basis of the span of ``words``, zero rows dropped."""
    reduced, pivots = _eliminate(list(words), ncols)
    return tuple(reduced[: len(pivots)])


def try_invert(a: BinMatrix) -> Optional[BinMatrix]:
    """Inverse over GF(2), or None when singular.

    Singularity is an expected value-level outcome (the mapping search probes
    singular stacks on purpose), so no exception is raised for it.
    """
    if a.rows != a.cols:
        raise ShapeError(f"inverse needs a square matrix, got {a.rows}x{a.cols}")
    n = a.rows
    # augmented rows: [a | I] packed into one word each
    aug = [(a.row_words[i] << n) | (1 << (n - 1 - i)) for i in range(n)]
    rank_ = 0
    for c in range(n):
        bit = 1 << (2 * n - 1 - c)
        piv = None
        for i in range(rank_, n):
            if aug[i] & bit:
                piv = i
                break
        if piv is None:
            return None
        aug[rank_], aug[piv] = aug[piv], aug[rank_]
        for i in range(n):
            if i != rank_ and (aug[i] & bit):
                aug[i] ^= aug[rank_]
        rank_ += 1
    mask = (1 << n) - 1
    return BinMatrix(n, n, tuple(w & mask for w in aug))


def nullspace_words(words: Sequence[int], ncols: int) -> tuple[int, ...]:
    """Basis (packed words) of {x : M x = 0} for M with the given rows."""
    reduced, pivots = _eliminate(list(words), ncols)
    pivot_set = set(pivots)
    free_cols = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for fc in free_cols:
        vec = 1 << (ncols - 1 - fc)
        for i, pc in enumerate(pivots):
            if (reduced[i] >> (ncols - 1 - fc)) & 1:
                vec |= 1 << (ncols - 1 - pc)
        basis.append(vec)
    return tuple(basis)


def span_words(basis: Sequence[int]) -> list[int]:
    """All 2^k elements spanned by ``basis`` (includes 0), Gray-code order."""
    elems = [0]
    for b in basis:
        elems += [e ^ b for e in elems]
    return elems


def stack_rows(parts: Sequence[BinMatrix]) -> BinMatrix:
    if not parts:
        raise ShapeError("stack_rows needs at least one part")
    cols = parts[0].cols
    for p in parts:
        if p.cols != cols:
            raise ShapeError(f"column mismatch in stack: {p.cols} vs {cols}")
    words = []
    for p in parts:
        words.extend(p.row_words)
    return BinMatrix(sum(p.rows for p in parts), cols, tuple(words))


def enumerate_matrices(
    rows: int,
    cols: int,
    filter: Optional[Callable[[BinMatrix], bool]] = None,
    start: int = 0,
    stop: Optional[int] = None,
    budget_bits: int = ENUM_BUDGET_BITS_DEFAULT,
) -> Iterator[BinMatrix]:
    """Yield every rows x cols binary matrix once, in canonical-integer order.

    ``start``/``stop`` select an integer sub-range so a search can be split
    deterministically across workers.  The bit budget guards against
    accidentally requesting an infeasible 2^(rows*cols) sweep.
    """
    nbits = rows * cols
    if nbits > budget_bits:
        raise BudgetError(
            f"enumeration of {rows}x{cols} needs 2^{nbits} matrices, over the "
            f"{budget_bits}-bit budget; supply a stronger filter or raise budget_bits"
        )
    total = 1 << nbits
    if stop is None or stop > total:
        stop = total
    for v in range(start, stop):
        m = BinMatrix.from_canonical_int(rows, cols, v)
        if filter is None or filter(m):
            yield m
