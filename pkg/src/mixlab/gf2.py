"""Bit-packed linear algebra over GF(2).

Rows are Python ints used as bit sets (bit j = column j).  Arbitrary-precision
ints give word-packed XOR row operations for free, which is what elimination
spends all its time on.  All values are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

# Dimension cap: protects window-based measure algorithms from accidental
# blowup.  Matrices this library is asked to build should stay far below it.
MAX_DIM = 1 << 16


class DimensionError(ValueError):
    """A requested matrix dimension exceeds MAX_DIM."""


def _check_dim(n: int, what: str) -> None:
    if n < 0:
        raise ValueError(f"{what} must be nonnegative, got {n}")
    if n > MAX_DIM:
        raise DimensionError(f"{what} {n} exceeds the cap {MAX_DIM}")


@dataclass(frozen=True)
class BitVector:
    """Fixed-length vector over GF(2); bits beyond `length` are zero."""

    length: int
    bits: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative length")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError("bits set beyond declared length")

    @classmethod
    def from_bits(cls, values: Iterable[int]) -> "BitVector":
        acc = 0
        n = 0
        for v in values:
            if v not in (0, 1):
                raise ValueError("bit values must be 0 or 1")
            acc |= v << n
            n += 1
        return cls(n, acc)

    def get(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def to_list(self) -> list[int]:
        return [(self.bits >> i) & 1 for i in range(self.length)]

    def weight(self) -> int:
        return self.bits.bit_count()

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitVector(self.length, self.bits ^ other.bits)

    def __str__(self) -> str:
        return "".join("1" if (self.bits >> i) & 1 else "0" for i in range(self.length))


@dataclass(frozen=True)
class BitMatrix:
    """Row-major packed GF(2) matrix; data[i] holds row i as a bit set."""

    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self):
        _check_dim(self.rows, "row count")
        _check_dim(self.cols, "column count")
        if len(self.data) != self.rows:
            raise ValueError("row data does not match declared row count")
        for r in self.data:
            if r < 0 or r >> self.cols:
                raise ValueError("row has bits set beyond declared column count")

    @classmethod
    def from_rows(cls, rows: Sequence[int] | Sequence[Sequence[int]], cols: int) -> "BitMatrix":
        packed = []
        for row in rows:
            if isinstance(row, int):
                packed.append(row)
            else:
                acc = 0
                for j, v in enumerate(row):
                    if v not in (0, 1):
                        raise ValueError("matrix entries must be 0 or 1")
                    acc |= v << j
                packed.append(acc)
        return cls(len(packed), cols, tuple(packed))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, (0,) * rows)

    def row(self, i: int) -> int:
        return self.data[i]

    def get(self, i: int, j: int) -> int:
        return (self.data[i] >> j) & 1

    def is_square(self) -> bool:
        return self.rows == self.cols


def transpose(m: BitMatrix) -> BitMatrix:
    out = [0] * m.cols
    for i, row in enumerate(m.data):
        while row:
            low = row & -row
            j = low.bit_length() - 1
            out[j] |= 1 << i
            row ^= low
    return BitMatrix(m.cols, m.rows, tuple(out))


def _rref(rows: list[int], cols: int) -> tuple[int, list[int]]:
    """In-place reduced row echelon form.

    Pivots on the first set bit per column, no column permutations; returns
    (rank, pivot_columns).  Deterministic for a given input.
    """
    pivots: list[int] = []
    r = 0
    n = len(rows)
    for j in range(cols):
        mask = 1 << j
        pivot = -1
        for i in range(r, n):
            if rows[i] & mask:
                pivot = i
                break
        if pivot < 0:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        prow = rows[r]
        for i in range(n):
            if i != r and rows[i] & mask:
                rows[i] ^= prow
        pivots.append(j)
        r += 1
        if r == n:
            break
    return r, pivots


def rank(m: BitMatrix) -> int:
    work = list(m.data)
    r, _ = _rref(work, m.cols)
    return r


def nullspace(m: BitMatrix) -> list[BitVector]:
    """Basis of {v : m @ v = 0}, one vector per free column, ascending."""
    work = list(m.data)
    r, pivots = _rref(work, m.cols)
    pivot_set = set(pivots)
    basis = []
    for free in range(m.cols):
        if free in pivot_set:
            continue
        bits = 1 << free
        for k, p in enumerate(pivots):
            if (work[k] >> free) & 1:
                bits |= 1 << p
        basis.append(BitVector(m.cols, bits))
    return basis


def mat_vec(m: BitMatrix, v: BitVector) -> BitVector:
    if v.length != m.cols:
        raise ValueError("vector length must equal column count")
    bits = 0
    for i, row in enumerate(m.data):
        bits |= ((row & v.bits).bit_count() & 1) << i
    return BitVector(m.rows, bits)


def solve_affine(m: BitMatrix, b: BitVector) -> Optional[tuple[BitVector, list[BitVector]]]:
    """Solve m @ x = b.

    Returns None iff the system is inconsistent, otherwise a particular
    solution together with a nullspace basis describing all solutions.
    """
    if b.length != m.rows:
        raise ValueError("right-hand side length must equal row count")
    aug_col = 1 << m.cols
    work = [m.data[i] | (aug_col if (b.bits >> i) & 1 else 0) for i in range(m.rows)]
    # Pivot search is restricted to the coefficient columns.
    _, pivots = _rref(work, m.cols)
    for row in work:
        if row == aug_col:
            return None
    xbits = 0
    for k, p in enumerate(pivots):
        if work[k] & aug_col:
            xbits |= 1 << p
    return BitVector(m.cols, xbits), nullspace(m)


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        raise ValueError("inner dimensions differ")
    bdata = b.data
    out = []
    for row in a.data:
        acc = 0
        while row:
            low = row & -row
            acc ^= bdata[low.bit_length() - 1]
            row ^= low
        out.append(acc)
    return BitMatrix(a.rows, b.cols, tuple(out))


def mat_add(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise ValueError("shape mismatch")
    return BitMatrix(a.rows, a.cols, tuple(x ^ y for x, y in zip(a.data, b.data)))


def mat_pow(m: BitMatrix, e: int) -> BitMatrix:
    """m**e by square-and-multiply; mat_pow(m, 0) is the identity."""
    if not m.is_square():
        raise ValueError("matrix power requires a square matrix")
    if e < 0:
        raise ValueError("exponent must be nonnegative")
    result = BitMatrix.identity(m.rows)
    base = m
    while e:
        if e & 1:
            result = mat_mul(result, base)
        base_needed = e > 1
        e >>= 1
        if base_needed:
            base = mat_mul(base, base)
    return result
