"""Arithmetic and dense linear algebra over prime fields F_q.

Matrices are numpy int64 arrays holding canonical residues in [0, q).  All
operations reduce eagerly, so q is capped below 2**31 to keep products exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DimensionError, DomainError, SingularMatrix, ZeroInverse

MAX_MODULUS = 2**31 - 1

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or not is_prime(int(self.q)):
            raise DomainError(f"field size must be prime, got {self.q!r}")
        if self.q > MAX_MODULUS:
            raise DomainError(f"field size {self.q} exceeds supported maximum {MAX_MODULUS}")
        object.__setattr__(self, "q", int(self.q))

    def reduce(self, a):
        return np.mod(a, self.q)

    def inv(self, a: int) -> int:
        return field_inverse(self, a)

    def elements(self) -> range:
        return range(self.q)

    def __repr__(self) -> str:
        return f"GF({self.q})"


def field_inverse(f: PrimeField, a: int) -> int:
    a = int(a) % f.q
    if a == 0:
        raise ZeroInverse(f"0 has no inverse in {f!r}")
    return pow(a, -1, f.q)


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    """Immutable matrix over a prime field."""

    field: PrimeField
    entries: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        arr = np.mod(np.array(self.entries, dtype=np.int64, copy=True), self.field.q)
        if arr.ndim != 2:
            raise DimensionError(f"FieldMatrix needs a 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @classmethod
    def identity(cls, f: PrimeField, n: int) -> "FieldMatrix":
        return cls(f, np.eye(n, dtype=np.int64))

    @classmethod
    def zeros(cls, f: PrimeField, rows: int, cols: int) -> "FieldMatrix":
        return cls(f, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def random(cls, f: PrimeField, rows: int, cols: int, rng: np.random.Generator) -> "FieldMatrix":
        return cls(f, rng.integers(0, f.q, size=(rows, cols)))

    def __matmul__(self, other):
        if isinstance(other, FieldMatrix):
            _same_field(self, other)
            return FieldMatrix(self.field, matmul_mod(self.entries, other.entries, self.field.q))
        return matmul_mod(self.entries, np.asarray(other, dtype=np.int64), self.field.q)

    def __rmatmul__(self, other):
        return matmul_mod(np.asarray(other, dtype=np.int64), self.entries, self.field.q)

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        _same_field(self, other)
        return FieldMatrix(self.field, self.entries + other.entries)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FieldMatrix)
            and self.field == other.field
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self):
        return hash((self.field.q, self.entries.shape, self.entries.tobytes()))

    @property
    def T(self) -> "FieldMatrix":
        return FieldMatrix(self.field, self.entries.T)

    def rank(self) -> int:
        return mat_rank(self)

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()


def _same_field(a: FieldMatrix, b: FieldMatrix) -> None:
    if a.field != b.field:
        raise DomainError(f"field mismatch: {a.field!r} vs {b.field!r}")


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """Exact modular product; splits the inner dimension to avoid int64 overflow."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    inner = a.shape[-1]
    # each partial sum must stay below 2**63
    step = max(1, (2**62) // max(1, (q - 1) ** 2))
    if inner <= step:
        return np.mod(a @ b, q)
    out = None
    for lo in range(0, inner, step):
        part = np.mod(a[..., lo:lo + step] @ b[lo:lo + step], q)
        out = part if out is None else np.mod(out + part, q)
    return out


def _row_echelon(m: np.ndarray, q: int, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form mod q.

    Pivots are the first nonzero entry scanning rows top-down in each column,
    columns left to right.  Only the first ``ncols`` columns are pivoted on.
    """
    a = np.mod(np.array(m, dtype=np.int64, copy=True), q)
    rows, cols = a.shape
    ncols = cols if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = np.mod(a[r] * pow(int(a[r, c]), -1, q), q)
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        if others.size:
            a[others] = np.mod(a[others] - np.outer(a[others, c], a[r]), q)
        pivots.append(c)
        r += 1
    return a, pivots


def mat_rank(m: FieldMatrix) -> int:
    if m.rows == 0 or m.cols == 0:
        return 0
    _, pivots = _row_echelon(m.entries, m.field.q)
    return len(pivots)


def mat_solve(a: FieldMatrix, b) -> np.ndarray:
    """Solve a @ x = b for square full-rank ``a``; ``b`` is a vector or a matrix of columns."""
    if a.rows != a.cols:
        raise DimensionError(f"mat_solve needs a square matrix, got {a.shape}")
    q = a.field.q
    rhs = np.mod(np.asarray(b, dtype=np.int64), q)
    vector = rhs.ndim == 1
    if vector:
        rhs = rhs[:, None]
    if rhs.shape[0] != a.rows:
        raise DimensionError(f"right-hand side has {rhs.shape[0]} rows, matrix has {a.rows}")
    reduced, pivots = _row_echelon(np.hstack([a.entries, rhs]), q, ncols=a.cols)
    if len(pivots) < a.cols:
        raise SingularMatrix(f"matrix is rank deficient (rank {len(pivots)} < {a.cols})")
    x = reduced[:, a.cols:]
    return x[:, 0] if vector else x


def pivot_rows(m: FieldMatrix) -> list[int]:
    """Indices of a maximal set of linearly independent rows (greedy, top-down)."""
    _, pivots = _row_echelon(m.entries.T, m.field.q)
    return pivots


__all__ = [
    "PrimeField",
    "FieldMatrix",
    "field_inverse",
    "mat_rank",
    "mat_solve",
    "matmul_mod",
    "pivot_rows",
    "is_prime",
]
