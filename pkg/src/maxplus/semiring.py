"""Max-plus scalars, vectors, and matrices.

Scalars live in (R u {eps}, max, +) where eps, the additive identity, is
absorbing for + and neutral for max. Two backings are supported: "exact"
(``fractions.Fraction`` entries, equality is exact) and "float". A value
never mixes backings; operations on mixed operands are rejected.

eps is modelled as ``None``, a distinguished variant rather than a numeric
sentinel, so exact arithmetic never touches -inf floats. All containers are
immutable and all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

EXACT = "exact"
FLOAT = "float"

EPS = None
Scalar = Optional[Union[Fraction, float]]


class MaxPlusError(Exception):
    """Base class for library errors."""


class ContractViolation(MaxPlusError):
    """Input outside an operation's contract (shape, backing, precondition)."""


class BudgetExceeded(MaxPlusError):
    """An iterative operation hit its budget before reaching a conclusion."""


def zero(backing: str) -> Scalar:
    """Multiplicative identity e (the ordinary 0) in the requested backing."""
    return Fraction(0) if backing == EXACT else 0.0


def as_scalar(value, backing: str) -> Scalar:
    """Coerce a user-supplied entry to a scalar of the given backing.

    Accepts eps (``None`` or the string ``"-inf"``), ints, Fractions, and
    "p/q" strings; floats are accepted only by the float backing.
    """
    if value is EPS:
        return EPS
    if isinstance(value, str):
        if value.strip() == "-inf":
            return EPS
        value = Fraction(value.strip())
    if isinstance(value, bool):
        raise ContractViolation(f"bool is not a max-plus scalar: {value!r}")
    if backing == EXACT:
        if not isinstance(value, (int, Fraction)):
            raise ContractViolation(
                f"exact backing accepts int, Fraction or 'p/q' strings, got {value!r}"
            )
        return Fraction(value)
    if backing == FLOAT:
        out = float(value)
        if math.isnan(out) or math.isinf(out):
            raise ContractViolation("float entries must be finite; eps is None or '-inf'")
        return out
    raise ContractViolation(f"unknown backing {backing!r}")


def oplus(a: Scalar, b: Scalar) -> Scalar:
    """max, with eps neutral."""
    if a is EPS:
        return b
    if b is EPS:
        return a
    return a if a >= b else b


def otimes(a: Scalar, b: Scalar) -> Scalar:
    """+, with eps absorbing."""
    if a is EPS or b is EPS:
        return EPS
    return a + b


def otimes_repeat(a: Scalar, n: int) -> Scalar:
    """n-fold otimes power of a scalar; n = 0 gives e by convention."""
    if n < 0:
        raise ContractViolation("negative otimes power")
    if n == 0:
        return 0
    if a is EPS:
        return EPS
    return a * n


def _coerce_backing(backing: str) -> str:
    if backing not in (EXACT, FLOAT):
        raise ContractViolation(f"backing must be {EXACT!r} or {FLOAT!r}, got {backing!r}")
    return backing


@dataclass(frozen=True)
class Vector:
    """Immutable max-plus vector; entries are scalars of one backing."""

    entries: tuple
    backing: str

    @staticmethod
    def make(entries: Iterable, backing: str = EXACT) -> "Vector":
        backing = _coerce_backing(backing)
        tup = tuple(as_scalar(v, backing) for v in entries)
        if not tup:
            raise ContractViolation("empty vector")
        return Vector(tup, backing)

    def __len__(self) -> int:
        return len(self.entries)

    def is_finite(self) -> bool:
        return all(v is not EPS for v in self.entries)

    def to_float(self) -> "Vector":
        return Vector(
            tuple(EPS if v is EPS else float(v) for v in self.entries), FLOAT
        )

    def __repr__(self) -> str:  # keep pytest output readable
        body = ", ".join("eps" if v is EPS else str(v) for v in self.entries)
        return f"Vector([{body}], {self.backing})"


@dataclass(frozen=True)
class Matrix:
    """Immutable square max-plus matrix (tuple of row tuples)."""

    rows: tuple
    backing: str

    @staticmethod
    def make(rows: Iterable[Iterable], backing: str = EXACT) -> "Matrix":
        backing = _coerce_backing(backing)
        out = tuple(tuple(as_scalar(v, backing) for v in row) for row in rows)
        k = len(out)
        if k == 0 or any(len(row) != k for row in out):
            raise ContractViolation("matrix must be square and non-empty")
        return Matrix(out, backing)

    @staticmethod
    def identity(k: int, backing: str = EXACT) -> "Matrix":
        e = zero(backing)
        return Matrix(
            tuple(tuple(e if i == j else EPS for j in range(k)) for i in range(k)),
            backing,
        )

    @staticmethod
    def full_eps(k: int, backing: str = EXACT) -> "Matrix":
        return Matrix(tuple((EPS,) * k for _ in range(k)), backing)

    @property
    def k(self) -> int:
        return len(self.rows)

    def entry(self, i: int, j: int) -> Scalar:
        return self.rows[i][j]

    def col(self, j: int) -> tuple:
        return tuple(row[j] for row in self.rows)

    def row_finite_violation(self) -> Optional[int]:
        """Index of the first all-eps row, or None when every row has a finite entry."""
        for i, row in enumerate(self.rows):
            if all(v is EPS for v in row):
                return i
        return None

    def is_row_finite(self) -> bool:
        return self.row_finite_violation() is None

    def all_finite(self) -> bool:
        return all(v is not EPS for row in self.rows for v in row)

    def eps_pattern(self) -> tuple:
        """Boolean pattern, True where the entry is finite."""
        return tuple(tuple(v is not EPS for v in row) for row in self.rows)

    def to_float(self) -> "Matrix":
        return Matrix(
            tuple(
                tuple(EPS if v is EPS else float(v) for v in row) for row in self.rows
            ),
            FLOAT,
        )

    def __matmul__(self, other: "Matrix") -> "Matrix":
        return mat_mul(self, other)

    def __repr__(self) -> str:
        body = "; ".join(
            " ".join("eps" if v is EPS else str(v) for v in row) for row in self.rows
        )
        return f"Matrix({self.k}x{self.k} {self.backing} [{body}])"


def _require_same_backing(a, b, what: str) -> None:
    if a.backing != b.backing:
        raise ContractViolation(
            f"{what}: mixed backings {a.backing!r} and {b.backing!r}"
        )


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    """(A otimes B)_ij = max_l (A_il + B_lj)."""
    _require_same_backing(A, B, "mat_mul")
    if A.k != B.k:
        raise ContractViolation(f"mat_mul: dimension mismatch {A.k} vs {B.k}")
    k = A.k
    bcols = tuple(B.col(j) for j in range(k))
    out = []
    for row in A.rows:
        orow = []
        for col in bcols:
            best = EPS
            for a, b in zip(row, col):
                if a is EPS or b is EPS:
                    continue
                s = a + b
                if best is EPS or s > best:
                    best = s
            orow.append(best)
        out.append(tuple(orow))
    return Matrix(tuple(out), A.backing)


def mat_vec(A: Matrix, x: Vector) -> Vector:
    """(A otimes x)_i = max_j (A_ij + x_j)."""
    _require_same_backing(A, x, "mat_vec")
    if A.k != len(x):
        raise ContractViolation(f"mat_vec: dimension mismatch {A.k} vs {len(x)}")
    xs = x.entries
    out = []
    for row in A.rows:
        best = EPS
        for a, v in zip(row, xs):
            if a is EPS or v is EPS:
                continue
            s = a + v
            if best is EPS or s > best:
                best = s
        out.append(best)
    return Vector(tuple(out), A.backing)


def mat_oplus(A: Matrix, B: Matrix) -> Matrix:
    """Entrywise max."""
    _require_same_backing(A, B, "mat_oplus")
    if A.k != B.k:
        raise ContractViolation(f"mat_oplus: dimension mismatch {A.k} vs {B.k}")
    return Matrix(
        tuple(
            tuple(oplus(a, b) for a, b in zip(ra, rb))
            for ra, rb in zip(A.rows, B.rows)
        ),
        A.backing,
    )


def vec_oplus(u: Vector, v: Vector) -> Vector:
    _require_same_backing(u, v, "vec_oplus")
    if len(u) != len(v):
        raise ContractViolation("vec_oplus: dimension mismatch")
    return Vector(tuple(oplus(a, b) for a, b in zip(u.entries, v.entries)), u.backing)


def mat_power(A: Matrix, n: int) -> Matrix:
    """n-th otimes power by repeated squaring; A^0 is the identity E."""
    if n < 0:
        raise ContractViolation("mat_power: negative exponent")
    result = Matrix.identity(A.k, A.backing)
    base = A
    while n:
        if n & 1:
            result = mat_mul(result, base)
        n >>= 1
        if n:
            base = mat_mul(base, base)
    return result


def scale_matrix(c, A: Matrix) -> Matrix:
    """c otimes A, c a finite scalar."""
    c = as_scalar(c, A.backing)
    if c is EPS:
        raise ContractViolation("scale_matrix: scaling by eps is not useful")
    return Matrix(
        tuple(tuple(EPS if v is EPS else v + c for v in row) for row in A.rows),
        A.backing,
    )


def scale_vector(c, x: Vector) -> Vector:
    c = as_scalar(c, x.backing)
    if c is EPS:
        raise ContractViolation("scale_vector: scaling by eps is not useful")
    return Vector(
        tuple(EPS if v is EPS else v + c for v in x.entries), x.backing
    )


def matrix_approx_equal(A: Matrix, B: Matrix, tol: float = 1e-12) -> bool:
    """Entrywise comparison with tolerance on finite entries; eps patterns must match."""
    if A.k != B.k:
        return False
    for ra, rb in zip(A.rows, B.rows):
        for a, b in zip(ra, rb):
            if (a is EPS) != (b is EPS):
                return False
            if a is not EPS and abs(a - b) > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# JSON serialization. Matrices travel as {"k": int, "entries": [[...]]} with
# eps written "-inf" and non-integral rationals written "p/q".


def scalar_to_json(v: Scalar):
    if v is EPS:
        return "-inf"
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return float(v)


def matrix_to_json(A: Matrix) -> dict:
    return {
        "k": A.k,
        "entries": [[scalar_to_json(v) for v in row] for row in A.rows],
    }


def matrix_from_json(obj, backing: str = EXACT) -> Matrix:
    if not isinstance(obj, dict) or "entries" not in obj:
        raise ContractViolation('matrix JSON must be {"k": ..., "entries": [[...]]}')
    M = Matrix.make(obj["entries"], backing)
    if "k" in obj and obj["k"] != M.k:
        raise ContractViolation(f'matrix JSON: declared k={obj["k"]} but entries are {M.k}x{M.k}')
    return M


def vector_to_json(x) -> list:
    return [scalar_to_json(v) for v in x.entries]


def vector_from_json(obj, backing: str = EXACT) -> Vector:
    if isinstance(obj, dict) and "entries" in obj:
        obj = obj["entries"]
    if not isinstance(obj, list):
        raise ContractViolation("vector JSON must be an array (or {'entries': [...]})")
    return Vector.make(obj, backing)
