"""Small dense and banded linear algebra over mpmath numbers.

Truncations in this package are tiny (k <= ~32), so dense row-major lists are
the working representation; BandedMatrix adds diagonal-offset storage with
structural band tracking for the objects that are banded by theorem.
All elimination routines use fixed pivoting rules so results are bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mpf

from .errors import SingularTruncation
from .weights import to_mpf

Matrix = list  # list[list[number]]


def zeros(n: int, m: int | None = None) -> Matrix:
    m = n if m is None else m
    return [[mpf(0)] * m for _ in range(n)]


def identity(n: int) -> Matrix:
    out = zeros(n)
    for i in range(n):
        out[i][i] = mpf(1)
    return out


def shift_matrix(n: int) -> Matrix:
    """The upper shift: entries (i, i+1) = 1."""
    out = zeros(n)
    for i in range(n - 1):
        out[i][i + 1] = mpf(1)
    return out


def diag(values) -> Matrix:
    n = len(values)
    out = zeros(n)
    for i, v in enumerate(values):
        out[i][i] = v
    return out


def transpose(a: Matrix) -> Matrix:
    return [list(col) for col in zip(*a)]


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n, k, m = len(a), len(b), len(b[0])
    bt = list(zip(*b))
    out = []
    for i in range(n):
        row_a = a[i]
        out.append([sum(row_a[l] * bt_j[l] for l in range(k)) for bt_j in bt])
    return out


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_sub(a: Matrix, b: Matrix) -> Matrix:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_scale(a: Matrix, c) -> Matrix:
    return [[x * c for x in row] for row in a]


def mat_vec(a: Matrix, v) -> list:
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def commutator(a: Matrix, b: Matrix) -> Matrix:
    return mat_sub(mat_mul(a, b), mat_mul(b, a))


def max_abs(a: Matrix, window: int | None = None) -> mpf:
    n = len(a) if window is None else min(window, len(a))
    best = mpf(0)
    for i in range(n):
        for j in range(n if window is not None else len(a[i])):
            v = abs(a[i][j])
            if v > best:
                best = v
    return best


def window_diff(a: Matrix, b: Matrix, window: int):
    """(max |a-b|, max(|a|,|b|)) over the leading window x window block."""
    diff = mpf(0)
    scale = mpf(0)
    for i in range(window):
        for j in range(window):
            d = abs(a[i][j] - b[i][j])
            s = max(abs(a[i][j]), abs(b[i][j]))
            if d > diff:
                diff = d
            if s > scale:
                scale = s
    return diff, scale


def poly_of_matrix(coeffs, a: Matrix) -> Matrix:
    """Evaluate a polynomial (ascending coefficients) at a square matrix by Horner."""
    n = len(a)
    acc = mat_scale(identity(n), to_mpf(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        acc = mat_mul(acc, a)
        cm = to_mpf(c)
        for i in range(n):
            acc[i][i] = acc[i][i] + cm
    return acc


def unit_lower_inverse(l: Matrix) -> Matrix:
    """Invert a unit lower triangular matrix by forward substitution."""
    n = len(l)
    inv = identity(n)
    for j in range(n):
        col = inv  # solve L x = e_j in place
        for i in range(j + 1, n):
            s = mpf(0)
            for p in range(j, i):
                s += l[i][p] * col[p][j]
            col[i][j] = -s
    return inv


def ldl_no_pivot(a: Matrix, pivot_floor) -> tuple[Matrix, list]:
    """A = L D L^T for symmetric A, unit lower L, no row exchanges.

    Raises SingularTruncation at the first pivot with |pivot| < pivot_floor.
    Row exchanges are deliberately not attempted: they would break the
    triangular correspondence this factorization exists to expose.
    """
    n = len(a)
    l = identity(n)
    d = [mpf(0)] * n
    for j in range(n):
        acc = a[j][j]
        for p in range(j):
            acc = acc - l[j][p] * l[j][p] * d[p]
        if abs(acc) < pivot_floor:
            raise SingularTruncation(j)
        d[j] = acc
        for i in range(j + 1, n):
            s = a[i][j]
            for p in range(j):
                s = s - l[i][p] * l[j][p] * d[p]
            l[i][j] = s / d[j]
    return l, d


def lu_determinant(a: Matrix) -> mpf:
    """Determinant by LU with partial pivoting (first maximal pivot)."""
    n = len(a)
    if n == 0:
        return mpf(1)
    work = [list(map(mpf, row)) for row in a]
    det = mpf(1)
    for j in range(n):
        pivot_row = j
        best = abs(work[j][j])
        for i in range(j + 1, n):
            v = abs(work[i][j])
            if v > best:
                best = v
                pivot_row = i
        if best == 0:
            return mpf(0)
        if pivot_row != j:
            work[j], work[pivot_row] = work[pivot_row], work[j]
            det = -det
        pivot = work[j][j]
        det *= pivot
        for i in range(j + 1, n):
            factor = work[i][j] / pivot
            if factor:
                row_i = work[i]
                row_j = work[j]
                for p in range(j + 1, n):
                    row_i[p] = row_i[p] - factor * row_j[p]
    return det


# -- diagonal shift operators -------------------------------------------------

def t_minus(values: list, steps: int = 1) -> list:
    """Lowering shift on a diagonal vector: drop the first entries."""
    return list(values[steps:])


def t_plus(values: list, steps: int = 1) -> list:
    """Raising shift: prepend zeros, keeping the length."""
    return [mpf(0)] * steps + list(values[: len(values) - steps])


def diag_mul(*vectors) -> list:
    """Entrywise product of equal-length prefix of diagonal vectors."""
    n = min(len(v) for v in vectors)
    out = []
    for i in range(n):
        acc = vectors[0][i]
        for v in vectors[1:]:
            acc = acc * v[i]
        out.append(acc)
    return out


# -- banded storage -----------------------------------------------------------

@dataclass
class BandedMatrix:
    """Diagonal-offset storage: diagonals[d] holds entries A[i, i+d].

    Offsets outside [lo, hi] are structurally zero. lo <= 0 <= hi.
    """

    size: int
    lo: int
    hi: int
    diagonals: dict

    @classmethod
    def from_dense(cls, a: Matrix, lo: int, hi: int) -> "BandedMatrix":
        n = len(a)
        diags = {}
        for d in range(lo, hi + 1):
            diags[d] = [a[i][i + d] for i in range(max(0, -d), min(n, n - d))]
        return cls(n, lo, hi, diags)

    def diagonal(self, d: int) -> list:
        if d < self.lo or d > self.hi:
            return [mpf(0)] * (self.size - abs(d))
        return self.diagonals[d]

    def to_dense(self) -> Matrix:
        out = zeros(self.size)
        for d, vals in self.diagonals.items():
            for idx, v in enumerate(vals):
                i = idx + max(0, -d)
                out[i][i + d] = v
        return out

    def entry(self, i: int, j: int):
        d = j - i
        if d < self.lo or d > self.hi:
            return mpf(0)
        return self.diagonals[d][min(i, j)]

    def dump_lines(self, fmt) -> list[str]:
        """Offset-indexed listing ``offset d: v_0 v_1 ...`` with fmt(x) -> str."""
        lines = []
        for d in range(self.lo, self.hi + 1):
            vals = " ".join(fmt(v) for v in self.diagonals[d])
            lines.append(f"offset {d}: {vals}")
        return lines


def out_of_band_max(a: Matrix, lo: int, hi: int, window: int) -> mpf:
    """Largest |entry| at offsets outside [lo, hi], over the leading window."""
    worst = mpf(0)
    for i in range(window):
        for j in range(window):
            d = j - i
            if lo <= d <= hi:
                continue
            v = abs(a[i][j])
            if v > worst:
                worst = v
    return worst


@dataclass
class LowerUnitriangular:
    """Unit lower triangular matrix in subdiagonal-offset storage.

    bands[d] (d >= 1) holds the d-th subdiagonal, entries A[n+d, n].
    """

    size: int
    bands: dict

    @classmethod
    def from_dense(cls, a: Matrix) -> "LowerUnitriangular":
        n = len(a)
        bands = {d: [a[i + d][i] for i in range(n - d)] for d in range(1, n)}
        return cls(n, bands)

    def subdiagonal(self, d: int) -> list:
        if d == 0:
            return [mpf(1)] * self.size
        return self.bands.get(d, [mpf(0)] * (self.size - d))

    def to_dense(self) -> Matrix:
        out = identity(self.size)
        for d, vals in self.bands.items():
            for i, v in enumerate(vals):
                out[i + d][i] = v
        return out
