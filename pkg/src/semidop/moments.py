"""Precision-controlled moment series, Hankel truncations and their Cholesky data.

Moments are rho_m = sum_k k^m w(k). Truncations G[k] with entries rho_{n+m}
factor as G = S^{-1} H S^{-T} (S unit lower triangular, H diagonal); S encodes
the monic orthogonal polynomial coefficients and H their squared norms.
Every public routine runs under an explicit PrecisionContext and is
deterministic: fixed summation order, fixed pivoting, no randomness.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

from mpmath import mp, mpf, workprec

from .errors import (
    DivergentSeries,
    IndexOutOfTable,
    TermBudgetExceeded,
    TruncationTooLarge,
)
from .linalg import Matrix, ldl_no_pivot, lu_determinant, unit_lower_inverse
from .weights import (
    ConvergenceClass,
    HypergeometricWeight,
    classify_convergence,
    term_ratio_limit,
    to_mpf,
)


def decimal_str(x, bits: int) -> str:
    """Decimal rendering of an mpf carrying the full precision of ``bits``."""
    digits = int(bits * 0.30103) + 3
    if not isinstance(x, mpf):
        with workprec(bits):
            x = to_mpf(x) if isinstance(x, Fraction) else mpf(x)
    return mp.nstr(x, digits)


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision plus series and confirmation policy.

    series_tol defaults to 2^-(mantissa_bits - 32); verify_bits, used for the
    precision-doubling confirmation of eliminations, defaults to twice the
    working mantissa.
    """

    mantissa_bits: int = 512
    series_tol: Fraction | None = None
    max_terms: int = 100_000
    verify_bits: int | None = None

    def __post_init__(self):
        if self.series_tol is None:
            object.__setattr__(self, "series_tol", Fraction(1, 2 ** (self.mantissa_bits - 32)))
        if self.verify_bits is None:
            object.__setattr__(self, "verify_bits", 2 * self.mantissa_bits)
        if self.mantissa_bits < 64:
            raise ValueError("mantissa_bits must be at least 64")
        if self.verify_bits <= self.mantissa_bits:
            raise ValueError("verify_bits must exceed mantissa_bits")
        if self.series_tol <= 0:
            raise ValueError("series_tol must be positive")

    def doubled(self) -> "PrecisionContext":
        return PrecisionContext(
            mantissa_bits=self.verify_bits,
            max_terms=self.max_terms,
        )

    def default_tolerance(self) -> Fraction:
        """Default residual tolerance for identity checks: 2^-(bits/4)."""
        return Fraction(1, 2 ** (self.mantissa_bits // 4))


class _WeightTerms:
    """Incrementally grown sequence w(0), w(1), ... for one weight.

    The k-th term is produced from the (k-1)-th by an exact rational ratio
    (times deformation powers), so extension order never changes values.
    """

    def __init__(self, w: HypergeometricWeight, bits: int):
        self.weight = w
        self.bits = bits
        with workprec(bits):
            self.values = [mpf(1)]
            self._eta2 = to_mpf(w.eta2)
            self._eta3 = to_mpf(w.eta3)

    def ensure(self, count: int) -> None:
        w = self.weight
        with workprec(self.bits):
            while len(self.values) < count:
                k = len(self.values) - 1
                num = w.eta
                den = Fraction(k + 1)
                for ai in w.a:
                    num *= ai + k
                for bj in w.b:
                    den *= bj + k
                term = self.values[-1] * to_mpf(num / den)
                if w.eta2 != 1:
                    term *= self._eta2 ** (2 * k + 1)
                if w.eta3 != 1:
                    term *= self._eta3 ** (3 * k * k + 3 * k + 1)
                self.values.append(term)


def _series_moment(
    terms: _WeightTerms,
    m: int,
    ctx: PrecisionContext,
    classification: ConvergenceClass,
) -> mpf:
    """Sum k^m w(k) in increasing k with a geometric tail-bound stop."""
    if not classification.converges:
        raise DivergentSeries(f"moments diverge for weight {terms.weight.spec_string()}")
    with workprec(ctx.mantissa_bits):
        if classification.kind == "finite_support":
            q = classification.q
            terms.ensure(q + 1)
            total = mpf(0)
            for k in range(q + 1):
                total += terms.values[k] * (k**m)
            return total

        tol = to_mpf(ctx.series_tol)
        ratio_limit = to_mpf(term_ratio_limit(terms.weight))
        total = mpf(0)
        prev_abs = None
        recent_ratios: list = []
        small_streak = 0
        for k in range(ctx.max_terms):
            terms.ensure(k + 1)
            term = terms.values[k] * (k**m)
            total += term
            t_abs = abs(term)
            if prev_abs is not None and prev_abs > 0:
                recent_ratios.append(t_abs / prev_abs)
                if len(recent_ratios) > 3:
                    recent_ratios.pop(0)
            prev_abs = t_abs
            if k < 2 or not total:
                continue
            if t_abs <= tol * abs(total):
                small_streak += 1
            else:
                small_streak = 0
                continue
            if small_streak < 2 or len(recent_ratios) < 3:
                continue
            r_eff = max(max(recent_ratios), ratio_limit)
            if r_eff < 1:
                tail = t_abs * r_eff / (1 - r_eff)
                if tail <= tol * abs(total):
                    return total
        raise TermBudgetExceeded(
            f"moment m={m} did not converge within {ctx.max_terms} terms "
            f"for weight {terms.weight.spec_string()}"
        )


def moment(w: HypergeometricWeight, m: int, ctx: PrecisionContext) -> mpf:
    """rho_m as a one-shot series evaluation."""
    return _series_moment(_WeightTerms(w, ctx.mantissa_bits), m, ctx, classify_convergence(w))


class MomentTable:
    """Immutable table rho_0 .. rho_{m_max} for one weight at one precision.

    Also memoizes generalized Hankel determinants det[rho_{r_i + j}] keyed by
    the (sorted) row-index tuple; these are the building blocks of the exact
    flow-derivative engine.
    """

    def __init__(self, w: HypergeometricWeight, m_max: int, ctx: PrecisionContext):
        self.weight = w
        self.ctx = ctx
        self.m_max = m_max
        self.classification = classify_convergence(w)
        if not self.classification.converges:
            raise DivergentSeries(f"moments diverge for weight {w.spec_string()}")
        terms = _WeightTerms(w, ctx.mantissa_bits)
        self.values = [
            _series_moment(terms, m, ctx, self.classification) for m in range(m_max + 1)
        ]
        self._det_cache: dict[tuple[int, ...], mpf] = {}
        self._rebuilt: dict[int, "MomentTable"] = {}

    def moment(self, m: int) -> mpf:
        if m < 0 or m > self.m_max:
            raise IndexOutOfTable(f"moment index {m} outside table depth {self.m_max}")
        return self.values[m]

    @property
    def support_cap(self) -> int | None:
        return self.classification.support_cap

    def rebuilt(self, bits: int) -> "MomentTable":
        """The same table recomputed from scratch at a different mantissa."""
        if bits == self.ctx.mantissa_bits:
            return self
        if bits not in self._rebuilt:
            ctx = PrecisionContext(mantissa_bits=bits, max_terms=self.ctx.max_terms)
            self._rebuilt[bits] = MomentTable(self.weight, self.m_max, ctx)
        return self._rebuilt[bits]

    def det_rows(self, rows: tuple[int, ...]) -> mpf:
        """det of the square matrix with entries rho_{rows[i] + j}."""
        if rows in self._det_cache:
            return self._det_cache[rows]
        k = len(rows)
        if rows and rows[-1] + k - 1 > self.m_max:
            raise IndexOutOfTable(
                f"determinant rows {rows} need moment {rows[-1] + k - 1}, "
                f"table depth is {self.m_max}"
            )
        with workprec(self.ctx.mantissa_bits):
            dense = [[self.values[r + j] for j in range(k)] for r in rows]
            value = lu_determinant(dense)
        self._det_cache[rows] = value
        return value


@dataclass(frozen=True)
class FlowMultiIndex:
    """Mixed derivative orders in the first three flows.

    Acting on a moment, the flows shift its index by o1 + 2 o2 + 3 o3.
    """

    o1: int = 0
    o2: int = 0
    o3: int = 0

    def __post_init__(self):
        if min(self.o1, self.o2, self.o3) < 0:
            raise ValueError("derivative orders must be nonnegative")

    @property
    def total_shift(self) -> int:
        return self.o1 + 2 * self.o2 + 3 * self.o3

    @property
    def total_order(self) -> int:
        return self.o1 + self.o2 + self.o3

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.o1, self.o2, self.o3)


def moment_flow_shifted(table: MomentTable, m: int, d: FlowMultiIndex) -> mpf:
    """Exact mixed flow derivative of rho_m: the moment at the shifted index."""
    return table.moment(m + d.total_shift)


@dataclass(frozen=True)
class HankelTruncation:
    """Size-k leading window of the moment matrix; entries shared with the table."""

    table: MomentTable
    size: int

    def entry(self, n: int, m: int) -> mpf:
        return self.table.moment(n + m)

    def to_dense(self) -> Matrix:
        k = self.size
        vals = self.table.values
        return [[vals[n + m] for m in range(k)] for n in range(k)]

    @property
    def weight(self) -> HypergeometricWeight:
        return self.table.weight


def gram_truncation(table: MomentTable, k: int) -> HankelTruncation:
    if k < 1:
        raise ValueError("truncation size must be positive")
    if 2 * k - 2 > table.m_max:
        raise IndexOutOfTable(f"size {k} needs moment {2 * k - 2}, table depth {table.m_max}")
    cap = table.support_cap
    if cap is not None and k > cap:
        raise TruncationTooLarge(
            f"finite-support weight admits truncations up to {cap}, requested {k}"
        )
    return HankelTruncation(table, k)


def hankel_determinant(table: MomentTable, k: int, shifted: bool = False) -> mpf:
    """det G[k]; with shifted=True, the variant with the last row's moment
    indices raised by one (the first eta-flow derivative of the determinant)."""
    if k == 0:
        return mpf(1)
    cap = table.support_cap
    if cap is not None and k > cap:
        raise TruncationTooLarge(
            f"finite-support weight admits truncations up to {cap}, requested {k}"
        )
    rows = tuple(range(k - 1)) + ((k,) if shifted else (k - 1,))
    return table.det_rows(rows)


@dataclass
class CholeskyFactorization:
    """G = S^{-1} H S^{-T} data for one truncation.

    s is dense unit lower triangular; h the diagonal. confirmed_bits measures
    agreement with a full recomputation (series and elimination) at
    ctx.verify_bits; the factorization is flagged low-confidence when fewer
    than mantissa_bits - 64 bits agree.
    """

    s: Matrix
    s_inv: Matrix
    h: list
    size: int
    table: MomentTable
    ctx: PrecisionContext
    confirmed_bits: float
    confident: bool

    @property
    def condition_estimate(self) -> mpf:
        lost = max(0.0, self.ctx.mantissa_bits - self.confirmed_bits)
        return mpf(2) ** lost

    @property
    def weight(self) -> HypergeometricWeight:
        return self.table.weight

    def p(self, j: int, n: int):
        """Coefficient p^j_n of z^(n-j) in the monic polynomial of degree n."""
        if j == 0:
            return mpf(1)
        if j > n:
            return mpf(0)
        return self.s[n][n - j]

    def p1(self, n: int):
        return self.p(1, n)

    def h_floor(self) -> mpf:
        """Smallest |H_n|, used as the scale floor in residual reports."""
        return min(abs(x) for x in self.h)


def _ldl_of_dense(dense: Matrix, bits: int) -> tuple[Matrix, list]:
    with workprec(bits):
        scale = max(abs(dense[i][j]) for i in range(len(dense)) for j in range(len(dense)))
        floor = mpf(2) ** (-(bits // 2)) * scale
        return ldl_no_pivot(dense, floor)


def cholesky(g: HankelTruncation, ctx: PrecisionContext) -> CholeskyFactorization:
    """Factor the truncation, then confirm by recomputation at verify_bits.

    No row exchanges: a small pivot raises SingularTruncation rather than
    permuting (permutation would sever the orthogonal-polynomial reading of S).
    """
    cap = g.table.support_cap
    if cap is not None and g.size > cap:
        raise TruncationTooLarge(
            f"finite-support weight admits truncations up to {cap}, requested {g.size}"
        )
    bits = ctx.mantissa_bits
    l, d = _ldl_of_dense(g.to_dense(), bits)
    with workprec(bits):
        s = unit_lower_inverse(l)

    vbits = ctx.verify_bits
    table2 = g.table.rebuilt(vbits)
    l2, d2 = _ldl_of_dense(HankelTruncation(table2, g.size).to_dense(), vbits)
    with workprec(vbits):
        worst = mpf(0)
        for n in range(g.size):
            err = abs(d[n] - d2[n]) / abs(d2[n])
            if err > worst:
                worst = err
            for j in range(n):
                ref = abs(l2[n][j])
                if ref > 0:
                    err = abs(l[n][j] - l2[n][j]) / ref
                    if err > worst:
                        worst = err
        if worst == 0:
            confirmed = float(vbits)
        else:
            confirmed = float(-mp.log(worst, 2))
    confident = confirmed >= bits - 64
    return CholeskyFactorization(
        s=s, s_inv=l, h=list(d), size=g.size, table=g.table, ctx=ctx,
        confirmed_bits=confirmed, confident=confident,
    )


def moments_to_csv(table: MomentTable, fileobj) -> None:
    """Write columns (m, rho_m) with rho_m as a full-precision decimal string."""
    writer = csv.writer(fileobj)
    writer.writerow(["m", "rho_m"])
    for m, value in enumerate(table.values):
        writer.writerow([m, decimal_str(value, table.ctx.mantissa_bits)])
