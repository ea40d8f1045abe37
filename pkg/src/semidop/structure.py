"""Structure matrices and their identity checks on finite truncations.

Covers the binomial (Pascal) matrix and its dressed conjugates, the tridiagonal
recurrence matrix, the banded shift-structure matrix of a Pearson weight, and
the residual checks tying them together. Identities that hold for semi-infinite
matrices are verified on a leading window of the truncation; trimmed rows and
columns absorb the artificial boundary, with the trim width set by the
polynomial degrees involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from mpmath import mp, mpf, workprec

from .errors import PreconditionError, RouteMismatch
from .linalg import (
    BandedMatrix,
    Matrix,
    commutator,
    diag,
    identity,
    ldl_no_pivot,
    mat_add,
    mat_mul,
    mat_sub,
    mat_vec,
    max_abs,
    out_of_band_max,
    poly_of_matrix,
    shift_matrix,
    transpose,
    unit_lower_inverse,
    window_diff,
    zeros,
)
from .moments import CholeskyFactorization, MomentTable
from .result import CheckResult, ResidualAccumulator, make_result
from .weights import (
    HypergeometricWeight,
    pearson_polynomials,
    to_mpf,
    weight_value,
)


# -- Pascal matrices and falling-factorial diagonals ---------------------------

def pascal_matrix(k: int, sign: int = 1) -> list:
    """Lower binomial matrix (sign=+1) or its inverse (sign=-1), exact integers."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    out = [[0] * k for _ in range(k)]
    for n in range(k):
        for m in range(n + 1):
            c = comb(n, m)
            out[n][m] = c if sign == 1 else (-1) ** (n + m) * c
    return out


def pascal_subdiagonal(k_index: int, n: int) -> int:
    """Falling-factorial diagonal profile (n+k)(n+k-1)...(n+1)/k, exact.

    Coincides with the k-th subdiagonal of the binomial matrix for k <= 2;
    beyond that it is (k-1)! times the binomial entry C(n+k,k). The closed-form
    identities that genuinely involve the binomial matrix use C(n+k,k) instead.
    """
    if k_index < 1:
        raise ValueError("subdiagonal index must be >= 1")
    num = 1
    for j in range(n + 1, n + k_index + 1):
        num *= j
    assert num % k_index == 0
    return num // k_index


def d_vector(k_index: int, length: int) -> list:
    return [pascal_subdiagonal(k_index, n) for n in range(length)]


def dressed_pascal(s: Matrix, s_inv: Matrix, sign: int, bits: int) -> Matrix:
    """S B^(sign) S^{-1}; lower unitriangular, window-exact at any truncation."""
    with workprec(bits):
        b = pascal_matrix(len(s), sign)
        return mat_mul(mat_mul(s, b), s_inv)


def subdiagonal_of(a: Matrix, d: int) -> list:
    return [a[n + d][n] for n in range(len(a) - d)]


# -- recurrence data ------------------------------------------------------------

@dataclass
class JacobiMatrix:
    """Tridiagonal recurrence data: diagonal beta_0..beta_{size-1}, subdiagonal
    gamma_1..gamma_{size-1}, unit superdiagonal."""

    beta: list
    gamma: list  # gamma[i] = gamma_{i+1}
    size: int
    bits: int

    def to_dense(self) -> Matrix:
        j = zeros(self.size)
        for n in range(self.size):
            j[n][n] = self.beta[n]
            if n + 1 < self.size:
                j[n][n + 1] = mpf(1)
                j[n + 1][n] = self.gamma[n]
        return j

    def j_plus(self) -> Matrix:
        out = zeros(self.size)
        for n in range(self.size):
            out[n][n] = self.beta[n]
            if n + 1 < self.size:
                out[n][n + 1] = mpf(1)
        return out

    def j_minus(self) -> Matrix:
        out = zeros(self.size)
        for n in range(self.size - 1):
            out[n + 1][n] = self.gamma[n]
        return out


def jacobi_matrix(chol: CholeskyFactorization, validate_tol: Fraction | None = None) -> JacobiMatrix:
    """Recurrence coefficients from the factorization: beta_n as the difference
    of consecutive first-subdiagonal coefficients of S, gamma_n as H_n/H_{n-1}.

    Validates against the direct conjugation route S Lambda S^{-1} (which must
    be tridiagonal with unit superdiagonal) and the symmetry of J H.
    """
    k = chol.size
    bits = chol.ctx.mantissa_bits
    with workprec(bits):
        # beta_n = p1_n - p1_{n+1} with p1_n = S[n][n-1], p1_0 = 0
        beta = [
            (chol.s[n][n - 1] if n else mpf(0)) - chol.s[n + 1][n] for n in range(k - 1)
        ]
        gamma = [chol.h[n] / chol.h[n - 1] for n in range(1, k - 1)]
        jac = JacobiMatrix(beta=beta, gamma=gamma, size=k - 1, bits=bits)

        if validate_tol is not None:
            direct = mat_mul(mat_mul(chol.s, shift_matrix(k)), chol.s_inv)
            tol = to_mpf(validate_tol)
            h_floor = chol.h_floor()
            scale = max(max_abs(direct, k - 1), h_floor)
            worst = mpf(0)
            for n in range(k - 1):
                for m in range(k - 1):
                    expected = mpf(0)
                    if m == n:
                        expected = beta[n]
                    elif m == n + 1:
                        expected = mpf(1)
                    elif m == n - 1:
                        expected = gamma[n - 1]
                    worst = max(worst, abs(direct[n][m] - expected))
            jh = mat_mul(jac.to_dense(), diag(chol.h[: k - 1]))
            sym = max(
                abs(jh[n][m] - jh[m][n]) for n in range(k - 1) for m in range(k - 1)
            )
            if max(worst, sym) > tol * scale:
                raise RouteMismatch(
                    "recurrence data disagrees with the direct conjugation route "
                    f"(residual {mp.nstr(max(worst, sym) / scale, 8)})"
                )
    return jac


def polynomial_eval(jac: JacobiMatrix, n: int, z) -> mpf:
    """P_n(z) by the three-term recurrence, P_{-1} = 0, P_0 = 1."""
    if n > jac.size:
        raise PreconditionError(f"degree {n} exceeds available recurrence data {jac.size}")
    with workprec(jac.bits):
        zm = to_mpf(z) if isinstance(z, Fraction) else mpf(z)
        p_prev, p = mpf(0), mpf(1)
        for j in range(n):
            gamma_j = jac.gamma[j - 1] if j >= 1 else mpf(0)
            p_prev, p = p, (zm - jac.beta[j]) * p - gamma_j * p_prev
        return p


def polynomial_vector(jac: JacobiMatrix, z, count: int) -> list:
    with workprec(jac.bits):
        zm = to_mpf(z) if isinstance(z, Fraction) else mpf(z)
        out = [mpf(1)]
        p_prev, p = mpf(0), mpf(1)
        for j in range(count - 1):
            gamma_j = jac.gamma[j - 1] if j >= 1 else mpf(0)
            p_prev, p = p, (zm - jac.beta[j]) * p - gamma_j * p_prev
            out.append(p)
        return out


# -- dressed-Pascal subdiagonal closed forms ------------------------------------

def pi_closed_form_check(
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    pi: Matrix,
    pi_inv: Matrix,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Subdiagonals of the dressed Pascal pair against their closed forms in
    polynomial coefficients and recurrence data, plus the sum/difference
    identities relating them to the integer diagonals."""
    k = len(pi)
    bits = chol.ctx.mantissa_bits
    if k < 6:
        raise PreconditionError("closed-form check needs truncation size >= 6")
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        p1 = [chol.p(1, n) for n in range(k)]
        p2 = [chol.p(2, n) for n in range(k)]
        beta = jac.beta

        pi1 = subdiagonal_of(pi, 1)
        pim1 = subdiagonal_of(pi_inv, 1)
        pi2 = subdiagonal_of(pi, 2)
        pim2 = subdiagonal_of(pi_inv, 2)
        pi3 = subdiagonal_of(pi, 3)
        pim3 = subdiagonal_of(pi_inv, 3)

        def closed2(n: int, sgn: int):
            return mpf((n + 2) * (n + 1)) / 2 - sgn * (n + 1) * beta[n + 1] - sgn * p1[n + 1]

        def closed3(n: int, sgn: int):
            # leading term is the third subdiagonal of the binomial matrix,
            # C(n+3,3); the falling-factorial profile D^[3] is twice that
            return (
                sgn * mpf(comb(n + 3, 3))
                + mpf((n + 2) * (n + 1)) / 2 * p1[n + 3]
                - mpf((n + 3) * (n + 2)) / 2 * p1[n + 1]
                + sgn * (n + 1) * p2[n + 3]
                - sgn * (n + 3) * p2[n + 2]
                + sgn * (n + 3) * p1[n + 2] * p1[n + 1]
                - sgn * (n + 2) * p1[n + 3] * p1[n + 1]
            )

        scale1 = max(max(abs(x) for x in pi1), mpf(1))
        for n in range(k - 1):
            acc.add(f"first_subdiag[{n}]", abs(pi1[n] - (n + 1)), scale1)
            acc.add(f"first_subdiag_inv[{n}]", abs(pim1[n] + (n + 1)), scale1)
        scale2 = max(max(abs(x) for x in pi2), mpf(1))
        for n in range(k - 3):
            acc.add(f"second_subdiag[{n}]", abs(pi2[n] - closed2(n, 1)), scale2)
            acc.add(f"second_subdiag_inv[{n}]", abs(pim2[n] - closed2(n, -1)), scale2)
        scale3 = max(max(abs(x) for x in pi3), mpf(1))
        for n in range(k - 4):
            acc.add(f"third_subdiag[{n}]", abs(pi3[n] - closed3(n, 1)), scale3)
            acc.add(f"third_subdiag_inv[{n}]", abs(pim3[n] - closed3(n, -1)), scale3)

        # sum and difference identities against the integer diagonal profiles
        s1 = subdiagonal_of(chol.s, 1)
        s2 = subdiagonal_of(chol.s, 2)
        dv = [mpf(x) for x in d_vector(1, k)]
        d2 = [mpf(x) for x in d_vector(2, k)]
        for n in range(k - 1):
            acc.add(f"sum1[{n}]", abs(pi1[n] + pim1[n]), scale1)
            acc.add(f"diff1[{n}]", abs(pi1[n] - pim1[n] - 2 * dv[n]), scale1)
        for n in range(k - 3):
            acc.add(f"sum2[{n}]", abs(pi2[n] + pim2[n] - 2 * d2[n]), scale2)
            rhs = 2 * (s1[n + 1] * dv[n] - dv[n + 1] * s1[n])
            acc.add(f"diff2[{n}]", abs(pi2[n] - pim2[n] - rhs), scale2)
        for n in range(k - 4):
            rhs_sum = 2 * (s1[n + 2] * d2[n] - d2[n + 1] * s1[n])
            acc.add(f"sum3[{n}]", abs(pi3[n] + pim3[n] - rhs_sum), scale3)
            rhs_diff = 2 * (
                mpf(comb(n + 3, 3))
                + s2[n + 1] * dv[n]
                - dv[n + 2] * s2[n]
                + dv[n + 2] * s1[n + 1] * s1[n]
                - s1[n + 2] * dv[n + 1] * s1[n]
            )
            acc.add(f"diff3[{n}]", abs(pi3[n] - pim3[n] - rhs_diff), scale3)

        return acc.result(
            "pascal_forms",
            tolerance,
            window=f"subdiagonals 1..3 over n < {k - 4}",
            provenance=provenance,
        )


def s_inverse_expansion_check(
    chol: CholeskyFactorization,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Subdiagonals of S^{-1} against their expansion in subdiagonals of S."""
    k = chol.size
    bits = chol.ctx.mantissa_bits
    if k < 6:
        raise PreconditionError("inverse-expansion check needs truncation size >= 6")
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        s = [subdiagonal_of(chol.s, d) for d in range(0, 5)]
        si = [subdiagonal_of(chol.s_inv, d) for d in range(0, 5)]
        scale = max(max_abs(chol.s), mpf(1))

        for n in range(k - 1):
            acc.add(f"d1[{n}]", abs(si[1][n] + s[1][n]), scale)
        for n in range(k - 2):
            expect = -s[2][n] + s[1][n + 1] * s[1][n]
            acc.add(f"d2[{n}]", abs(si[2][n] - expect), scale)
        for n in range(k - 3):
            expect = (
                -s[3][n]
                + s[2][n + 1] * s[1][n]
                + s[1][n + 2] * s[2][n]
                - s[1][n + 2] * s[1][n + 1] * s[1][n]
            )
            acc.add(f"d3[{n}]", abs(si[3][n] - expect), scale)
        for n in range(k - 4):
            expect = (
                -s[4][n]
                + s[3][n + 1] * s[1][n]
                + s[2][n + 2] * s[2][n]
                - s[2][n + 2] * s[1][n + 1] * s[1][n]
                + s[1][n + 3] * s[3][n]
                - s[1][n + 3] * s[2][n + 1] * s[1][n]
                - s[1][n + 3] * s[1][n + 2] * s[2][n]
                + s[1][n + 3] * s[1][n + 2] * s[1][n + 1] * s[1][n]
            )
            acc.add(f"d4[{n}]", abs(si[4][n] - expect), scale)

        return acc.result(
            "s_inverse",
            tolerance,
            window=f"subdiagonals 1..4 over n < {k - 4}",
            provenance=provenance,
        )


def coefficient_sum_check(
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Nonlocal expressions for polynomial coefficients in recurrence data:
    the telescoped sums for p^1 and p^2 and the third-coefficient recursion."""
    k = chol.size
    bits = chol.ctx.mantissa_bits
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        beta = jac.beta
        gamma = jac.gamma  # gamma[i] = gamma_{i+1}
        p = chol.p
        scale = max(max_abs(chol.s), mpf(1))

        for n in range(min(k - 1, len(beta))):
            expect = -sum(beta[: n + 1], mpf(0))
            acc.add(f"p1[{n + 1}]", abs(p(1, n + 1) - expect), scale)

        for n in range(1, min(k - 1, len(beta))):
            total = -sum(gamma[:n], mpf(0))
            cross = mpf(0)
            for j in range(1, n + 1):
                for l in range(j):
                    cross += beta[j] * beta[l]
            acc.add(f"p2[{n + 1}]", abs(p(2, n + 1) - (total + cross)), scale)

        # telescoped third-coefficient recursion; equivalent to reading the
        # z^(n-1) coefficient off the three-term recurrence
        for n in range(k - 4):
            lhs = p(3, n + 2) - p(3, n + 3)
            rhs = gamma[n + 1] * p(1, n + 1) + beta[n + 2] * p(2, n + 2)
            acc.add(f"p3[{n}]", abs(lhs - rhs), scale)

        return acc.result(
            "coefficient_sums",
            tolerance,
            window=f"coefficients up to degree {k - 1}",
            provenance=provenance,
        )


# -- orthogonality by direct summation ------------------------------------------

def orthogonality_check(
    w: HypergeometricWeight,
    jac: JacobiMatrix,
    h: list,
    nmax: int,
    series_tol: Fraction,
    max_terms: int,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Direct weighted lattice sums of P_n P_m w against the factorization norms.

    This is the independent witness for the whole Hankel/elimination path: the
    polynomials are evaluated pointwise by recurrence and summed against the
    weight itself.
    """
    bits = jac.bits
    if nmax + 1 > jac.size:
        raise PreconditionError("orthogonality range exceeds recurrence data")
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        tol_series = to_mpf(series_tol)
        sums = [[mpf(0)] * (nmax + 1) for _ in range(nmax + 1)]
        from .weights import classify_convergence, term_ratio_limit

        classification = classify_convergence(w)
        limit = to_mpf(term_ratio_limit(w))
        cap = classification.support_cap
        wk = mpf(1)
        prev_contrib = None
        streak = 0
        k = 0
        floor = min(abs(x) for x in h[: nmax + 1])
        while True:
            if cap is not None and k >= cap:
                break
            if k >= max_terms:
                break
            value = weight_value(w, k)
            pvec = polynomial_vector(jac, k, nmax + 1)
            contrib = mpf(0)
            for n in range(nmax + 1):
                for m in range(n + 1):
                    term = pvec[n] * pvec[m] * value
                    sums[n][m] += term
                    if abs(term) > contrib:
                        contrib = abs(term)
            if k > 2 * nmax + 2 and contrib <= tol_series * floor:
                streak += 1
                ratio_ok = prev_contrib is not None and (
                    prev_contrib == 0 or max(contrib / prev_contrib, limit) < 1
                )
                if streak >= 4 and ratio_ok:
                    break
            else:
                streak = 0
            prev_contrib = contrib
            k += 1

        for n in range(nmax + 1):
            for m in range(n + 1):
                if n == m:
                    acc.add(f"norm[{n}]", abs(sums[n][n] - h[n]), abs(h[n]))
                else:
                    acc.add(f"cross[{n},{m}]", abs(sums[n][m]), mp.sqrt(abs(h[n] * h[m])))

        return acc.result(
            "orthogonality",
            tolerance,
            window=f"degrees up to {nmax}, {k} lattice points",
            provenance=provenance,
        )


# -- the Pearson symmetry of the moment matrix -----------------------------------

def gram_pearson_residual(
    table: MomentTable,
    w: HypergeometricWeight,
    k: int,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """theta(shift) G versus B sigma(shift) G B^T on the leading k x k window.

    Both sides are assembled entrywise from the shared moment table (the left
    side consumes deg theta extra indices), so the residual reflects round-off
    and the Pearson property only, not truncation artifacts.
    """
    if w.deformed:
        raise PreconditionError("the Pearson symmetry applies to undeformed weights only")
    bits = table.ctx.mantissa_bits
    pp = pearson_polynomials(w)
    with workprec(bits):
        theta_c = [to_mpf(c) for c in pp.theta_coeffs]
        sigma_c = [to_mpf(c) for c in pp.sigma_coeffs]
        lhs = [
            [
                sum(theta_c[p] * table.moment(n + m + p) for p in range(len(theta_c)))
                for m in range(k)
            ]
            for n in range(k)
        ]
        mid = [
            [
                sum(sigma_c[q] * table.moment(n + m + q) for q in range(len(sigma_c)))
                for m in range(k)
            ]
            for n in range(k)
        ]
        b = pascal_matrix(k, 1)
        rhs = mat_mul(mat_mul(b, mid), transpose(b))
        diff, scale = window_diff(lhs, rhs, k)
        return make_result(
            "gram_pearson",
            diff / max(scale, mpf(1)),
            max(scale, mpf(1)),
            tolerance,
            window=f"leading {k}x{k} window (entrywise exact construction)",
            provenance=provenance,
        )


# -- the banded shift-structure matrix -------------------------------------------

ROUTE_NAMES = (
    "Pi^-1 H theta(J^T)",
    "sigma(J) H Pi^T",
    "Pi^-1 theta(J) H",
    "H sigma(J^T) Pi^T",
    "theta(J+I) Pi^-1 H",
    "H Pi^T sigma(J^T - I)",
)


def psi_routes(
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    pi: Matrix,
    pi_inv: Matrix,
    w: HypergeometricWeight,
) -> dict:
    """The six assembly routes for the shift-structure matrix, dense."""
    bits = chol.ctx.mantissa_bits
    pp = pearson_polynomials(w)
    kj = jac.size
    with workprec(bits):
        j = jac.to_dense()
        h = diag(chol.h[:kj])
        pi_t = transpose([row[:kj] for row in pi[:kj]])
        pi_inv_k = [row[:kj] for row in pi_inv[:kj]]
        theta_j = poly_of_matrix(pp.theta_coeffs, j)
        sigma_j = poly_of_matrix(pp.sigma_coeffs, j)
        j_plus_i = mat_add(j, identity(kj))
        j_minus_i = mat_sub(j, identity(kj))
        theta_jp = poly_of_matrix(pp.theta_coeffs, j_plus_i)
        sigma_jm = poly_of_matrix(pp.sigma_coeffs, j_minus_i)
        return {
            ROUTE_NAMES[0]: mat_mul(pi_inv_k, mat_mul(h, transpose(theta_j))),
            ROUTE_NAMES[1]: mat_mul(sigma_j, mat_mul(h, pi_t)),
            ROUTE_NAMES[2]: mat_mul(pi_inv_k, mat_mul(theta_j, h)),
            ROUTE_NAMES[3]: mat_mul(h, mat_mul(transpose(sigma_j), pi_t)),
            ROUTE_NAMES[4]: mat_mul(theta_jp, mat_mul(pi_inv_k, h)),
            ROUTE_NAMES[5]: mat_mul(h, mat_mul(pi_t, transpose(sigma_jm))),
        }


def psi_structure_check(
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    pi: Matrix,
    pi_inv: Matrix,
    w: HypergeometricWeight,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> tuple[BandedMatrix, Matrix, CheckResult, int]:
    """Pairwise route agreement and band confinement; returns the banded matrix
    (subdiagonals M, superdiagonals N+1), its dense form, and the valid window."""
    mdeg, ndeg = w.m_degree, w.n_degree
    kj = jac.size
    window = kj - (ndeg + mdeg + 2)
    if window < 2:
        raise PreconditionError(f"truncation too small for the structure check (window {window})")
    bits = chol.ctx.mantissa_bits
    routes = psi_routes(chol, jac, pi, pi_inv, w)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        names = list(routes)
        ref = routes[ROUTE_NAMES[1]]
        h_floor = chol.h_floor()
        for i in range(len(names)):
            for j_idx in range(i + 1, len(names)):
                diff, scale = window_diff(routes[names[i]], routes[names[j_idx]], window)
                acc.add(f"routes {i}~{j_idx}", diff, max(scale, h_floor))
        band_scale = max(max_abs(ref, window), h_floor)
        acc.add(
            "band confinement",
            out_of_band_max(ref, -mdeg, ndeg + 1, window),
            band_scale,
        )
        psi = BandedMatrix.from_dense(ref, -mdeg, ndeg + 1)
        result = acc.result(
            "psi_routes",
            tolerance,
            window=f"leading {window} of {kj} (trim {ndeg + mdeg + 2})",
            provenance=provenance,
        )
        return psi, ref, result, window


def laguerre_freud_matrix(
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    pi: Matrix,
    pi_inv: Matrix,
    w: HypergeometricWeight,
    tolerance: Fraction,
) -> BandedMatrix:
    """Banded structure matrix; raises RouteMismatch when the six assembly
    routes disagree beyond tolerance on the interior window."""
    psi, _, result, _ = psi_structure_check(chol, jac, pi, pi_inv, w, tolerance)
    if not result.passed:
        raise RouteMismatch(
            f"structure-matrix routes disagree: residual {mp.nstr(result.max_residual, 8)}"
        )
    return psi


def psi_extreme_diagonals(
    psi: BandedMatrix,
    window: int,
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    w: HypergeometricWeight,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Lowest subdiagonal and highest superdiagonal of the structure matrix
    against their product closed forms in the norms and recurrence data."""
    mdeg, ndeg = w.m_degree, w.n_degree
    bits = chol.ctx.mantissa_bits
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        eta = to_mpf(w.eta)
        gamma = jac.gamma  # gamma[i] = gamma_{i+1}
        low = psi.diagonal(-mdeg)
        high = psi.diagonal(ndeg + 1)
        h_floor = chol.h_floor()
        scale_low = max(max(abs(x) for x in low[:window]), h_floor)
        scale_high = max(max(abs(x) for x in high[:window]), h_floor)
        for n in range(min(window, len(low), len(gamma) - mdeg + 1)):
            expect = eta * chol.h[n]
            for j in range(n + 1, n + mdeg + 1):
                expect *= gamma[j - 1]
            acc.add(f"low[{n}]", abs(low[n] - expect), scale_low)
        for n in range(min(window, len(high), len(gamma) - ndeg)):
            expect = chol.h[n]
            for j in range(n + 1, n + ndeg + 2):
                expect *= gamma[j - 1]
            acc.add(f"high[{n}]", abs(high[n] - expect), scale_high)
        return acc.result(
            "psi_diagonals",
            tolerance,
            window=f"extreme diagonals over n < {window}",
            provenance=provenance,
        )


def structure_shift_residual(
    psi_dense: Matrix,
    window: int,
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    w: HypergeometricWeight,
    z_samples: list,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """theta(z) P(z-1) = Psi H^{-1} P(z) and sigma(z) P(z+1) = Psi^T H^{-1} P(z)
    at sample points, on the interior window."""
    bits = chol.ctx.mantissa_bits
    kj = jac.size
    pp = pearson_polynomials(w)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        h_inv = [1 / x for x in chol.h[:kj]]
        psi_t = transpose(psi_dense)
        h_floor = chol.h_floor()
        for z in z_samples:
            zf = to_mpf(z) if isinstance(z, Fraction) else mpf(z)
            p_at = polynomial_vector(jac, zf, kj)
            p_dn = polynomial_vector(jac, zf - 1, kj)
            p_up = polynomial_vector(jac, zf + 1, kj)
            scaled = [h_inv[i] * p_at[i] for i in range(kj)]
            theta_z = pp.theta(zf)
            sigma_z = pp.sigma(zf)
            down = mat_vec(psi_dense, scaled)
            up = mat_vec(psi_t, scaled)
            scale = max(
                max(abs(theta_z * p_dn[i]) for i in range(window)),
                max(abs(sigma_z * p_up[i]) for i in range(window)),
                h_floor,
            )
            for i in range(window):
                acc.add(f"down[z={mp.nstr(zf, 6)}][{i}]", abs(theta_z * p_dn[i] - down[i]), scale)
                acc.add(f"up[z={mp.nstr(zf, 6)}][{i}]", abs(sigma_z * p_up[i] - up[i]), scale)
        return acc.result(
            "psi_shift",
            tolerance,
            window=f"entries 0..{window - 1} at {len(z_samples)} sample points",
            provenance=provenance,
        )


def psi_jacobi_identities(
    psi_dense: Matrix,
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    w: HypergeometricWeight,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Compatibility commutators and the two product factorizations linking the
    structure matrix with the recurrence matrix."""
    mdeg, ndeg = w.m_degree, w.n_degree
    kj = jac.size
    window = kj - (ndeg + mdeg + 3)
    if window < 2:
        raise PreconditionError("truncation too small for the compatibility check")
    bits = chol.ctx.mantissa_bits
    pp = pearson_polynomials(w)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        j = jac.to_dense()
        h_inv = diag([1 / x for x in chol.h[:kj]])
        a = mat_mul(psi_dense, h_inv)
        at = mat_mul(transpose(psi_dense), h_inv)
        h_floor = chol.h_floor()

        lhs = commutator(a, j)
        diff, scale = window_diff(lhs, a, window)
        acc.add("commutator_down", diff, max(scale, h_floor))

        lhs = commutator(j, at)
        diff, scale = window_diff(lhs, at, window)
        acc.add("commutator_up", diff, max(scale, h_floor))

        sigma_j = poly_of_matrix(pp.sigma_coeffs, j)
        theta_jp = poly_of_matrix(pp.theta_coeffs, mat_add(j, identity(kj)))
        theta_j = poly_of_matrix(pp.theta_coeffs, j)
        sigma_jm = poly_of_matrix(pp.sigma_coeffs, mat_sub(j, identity(kj)))

        diff, scale = window_diff(mat_mul(sigma_j, theta_jp), mat_mul(a, at), window)
        acc.add("product_up_down", diff, max(scale, h_floor))
        diff, scale = window_diff(mat_mul(theta_j, sigma_jm), mat_mul(at, a), window)
        acc.add("product_down_up", diff, max(scale, h_floor))

        return acc.result(
            "psi_jacobi",
            tolerance,
            window=f"leading {window} of {kj} (trim {ndeg + mdeg + 3})",
            provenance=provenance,
        )


def structure_cholesky_check(
    chol: CholeskyFactorization,
    jac: JacobiMatrix,
    pi: Matrix,
    psi_dense: Matrix,
    w: HypergeometricWeight,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Triangular factorizations of H theta(J^T) and sigma(J) H: symmetry
    prechecks, band confinement of the factors, the shared diagonal, the
    dressed-Pascal factorization, and the structure-matrix factorization."""
    mdeg, ndeg = w.m_degree, w.n_degree
    kj = jac.size
    bits = chol.ctx.mantissa_bits
    pp = pearson_polynomials(w)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        j = jac.to_dense()
        h = diag(chol.h[:kj])
        theta_j = poly_of_matrix(pp.theta_coeffs, j)
        sigma_j = poly_of_matrix(pp.sigma_coeffs, j)
        a_theta = mat_mul(h, transpose(theta_j))
        a_sigma = mat_mul(sigma_j, h)
        h_floor = chol.h_floor()

        win_theta = kj - (ndeg + 2)
        win_sigma = kj - (mdeg + 1)
        for name, mat, win in (("theta", a_theta, win_theta), ("sigma", a_sigma, win_sigma)):
            sym = max(
                abs(mat[n][m] - mat[m][n]) for n in range(win) for m in range(win)
            )
            acc.add(f"symmetry_{name}", sym, max(max_abs(mat, win), h_floor))

        kf = min(win_theta, win_sigma)
        scale_pivot = max(max_abs(a_theta, kf), max_abs(a_sigma, kf))
        floor = mpf(2) ** (-(bits // 2)) * scale_pivot
        l_theta, d_theta = ldl_no_pivot([row[:kf] for row in a_theta[:kf]], floor)
        l_sigma, d_sigma = ldl_no_pivot([row[:kf] for row in a_sigma[:kf]], floor)

        # band confinement of the factors
        worst_theta = mpf(0)
        worst_sigma = mpf(0)
        for n in range(kf):
            for m in range(n):
                if n - m > ndeg + 1:
                    worst_theta = max(worst_theta, abs(l_theta[n][m]))
                if n - m > mdeg:
                    worst_sigma = max(worst_sigma, abs(l_sigma[n][m]))
        acc.add("factor_band_theta", worst_theta, mpf(1))
        acc.add("factor_band_sigma", worst_sigma, mpf(1))

        window = min(kf, kj - (ndeg + mdeg + 2))
        # shared diagonal
        d_scale = max(max(abs(x) for x in d_theta[:window]), h_floor)
        for n in range(window):
            acc.add(f"shared_diag[{n}]", abs(d_theta[n] - d_sigma[n]), d_scale)

        # dressed Pascal factorization
        sigma_factor = unit_lower_inverse([row[:kf] for row in l_sigma[:kf]])
        pi_fact = mat_mul(l_theta, sigma_factor)
        diff, scale = window_diff([row[:kf] for row in pi[:kf]], pi_fact, window)
        acc.add("pascal_factorization", diff, max(scale, mpf(1)))

        # structure-matrix factorization
        psi_fact = mat_mul(l_sigma, mat_mul(diag(d_theta), transpose(l_theta)))
        diff, scale = window_diff([row[:kf] for row in psi_dense[:kf]], psi_fact, window)
        acc.add("psi_factorization", diff, max(scale, h_floor))

        return acc.result(
            "structure_cholesky",
            tolerance,
            window=f"factored block {kf}, identity window {window}",
            provenance=provenance,
        )


def polynomial_shift_identity(
    jac: JacobiMatrix,
    pi: Matrix,
    pi_inv: Matrix,
    r_coeffs: tuple,
    tolerance: Fraction,
    provenance: dict | None = None,
    label: str = "poly_shift",
) -> CheckResult:
    """R(J) Pi^{+-1} = Pi^{+-1} R(J +- I) for a small polynomial R."""
    deg = len(r_coeffs) - 1
    kj = jac.size
    window = kj - (deg + 2)
    if window < 2:
        raise PreconditionError("truncation too small for the polynomial shift identity")
    bits = jac.bits
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        j = jac.to_dense()
        pi_k = [row[:kj] for row in pi[:kj]]
        pi_inv_k = [row[:kj] for row in pi_inv[:kj]]
        r_j = poly_of_matrix(r_coeffs, j)
        r_jp = poly_of_matrix(r_coeffs, mat_add(j, identity(kj)))
        r_jm = poly_of_matrix(r_coeffs, mat_sub(j, identity(kj)))
        diff, scale = window_diff(mat_mul(r_j, pi_k), mat_mul(pi_k, r_jp), window)
        acc.add("plus", diff, max(scale, mpf(1)))
        diff, scale = window_diff(mat_mul(r_j, pi_inv_k), mat_mul(pi_inv_k, r_jm), window)
        acc.add("minus", diff, max(scale, mpf(1)))
        return acc.result(
            label,
            tolerance,
            window=f"leading {window} of {kj} (degree {deg})",
            provenance=provenance,
        )
