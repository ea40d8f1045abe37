from fractions import Fraction

import pytest
from mpmath import mpf, workprec

from semidop import (
    MomentTable,
    RouteMismatch,
    laguerre_freud_matrix,
    pascal_matrix,
    pascal_subdiagonal,
    polynomial_eval,
)
from semidop.linalg import mat_mul, mat_vec, t_minus
from semidop.structure import (
    coefficient_sum_check,
    d_vector,
    gram_pearson_residual,
    orthogonality_check,
    pi_closed_form_check,
    polynomial_shift_identity,
    polynomial_vector,
    psi_extreme_diagonals,
    psi_jacobi_identities,
    s_inverse_expansion_check,
    structure_cholesky_check,
    structure_shift_residual,
    subdiagonal_of,
)
from semidop.weights import HypergeometricWeight, to_mpf

from conftest import BITS, CHARLIER, FAMILIES, GEN_MEIXNER, MEIXNER
from oracles import meixner_reduced_moments, recurrence_from_moments


def test_pascal_matrix_rows_and_inverse():
    b = pascal_matrix(6)
    assert b[4] == [1, 4, 6, 4, 1, 0]
    assert b[5] == [1, 5, 10, 10, 5, 1]
    b_inv = pascal_matrix(6, -1)
    assert b_inv[3] == [-1, 3, -3, 1, 0, 0]
    prod = mat_mul(b, b_inv)
    identity = [[1 if i == j else 0 for j in range(6)] for i in range(6)]
    assert prod == identity  # exact integer arithmetic


def test_pascal_shift_action_on_monomials():
    # chi(z+1) = B chi(z) at z = 2: powers of 3
    b = pascal_matrix(5)
    chi2 = [2**j for j in range(5)]
    assert mat_vec(b, chi2) == [1, 3, 9, 27, 81]


def test_pascal_subdiagonal_profiles():
    assert d_vector(1, 5) == [1, 2, 3, 4, 5]
    assert pascal_subdiagonal(2, 0) == 1
    for n in range(8):
        assert 3 * pascal_subdiagonal(3, n) == 2 * pascal_subdiagonal(2, n) * (n + 3)
    # 2 D^[2] = (T_- D) D entrywise
    dv = d_vector(1, 8)
    d2 = d_vector(2, 8)
    shifted = t_minus(dv)
    for n in range(7):
        assert 2 * d2[n] == shifted[n] * dv[n]


def test_dressed_pascal_first_subdiagonals(charlier_pipe):
    pi = charlier_pipe.pi
    pi_inv = charlier_pipe.pi_inv
    with workprec(BITS):
        tol = mpf(2) ** -(BITS - 60)
        for n in range(8):
            assert abs(subdiagonal_of(pi, 1)[n] - (n + 1)) < tol
            assert abs(subdiagonal_of(pi_inv, 1)[n] + (n + 1)) < tol


def test_dressed_pascal_action(meixner_pipe):
    # P(z plus/minus 1) = Pi^{plus/minus 1} P(z) on the full truncation
    pipe = meixner_pipe
    size = pipe.k + 1
    with workprec(BITS):
        z = mpf(3) / 7
        p_at = polynomial_vector(pipe.jac, z, size)
        p_up = polynomial_vector(pipe.jac, z + 1, size)
        p_dn = polynomial_vector(pipe.jac, z - 1, size)
        tol = mpf(2) ** -(BITS - 80)
        up = mat_vec([row[:size] for row in pipe.pi[:size]], p_at)
        dn = mat_vec([row[:size] for row in pipe.pi_inv[:size]], p_at)
        scale = max(abs(x) for x in p_up)
        for n in range(size):
            assert abs(up[n] - p_up[n]) < tol * scale
            assert abs(dn[n] - p_dn[n]) < tol * scale


def test_pi_closed_forms_all_families(ctx, tol):
    from semidop.pipeline import get_pipeline

    for w in FAMILIES.values():
        pipe = get_pipeline(w, 12, ctx)
        res = pi_closed_form_check(pipe.chol, pipe.jac, pipe.pi, pipe.pi_inv, tol)
        assert res.passed, (w.spec_string(), res.components)


def test_s_inverse_expansion(ctx, tol):
    from semidop.pipeline import get_pipeline

    pipe = get_pipeline(MEIXNER, 10, ctx)
    res = s_inverse_expansion_check(pipe.chol, tol)
    assert res.passed


def test_s_inverse_trivial_identity(ctx, tol):
    # a synthetic factorization with S = I has all expansion terms zero
    from semidop.moments import CholeskyFactorization

    n = 6
    eye = [[mpf(1) if i == j else mpf(0) for j in range(n)] for i in range(n)]
    table = MomentTable(CHARLIER, 10, ctx)
    fake = CholeskyFactorization(
        s=eye, s_inv=eye, h=[mpf(1)] * n, size=n, table=table, ctx=ctx,
        confirmed_bits=float(BITS), confident=True,
    )
    res = s_inverse_expansion_check(fake, tol)
    assert res.passed and res.max_residual == 0


def test_jacobi_closed_forms_charlier(charlier_pipe):
    # tight bounds at the working precision; the 2^-200 contract is exercised
    # by the acceptance suite at 512 bits
    with workprec(BITS):
        eta = to_mpf(Fraction(7, 10))
        tol = mpf(2) ** -(BITS - 80)
        for n in range(10):
            assert abs(charlier_pipe.jac.beta[n] - (n + eta)) < tol * (n + 1)
            if n >= 1:
                assert abs(charlier_pipe.gamma(n) - n * eta) < tol * (n + 1)


def test_jacobi_closed_forms_meixner(meixner_pipe):
    a, eta = mpf(2), mpf(1) / 2
    with workprec(BITS):
        tol = mpf(2) ** -180
        for n in range(10):
            expect_beta = (n + (n + a) * eta) / (1 - eta)
            assert abs(meixner_pipe.jac.beta[n] - expect_beta) < tol * max(1, expect_beta)
            if n >= 1:
                expect_gamma = n * (n + a - 1) * eta / (1 - eta) ** 2
                assert abs(meixner_pipe.gamma(n) - expect_gamma) < tol * expect_gamma


def test_jacobi_against_rational_oracle(meixner_pipe):
    reduced = meixner_reduced_moments(Fraction(2), Fraction(1, 2), 26)
    beta_o, gamma_o, _ = recurrence_from_moments(reduced, 13)
    with workprec(BITS):
        tol = mpf(2) ** -(BITS - 90)
        for n in range(12):
            assert abs(meixner_pipe.jac.beta[n] - to_mpf(beta_o[n])) < tol * max(
                1, abs(to_mpf(beta_o[n]))
            )
        for n in range(1, 12):
            assert (
                abs(meixner_pipe.gamma(n) - to_mpf(gamma_o[n - 1]))
                < tol * to_mpf(gamma_o[n - 1])
            )


def test_polynomial_eval_and_coefficients(meixner_pipe):
    jac = meixner_pipe.jac
    chol = meixner_pipe.chol
    with workprec(BITS):
        assert polynomial_eval(jac, 0, mpf(3)) == 1
        # P_1(z) = z - rho_1/rho_0
        z = mpf(5) / 3
        rho0, rho1 = chol.table.moment(0), chol.table.moment(1)
        assert abs(polynomial_eval(jac, 1, z) - (z - rho1 / rho0)) < mpf(2) ** -(BITS - 40)
        # evaluation by recurrence matches the coefficient rows of S
        for n in range(6):
            by_coeff = sum(chol.s[n][m] * z**m for m in range(n + 1))
            assert abs(polynomial_eval(jac, n, z) - by_coeff) < mpf(2) ** -(BITS - 60) * max(
                1, abs(by_coeff)
            )


def test_three_term_recurrence_residual(gen_meixner_pipe):
    jac = gen_meixner_pipe.jac
    with workprec(BITS):
        for z in (mpf(0), mpf(1) / 3, mpf(2)):
            pv = polynomial_vector(jac, z, 8)
            for n in range(1, 7):
                resid = z * pv[n] - (pv[n + 1] + jac.beta[n] * pv[n] + gen_meixner_pipe.gamma(n) * pv[n - 1])
                assert abs(resid) < mpf(2) ** -(BITS - 60) * max(1, abs(z * pv[n]))


def test_orthogonality_direct_sums(ctx, tol, meixner_pipe):
    res = orthogonality_check(
        MEIXNER, meixner_pipe.jac, meixner_pipe.chol.h, 6,
        ctx.series_tol, ctx.max_terms, tol,
    )
    assert res.passed, res.components


def test_coefficient_sums(ctx, tol):
    from semidop.pipeline import get_pipeline

    gen_charlier = HypergeometricWeight(b=(Fraction(3, 2),), eta=Fraction(1, 2))
    pipe = get_pipeline(gen_charlier, 12, ctx)
    res = coefficient_sum_check(pipe.chol, pipe.jac, tol)
    assert res.passed, res.components
    # explicit small cases: p1_1 = -beta_0 = -rho_1/rho_0 and the Charlier
    # constant coefficient p2_2 = eta^2 (= -gamma_1 + beta_1 beta_0)
    with workprec(BITS):
        rho0, rho1 = pipe.table.moment(0), pipe.table.moment(1)
        assert abs(pipe.chol.p(1, 1) + rho1 / rho0) < mpf(2) ** -(BITS - 40)
    from semidop.pipeline import get_pipeline as gp

    ch = gp(CHARLIER, 8, ctx)
    with workprec(BITS):
        eta = to_mpf(Fraction(7, 10))
        assert abs(ch.chol.p(2, 2) - eta * eta) < mpf(2) ** -(BITS - 50)


def test_gram_pearson_entrywise_charlier(ctx, tol):
    # theta = z, sigma = eta: the symmetry reads rho_{n+m+1} = eta (B G B^T)_{nm}
    table = MomentTable(CHARLIER, 20, ctx)
    res = gram_pearson_residual(table, CHARLIER, 6, tol)
    assert res.passed
    b = pascal_matrix(6)
    with workprec(BITS):
        g = [[table.moment(n + m) for m in range(6)] for n in range(6)]
        rhs = mat_mul(mat_mul(b, g), [list(r) for r in zip(*b)])
        eta = to_mpf(Fraction(7, 10))
        for n in range(6):
            for m in range(6):
                assert abs(table.moment(n + m + 1) - eta * rhs[n][m]) < mpf(2) ** -(
                    BITS - 60
                ) * abs(table.moment(n + m + 1))


def test_gram_pearson_scalar_window(ctx, tol):
    # the (0,0) entry says sum_p theta_p rho_p = sum_q sigma_q rho_q
    from semidop import pearson_polynomials

    table = MomentTable(GEN_MEIXNER, 12, ctx)
    pp = pearson_polynomials(GEN_MEIXNER)
    with workprec(BITS):
        lhs = sum(to_mpf(c) * table.moment(p) for p, c in enumerate(pp.theta_coeffs))
        rhs = sum(to_mpf(c) * table.moment(q) for q, c in enumerate(pp.sigma_coeffs))
        assert abs(lhs - rhs) < mpf(2) ** -(BITS - 40) * abs(lhs)


def test_gram_pearson_rejects_deformed(ctx, tol):
    from conftest import DEFORMED
    from semidop import PreconditionError

    table = MomentTable(DEFORMED, 12, ctx)
    with pytest.raises(PreconditionError):
        gram_pearson_residual(table, DEFORMED, 4, tol)


def test_gram_pearson_all_families(ctx, tol):
    for w in FAMILIES.values():
        table = MomentTable(w, 30, ctx)
        res = gram_pearson_residual(table, w, 12, tol)
        assert res.passed, w.spec_string()


def test_psi_structure_and_diagonals(ctx, tol, gen_meixner_pipe):
    psi, dense, res, window = gen_meixner_pipe.psi(tol)
    assert res.passed
    assert psi.lo == -1 and psi.hi == 2  # M = 1 subdiagonal, N+1 = 2 superdiagonals
    res2 = psi_extreme_diagonals(psi, window, gen_meixner_pipe.chol, gen_meixner_pipe.jac, GEN_MEIXNER, tol)
    assert res2.passed, res2.components


def test_psi_charlier_diagonal_closed_forms(ctx, tol, charlier_pipe):
    psi, dense, res, window = charlier_pipe.psi(tol)
    assert res.passed
    with workprec(BITS):
        eta = to_mpf(Fraction(7, 10))
        d0 = psi.diagonal(0)
        d1 = psi.diagonal(1)
        for n in range(window - 1):
            assert abs(d0[n] - eta * charlier_pipe.chol.h[n]) < mpf(2) ** -(BITS - 60) * abs(d0[n])
            # psi^(1)_n = H_n gamma_{n+1} = H_{n+1}
            assert abs(d1[n] - charlier_pipe.chol.h[n + 1]) < mpf(2) ** -(BITS - 60) * abs(d1[n])


def test_route_mismatch_raises(ctx, charlier_pipe):
    with pytest.raises(RouteMismatch):
        laguerre_freud_matrix(
            charlier_pipe.chol, charlier_pipe.jac, charlier_pipe.pi,
            charlier_pipe.pi_inv, CHARLIER, Fraction(0),
        )


def test_structure_shift_equations(ctx, tol, gen_meixner_pipe):
    _, dense, _, window = gen_meixner_pipe.psi(tol)
    res = structure_shift_residual(
        dense, window, gen_meixner_pipe.chol, gen_meixner_pipe.jac, GEN_MEIXNER,
        [Fraction(0), Fraction(1), Fraction(7, 5)], tol,
    )
    assert res.passed, res.components


def test_structure_shift_at_zero_annihilates(ctx, tol, charlier_pipe):
    # theta(0) = 0 forces Psi H^{-1} P(0) ~ 0
    _, dense, _, window = charlier_pipe.psi(tol)
    with workprec(BITS):
        kj = charlier_pipe.jac.size
        p0 = polynomial_vector(charlier_pipe.jac, mpf(0), kj)
        scaled = [p0[i] / charlier_pipe.chol.h[i] for i in range(kj)]
        out = mat_vec(dense, scaled)
        scale = max(abs(x) for x in p0)
        for i in range(window):
            assert abs(out[i]) < mpf(2) ** -(BITS - 80) * scale


def test_psi_jacobi_identities(ctx, tol):
    from semidop.pipeline import get_pipeline

    for spec in ("eta=7/10", "b=2; eta=1/4"):
        from semidop import parse_weight_spec

        pipe = get_pipeline(parse_weight_spec(spec), 12, ctx)
        _, dense, _, _ = pipe.psi(tol)
        res = psi_jacobi_identities(dense, pipe.chol, pipe.jac, pipe.weight, tol)
        assert res.passed, (spec, res.components)


def test_structure_cholesky_identities(ctx, tol, gen_meixner_pipe):
    _, dense, _, _ = gen_meixner_pipe.psi(tol)
    res = structure_cholesky_check(
        gen_meixner_pipe.chol, gen_meixner_pipe.jac, gen_meixner_pipe.pi, dense, GEN_MEIXNER, tol
    )
    assert res.passed, res.components


def test_structure_cholesky_charlier_sigma_factor_trivial(ctx, tol, charlier_pipe):
    # with constant sigma the second factor is the identity, so the dressed
    # Pascal matrix coincides with the inverse of the first factor
    _, dense, _, _ = charlier_pipe.psi(tol)
    res = structure_cholesky_check(
        charlier_pipe.chol, charlier_pipe.jac, charlier_pipe.pi, dense, CHARLIER, tol
    )
    assert res.passed, res.components


def test_window_monotonicity(ctx, tol):
    # enlarging the truncation with the comparison window held fixed must not
    # grow the interior residual: edge effects stay confined to trimmed rows
    from semidop.linalg import window_diff
    from semidop.pipeline import get_pipeline
    from semidop.structure import ROUTE_NAMES, psi_routes

    small = get_pipeline(GEN_MEIXNER, 8, ctx)
    large = get_pipeline(GEN_MEIXNER, 12, ctx)
    window = 8 - 4  # interior window of the small truncation
    with workprec(BITS):
        res = []
        for pipe in (small, large):
            routes = psi_routes(pipe.chol, pipe.jac, pipe.pi, pipe.pi_inv, GEN_MEIXNER)
            diff, scale = window_diff(routes[ROUTE_NAMES[0]], routes[ROUTE_NAMES[1]], window)
            res.append(diff / scale)
        assert res[1] <= res[0] * 4  # no growth beyond round-off wiggle


def test_polynomial_shift_identity(ctx, tol, meixner_pipe):
    res = polynomial_shift_identity(
        meixner_pipe.jac, meixner_pipe.pi, meixner_pipe.pi_inv, (Fraction(1),), tol
    )
    assert res.passed and res.max_residual == 0
    for coeffs in ((Fraction(0), Fraction(1)), (Fraction(0), Fraction(0), Fraction(1))):
        res = polynomial_shift_identity(meixner_pipe.jac, meixner_pipe.pi, meixner_pipe.pi_inv, coeffs, tol)
        assert res.passed
