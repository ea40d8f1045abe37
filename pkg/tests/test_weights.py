from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf, workprec

from semidop import (
    InvalidShift,
    PreconditionError,
    Shift,
    UndefinedWeight,
    classify_convergence,
    parse_weight_spec,
    pearson_polynomials,
    pearson_residual,
    pochhammer,
    shift_parameter,
    weight_value,
)
from semidop.weights import HypergeometricWeight, term_ratio_limit, to_mpf

from conftest import CHARLIER, FAMILIES, GEN_MEIXNER, MEIXNER


def test_pochhammer_values():
    assert pochhammer(Fraction(5), 0) == 1
    assert pochhammer(3, 4) == 360
    assert pochhammer(-2, 4) == 0
    assert pochhammer(Fraction(1, 2), 3) == Fraction(1, 2) * Fraction(3, 2) * Fraction(5, 2)


@given(st.fractions(min_value=-5, max_value=5), st.integers(min_value=0, max_value=12))
def test_pochhammer_recurrence(alpha, k):
    assert pochhammer(alpha, k + 1) == pochhammer(alpha, k) * (alpha + k)


def test_weight_values():
    with workprec(128):
        charlier1 = HypergeometricWeight(eta=1)
        assert abs(weight_value(charlier1, 3) - mpf(1) / 6) < mpf(2) ** -120
        assert abs(weight_value(MEIXNER, 2) - mpf(3) / 4) < mpf(2) ** -120
        gen_charlier_b1 = HypergeometricWeight(b=(1,), eta=Fraction(2, 3))
        for k in range(5):
            expect = to_mpf(Fraction(2, 3) ** k) / (mp.factorial(k) ** 2)
            assert abs(weight_value(gen_charlier_b1, k) - expect) < mpf(2) ** -115


def test_weight_rejects_bad_b():
    with pytest.raises(UndefinedWeight):
        HypergeometricWeight(b=(0,), eta=1)
    with pytest.raises(UndefinedWeight):
        HypergeometricWeight(b=(-3,), eta=1)


def test_pearson_residual_vanishes():
    with workprec(192):
        for w in FAMILIES.values():
            for k in range(25):
                assert abs(pearson_residual(w, k)) < mpf(2) ** -150


def test_pearson_residual_rejects_deformed():
    w = HypergeometricWeight(eta=Fraction(1, 2), eta2=Fraction(9, 10))
    with pytest.raises(PreconditionError):
        pearson_residual(w, 3)


def test_classification_cases():
    assert classify_convergence(GEN_MEIXNER).kind == "all_eta"
    # any eta when M <= N
    big = HypergeometricWeight(a=(Fraction(3, 2),), b=(Fraction(5, 2),), eta=5)
    assert classify_convergence(big).kind == "all_eta"
    fin = HypergeometricWeight(a=(-3,), eta=2)
    cls = classify_convergence(fin)
    assert cls.kind == "finite_support" and cls.q == 3 and cls.support_cap == 4
    div = HypergeometricWeight(a=(Fraction(1, 2),), eta=2)
    assert classify_convergence(div).kind == "divergent"
    assert classify_convergence(MEIXNER).kind == "unit_disk"
    bound = HypergeometricWeight(a=(Fraction(1, 2),), b=(), eta=1)
    assert classify_convergence(bound).kind == "divergent"
    bound2 = HypergeometricWeight(a=(Fraction(1, 2), Fraction(1, 3)), b=(3,), eta=-1)
    assert classify_convergence(bound2).kind == "boundary"
    assert classify_convergence(HypergeometricWeight(eta=0)).kind == "finite_support"
    deformed = HypergeometricWeight(a=(Fraction(1, 2),), eta=2, eta2=Fraction(9, 10))
    assert classify_convergence(deformed).kind == "all_eta"


def test_term_ratio_limit():
    assert term_ratio_limit(MEIXNER) == Fraction(1, 2)
    assert term_ratio_limit(CHARLIER) == 0
    assert term_ratio_limit(HypergeometricWeight(eta=2, eta2=Fraction(9, 10))) == 0


def test_shifts():
    shifted = shift_parameter(GEN_MEIXNER, Shift.a(1))
    assert shifted.a == (Fraction(5, 2),) and shifted.b == (Fraction(5, 2),)
    shifted = shift_parameter(GEN_MEIXNER, Shift.b(1))
    assert shifted.b == (Fraction(3, 2),)
    total = shift_parameter(HypergeometricWeight(a=(1,), b=(2,), eta=1), Shift.total())
    assert total.a == (Fraction(2),) and total.b == (Fraction(3),)
    with pytest.raises(InvalidShift):
        shift_parameter(GEN_MEIXNER, Shift.a(2))
    with pytest.raises(InvalidShift):
        shift_parameter(HypergeometricWeight(b=(1,), eta=1), Shift.b(1))


@given(st.integers(min_value=1, max_value=1))
def test_shift_roundtrip(i):
    shifted = shift_parameter(GEN_MEIXNER, Shift.a(i))
    back = HypergeometricWeight(
        tuple(x - 1 if j == i - 1 else x for j, x in enumerate(shifted.a)),
        shifted.b,
        shifted.eta,
    )
    assert back == GEN_MEIXNER


def test_pearson_polynomials():
    pp = pearson_polynomials(CHARLIER)
    assert pp.theta_coeffs == (Fraction(0), Fraction(1))
    assert pp.sigma_coeffs == (Fraction(7, 10),)
    pp = pearson_polynomials(GEN_MEIXNER)
    # theta = z^2 + (b-1) z, sigma = eta z + eta a
    assert pp.theta_coeffs == (Fraction(0), Fraction(3, 2), Fraction(1))
    assert pp.sigma_coeffs == (Fraction(1, 2), Fraction(1, 3))
    gen_charlier = HypergeometricWeight(b=(3,), eta=Fraction(1, 4))
    pp = pearson_polynomials(gen_charlier)
    assert pp.theta_coeffs == (Fraction(0), Fraction(2), Fraction(1))
    assert pp.sigma_coeffs == (Fraction(1, 4),)
    # theta(0) = 0 exactly, monic theta, sigma leads with eta
    for w in FAMILIES.values():
        pp = pearson_polynomials(w)
        assert pp.theta_coeffs[0] == 0
        assert pp.theta_coeffs[-1] == 1
        assert pp.sigma_coeffs[-1] == w.eta


@settings(deadline=None, max_examples=25)
@given(
    st.fractions(min_value=Fraction(1, 4), max_value=4),
    st.fractions(min_value=Fraction(1, 4), max_value=4),
    st.fractions(min_value=Fraction(1, 10), max_value=Fraction(9, 10)),
    st.integers(min_value=0, max_value=20),
)
def test_weight_positive_for_positive_parameters(a, b, eta, k):
    w = HypergeometricWeight(a=(a,), b=(b,), eta=eta)
    with workprec(96):
        assert weight_value(w, k) > 0


def test_spec_grammar_roundtrip():
    spec = "a=3/2,1; b=5/2; eta=1/3; eta2=9/10; eta3=9/10"
    w = parse_weight_spec(spec)
    assert w.a == (Fraction(3, 2), Fraction(1))
    assert w.b == (Fraction(5, 2),)
    assert w.eta == Fraction(1, 3)
    assert w.eta2 == Fraction(9, 10)
    assert parse_weight_spec(w.spec_string()) == w
    assert parse_weight_spec("eta=0.7") == parse_weight_spec("eta=7/10")


def test_spec_grammar_errors():
    with pytest.raises(ValueError):
        parse_weight_spec("frobnicate=1")
    with pytest.raises(ValueError):
        parse_weight_spec("eta")
    with pytest.raises(ValueError):
        parse_weight_spec("eta=1; eta=2")
