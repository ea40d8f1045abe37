"""Discrete weights of hypergeometric Pearson type.

A weight on the lattice {0, 1, 2, ...} is specified by parameter lists
``a``, ``b``, a leading coefficient ``eta`` and optional flow deformations
``eta2``, ``eta3``:

    w(k) = (a_1)_k ... (a_M)_k / (k! (b_1)_k ... (b_N)_k)
           * eta^k * eta2^(k^2) * eta3^(k^3)

Undeformed weights (eta2 = eta3 = 1) satisfy the difference equation
theta(k+1) w(k+1) = sigma(k) w(k) with theta(z) = z (z+b_1-1)...(z+b_N-1)
monic and sigma(z) = eta (z+a_1)...(z+a_M).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from mpmath import mpf

from .errors import InvalidShift, PreconditionError, UndefinedWeight

Rational = Union[int, Fraction, str]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(str(x))


def to_mpf(x) -> mpf:
    """Convert int/Fraction/mpf to mpf with a single rounding at current precision."""
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def is_nonpositive_integer(x: Fraction) -> bool:
    return x.denominator == 1 and x <= 0


def pochhammer(alpha, k: int):
    """Rising factorial alpha (alpha+1) ... (alpha+k-1); equals 1 for k = 0.

    Exact for int/Fraction input, mpf otherwise.
    """
    if k < 0:
        raise ValueError("pochhammer order must be nonnegative")
    result = Fraction(1) if isinstance(alpha, (int, Fraction)) else mpf(1)
    for j in range(k):
        result = result * (alpha + j)
    return result


@dataclass(frozen=True)
class HypergeometricWeight:
    """Parameters of a hypergeometric Pearson weight, all exact rationals.

    eta2 = eta3 = 1 means undeformed; the Pearson-specific operations reject
    deformed weights by precondition.
    """

    a: tuple[Fraction, ...] = ()
    b: tuple[Fraction, ...] = ()
    eta: Fraction = Fraction(1)
    eta2: Fraction = Fraction(1)
    eta3: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(_frac(x) for x in self.a))
        object.__setattr__(self, "b", tuple(_frac(x) for x in self.b))
        for name in ("eta", "eta2", "eta3"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        for bj in self.b:
            if is_nonpositive_integer(bj):
                raise UndefinedWeight(f"b parameter {bj} is a nonpositive integer")
        if abs(self.eta2) > 1 or abs(self.eta3) > 1:
            raise PreconditionError("deformation parameters must satisfy |eta2|, |eta3| <= 1")

    @property
    def m_degree(self) -> int:
        """M, the degree of sigma."""
        return len(self.a)

    @property
    def n_degree(self) -> int:
        """N, so that theta has degree N + 1."""
        return len(self.b)

    @property
    def deformed(self) -> bool:
        return self.eta2 != 1 or self.eta3 != 1

    def undeformed(self) -> "HypergeometricWeight":
        return HypergeometricWeight(self.a, self.b, self.eta)

    def spec_string(self) -> str:
        """Canonical form of the CLI weight grammar."""
        parts = []
        if self.a:
            parts.append("a=" + ",".join(str(x) for x in self.a))
        if self.b:
            parts.append("b=" + ",".join(str(x) for x in self.b))
        parts.append(f"eta={self.eta}")
        if self.eta2 != 1:
            parts.append(f"eta2={self.eta2}")
        if self.eta3 != 1:
            parts.append(f"eta3={self.eta3}")
        return "; ".join(parts)


def parse_weight_spec(text: str) -> HypergeometricWeight:
    """Parse the weight grammar, e.g. ``a=3/2,1; b=5/2; eta=1/3; eta2=0.9``.

    Values are rationals or decimals; lists are comma separated; every field
    except ``eta`` is optional (eta defaults to 1 if omitted).
    """
    fields: dict[str, str] = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ValueError(f"malformed weight field {chunk!r} (expected key=value)")
        key, _, value = chunk.partition("=")
        key = key.strip().lower()
        if key in fields:
            raise ValueError(f"duplicate weight field {key!r}")
        fields[key] = value.strip()
    known = {"a", "b", "eta", "eta2", "eta3"}
    unknown = set(fields) - known
    if unknown:
        raise ValueError(f"unknown weight fields: {sorted(unknown)}")

    def frac_list(value: str) -> tuple[Fraction, ...]:
        return tuple(Fraction(part.strip()) for part in value.split(",") if part.strip())

    return HypergeometricWeight(
        a=frac_list(fields.get("a", "")),
        b=frac_list(fields.get("b", "")),
        eta=Fraction(fields["eta"]) if "eta" in fields else Fraction(1),
        eta2=Fraction(fields.get("eta2", "1")),
        eta3=Fraction(fields.get("eta3", "1")),
    )


@dataclass(frozen=True)
class Shift:
    """Selector for a parameter shift: a_i -> a_i + 1, b_j -> b_j - 1, or the
    total shift raising every a and every b by one. Indices are 1-based."""

    kind: str  # "a" | "b" | "total"
    index: int = 0

    @classmethod
    def a(cls, i: int) -> "Shift":
        return cls("a", i)

    @classmethod
    def b(cls, j: int) -> "Shift":
        return cls("b", j)

    @classmethod
    def total(cls) -> "Shift":
        return cls("total", 0)

    def label(self) -> str:
        if self.kind == "total":
            return "T"
        return f"{self.kind.upper()}({self.index})"


def shift_parameter(w: HypergeometricWeight, shift: Shift) -> HypergeometricWeight:
    """Apply a parameter shift, returning a new weight.

    Raises InvalidShift when the index is out of range or a b-shift would land
    on a nonpositive integer.
    """
    if shift.kind == "a":
        if not 1 <= shift.index <= w.m_degree:
            raise InvalidShift(f"no a parameter with index {shift.index}")
        a = list(w.a)
        a[shift.index - 1] += 1
        return HypergeometricWeight(tuple(a), w.b, w.eta, w.eta2, w.eta3)
    if shift.kind == "b":
        if not 1 <= shift.index <= w.n_degree:
            raise InvalidShift(f"no b parameter with index {shift.index}")
        b = list(w.b)
        b[shift.index - 1] -= 1
        if is_nonpositive_integer(b[shift.index - 1]):
            raise InvalidShift(f"shift would make b_{shift.index} = {b[shift.index - 1]} nonpositive integer")
        return HypergeometricWeight(w.a, tuple(b), w.eta, w.eta2, w.eta3)
    if shift.kind == "total":
        a = tuple(x + 1 for x in w.a)
        b = tuple(x + 1 for x in w.b)
        return HypergeometricWeight(a, b, w.eta, w.eta2, w.eta3)
    raise InvalidShift(f"unknown shift kind {shift.kind!r}")


@dataclass(frozen=True)
class PearsonPolynomials:
    """Coefficient lists (ascending powers, exact rationals) of the Pearson pair.

    theta is monic of degree N+1 with theta(0) = 0 identically; sigma has
    leading coefficient eta and degree M.
    """

    theta_coeffs: tuple[Fraction, ...]
    sigma_coeffs: tuple[Fraction, ...]

    @property
    def theta_degree(self) -> int:
        return len(self.theta_coeffs) - 1

    @property
    def sigma_degree(self) -> int:
        return len(self.sigma_coeffs) - 1

    def theta(self, z):
        return _poly_eval(self.theta_coeffs, z)

    def sigma(self, z):
        return _poly_eval(self.sigma_coeffs, z)


def _poly_eval(coeffs: Sequence[Fraction], z):
    if isinstance(z, (int, Fraction)):
        acc = Fraction(0)
        for c in reversed(coeffs):
            acc = acc * z + c
        return acc
    acc = mpf(0)
    for c in reversed(coeffs):
        acc = acc * z + to_mpf(c)
    return acc


def _poly_from_roots(roots: Iterable[Fraction], lead: Fraction) -> tuple[Fraction, ...]:
    # prod (z - r) with r = -root_offset, expanded by convolution
    coeffs = [Fraction(1)]
    for r in roots:
        # multiply by (z + r)
        nxt = [Fraction(0)] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            nxt[i + 1] += c
            nxt[i] += c * r
        coeffs = nxt
    return tuple(c * lead for c in coeffs)


def pearson_polynomials(w: HypergeometricWeight) -> PearsonPolynomials:
    """theta(z) = z prod (z + b_j - 1), sigma(z) = eta prod (z + a_i)."""
    theta = _poly_from_roots([bj - 1 for bj in w.b], Fraction(1))
    theta = (Fraction(0),) + theta  # multiply by z
    sigma = _poly_from_roots(list(w.a), w.eta)
    return PearsonPolynomials(theta, sigma)


def weight_value(w: HypergeometricWeight, k: int) -> mpf:
    """Evaluate w(k) at a lattice point, in the active precision context."""
    if k < 0:
        raise ValueError("lattice points are nonnegative integers")
    num = Fraction(1)
    den = Fraction(1)
    for ai in w.a:
        num *= pochhammer(ai, k)
    for bj in w.b:
        p = pochhammer(bj, k)
        if p == 0:
            raise UndefinedWeight(f"(b)_k vanishes for b = {bj}, k = {k}")
        den *= p
    num *= w.eta**k
    if w.eta2 != 1:
        num *= w.eta2 ** (k * k)
    if w.eta3 != 1:
        num *= w.eta3 ** (k * k * k)
    den *= Fraction(_factorial(k))
    return to_mpf(num / den)


def _factorial(k: int) -> int:
    out = 1
    for j in range(2, k + 1):
        out *= j
    return out


def pearson_residual(w: HypergeometricWeight, k: int) -> mpf:
    """theta(k+1) w(k+1) - sigma(k) w(k); identically ~0 for undeformed weights."""
    if w.deformed:
        raise PreconditionError("Pearson residual is defined for undeformed weights only")
    pp = pearson_polynomials(w)
    return to_mpf(pp.theta(Fraction(k + 1))) * weight_value(w, k + 1) - to_mpf(
        pp.sigma(Fraction(k))
    ) * weight_value(w, k)


@dataclass(frozen=True)
class ConvergenceClass:
    """Moment-convergence classification.

    kind is one of "all_eta", "finite_support", "unit_disk", "boundary",
    "divergent"; q is the last supported lattice point for finite support.
    """

    kind: str
    q: int | None = None

    @property
    def converges(self) -> bool:
        return self.kind != "divergent"

    @property
    def support_cap(self) -> int | None:
        """Maximum usable truncation size (q+1) for finite support, else None."""
        return None if self.q is None else self.q + 1


def classify_convergence(w: HypergeometricWeight) -> ConvergenceClass:
    """Classify the weight by the standard convergence cases.

    Finite support wins whenever some a_i is a nonpositive integer (or eta = 0).
    A deformation with |eta2| < 1 or |eta3| < 1 forces superexponential decay,
    so those weights converge for every eta.
    """
    qs = [int(-ai) for ai in w.a if is_nonpositive_integer(ai)]
    if w.eta == 0:
        qs.append(0)
    if qs:
        return ConvergenceClass("finite_support", min(qs))
    if abs(w.eta2) < 1 or abs(w.eta3) < 1:
        return ConvergenceClass("all_eta")
    m, n = w.m_degree, w.n_degree
    if m <= n:
        return ConvergenceClass("all_eta")
    if m == n + 1:
        if abs(w.eta) < 1:
            return ConvergenceClass("unit_disk")
        if abs(w.eta) == 1 and sum(w.b) - sum(w.a) > 0:
            return ConvergenceClass("boundary")
    return ConvergenceClass("divergent")


def term_ratio_limit(w: HypergeometricWeight) -> Fraction:
    """Limit of |w(k+1) k^m / (w(k) (k+1)^m)| ... as k grows, for tail bounds.

    Zero except in the M = N+1 undeformed case, where it is |eta|.
    """
    if abs(w.eta2) < 1 or abs(w.eta3) < 1:
        return Fraction(0)
    if w.m_degree == w.n_degree + 1:
        return abs(w.eta)
    return Fraction(0)
