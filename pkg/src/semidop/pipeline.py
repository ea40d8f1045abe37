"""Shared assembly line: weight -> moments -> factorization -> structure data.

A pipeline owns one weight at one precision and truncation size and lazily
builds the derived objects, so independent checks reuse the same moment table
and factorization. Pipelines are cached per (weight, size, precision); the
finite-difference witnesses obtain perturbed pipelines through the same cache.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import PreconditionError
from .flows import flow_scaled_weight
from .linalg import Matrix
from .moments import (
    CholeskyFactorization,
    MomentTable,
    PrecisionContext,
    cholesky,
    gram_truncation,
)
from .structure import (
    JacobiMatrix,
    dressed_pascal,
    jacobi_matrix,
    polynomial_vector,
    psi_structure_check,
)
from .weights import HypergeometricWeight, Shift, shift_parameter

# Guard shift applied over the factorization size so recurrence data reaches
# degree k; extra moment depth absorbs flow-index shifts of the engine.
_DEPTH_SLACK = 8


class WeightPipeline:
    def __init__(
        self,
        weight: HypergeometricWeight,
        k: int,
        ctx: PrecisionContext,
        depth: int | None = None,
    ):
        if k < 2:
            raise PreconditionError("pipeline needs truncation size >= 2")
        self.weight = weight
        self.k = k
        self.ctx = ctx
        self.depth = max(depth or 0, 2 * (k + 1) - 2 + _DEPTH_SLACK)
        self.table = MomentTable(weight, self.depth, ctx)
        self._chol: CholeskyFactorization | None = None
        self._jac: JacobiMatrix | None = None
        self._pi: Matrix | None = None
        self._pi_inv: Matrix | None = None
        self._psi: dict = {}

    @property
    def bits(self) -> int:
        return self.ctx.mantissa_bits

    @property
    def chol(self) -> CholeskyFactorization:
        if self._chol is None:
            self._chol = cholesky(gram_truncation(self.table, self.k + 1), self.ctx)
        return self._chol

    @property
    def jac(self) -> JacobiMatrix:
        """Recurrence data through degree k (validated against the direct route)."""
        if self._jac is None:
            self._jac = jacobi_matrix(self.chol, validate_tol=self.ctx.default_tolerance())
        return self._jac

    @property
    def pi(self) -> Matrix:
        if self._pi is None:
            self._pi = dressed_pascal(self.chol.s, self.chol.s_inv, 1, self.bits)
        return self._pi

    @property
    def pi_inv(self) -> Matrix:
        if self._pi_inv is None:
            self._pi_inv = dressed_pascal(self.chol.s, self.chol.s_inv, -1, self.bits)
        return self._pi_inv

    def psi(self, tolerance: Fraction):
        """(banded Psi, dense Psi, route CheckResult, valid window); cached per tolerance."""
        key = Fraction(tolerance)
        if key not in self._psi:
            self._psi[key] = psi_structure_check(
                self.chol, self.jac, self.pi, self.pi_inv, self.weight, tolerance,
                provenance=self.provenance(),
            )
        return self._psi[key]

    def p_vector(self, z, count: int | None = None) -> list:
        return polynomial_vector(self.jac, z, count or self.k)

    def beta(self, n: int):
        return self.jac.beta[n]

    def gamma(self, n: int):
        """gamma_n for n >= 1."""
        return self.jac.gamma[n - 1]

    def h(self, n: int):
        return self.chol.h[n]

    def shifted(self, shift: Shift) -> "WeightPipeline":
        return get_pipeline(shift_parameter(self.weight, shift), self.k, self.ctx, self.depth)

    def flow_scaled(self, l: int, mult: Fraction) -> "WeightPipeline":
        return get_pipeline(flow_scaled_weight(self.weight, l, mult), self.k, self.ctx, self.depth)

    def at_bits(self, bits: int) -> "WeightPipeline":
        ctx = PrecisionContext(mantissa_bits=bits, max_terms=self.ctx.max_terms)
        return get_pipeline(self.weight, self.k, ctx, self.depth)

    def provenance(self) -> dict:
        return {
            "weight": self.weight.spec_string(),
            "size": str(self.k),
            "mantissa_bits": str(self.bits),
            "depth": str(self.depth),
        }


_CACHE: dict = {}


def get_pipeline(
    weight: HypergeometricWeight,
    k: int,
    ctx: PrecisionContext,
    depth: int | None = None,
) -> WeightPipeline:
    depth = max(depth or 0, 2 * (k + 1) - 2 + _DEPTH_SLACK)
    depth = ((depth + 7) // 8) * 8
    key = (weight, k, ctx.mantissa_bits, depth)
    pipe = _CACHE.get(key)
    if pipe is None:
        pipe = WeightPipeline(weight, k, ctx, depth)
        _CACHE[key] = pipe
    return pipe


def clear_cache() -> None:
    _CACHE.clear()
