"""Named residual results produced by every identity check."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import mpf

from .moments import decimal_str
from .weights import to_mpf


@dataclass
class CheckResult:
    """One verified identity: its worst residual, the scale it is relative to,
    the tolerance it was judged against, and where/how it was computed.

    components holds named sub-residuals (decimal strings) for multi-part
    checks; pass is true iff max_residual <= tolerance.
    """

    name: str
    max_residual: mpf
    scale: mpf
    tolerance: mpf
    passed: bool
    window: str
    provenance: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)

    def to_json_dict(self, bits: int) -> dict:
        return {
            "name": self.name,
            "max_residual": decimal_str(self.max_residual, bits),
            "scale": decimal_str(self.scale, bits),
            "tolerance": decimal_str(self.tolerance, bits),
            "pass": self.passed,
            "window": self.window,
            "provenance": dict(sorted(self.provenance.items())),
            "components": dict(sorted(self.components.items())),
        }


def make_result(
    name: str,
    residual,
    scale,
    tolerance,
    window: str,
    provenance: dict | None = None,
    components: dict | None = None,
) -> CheckResult:
    residual = mpf(residual) if not isinstance(residual, mpf) else residual
    scale_m = to_mpf(scale) if isinstance(scale, Fraction) else mpf(scale)
    if scale_m <= 0:
        scale_m = mpf(1)
    tol_m = to_mpf(tolerance) if isinstance(tolerance, Fraction) else mpf(tolerance)
    return CheckResult(
        name=name,
        max_residual=residual,
        scale=scale_m,
        tolerance=tol_m,
        passed=bool(residual <= tol_m),
        window=window,
        provenance=provenance or {},
        components=components or {},
    )


class ResidualAccumulator:
    """Collects named relative residuals and reports the worst one."""

    def __init__(self, bits: int):
        self.bits = bits
        self.worst = mpf(0)
        self.worst_scale = mpf(1)
        self.parts: dict[str, str] = {}

    def add(self, label: str, abs_diff, scale) -> None:
        scale = mpf(scale)
        if scale <= 0:
            scale = mpf(1)
        rel = mpf(abs_diff) / scale
        self.parts[label] = decimal_str(rel, 64)
        if rel > self.worst:
            self.worst = rel
            self.worst_scale = scale

    def result(
        self,
        name: str,
        tolerance,
        window: str,
        provenance: dict | None = None,
    ) -> CheckResult:
        return make_result(
            name,
            self.worst,
            self.worst_scale,
            tolerance,
            window,
            provenance,
            self.parts,
        )
