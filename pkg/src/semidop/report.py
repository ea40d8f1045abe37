"""Suite orchestration: check registry, configuration, reports, serialization.

The registry maps stable check names to runners; a suite builds one shared
pipeline (one moment table sized for the most demanding selected check), runs
the selected checks in registry order, and aggregates the results. Reports are
deterministic: same configuration, byte-identical JSON.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass
from fractions import Fraction

from mpmath import workprec

from .errors import DivergentSeries, PreconditionError, SemidopError
from .flows import default_fd_step
from .integrable import (
    contiguous_check,
    kp_check,
    nijhoff_capel_check,
    omega_connection_check,
    pearson_toda_check,
    sato_wilson_check,
    tau_route_check,
    toda_check,
    uv_system_check,
    valid_single_shifts,
)
from .moments import PrecisionContext, decimal_str
from .pipeline import WeightPipeline, get_pipeline
from .result import CheckResult, ResidualAccumulator
from .structure import (
    coefficient_sum_check,
    gram_pearson_residual,
    orthogonality_check,
    pi_closed_form_check,
    polynomial_shift_identity,
    psi_extreme_diagonals,
    psi_jacobi_identities,
    s_inverse_expansion_check,
    structure_cholesky_check,
    structure_shift_residual,
)
from .weights import (
    HypergeometricWeight,
    Shift,
    classify_convergence,
    pearson_polynomials,
    to_mpf,
    weight_value,
)

DEFAULT_SEED = 20260808


@dataclass(frozen=True)
class SuiteConfig:
    """What to verify: weight, truncation size, precision, tolerance, and the
    selected checks (None selects every check applicable to the weight)."""

    weight: HypergeometricWeight
    size: int = 12
    mantissa_bits: int = 512
    tolerance: Fraction | None = None
    checks: tuple[str, ...] | None = None
    lattice_n: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    flows: tuple[int, ...] = (1, 2)
    fd_step: Fraction | None = None
    fd_halvings: int = 3
    max_terms: int = 100_000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.size < 3:
            raise PreconditionError("suite size must be at least 3")
        if self.checks is not None and not self.checks:
            raise PreconditionError("selected checks must be nonempty")

    def context(self) -> PrecisionContext:
        return PrecisionContext(mantissa_bits=self.mantissa_bits, max_terms=self.max_terms)

    def tol(self) -> Fraction:
        return self.tolerance if self.tolerance is not None else self.context().default_tolerance()

    def step(self) -> Fraction:
        return self.fd_step if self.fd_step is not None else default_fd_step(self.mantissa_bits)


@dataclass
class Report:
    config: dict
    checks: list
    passed: bool
    mantissa_bits: int

    def to_json(self) -> str:
        payload = {
            "suite": self.config,
            "checks": [c.to_json_dict(self.mantissa_bits) for c in self.checks],
            "pass": self.passed,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["name", "max_residual", "scale", "tolerance", "pass"])
        for c in self.checks:
            writer.writerow(
                [
                    c.name,
                    decimal_str(c.max_residual, self.mantissa_bits),
                    decimal_str(c.scale, self.mantissa_bits),
                    decimal_str(c.tolerance, self.mantissa_bits),
                    c.passed,
                ]
            )
        return buf.getvalue()


def parse_report(text: str) -> dict:
    return json.loads(text)


# -- individual check runners ----------------------------------------------------

def _z_samples(cfg: SuiteConfig, count: int = 10) -> list[Fraction]:
    rng = random.Random(cfg.seed)
    return [Fraction(rng.randint(0, 5_000_000), 1_000_000) for _ in range(count)]


def _run_pearson(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    w = pipe.weight
    bits = pipe.bits
    pp = pearson_polynomials(w)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        for k in range(51):
            lhs = to_mpf(pp.theta(Fraction(k + 1))) * weight_value(w, k + 1)
            rhs = to_mpf(pp.sigma(Fraction(k))) * weight_value(w, k)
            acc.add(f"k={k}", abs(lhs - rhs), max(abs(lhs), abs(rhs)))
        return acc.result(
            "pearson", cfg.tol(), window="lattice points k <= 50",
            provenance=pipe.provenance(),
        )


def _run_gram_pearson(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    return gram_pearson_residual(
        pipe.table, pipe.weight, cfg.size, cfg.tol(), provenance=pipe.provenance()
    )


def _run_pascal_forms(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    return pi_closed_form_check(
        pipe.chol, pipe.jac, pipe.pi, pipe.pi_inv, cfg.tol(), provenance=pipe.provenance()
    )


def _run_s_inverse(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    return s_inverse_expansion_check(pipe.chol, cfg.tol(), provenance=pipe.provenance())


def _run_coefficient_sums(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    return coefficient_sum_check(pipe.chol, pipe.jac, cfg.tol(), provenance=pipe.provenance())


def _run_orthogonality(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    nmax = min(8, pipe.jac.size - 1)
    return orthogonality_check(
        pipe.weight,
        pipe.jac,
        pipe.chol.h,
        nmax,
        pipe.ctx.series_tol,
        pipe.ctx.max_terms,
        cfg.tol(),
        provenance=pipe.provenance(),
    )


def _run_psi_routes(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    _, _, result, _ = pipe.psi(cfg.tol())
    return result


def _run_psi_diagonals(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    psi, _, _, window = pipe.psi(cfg.tol())
    return psi_extreme_diagonals(
        psi, window, pipe.chol, pipe.jac, pipe.weight, cfg.tol(),
        provenance=pipe.provenance(),
    )


def _run_psi_shift(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    _, dense, _, window = pipe.psi(cfg.tol())
    return structure_shift_residual(
        dense, window, pipe.chol, pipe.jac, pipe.weight, _z_samples(cfg), cfg.tol(),
        provenance=pipe.provenance(),
    )


def _run_psi_jacobi(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    _, dense, _, _ = pipe.psi(cfg.tol())
    return psi_jacobi_identities(
        dense, pipe.chol, pipe.jac, pipe.weight, cfg.tol(), provenance=pipe.provenance()
    )


def _run_structure_cholesky(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    _, dense, _, _ = pipe.psi(cfg.tol())
    return structure_cholesky_check(
        pipe.chol, pipe.jac, pipe.pi, dense, pipe.weight, cfg.tol(),
        provenance=pipe.provenance(),
    )


def _run_poly_shift(pipe: WeightPipeline, cfg: SuiteConfig) -> list[CheckResult]:
    out = []
    for coeffs, tag in (
        ((Fraction(1),), "const"),
        ((Fraction(0), Fraction(1)), "linear"),
        ((Fraction(0), Fraction(0), Fraction(1)), "quadratic"),
    ):
        res = polynomial_shift_identity(
            pipe.jac, pipe.pi, pipe.pi_inv, coeffs, cfg.tol(),
            provenance=pipe.provenance(), label=f"poly_shift_{tag}",
        )
        out.append(res)
    return out


def _run_contiguous(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    return contiguous_check(pipe, cfg.tol(), provenance=pipe.provenance())


def _run_omega(pipe: WeightPipeline, cfg: SuiteConfig) -> list[CheckResult]:
    out = []
    zs = _z_samples(cfg, 3)
    for sh in valid_single_shifts(pipe):
        res = omega_connection_check(pipe, sh, zs, cfg.tol(), provenance=pipe.provenance())
        res.name = f"omega_{sh.label()}"
        out.append(res)
    return out


def _lattice_pairs(pipe: WeightPipeline) -> list[tuple[Shift, Shift]]:
    shifts = valid_single_shifts(pipe)
    return [(shifts[i], shifts[j]) for i in range(len(shifts)) for j in range(i + 1, len(shifts))]


def _run_nijhoff_capel(pipe: WeightPipeline, cfg: SuiteConfig) -> list[CheckResult]:
    out = []
    n_values = [n for n in cfg.lattice_n if n + 1 <= pipe.k]
    for r, s in _lattice_pairs(pipe):
        res = nijhoff_capel_check(
            pipe, r, s, n_values, cfg.tol(), provenance=pipe.provenance()
        )
        res.name = f"nijhoff_capel_{r.label()}_{s.label()}"
        out.append(res)
    return out


def _run_uv_system(pipe: WeightPipeline, cfg: SuiteConfig) -> list[CheckResult]:
    out = []
    n_values = [n for n in cfg.lattice_n if n + 2 <= pipe.k]
    for sh in valid_single_shifts(pipe)[:2]:
        res = uv_system_check(
            pipe, sh, n_values, cfg.tol(), cfg.step(), cfg.fd_halvings,
            provenance=pipe.provenance(),
        )
        res.name = f"uv_system_{sh.label()}"
        out.append(res)
    return out


def _run_tau_routes(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    nmax = min(8, pipe.k - 1)
    return tau_route_check(pipe, nmax, cfg.tol(), provenance=pipe.provenance())


def _run_toda(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    nmax = min(8, pipe.k - 2)
    return toda_check(
        pipe, nmax, _z_samples(cfg, 2), cfg.step(), cfg.tol(), provenance=pipe.provenance()
    )


def _run_sato_wilson(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    flows = tuple(l for l in cfg.flows if l in (1, 2))
    return sato_wilson_check(
        pipe, flows, cfg.step(), cfg.fd_halvings, cfg.tol(), provenance=pipe.provenance()
    )


def _run_pearson_toda(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    return pearson_toda_check(pipe, cfg.step(), cfg.tol(), provenance=pipe.provenance())


def _run_kp(pipe: WeightPipeline, cfg: SuiteConfig) -> CheckResult:
    n_values = [n for n in cfg.lattice_n if n <= 4 and 2 * n + 3 <= pipe.depth]
    if not n_values:
        n_values = [1, 2]
    return kp_check(pipe, n_values, cfg.step(), cfg.tol(), provenance=pipe.provenance())


@dataclass(frozen=True)
class CheckSpec:
    name: str
    description: str
    runner: object
    needs_pearson: bool = False  # undeformed weights only
    needs_deformation: bool = False
    min_single_shifts: int = 0


REGISTRY: dict[str, CheckSpec] = {
    spec.name: spec
    for spec in (
        CheckSpec(
            "pearson",
            "difference equation theta(k+1) w(k+1) = sigma(k) w(k) on the lattice",
            _run_pearson,
            needs_pearson=True,
        ),
        CheckSpec(
            "gram_pearson",
            "moment-matrix symmetry theta(shift) G = B sigma(shift) G B^T",
            _run_gram_pearson,
            needs_pearson=True,
        ),
        CheckSpec(
            "pascal_forms",
            "dressed Pascal subdiagonals: closed forms and sum/difference identities",
            _run_pascal_forms,
        ),
        CheckSpec(
            "s_inverse",
            "subdiagonal expansion of the inverse triangular factor",
            _run_s_inverse,
        ),
        CheckSpec(
            "coefficient_sums",
            "nonlocal sums for polynomial coefficients in recurrence data",
            _run_coefficient_sums,
        ),
        CheckSpec(
            "orthogonality",
            "direct weighted lattice sums against factorization norms",
            _run_orthogonality,
        ),
        CheckSpec(
            "psi_routes",
            "six assembly routes and band confinement of the shift-structure matrix",
            _run_psi_routes,
            needs_pearson=True,
        ),
        CheckSpec(
            "psi_diagonals",
            "extreme diagonals of the structure matrix as norm/recurrence products",
            _run_psi_diagonals,
            needs_pearson=True,
        ),
        CheckSpec(
            "psi_shift",
            "structure equations theta(z) P(z-1) = Psi H^-1 P(z) and its transpose mate",
            _run_psi_shift,
            needs_pearson=True,
        ),
        CheckSpec(
            "psi_jacobi",
            "compatibility commutators and product factorizations with the recurrence matrix",
            _run_psi_jacobi,
            needs_pearson=True,
        ),
        CheckSpec(
            "structure_cholesky",
            "triangular factorizations of H theta(J^T) and sigma(J) H and their identities",
            _run_structure_cholesky,
            needs_pearson=True,
        ),
        CheckSpec(
            "poly_shift",
            "R(J) Pi = Pi R(J+-I) intertwining for small polynomials R",
            _run_poly_shift,
        ),
        CheckSpec(
            "contiguous",
            "contiguous-parameter relations of the moment matrix",
            _run_contiguous,
            needs_pearson=True,
        ),
        CheckSpec(
            "omega",
            "bidiagonal connection matrices for single parameter shifts",
            _run_omega,
            needs_pearson=True,
            min_single_shifts=1,
        ),
        CheckSpec(
            "nijhoff_capel",
            "octahedral lattice equation for squared norms under two parameter shifts",
            _run_nijhoff_capel,
            needs_pearson=True,
            min_single_shifts=2,
        ),
        CheckSpec(
            "uv_system",
            "coupled difference system for norms and recurrence diagonal under one shift",
            _run_uv_system,
            needs_pearson=True,
            min_single_shifts=1,
        ),
        CheckSpec(
            "tau_routes",
            "factorization data against determinant derivatives, including the bilinear form",
            _run_tau_routes,
        ),
        CheckSpec(
            "toda",
            "first-flow system and second-order equation for the recurrence data",
            _run_toda,
        ),
        CheckSpec(
            "sato_wilson",
            "dressing-factor, Lax, and zero-curvature forms of the flow equations",
            _run_sato_wilson,
        ),
        CheckSpec(
            "pearson_toda",
            "compatibility of the structure matrix with the first flow",
            _run_pearson_toda,
            needs_pearson=True,
        ),
        CheckSpec(
            "kp",
            "KP relation for the subleading coefficient of a triply deformed weight",
            _run_kp,
            needs_deformation=True,
        ),
    )
}

CHECK_ORDER = tuple(REGISTRY)


def applicable(spec: CheckSpec, w: HypergeometricWeight) -> tuple[bool, str]:
    if spec.needs_pearson and w.deformed:
        return False, "requires an undeformed weight"
    if spec.needs_deformation and not (abs(w.eta2) < 1 and abs(w.eta3) < 1):
        return False, "requires an active deformation"
    if spec.min_single_shifts:
        count = w.m_degree + w.n_degree
        if count < spec.min_single_shifts:
            return False, f"requires at least {spec.min_single_shifts} shiftable parameters"
    return True, ""


def select_checks(cfg: SuiteConfig) -> list[str]:
    """Resolve the configured selection; explicit inapplicable requests are
    configuration errors raised before any computation."""
    w = cfg.weight
    if cfg.checks is None:
        return [name for name in CHECK_ORDER if applicable(REGISTRY[name], w)[0]]
    unknown = [name for name in cfg.checks if name not in REGISTRY]
    if unknown:
        raise PreconditionError(f"unknown checks: {', '.join(unknown)}")
    for name in cfg.checks:
        ok, reason = applicable(REGISTRY[name], w)
        if not ok:
            raise PreconditionError(f"check {name!r} not applicable: {reason}")
    return [name for name in CHECK_ORDER if name in cfg.checks]


def run_suite(cfg: SuiteConfig) -> Report:
    """Run the selected checks against one shared pipeline and aggregate."""
    selected = select_checks(cfg)
    classification = classify_convergence(cfg.weight)
    if not classification.converges:
        raise DivergentSeries(f"moments diverge for weight {cfg.weight.spec_string()}")
    ctx = cfg.context()
    # one table serves the suite: the entrywise Pearson-symmetry assembly is
    # the deepest consumer beyond the factorization itself
    depth = 2 * (cfg.size - 1) + cfg.weight.n_degree + 2
    pipe = get_pipeline(cfg.weight, cfg.size, ctx, depth=depth)
    results: list[CheckResult] = []
    for name in selected:
        runner = REGISTRY[name].runner
        try:
            outcome = runner(pipe, cfg)
        except SemidopError as exc:
            raise type(exc)(f"[{name}] {exc}") from exc
        if isinstance(outcome, list):
            results.extend(outcome)
        else:
            results.append(outcome)
    for res in results:
        res.provenance.setdefault("seed", str(cfg.seed))
    config_echo = {
        "weight": cfg.weight.spec_string(),
        "size": str(cfg.size),
        "mantissa_bits": str(cfg.mantissa_bits),
        "tolerance": decimal_str(to_mpf(cfg.tol()), 64),
        "checks": list(selected),
        "lattice_n": [str(n) for n in cfg.lattice_n],
        "fd_step": decimal_str(to_mpf(cfg.step()), 64),
        "fd_halvings": str(cfg.fd_halvings),
        "seed": str(cfg.seed),
    }
    passed = all(r.passed for r in results)
    return Report(config_echo, results, passed, cfg.mantissa_bits)


def emit_report(report: Report, fmt: str, path) -> None:
    """Write the report as JSON (full-precision decimal strings) or CSV."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = report.to_json() if fmt == "json" else report.to_csv()
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
