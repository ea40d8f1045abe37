"""Integrable-systems verification layer.

Each function verifies one family of identities as numerical residuals on
truncations: contiguous-parameter relations of the moment matrix, bidiagonal
connection matrices for shifted parameters, the octahedral lattice equation
satisfied by the squared norms, the first-flow Toda stack (tau-function
cross-checks, Toda system and equation, factorization/operator/compatibility
forms), the Pearson/first-flow compatibility, and the KP relation for triply
deformed weights.

Engine derivatives (exact moment-index shifts) carry the identities; central
finite differences at rational steps act as the independent second witness
wherever the triangular factor itself is differentiated.
"""

from __future__ import annotations

from fractions import Fraction

from mpmath import mp, mpf, workprec

from .errors import DivergentSeries, InvalidShift, PreconditionError
from .flows import (
    derivative_fd_crosscheck,
    fd_convergence_study,
    fd_flow_derivative,
    log_tau_jet,
    tau_derivative,
)
from .linalg import (
    commutator,
    diag,
    mat_mul,
    mat_scale,
    mat_sub,
    mat_vec,
    max_abs,
    transpose,
    window_diff,
    zeros,
)
from .moments import FlowMultiIndex, hankel_determinant
from .pipeline import WeightPipeline, get_pipeline
from .result import CheckResult, ResidualAccumulator
from .structure import pascal_matrix
from .weights import Shift, shift_parameter, to_mpf


def _shift_constant(pipe: WeightPipeline, shift: Shift) -> Fraction:
    """The constant attached to a parameter shift: a_i, or b_j - 1."""
    w = pipe.weight
    if shift.kind == "a":
        return w.a[shift.index - 1]
    if shift.kind == "b":
        return w.b[shift.index - 1] - 1
    raise InvalidShift("lattice shifts select a single a or b parameter")


def valid_single_shifts(pipe: WeightPipeline) -> list[Shift]:
    """All A(i)/B(j) shifts that keep the weight defined and convergent."""
    out = []
    for i in range(1, pipe.weight.m_degree + 1):
        out.append(Shift.a(i))
    for j in range(1, pipe.weight.n_degree + 1):
        try:
            shift_parameter(pipe.weight, Shift.b(j))
        except InvalidShift:
            continue
        out.append(Shift.b(j))
    return out


# -- contiguous relations of the moment matrix ---------------------------------

def contiguous_check(
    pipe: WeightPipeline,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Single-parameter and total-shift relations between the moment matrix and
    its contiguous companions, on the leading (k-1) window.

    The single shifts read (shift + c) G = c * G_shifted entrywise; the total
    shift reads  shift(G) = eta * kappa * B G_total B^T  with kappa the ratio
    of parameter products (the eta factor follows from converting the plain
    eta-derivative of the defining series to the logarithmic one).
    """
    w = pipe.weight
    if w.deformed:
        raise PreconditionError("contiguous relations apply to undeformed weights only")
    k = pipe.k
    win = k - 1
    bits = pipe.bits
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        rho = pipe.table.moment

        for sh in valid_single_shifts(pipe):
            try:
                sp = pipe.shifted(sh)
            except DivergentSeries:
                continue
            c = to_mpf(_shift_constant(pipe, sh))
            rho_s = sp.table.moment
            scale = max(abs(rho(2 * win)), abs(c) * abs(rho_s(2 * win)), mpf(1))
            worst = mpf(0)
            for n in range(win):
                for m in range(win):
                    lhs = rho(n + m + 1) + c * rho(n + m)
                    rhs = c * rho_s(n + m)
                    worst = max(worst, abs(lhs - rhs))
                    scale = max(scale, abs(lhs), abs(rhs))
            acc.add(f"shift {sh.label()}", worst, scale)

        total = shift_parameter(w, Shift.total())
        tp = get_pipeline(total, k, pipe.ctx)
        kappa = Fraction(1)
        for ai in w.a:
            kappa *= ai
        for bj in w.b:
            kappa /= bj
        factor = to_mpf(w.eta * kappa)
        b = pascal_matrix(win, 1)
        g_hat = [[tp.table.moment(n + m) for m in range(win)] for n in range(win)]
        rhs_mat = mat_mul(mat_mul(b, g_hat), transpose(b))
        worst = mpf(0)
        scale = mpf(1)
        for n in range(win):
            for m in range(win):
                lhs = rho(n + m + 1)
                rhs = factor * rhs_mat[n][m]
                worst = max(worst, abs(lhs - rhs))
                scale = max(scale, abs(lhs), abs(rhs))
        acc.add("shift T", worst, scale)

        return acc.result(
            "contiguous",
            tolerance,
            window=f"leading {win}x{win} window",
            provenance=provenance,
        )


# -- connection matrices for contiguous parameters ------------------------------

def omega_connection_check(
    pipe: WeightPipeline,
    shift: Shift,
    z_samples: list,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """The connection matrix S (S_shifted)^{-1}: bidiagonality, the closed form
    of its subdiagonal in norm ratios, and its action gluing the shifted
    polynomial vector back to the original."""
    w = pipe.weight
    c_frac = _shift_constant(pipe, shift)
    if c_frac == 0:
        raise InvalidShift(f"shift constant vanishes for {shift.label()}")
    sp = pipe.shifted(shift)
    bits = pipe.bits
    size = pipe.k + 1
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        c = to_mpf(c_frac)
        omega = mat_mul(pipe.chol.s, sp.chol.s_inv)
        scale = max(max_abs(omega), mpf(1))
        worst = mpf(0)
        for n in range(size):
            for m in range(n - 1):
                worst = max(worst, abs(omega[n][m]))
        acc.add("off_bidiagonal", worst, scale)

        worst = mpf(0)
        entry_scale = scale
        for n in range(size - 1):
            expected = pipe.chol.h[n + 1] / (c * sp.chol.h[n])
            worst = max(worst, abs(omega[n + 1][n] - expected))
            entry_scale = max(entry_scale, abs(expected))
        acc.add("subdiagonal_closed_form", worst, entry_scale)

        for z in z_samples:
            p_base = pipe.p_vector(z, size)
            p_shift = sp.p_vector(z, size)
            glued = mat_vec(omega, p_shift)
            vec_scale = max(max(abs(x) for x in p_base), mpf(1))
            worst = mpf(0)
            for n in range(size):
                worst = max(worst, abs(glued[n] - p_base[n]))
            acc.add(f"action[z={mp.nstr(to_mpf(z), 6)}]", worst, vec_scale)

        return acc.result(
            "omega",
            tolerance,
            window=f"full {size} truncation, shift {shift.label()}",
            provenance=provenance,
        )


# -- the octahedral lattice equation for squared norms ---------------------------

def nijhoff_capel_check(
    pipe: WeightPipeline,
    r: Shift,
    s: Shift,
    n_values: list[int],
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Squared norms under two distinct parameter shifts satisfy the octahedral
    lattice equation; all ingredients come from independent factorizations at
    base, singly shifted, and doubly shifted parameters."""
    if (r.kind, r.index) == (s.kind, s.index):
        raise InvalidShift("the two lattice directions must be distinct parameters")
    bits = pipe.bits
    rp = pipe.shifted(r)
    sp = pipe.shifted(s)
    rs = rp.shifted(s)
    a_hat = to_mpf(_shift_constant(pipe, r))
    a_til = to_mpf(_shift_constant(pipe, s))
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        h, hr, hs, hrs = pipe.chol.h, rp.chol.h, sp.chol.h, rs.chol.h
        for n in n_values:
            if n < 1 or n + 1 > pipe.k:
                raise PreconditionError(f"lattice index {n} outside truncation")
            u_bar = h[n]
            u_hat = a_hat * hr[n - 1]
            u_til = a_til * hs[n - 1]
            u_hat_bar = a_hat * hr[n]
            u_til_bar = a_til * hs[n]
            u_hat_til = a_hat * a_til * hrs[n - 1]
            lhs = (u_hat_bar - u_til_bar) / u_bar
            rhs = u_hat_til * (1 / u_til - 1 / u_hat)
            scale = max(
                abs(u_hat_bar / u_bar),
                abs(u_til_bar / u_bar),
                abs(u_hat_til / u_til),
                abs(u_hat_til / u_hat),
            )
            acc.add(f"n={n}", abs(lhs - rhs), scale)
        return acc.result(
            "nijhoff_capel",
            tolerance,
            window=f"n in {n_values}, shifts ({r.label()}, {s.label()})",
            provenance=provenance,
        )


def uv_system_check(
    pipe: WeightPipeline,
    r: Shift,
    n_values: list[int],
    tolerance: Fraction,
    fd_step: Fraction,
    halvings: int,
    provenance: dict | None = None,
) -> CheckResult:
    """The coupled difference system for squared norms and recurrence diagonal
    under one parameter shift, the boundary identity, and the flow derivative
    of the norm ratio (engine value with a finite-difference witness)."""
    bits = pipe.bits
    rp = pipe.shifted(r)
    a_hat_frac = _shift_constant(pipe, r)
    if a_hat_frac == 0:
        raise InvalidShift(f"shift constant vanishes for {r.label()}")
    a_hat = to_mpf(a_hat_frac)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        h, hr = pipe.chol.h, rp.chol.h
        beta, beta_r = pipe.jac.beta, rp.jac.beta

        for n in n_values:
            if n < 1 or n + 2 > pipe.k:
                raise PreconditionError(f"lattice index {n} outside truncation")
            res1 = (beta_r[n] - beta[n]) - (
                h[n + 1] / (a_hat * hr[n]) - h[n] / (a_hat * hr[n - 1])
            )
            scale1 = max(abs(beta_r[n]), abs(beta[n]), abs(h[n + 1] / (a_hat * hr[n])), mpf(1))
            acc.add(f"difference_v_bar[n={n}]", abs(res1), scale1)

            res2 = (beta_r[n - 1] - beta[n]) - (
                a_hat * hr[n - 1] / h[n - 1] - a_hat * hr[n] / h[n]
            )
            scale2 = max(abs(beta_r[n - 1]), abs(beta[n]), abs(a_hat * hr[n - 1] / h[n - 1]), mpf(1))
            acc.add(f"difference_v_hat[n={n}]", abs(res2), scale2)

            # flow derivative of the norm ratio: engine via log-tau jets.
            # The commutator derivation gives gamma_shifted - gamma, i.e.
            # u-hat-bar/u-hat - u-bar/u (FD witness below confirms the sign).
            dlog_h_n = _dlog_h(pipe, n)
            dlog_hr_prev = _dlog_h(rp, n - 1)
            ratio = h[n] / (a_hat * hr[n - 1])
            engine = ratio * (dlog_h_n - dlog_hr_prev)
            rhs = hr[n] / hr[n - 1] - h[n] / h[n - 1]
            scale3 = max(abs(engine), abs(h[n] / h[n - 1]), abs(hr[n] / hr[n - 1]), mpf(1))
            acc.add(f"ratio_flow[n={n}]", abs(engine - rhs), scale3)

        # boundary identity at n = 1
        lhs = beta_r[0] * (a_hat * hr[0] / h[0])
        rhs = beta[0] * (a_hat * hr[0] / h[0]) + h[1] / h[0]
        acc.add("boundary", abs(lhs - rhs), max(abs(lhs), abs(rhs), mpf(1)))

        # FD witness with step halving for the first requested index
        n0 = n_values[0]

        def ratio_quantity(mult: Fraction):
            pb = pipe.flow_scaled(1, mult)
            pr = rp.flow_scaled(1, mult)
            return pb.chol.h[n0] / (a_hat * pr.chol.h[n0 - 1])

        engine0 = (h[n0] / (a_hat * hr[n0 - 1])) * (_dlog_h(pipe, n0) - _dlog_h(rp, n0 - 1))
        residuals = fd_convergence_study(ratio_quantity, engine0, fd_step, halvings, bits)
        for i, res in enumerate(residuals):
            acc.parts[f"fd_step_{i}"] = mp.nstr(res, 8)
        acc.add("fd_final", residuals[-1], mpf(1))

        return acc.result(
            "uv_system",
            tolerance,
            window=f"n in {n_values}, shift {r.label()}",
            provenance=provenance,
        )


def _dlog_h(pipe: WeightPipeline, n: int) -> mpf:
    """First-flow derivative of log H_n, engine-exact from determinant jets."""
    up = log_tau_jet(pipe.table, n + 1, [(1, 0, 0)])[(1, 0, 0)]
    dn = log_tau_jet(pipe.table, n, [(1, 0, 0)])[(1, 0, 0)]
    return up - dn


# -- tau-function cross-checks and the Toda stack --------------------------------

def tau_route_check(
    pipe: WeightPipeline,
    nmax: int,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Factorization data against determinant data: norms as determinant ratios,
    subleading coefficients as logarithmic derivatives, the recurrence
    coefficients as second derivatives, and the bilinear (Hirota) form."""
    if nmax + 1 > pipe.k:
        raise PreconditionError("tau cross-check range exceeds truncation")
    bits = pipe.bits
    table = pipe.table
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        taus = [hankel_determinant(table, n) for n in range(nmax + 2)]
        jets = [log_tau_jet(table, n, [(2, 0, 0)]) for n in range(nmax + 2)]
        h = pipe.chol.h
        for n in range(nmax + 1):
            acc.add(
                f"norm_ratio[{n}]",
                abs(h[n] - taus[n + 1] / taus[n]),
                abs(h[n]),
            )
            dtau = tau_derivative(table, n, FlowMultiIndex(1, 0, 0))
            p1 = pipe.chol.p(1, n)
            acc.add(
                f"subleading[{n}]",
                abs(p1 + dtau / taus[n]),
                max(abs(p1), mpf(1)),
            )
            dlog = jets[n + 1][(1, 0, 0)] - jets[n][(1, 0, 0)]
            beta_n = pipe.jac.beta[n] if n < len(pipe.jac.beta) else None
            if beta_n is not None:
                acc.add(f"beta[{n}]", abs(beta_n - dlog), max(abs(beta_n), mpf(1)))
            if n >= 1:
                gamma_n = pipe.gamma(n)
                acc.add(
                    f"gamma[{n}]",
                    abs(gamma_n - jets[n][(2, 0, 0)]),
                    abs(gamma_n),
                )
                hirota = taus[n + 1] * taus[n - 1] / (taus[n] * taus[n])
                acc.add(
                    f"hirota[{n}]",
                    abs(jets[n][(2, 0, 0)] - hirota),
                    abs(hirota),
                )
        return acc.result(
            "tau_routes",
            tolerance,
            window=f"n <= {nmax}",
            provenance=provenance,
        )


def toda_check(
    pipe: WeightPipeline,
    nmax: int,
    z_samples: list,
    fd_step: Fraction,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """First-flow Toda system and equation for the recurrence data, with engine
    derivatives on one side and factorization data on the other; the polynomial
    flow relation is witnessed by finite differences."""
    if nmax + 2 > pipe.k:
        raise PreconditionError("Toda range exceeds truncation")
    bits = pipe.bits
    table = pipe.table
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        jets = [log_tau_jet(table, n, [(2, 0, 0)]) for n in range(nmax + 3)]
        h = pipe.chol.h
        beta = pipe.jac.beta

        def d2q(n: int) -> mpf:
            # second flow derivative of log H_n, which is also the flow
            # derivative of beta_n (beta being the first derivative of log H)
            return jets[n + 1][(2, 0, 0)] - jets[n][(2, 0, 0)]

        for n in range(nmax + 1):
            gamma_next = pipe.gamma(n + 1)
            gamma_n = pipe.gamma(n) if n >= 1 else mpf(0)
            scale = max(abs(gamma_next), abs(gamma_n), mpf(1))
            acc.add(f"system_beta[{n}]", abs(d2q(n) - (gamma_next - gamma_n)), scale)

            if n >= 1:
                dlog_gamma = (
                    jets[n + 1][(1, 0, 0)] + jets[n - 1][(1, 0, 0)] - 2 * jets[n][(1, 0, 0)]
                )
                d2log_gamma = (
                    jets[n + 1][(2, 0, 0)] + jets[n - 1][(2, 0, 0)] - 2 * jets[n][(2, 0, 0)]
                )
                beta_prev = beta[n - 1]
                acc.add(
                    f"system_gamma[{n}]",
                    abs(dlog_gamma - (beta[n] - beta_prev)),
                    max(abs(beta[n]), abs(beta_prev), mpf(1)),
                )
                acc.add(
                    f"equation_q[{n}]",
                    abs(d2q(n) - (h[n + 1] / h[n] - h[n] / h[n - 1])),
                    max(abs(h[n + 1] / h[n]), abs(h[n] / h[n - 1])),
                )
                acc.add(
                    f"equation_gamma[{n}]",
                    abs(d2log_gamma + 2 * gamma_n - gamma_next - (pipe.gamma(n - 1) if n >= 2 else mpf(0))),
                    max(abs(gamma_n), abs(gamma_next), mpf(1)),
                )

            # flow derivative of the subleading coefficient
            dp1 = -jets[n][(2, 0, 0)]
            acc.add(
                f"subleading_flow[{n}]",
                abs(dp1 + (pipe.gamma(n) if n >= 1 else mpf(0))),
                max(abs(dp1), mpf(1)),
            )

        # polynomial flow relation, FD-witnessed
        for z in z_samples:
            for n in (min(2, nmax), min(4, nmax)):
                if n < 1:
                    continue

                def poly_quantity(mult: Fraction, z=z, n=n):
                    return pipe.flow_scaled(1, mult).p_vector(z, n + 1)[n]

                engine = -pipe.gamma(n) * pipe.p_vector(z, n)[n - 1]
                res = derivative_fd_crosscheck(poly_quantity, engine, fd_step, bits)
                acc.add(f"poly_flow[n={n},z={mp.nstr(to_mpf(z), 6)}]", res, mpf(1))

        return acc.result(
            "toda",
            tolerance,
            window=f"n <= {nmax}",
            provenance=provenance,
        )


def _log_jets(pipe: WeightPipeline, count: int, alphas) -> list[dict]:
    return [log_tau_jet(pipe.table, n, alphas) for n in range(count)]


def _dbeta_at(jets: list[dict], n: int, up_alpha) -> mpf:
    """Flow derivative of beta_n = d/dt1 log H_n; up_alpha is the mixed order
    on log tau including the extra first-flow derivative carried by beta."""
    return jets[n + 1][up_alpha] - jets[n][up_alpha]


def _dgamma_at(pipe: WeightPipeline, jets: list[dict], n: int, alpha) -> mpf:
    """Flow derivative of gamma_n (n >= 1) via its logarithm."""
    dlog_gamma = jets[n + 1][alpha] + jets[n - 1][alpha] - 2 * jets[n][alpha]
    return pipe.gamma(n) * dlog_gamma


def fd_feasible_flows(pipe: WeightPipeline, flows: tuple[int, ...]) -> tuple[int, ...]:
    """Flows whose parameter can be nudged by (1 +- step) without losing
    convergence: the first flow away from the unit circle, higher flows only
    when the corresponding deformation is strictly inside it."""
    from .weights import classify_convergence

    w = pipe.weight
    out = []
    for l in flows:
        if l == 1:
            kind = classify_convergence(w).kind
            if kind in ("all_eta", "finite_support") or (
                kind == "unit_disk" and abs(w.eta) < 1
            ):
                out.append(1)
        elif l == 2 and abs(w.eta2) < 1:
            out.append(2)
        elif l == 3 and abs(w.eta3) < 1:
            out.append(3)
    return tuple(out)


def sato_wilson_check(
    pipe: WeightPipeline,
    flows: tuple[int, ...],
    fd_step: Fraction,
    halvings: int,
    tolerance: Fraction,
    provenance: dict | None = None,
    fd_flows: tuple[int, ...] | None = None,
) -> CheckResult:
    """Factorization-level, operator-level, and compatibility-level forms of the
    flow equations: diagonal norm derivatives against powers of the recurrence
    matrix, the strictly-lower dressing factor against the FD-differentiated
    triangular factor, the Lax equation entrywise, and the (1,2) zero-curvature
    equation assembled by the chain rule on engine derivatives.

    Engine parts run for every requested flow (the derivative at a unit
    deformation parameter is still an index shift); the FD witness runs only
    for flows whose parameter can actually be perturbed (fd_flows).
    """
    bits = pipe.bits
    kj = pipe.jac.size
    if fd_flows is None:
        fd_flows = fd_feasible_flows(pipe, flows)
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        j = pipe.jac.to_dense()
        powers = {1: j, 2: mat_mul(j, j)}
        jets = _log_jets(pipe, kj + 1, [(2, 1, 0)])
        h_floor = pipe.chol.h_floor()

        def dlog_h(n: int, alpha) -> mpf:
            return jets[n + 1][alpha] - jets[n][alpha]

        for l in flows:
            jl = powers[l]
            alpha = (1, 0, 0) if l == 1 else (0, 1, 0)
            up_alpha = (alpha[0] + 1, alpha[1], alpha[2])

            # (a) diagonal norm derivatives
            worst = mpf(0)
            scale = h_floor
            for n in range(kj - l):
                engine = dlog_h(n, alpha)
                worst = max(worst, abs(engine - jl[n][n]))
                scale = max(scale, abs(jl[n][n]), mpf(1))
            acc.add(f"diag_flow_{l}", worst, scale)

            # (b) dressing factor against FD of the triangular factor
            if l in fd_flows:
                size = pipe.k + 1
                win = kj - l
                jl_minus = zeros(kj)
                for n in range(kj):
                    for m in range(n):
                        jl_minus[n][m] = jl[n][m]
                fd_residuals = []
                step = fd_step
                for _ in range(halvings + 1):
                    s_plus = pipe.flow_scaled(l, 1 + step).chol.s
                    s_minus = pipe.flow_scaled(l, 1 - step).chol.s
                    inv_2s = 1 / (2 * to_mpf(step))
                    ds = [
                        [(s_plus[i][j2] - s_minus[i][j2]) * inv_2s for j2 in range(size)]
                        for i in range(size)
                    ]
                    phi = mat_mul(ds, pipe.chol.s_inv)
                    worst = mpf(0)
                    scale = max(max_abs(jl_minus, win), mpf(1))
                    for n in range(win):
                        for m in range(n):
                            worst = max(worst, abs(phi[n][m] + jl_minus[n][m]))
                    fd_residuals.append(worst / scale)
                    step = step / 2
                for i, res in enumerate(fd_residuals):
                    acc.parts[f"phi_fd_{l}_step_{i}"] = mp.nstr(res, 8)
                acc.add(f"phi_fd_{l}", fd_residuals[-1], mpf(1))

            # (c) Lax equation entrywise on the interior window
            win = kj - (l + 2)
            jl_plus = zeros(kj)
            for n in range(kj):
                for m in range(n, kj):
                    jl_plus[n][m] = jl[n][m]
            lax_rhs = commutator(jl_plus, j)
            worst = mpf(0)
            scale = max(max_abs(lax_rhs, win), mpf(1))
            for n in range(win):
                for m in range(win):
                    if m == n:
                        engine = _dbeta_at(jets, n, up_alpha)
                    elif m == n - 1:
                        engine = _dgamma_at(pipe, jets, n, alpha)
                    else:
                        engine = mpf(0)
                    worst = max(worst, abs(engine - lax_rhs[n][m]))
            acc.add(f"lax_{l}", worst, scale)

        # (d) zero-curvature for the (1, 2) pair
        if 1 in flows and 2 in flows:
            win = kj - 4
            j2 = powers[2]
            j_plus = pipe.jac.j_plus()
            j2_plus = zeros(kj)
            for n in range(kj):
                for m in range(n, kj):
                    j2_plus[n][m] = j2[n][m]
            d1_j2_plus = zeros(kj)
            d2_j_plus = zeros(kj)
            for n in range(win + 1):
                db1 = _dbeta_at(jets, n, (2, 0, 0))
                d1_gamma_n = _dgamma_at(pipe, jets, n, (1, 0, 0)) if n >= 1 else mpf(0)
                d1_gamma_next = _dgamma_at(pipe, jets, n + 1, (1, 0, 0))
                d1_j2_plus[n][n] = 2 * pipe.jac.beta[n] * db1 + d1_gamma_n + d1_gamma_next
                d1_j2_plus[n][n + 1] = db1 + _dbeta_at(jets, n + 1, (2, 0, 0))
                d2_j_plus[n][n] = _dbeta_at(jets, n, (1, 1, 0))
            zs = mat_sub(
                mat_sub(d1_j2_plus, d2_j_plus),
                mat_scale(commutator(j2_plus, j_plus), -1),
            )
            worst = mpf(0)
            scale = max(max_abs(d1_j2_plus, win), mpf(1))
            for n in range(win):
                for m in range(win):
                    worst = max(worst, abs(zs[n][m]))
            acc.add("zero_curvature_12", worst, scale)

        return acc.result(
            "sato_wilson",
            tolerance,
            window=f"flows {flows}, matrix size {kj}",
            provenance=provenance,
        )


def pearson_toda_check(
    pipe: WeightPipeline,
    fd_step: Fraction,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """Compatibility of the structure matrix with the first flow: the four
    commutator equations, with matrix flow derivatives taken by central finite
    differences of the full pipeline and the dressing factors taken exactly."""
    w = pipe.weight
    if w.deformed:
        raise PreconditionError("Pearson/flow compatibility applies to undeformed weights")
    bits = pipe.bits
    kj = pipe.jac.size
    mdeg, ndeg = w.m_degree, w.n_degree
    win = kj - (ndeg + mdeg + 3)
    if win < 2:
        raise PreconditionError("truncation too small for the compatibility check")

    def matrices(p: WeightPipeline) -> dict:
        kjp = p.jac.size
        _, psi_dense, _, _ = p.psi(tolerance)
        with workprec(bits):
            h_inv = diag([1 / x for x in p.chol.h[:kjp]])
            a = mat_mul(psi_dense, h_inv)
            at = mat_mul(transpose(psi_dense), h_inv)
            eta_inv = 1 / to_mpf(p.weight.eta)
            return {
                "1a": mat_scale(at, eta_inv),
                "1b": a,
                "2a": at,
                "2b": mat_scale(a, eta_inv),
            }

    base = matrices(pipe)
    plus = matrices(pipe.flow_scaled(1, 1 + fd_step))
    minus = matrices(pipe.flow_scaled(1, 1 - fd_step))
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        effective_tol = max(Fraction(tolerance), 10 * fd_step * fd_step)
        inv_2s = 1 / (2 * to_mpf(fd_step))
        phi = mat_scale(pipe.jac.j_minus(), mpf(-1))
        j_plus = pipe.jac.j_plus()
        gauges = {"1a": phi, "1b": phi, "2a": j_plus, "2b": j_plus}
        h_floor = pipe.chol.h_floor()
        for name in ("1a", "1b", "2a", "2b"):
            dm = [
                [(plus[name][i][j2] - minus[name][i][j2]) * inv_2s for j2 in range(kj)]
                for i in range(kj)
            ]
            rhs = commutator(gauges[name], base[name])
            diff, scale = window_diff(dm, rhs, win)
            acc.add(f"compat_{name}", diff, max(scale, h_floor))
        return acc.result(
            "pearson_toda",
            effective_tol,
            window=f"leading {win} of {kj}; fd step 2^{fd_step.denominator.bit_length() - 1}",
            provenance=provenance,
        )


def kp_check(
    pipe: WeightPipeline,
    n_values: list[int],
    fd_step: Fraction,
    tolerance: Fraction,
    provenance: dict | None = None,
) -> CheckResult:
    """The KP relation for the subleading coefficient of a triply deformed
    weight, with every mixed derivative taken by the exact determinant engine
    and the second-flow second derivative witnessed by finite differences."""
    w = pipe.weight
    if not (abs(w.eta2) < 1 and abs(w.eta3) < 1):
        raise PreconditionError("KP check needs an active deformation with |eta2|, |eta3| < 1")
    bits = pipe.bits
    table = pipe.table
    needed = [(2, 0, 0), (3, 0, 0), (5, 0, 0), (2, 0, 1), (1, 2, 0)]
    with workprec(bits):
        acc = ResidualAccumulator(bits)
        for n in n_values:
            jet = log_tau_jet(table, n, needed)
            d1p = -jet[(2, 0, 0)]
            d11p = -jet[(3, 0, 0)]
            d1111p = -jet[(5, 0, 0)]
            d13p = -jet[(2, 0, 1)]
            d22p = -jet[(1, 2, 0)]
            # first-flow derivative of (4 d3 p + 6 (d1 p)^2 - d1^3 p) equals
            # 3 d2^2 p: the factor 3 is forced by the bilinear identity
            # (D1^4 - 4 D1 D3 + 3 D2^2) tau . tau = 0 in the log eta_l times
            lhs = 4 * d13p + 12 * d1p * d11p - d1111p
            scale = max(abs(4 * d13p), abs(12 * d1p * d11p), abs(d1111p), abs(3 * d22p), mpf(1))
            acc.add(f"kp[n={n}]", abs(lhs - 3 * d22p), scale)

            if n >= 1:
                def p_quantity(mult: Fraction, n=n):
                    scaled = pipe.flow_scaled(2, mult)
                    return -log_tau_jet(scaled.table, n, [(1, 0, 0)])[(1, 0, 0)]

                fd = fd_flow_derivative(p_quantity, fd_step, bits, order=2)
                acc.add(
                    f"fd_witness_d22p[n={n}]",
                    abs(fd - d22p),
                    max(abs(d22p), mpf(1)),
                )
        return acc.result(
            "kp",
            tolerance,
            window=f"n in {n_values}",
            provenance=provenance,
        )
