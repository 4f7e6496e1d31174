"""Very-weak-solution driver: epsilon-net runs with moderateness,
negligibility-uniqueness, and consistency diagnostics.

All cross-epsilon norm comparisons happen at one fixed evaluation exponent
p: the per-epsilon exponent suggested by the existence proof diverges as
epsilon shrinks and would make the norms incomparable, so we take the
largest per-epsilon requirement plus a safety margin. Every inequality the
estimates assert is preserved by evaluating at a larger p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import ChaosField, kondratiev_norm, wick_product
from .errors import DomainError, NumericalError, ValidationError
from .grids import GridSpec
from .multiindex import TruncationSet, cp_sum
from .pde import OperatorSpec
from .propagator import (
    ProblemSpec,
    WeakSolution,
    norm_bound_ocena,
    p_U_formula,
    propagate,
)
from .regularize import (
    MollifierSpec,
    ModerationReport,
    SingularPotential,
    loglog_fit,
    moderateness_fit,
    mollify_grid_function,
    regularize_potential,
)

__all__ = [
    "ProblemData",
    "VeryWeakSolution",
    "NegligibilityReport",
    "ConsistencyReport",
    "s_eps",
    "very_weak_solve",
    "negligibility_check",
    "consistency_check",
    "decay_order_fit",
]

_CP_TRUNC = TruncationSet(400, 24)  # converged C-sum surrogate for bounds


def s_eps(Mtilde_T: float, q_eps: float) -> float:
    """s_eps = ln((Mtilde(T) q)^2)/ln 2 + 1 when (Mtilde(T) q)^2 > 1, else 0."""
    if Mtilde_T < 0 or q_eps < 0:
        raise ValidationError("inputs must be >= 0")
    r = (Mtilde_T * q_eps) ** 2
    if r <= 1.0:
        return 0.0
    return math.log(r) / math.log(2.0) + 1.0


@dataclass(frozen=True)
class ProblemData:
    """Everything of a solve except the potential."""

    op: OperatorSpec
    grid: GridSpec
    F: ChaosField
    G: ChaosField
    truncation: TruncationSet
    p_F: int = 1
    p_G: int = 2

    def with_potential(self, Qb: ChaosField) -> ProblemSpec:
        return ProblemSpec(
            op=self.op,
            grid=self.grid,
            F=self.F,
            G=self.G,
            Qb=Qb,
            truncation=self.truncation,
            p_F=self.p_F,
            p_G=self.p_G,
        )

    def A_constant(self) -> float:
        """A = |||G|||^2_{-p_G} + T^2 |||F|||^2_{-p_F} (truncated sums)."""
        return (
            kondratiev_norm(self.G, self.p_G) ** 2
            + self.grid.T**2 * kondratiev_norm(self.F, self.p_F) ** 2
        )


def decay_order_fit(eps_values, norms) -> tuple[float, float]:
    """Fitted n of norm ~ C eps^n (sign-flipped log-log slope) and its r^2."""
    eps = np.asarray(tuple(eps_values), dtype=float)
    ns = np.asarray(tuple(norms), dtype=float)
    if np.any(ns <= 0):
        return math.inf, 1.0
    slope, _, r2 = loglog_fit(np.log(1.0 / eps), np.log(ns))
    return -slope, r2


def _validate_eps(eps_values) -> tuple:
    eps = tuple(float(e) for e in eps_values)
    if len(eps) < 2:
        raise ValidationError("need at least 2 eps values")
    if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ValidationError("eps values must be strictly decreasing")
    if any(not 0 < e <= 1 for e in eps):
        raise DomainError("eps values must lie in (0, 1]")
    return eps


@dataclass(frozen=True)
class VeryWeakSolution:
    eps_values: tuple
    solutions: tuple            # WeakSolution per eps
    potentials: tuple           # regularized ChaosField per eps
    norms: tuple                # |||U_eps|||_{-p} at the fixed p
    moderation: ModerationReport
    p_used: int
    m_used: int
    s_eps_table: tuple
    q_eps_table: tuple          # sup_gamma ||q_{gamma, eps}||_inf
    M_eps_table: tuple          # M_eps(T)
    p_U_table: tuple
    p_eps_records: tuple        # both readings of the per-eps exponent

    def to_dict(self) -> dict:
        return {
            "eps": list(self.eps_values),
            "norm": list(self.norms),
            "p_used": self.p_used,
            "m_used": self.m_used,
            "s_eps": list(self.s_eps_table),
            "q_eps": list(self.q_eps_table),
            "M_eps_T": list(self.M_eps_table),
            "p_U_eps": list(self.p_U_table),
            "p_eps_records": [list(r) for r in self.p_eps_records],
            "moderation": self.moderation.to_dict(),
        }


def very_weak_solve(
    Q: SingularPotential,
    data: ProblemData,
    mollifier: MollifierSpec,
    eps_values,
    m: int = 2,
    p: int | None = None,
    workers: int = 1,
) -> VeryWeakSolution:
    """Regularize, solve, and measure the net over the epsilon grid.

    The moderation fit runs on |||U_eps|||_{-p} at the single fixed exponent
    p >= every per-epsilon requirement (default: their max plus 2).
    """
    eps = _validate_eps(eps_values)
    potentials, specs = [], []
    for e in eps:
        Qe = regularize_potential(Q, mollifier, e, data.grid, data.truncation)
        potentials.append(Qe)
        specs.append(data.with_potential(Qe))

    s_table, q_table, m_table, pu_table, p_records = [], [], [], [], []
    for e, spec in zip(eps, specs):
        env = spec.envelope()
        q_e = spec.coupling_q()
        se = s_eps(env.Mtilde_of(data.grid.T), q_e)
        pu = p_U_formula(m, data.p_F, data.p_G, se)
        # Two readings of the diverging per-eps exponent; we record both and
        # the fixed evaluation p dominates their max over the net.
        p_a = pu + m / (m - 1.0) / e
        p_b = m / (m - 1.0) * (se + 3.0 + 1.0 / e)
        s_table.append(se)
        q_table.append(q_e)
        m_table.append(env.M_of(data.grid.T))
        pu_table.append(pu)
        p_records.append((p_a, p_b, max(p_a, p_b)))

    p_used = int(max(pu_table) + 2) if p is None else int(p)
    if p_used < max(pu_table):
        raise ValidationError(
            f"evaluation exponent p={p_used} is below the per-eps requirement "
            f"{max(pu_table)}"
        )

    solutions, norms = [], []
    for e, spec in zip(eps, specs):
        try:
            sol = propagate(spec, workers=workers)
        except Exception as exc:
            raise NumericalError(f"solve failed at eps={e}") from exc
        solutions.append(sol)
        norms.append(kondratiev_norm(sol.U, p_used))

    moderation = moderateness_fit(eps, norms)
    return VeryWeakSolution(
        eps_values=eps,
        solutions=tuple(solutions),
        potentials=tuple(potentials),
        norms=tuple(norms),
        moderation=moderation,
        p_used=p_used,
        m_used=m,
        s_eps_table=tuple(s_table),
        q_eps_table=tuple(q_table),
        M_eps_table=tuple(m_table),
        p_U_table=tuple(pu_table),
        p_eps_records=tuple(p_records),
    )


@dataclass(frozen=True)
class NegligibilityReport:
    eps_values: tuple
    q_diff_norms: tuple       # sup_gamma ||q_eps - q~_eps||_inf per eps
    u_diff_norms: tuple       # |||U_eps - V_eps|||_{-p} per eps
    q_decay_order: float
    u_decay_order: float
    m_growth_order: float     # fitted growth order of M_eps(T)
    exact_zero: bool
    premise_negligible: bool  # q decay order >= n_min
    conclusion: str
    p_used: int
    n_min: float

    def to_dict(self) -> dict:
        return {
            "eps": list(self.eps_values),
            "q_diff_norm": list(self.q_diff_norms),
            "u_diff_norm": list(self.u_diff_norms),
            "q_decay_order": self.q_decay_order,
            "u_decay_order": self.u_decay_order,
            "m_growth_order": self.m_growth_order,
            "exact_zero": self.exact_zero,
            "premise_negligible": self.premise_negligible,
            "conclusion": self.conclusion,
            "p_used": self.p_used,
            "n_min": self.n_min,
        }


def negligibility_check(
    Q: SingularPotential,
    net1: MollifierSpec,
    net2: MollifierSpec,
    eps_values,
    data: ProblemData,
    m: int = 2,
    p: int | None = None,
    n_min: float = 3.0,
    workers: int = 1,
) -> NegligibilityReport:
    """Solve with both regularizing nets and fit the decay orders of the
    potential difference and the solution difference.

    The solution order is expected to lose the measured growth order of the
    stability factor against the potential order; genuinely different nets
    (no decay at all) are flagged as a premise violation instead of being
    read as a uniqueness statement.
    """
    eps = _validate_eps(eps_values)
    run1 = very_weak_solve(Q, data, net1, eps, m=m, workers=workers)
    run2 = very_weak_solve(Q, data, net2, eps, m=m, workers=workers)
    p_used = int(p) if p is not None else max(run1.p_used, run2.p_used)

    q_diffs, u_diffs = [], []
    for q1, q2, s1, s2 in zip(
        run1.potentials, run2.potentials, run1.solutions, run2.solutions
    ):
        q_diffs.append((q1 - q2).sup_norm())
        u_diffs.append(kondratiev_norm(s1.U - s2.U, p_used))

    exact_zero = max(q_diffs) == 0.0 and max(u_diffs) == 0.0
    if exact_zero:
        q_order = u_order = math.inf
    else:
        q_order, _ = decay_order_fit(eps, q_diffs)
        u_order, _ = decay_order_fit(eps, u_diffs)
    m_growth, _ = decay_order_fit(eps, run1.M_eps_table)
    m_growth = -m_growth  # growth order is the negated decay order

    premise_negligible = q_order >= n_min
    if exact_zero:
        conclusion = "identical-nets"
    elif q_order < 0.5:
        conclusion = "premise-violated"
    elif premise_negligible:
        conclusion = "negligible-difference"
    else:
        conclusion = "decaying-difference"
    return NegligibilityReport(
        eps_values=eps,
        q_diff_norms=tuple(q_diffs),
        u_diff_norms=tuple(u_diffs),
        q_decay_order=q_order,
        u_decay_order=u_order,
        m_growth_order=m_growth,
        exact_zero=exact_zero,
        premise_negligible=premise_negligible,
        conclusion=conclusion,
        p_used=p_used,
        n_min=n_min,
    )


@dataclass(frozen=True)
class ConsistencyReport:
    eps_values: tuple
    differences: tuple         # |||U_eps - V|||_{-p}
    envelopes: tuple           # upper envelope for the SQUARED difference norm
    monotone_flag: bool
    extrapolated_limit: float
    decay_order: float
    p_used: int

    def to_dict(self) -> dict:
        return {
            "eps": list(self.eps_values),
            "difference": list(self.differences),
            "envelope_squared": list(self.envelopes),
            "monotone": self.monotone_flag,
            "extrapolated_limit": self.extrapolated_limit,
            "decay_order": self.decay_order,
            "p_used": self.p_used,
        }


def consistency_check(
    Qb_smooth: ChaosField,
    mollifier: MollifierSpec,
    eps_values,
    data: ProblemData,
    p: int,
    m: int = 2,
    workers: int = 1,
) -> tuple[ConsistencyReport, WeakSolution]:
    """Compare the mollified-potential solutions U_eps against the weak
    solution V of the bounded problem; the difference norm should vanish
    with eps.

    Also evaluates, per eps, the computable envelope
    3 M_eps(T)^2 T^2 |||(Q - Q_eps) diamond V|||^2 (1 + 2 C C) that dominates
    the squared difference.
    """
    eps = _validate_eps(eps_values)
    if mollifier.perturb_scale:
        raise ValidationError("consistency check expects an unperturbed net")
    spec_v = data.with_potential(Qb_smooth)
    V = propagate(spec_v, workers=workers)

    grid = data.grid
    diffs, envs = [], []
    for e in eps:
        coeffs = {
            g: mollify_grid_function(arr, mollifier, e, grid)
            for g, arr in Qb_smooth.coeffs.items()
        }
        Qe = ChaosField(grid, data.truncation, coeffs, space_norm_kind=Qb_smooth.space_norm_kind)
        spec_e = data.with_potential(Qe)
        U_e = propagate(spec_e, workers=workers)
        diffs.append(kondratiev_norm(U_e.U - V.U, p))

        env = spec_e.envelope()
        se = s_eps(env.Mtilde_of(grid.T), spec_e.coupling_q())
        force = wick_product(Qb_smooth - Qe, V.U)
        # the difference problem has zero initial data, so its A constant is
        # T^2 |||(Q - Q_eps) diamond V|||^2
        a_diff = grid.T**2 * kondratiev_norm(force, p) ** 2
        env_val = (
            norm_bound_ocena(p, m, env, a_diff, se, lambda ex: cp_sum(ex, _CP_TRUNC))
            if a_diff
            else 0.0
        )
        envs.append(env_val)

    monotone = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    order, _ = decay_order_fit(eps, diffs)
    if math.isinf(order) or order > 0.2:
        extrapolated = 0.0
    else:
        extrapolated = diffs[-1]
    report = ConsistencyReport(
        eps_values=eps,
        differences=tuple(diffs),
        envelopes=tuple(envs),
        monotone_flag=monotone,
        extrapolated_limit=extrapolated,
        decay_order=order,
        p_used=int(p),
    )
    return report, V
