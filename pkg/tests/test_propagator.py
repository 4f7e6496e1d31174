"""Triangular recursion against independent oracles, and the estimate ledger."""

import math

import numpy as np
import pytest

from wickheat.chaos import (
    ChaosField,
    L2_X,
    SUP_T_L2,
    hermite_function,
    kondratiev_norm,
    white_noise_space,
    white_noise_time,
)
from wickheat.errors import DomainError, SequencingError, ValidationError
from wickheat.grids import GridFunction, GridSpec
from wickheat.multiindex import (
    MultiIndex,
    TruncationSet,
    ZERO,
    cp_sum,
    enumerate_truncation,
    unit,
)
from wickheat.pde import BoundEnvelope, OperatorSpec, solve_parabolic
from wickheat.propagator import (
    ProblemSpec,
    a_gamma,
    a_table,
    coefficient_bound,
    estkoefce_ledger,
    norm_bound_ocena,
    p_U_formula,
    propagate,
    tilde_force,
    wick_residual,
)

from oracles import block_triangular_solve, heat_gaussian

OP = OperatorSpec()


def empty_field(grid, trunc, time_dep=False):
    kind = SUP_T_L2 if time_dep else L2_X
    return ChaosField(grid, trunc, {}, space_norm_kind=kind)


def small_problem(nx=81, nt=41, K=2, P=2, with_noise=True, q_scale=0.5):
    grid = GridSpec(-10.0, 10.0, nx, 0.5, nt)
    trunc = enumerate_truncation(K, P)
    f_det = np.broadcast_to(np.exp(-grid.x**2), (grid.nt, grid.nx)).copy()
    F = ChaosField(grid, trunc, {ZERO: f_det}, space_norm_kind=SUP_T_L2)
    if with_noise:
        F = F + white_noise_time(
            grid, K, GridFunction(grid, np.exp(-grid.x**2 / 2)), trunc
        )
        G = white_noise_space(grid, K, trunc)
    else:
        G = empty_field(grid, trunc)
    q_coeffs = {ZERO: q_scale * np.exp(-grid.x**2 / 1.5)}
    for k in range(1, K + 1):
        q_coeffs[unit(k)] = q_scale * np.exp(-((grid.x - k / 10 + 0.25) ** 2) / 0.4)
    Qb = ChaosField(grid, trunc, q_coeffs, space_norm_kind=L2_X)
    return ProblemSpec(op=OP, grid=grid, F=F, G=G, Qb=Qb, truncation=trunc)


class TestTildeForce:
    def test_zeroth_passthrough(self):
        spec = small_problem()
        got = tilde_force(ZERO, spec.F, spec.Qb, {})
        assert np.array_equal(got, spec.F.coefficient(ZERO))

    def test_first_order_gaussian_potential(self):
        spec = small_problem()
        u0 = np.ones((spec.grid.nt, spec.grid.nx)) * 0.3
        got = tilde_force(unit(1), spec.F, spec.Qb, {ZERO: u0})
        want = spec.F.coefficient(unit(1)) - spec.Qb.coefficient(unit(1))[None, :] * u0
        assert np.allclose(got, want, atol=1e-15)

    def test_deterministic_potential_no_coupling(self):
        spec = small_problem()
        q_det = ChaosField(
            spec.grid, spec.truncation,
            {ZERO: spec.Qb.coefficient(ZERO)}, space_norm_kind=L2_X,
        )
        solved = {g: np.zeros((spec.grid.nt, spec.grid.nx)) for g in spec.truncation}
        for g in spec.truncation:
            got = tilde_force(g, spec.F, q_det, solved)
            assert np.array_equal(got, np.broadcast_to(
                spec.F.coefficient(g), (spec.grid.nt, spec.grid.nx)))

    def test_missing_prerequisite_raises(self):
        spec = small_problem()
        with pytest.raises(SequencingError):
            tilde_force(unit(1), spec.F, spec.Qb, {})


class TestPropagate:
    def test_no_potential_heat_evolution_per_mode(self):
        grid = GridSpec(-10.0, 10.0, 201, 0.25, 101)
        K = 3
        trunc = enumerate_truncation(K, 2)
        spec = ProblemSpec(
            op=OP, grid=grid,
            F=empty_field(grid, trunc, time_dep=True),
            G=white_noise_space(grid, K, trunc),
            Qb=empty_field(grid, trunc),
            truncation=trunc,
        )
        sol = propagate(spec)
        for k in range(1, K + 1):
            xi = hermite_function(k, grid.x)
            oracle = solve_parabolic(OP, None, None, xi, grid).values
            assert np.allclose(sol.U.coefficient(unit(k)), oracle, atol=1e-14)
        for g in trunc:
            if g.order != 1:
                assert np.all(sol.U.coefficient(g) == 0.0)

    def test_constant_potential_substitution_oracle(self):
        grid = GridSpec(-10.0, 10.0, 401, 0.25, 101)
        trunc = enumerate_truncation(1, 1)
        c = 0.9
        g0 = heat_gaussian(grid.x, 0.0)
        spec = ProblemSpec(
            op=OP, grid=grid,
            F=empty_field(grid, trunc, time_dep=True),
            G=ChaosField(grid, trunc, {ZERO: g0}, space_norm_kind=L2_X),
            Qb=ChaosField(grid, trunc, {ZERO: np.full(grid.nx, c)}, space_norm_kind=L2_X),
            truncation=trunc,
        )
        sol = propagate(spec)
        exact = math.exp(-c * grid.T) * heat_gaussian(grid.x, grid.T)
        err = grid.l2_x(sol.U.coefficient(ZERO)[-1] - exact)
        assert err < 2e-4
        assert np.all(sol.U.coefficient(unit(1)) == 0.0)

    def test_block_triangular_oracle_equivalence(self):
        grid = GridSpec(-5.0, 5.0, 21, 0.5, 11)
        trunc = enumerate_truncation(1, 2)  # {0, (1), (2)}
        rng = np.random.default_rng(8)
        F = ChaosField(
            grid, trunc,
            {ZERO: rng.normal(size=(grid.nt, grid.nx)),
             unit(1): rng.normal(size=(grid.nt, grid.nx))},
            space_norm_kind=SUP_T_L2,
        )
        G = ChaosField(
            grid, trunc,
            {ZERO: np.exp(-grid.x**2), unit(1): 0.5 * np.exp(-grid.x**2 / 2)},
            space_norm_kind=L2_X,
        )
        Qb = ChaosField(
            grid, trunc,
            {ZERO: 0.8 * np.exp(-grid.x**2), unit(1): 0.6 * np.exp(-grid.x**2 / 3)},
            space_norm_kind=L2_X,
        )
        spec = ProblemSpec(op=OP, grid=grid, F=F, G=G, Qb=Qb, truncation=trunc)
        sol = propagate(spec)
        oracle = block_triangular_solve(spec)
        for g in trunc:
            diff = np.max(np.abs(sol.U.coefficient(g) - oracle[g]))
            assert diff < 1e-10, f"gamma={g}: {diff}"

    def test_linearity_in_data(self):
        spec = small_problem(nx=41, nt=11)
        a, b = 1.3, -0.4
        sol1 = propagate(spec)
        spec2 = ProblemSpec(
            op=OP, grid=spec.grid,
            F=spec.F.scaled(a), G=spec.G.scaled(a),
            Qb=spec.Qb, truncation=spec.truncation,
        )
        sol2 = propagate(spec2)
        for g in spec.truncation:
            assert np.allclose(
                sol2.U.coefficient(g), a * sol1.U.coefficient(g), atol=1e-12
            )

    def test_agreement_across_truncations(self):
        # the coarse truncation is downward closed inside the fine one, so
        # shared coefficients agree exactly
        coarse = small_problem(nx=41, nt=11, K=2, P=2)
        fine = small_problem(nx=41, nt=11, K=3, P=3)
        sol_c = propagate(coarse)
        sol_f = propagate(fine)
        for g in coarse.truncation:
            assert np.array_equal(sol_c.U.coefficient(g), sol_f.U.coefficient(g))

    def test_worker_count_does_not_change_bits(self):
        spec = small_problem(nx=41, nt=11, K=2, P=3)
        sol1 = propagate(spec, workers=1)
        sol2 = propagate(spec, workers=4)
        for g in spec.truncation:
            assert np.array_equal(sol1.U.coefficient(g), sol2.U.coefficient(g))

    def test_residual_at_scheme_zero(self):
        spec = small_problem(nx=61, nt=21)
        sol = propagate(spec)
        assert wick_residual(sol, spec) < 1e-10

    def test_estkoefce_envelope_holds(self):
        spec = small_problem()
        sol = propagate(spec)
        led = estkoefce_ledger(sol, spec)
        tol = 10.0 * (spec.grid.dt**2 + spec.grid.dx**2)
        for g, rec in led.items():
            assert rec["min_slack"] >= -tol * max(rec["bound_T"], 1.0), f"gamma={g}"


class TestAGamma:
    def test_absent_everywhere_is_zero(self):
        spec = small_problem()
        far = MultiIndex((0, 0, 0, 5))
        assert a_gamma(far, spec.G, spec.F, 0.7) == 0.0

    def test_t_zero_keeps_initial_norm_only(self):
        spec = small_problem()
        g1 = unit(1)
        assert a_gamma(g1, spec.G, spec.F, 0.0) == pytest.approx(
            spec.G.coefficient_x_norm(g1)
        )

    def test_first_mode_value(self):
        spec = small_problem()
        g1 = unit(1)
        t = spec.grid.T
        want = spec.G.coefficient_x_norm(g1) + t * spec.F.coefficient_x_norm(g1)
        assert a_gamma(g1, spec.G, spec.F, t) == pytest.approx(want, rel=1e-12)
        # and the initial part is a normalized Hermite function, norm ~ 1
        assert spec.G.coefficient_x_norm(g1) == pytest.approx(1.0, abs=1e-6)


class TestCoefficientBound:
    def env(self, q_inf=0.0, T=0.5):
        return BoundEnvelope(M=1.0, w=0.0, q_inf=q_inf, T=T)

    def test_order_zero_is_m_times_a(self):
        spec = small_problem()
        table = a_table(spec.F, spec.G)
        env = self.env(q_inf=0.3)
        t = 0.4
        want = env.M_of(t) * a_gamma(ZERO, spec.G, spec.F, t)
        assert coefficient_bound(ZERO, t, env, 2.0, table) == pytest.approx(want)

    def test_zero_coupling_collapses_to_m_a(self):
        spec = small_problem()
        table = a_table(spec.F, spec.G)
        env = self.env()
        for g in spec.truncation:
            want = env.M_of(0.5) * a_gamma(g, spec.G, spec.F, 0.5)
            assert coefficient_bound(g, 0.5, env, 0.0, table) == pytest.approx(want)

    def test_inner_sum_counts_lower_indices(self):
        # for gamma = e1 + e2: k=1 admits beta in {0, e1, e2}; k=2 admits {0}
        spec = small_problem()
        table = a_table(spec.F, spec.G)
        env = self.env(q_inf=1.0)
        q = 2.0
        t = 0.5
        g = unit(1) + unit(2)
        a0 = a_gamma(ZERO, spec.G, spec.F, t)
        a1 = a_gamma(unit(1), spec.G, spec.F, t)
        a2 = a_gamma(unit(2), spec.G, spec.F, t)
        mq = env.Mtilde_of(t) * q
        want = env.M_of(t) * (
            a_gamma(g, spec.G, spec.F, t) + mq * (a0 + a1 + a2) + mq**2 * a0
        )
        assert coefficient_bound(g, t, env, q, table) == pytest.approx(want, rel=1e-12)


class TestPUFormula:
    def test_reference_case(self):
        assert p_U_formula(2, 1, 2, 0.0) == 9

    def test_worked_example_reduction(self):
        # with m = 2, p_F = 1, p_G = 2 the max reduces to max{8, 2(3+s)}
        for s in (0.0, 1.0, 2.7, 5.0):
            assert p_U_formula(2, 1, 2, s) == math.floor(max(8.0, 2 * (3 + s))) + 1

    def test_large_s_dominated_by_third_branch(self):
        vals = [p_U_formula(3, 1, 1, s) for s in (10.0, 20.0, 40.0)]
        assert vals == sorted(vals)
        assert vals[-1] == math.floor(3 * 43.0 / 2) + 1

    def test_m_must_exceed_one(self):
        with pytest.raises(ValidationError):
            p_U_formula(1, 1, 1, 0.0)


class TestNormBoundOcena:
    def cp(self, e):
        return cp_sum(e, TruncationSet(200, 20))

    def test_zero_data_zero_bound(self):
        env = BoundEnvelope(M=1.0, w=0.0, q_inf=0.5, T=0.5)
        assert norm_bound_ocena(12, 2, env, 0.0, 0.0, self.cp) == 0.0

    def test_monotone_non_increasing_in_p(self):
        env = BoundEnvelope(M=1.0, w=0.0, q_inf=0.5, T=0.5)
        vals = [norm_bound_ocena(p, 2, env, 1.0, 0.0, self.cp) for p in (9, 12, 16, 24)]
        assert all(v2 <= v1 for v1, v2 in zip(vals, vals[1:]))

    def test_exponent_domain(self):
        env = BoundEnvelope(M=1.0, w=0.0, q_inf=0.5, T=0.5)
        with pytest.raises(DomainError):
            norm_bound_ocena(6, 2, env, 1.0, 0.0, self.cp)   # e2 = p/2 - 2 = 1
        with pytest.raises(DomainError):
            norm_bound_ocena(9, 2, env, 1.0, 3.0, self.cp)   # e2 = -0.5

    def test_solution_norm_below_bound(self):
        spec = small_problem()
        sol = propagate(spec)
        env = sol.envelope
        q = sol.coupling_q
        from wickheat.vws import s_eps

        se = s_eps(env.Mtilde_of(env.T), q)
        p = p_U_formula(2, 1, 2, se)
        A = (
            kondratiev_norm(spec.G, 2) ** 2
            + spec.grid.T**2 * kondratiev_norm(spec.F, 1) ** 2
        )
        bound = norm_bound_ocena(p, 2, env, A, se, self.cp)
        assert kondratiev_norm(sol.U, p) ** 2 <= bound
