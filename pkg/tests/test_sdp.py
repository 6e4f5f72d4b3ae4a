"""Solver validation: analytic optima, verdicts, invariants, dump format."""

import numpy as np
import pytest

import analytic_suite
from rgsbeam import sdp
from rgsbeam.hermitian import HermitianMatrix, embed_array, min_eigenvalue


@pytest.mark.parametrize("engine", ["splitting", "ipm"])
@pytest.mark.parametrize(
    "name,builder", analytic_suite.ANALYTIC_CASES, ids=lambda v: v if isinstance(v, str) else ""
)
def test_analytic_optimum(name, builder, engine):
    problem, expected = builder()
    sol = sdp.solve(problem, sdp.SolverConfig(engine=engine))
    assert sol.status is sdp.SolveStatus.OPTIMAL
    assert abs(sol.objective_value - expected) <= 1e-5 * max(1.0, abs(expected))
    assert sol.primal_residual <= 2e-6
    # the dual criterion is relative to the objective vector's norm
    assert sol.dual_residual <= 1e-5


def test_matrix_solution_is_hermitian_and_near_psd():
    problem, _ = analytic_suite.trace_pin()
    sol = sdp.solve(problem)
    x = sol.values["X"]
    assert isinstance(x, HermitianMatrix)
    assert np.array_equal(x.array, x.array.conj().T)
    assert min_eigenvalue(x) >= -2e-6


def test_infeasible_detection():
    sol = sdp.solve(analytic_suite.infeasible_gap())
    assert sol.status is sdp.SolveStatus.INFEASIBLE
    assert sol.objective_value == float("inf")
    assert sol.values == {}


def test_unbounded_detection():
    sol = sdp.solve(analytic_suite.unbounded_trace())
    assert sol.status is sdp.SolveStatus.UNBOUNDED
    assert sol.objective_value == float("-inf")


def test_determinism_bitwise():
    problem, _ = analytic_suite.lovasz_theta_c5()
    a = sdp.solve(problem)
    b = sdp.solve(problem)
    assert a.objective_value == b.objective_value
    assert a.iterations == b.iterations
    assert np.array_equal(a.values["X"].array, b.values["X"].array)


def test_warm_start_agrees_with_cold():
    problem, expected = analytic_suite.schur_hyperbola()
    cold = sdp.solve(problem)
    warm = sdp.solve(problem, warm_start=cold)
    assert warm.status is sdp.SolveStatus.OPTIMAL
    assert abs(warm.objective_value - expected) <= 1e-5
    assert warm.iterations <= cold.iterations


def test_factor_cache_reuse_is_transparent():
    problem, _ = analytic_suite.rank_one_direction()
    cache = {}
    first = sdp.solve(problem, factor_cache=cache)
    assert len(cache) == 1
    second = sdp.solve(problem, factor_cache=cache)
    assert second.objective_value == first.objective_value
    assert second.iterations == first.iterations


def test_complex_matches_manual_real_embedding():
    # A Hermitian problem and its hand-embedded real counterpart (trace
    # coefficients halved, dimensions doubled) must agree on the optimum.
    rng = np.random.default_rng(5)
    d = 3
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    c = a @ a.conj().T
    b_mat = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    b_mat = 0.5 * (b_mat + b_mat.conj().T)

    complex_problem = sdp.SdpProblem(
        matrix_vars=(("X", d),),
        objective=sdp.LinearExpr(matrix_terms=(("X", c),)),
        eq_constraints=(
            sdp.LinearExpr(matrix_terms=(("X", np.eye(d)),), constant=-1.0),
            sdp.LinearExpr(matrix_terms=(("X", b_mat),)),
        ),
    )
    real_problem = sdp.SdpProblem(
        matrix_vars=(("Y", 2 * d),),
        objective=sdp.LinearExpr(matrix_terms=(("Y", 0.5 * embed_array(c)),)),
        eq_constraints=(
            sdp.LinearExpr(
                matrix_terms=(("Y", 0.5 * embed_array(np.eye(d))),), constant=-1.0
            ),
            sdp.LinearExpr(matrix_terms=(("Y", 0.5 * embed_array(b_mat)),)),
        ),
    )
    sc = sdp.solve(complex_problem)
    sr = sdp.solve(real_problem)
    assert sc.status is sdp.SolveStatus.OPTIMAL
    assert sr.status is sdp.SolveStatus.OPTIMAL
    assert abs(sc.objective_value - sr.objective_value) <= 1e-6 * max(
        1.0, abs(sc.objective_value)
    )


class TestPhaseOne:
    def test_feasible_box(self):
        v = sdp.check_feasible(analytic_suite.feasible_box())
        assert v.feasibility is sdp.Feasibility.FEASIBLE
        assert v.slack <= 1e-5

    def test_infeasible_gap_slack(self):
        v = sdp.check_feasible(analytic_suite.infeasible_gap())
        assert v.feasibility is sdp.Feasibility.INFEASIBLE
        assert v.slack == pytest.approx(0.5, abs=1e-5)

    def test_infeasible_psd_trace_slack(self):
        v = sdp.check_feasible(analytic_suite.infeasible_psd_trace())
        assert v.feasibility is sdp.Feasibility.INFEASIBLE
        assert v.slack == pytest.approx(0.5, abs=1e-4)

    def test_marginal_band(self):
        v = sdp.check_feasible(analytic_suite.marginal_gap())
        assert v.feasibility is sdp.Feasibility.MARGINAL
        assert 1e-5 < v.slack <= 1e-4
        assert v.slack == pytest.approx(3e-5, abs=1e-5)

    def test_lmi_feasibility(self):
        # t = 5 satisfies t I - A >= 0 strictly, so the LMI problem with
        # t pinned to 5 is feasible; pinned to 1 it is not (needs t >= 3).
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        for t_val, expect in ((5.0, sdp.Feasibility.FEASIBLE),
                              (1.0, sdp.Feasibility.INFEASIBLE)):
            lmi = sdp.LmiConstraint(
                dim=2,
                constant=t_val * np.eye(2) - a,
            )
            problem = sdp.SdpProblem(lmi_constraints=(lmi,))
            v = sdp.check_feasible(problem)
            assert v.feasibility is expect

    def test_slack_monotone_under_added_constraints(self):
        base = analytic_suite.infeasible_gap()
        tightened = sdp.SdpProblem(
            scalar_vars=base.scalar_vars,
            objective=base.objective,
            ineq_constraints=base.ineq_constraints
            + (sdp.LinearExpr(scalar_terms=(("x", 1.0),), constant=-3.0),),
        )
        v0 = sdp.check_feasible(base)
        v1 = sdp.check_feasible(tightened)
        assert v1.slack >= v0.slack - 1e-6


class TestValidation:
    def test_duplicate_matrix_var(self):
        p = sdp.SdpProblem(matrix_vars=(("X", 2), ("X", 3)))
        with pytest.raises(sdp.SdpFormatError):
            p.validate()

    def test_unknown_variable_in_objective(self):
        p = sdp.SdpProblem(
            matrix_vars=(("X", 2),),
            objective=sdp.LinearExpr(matrix_terms=(("Y", np.eye(2)),)),
        )
        with pytest.raises(sdp.SdpFormatError):
            p.validate()

    def test_coefficient_dimension_mismatch(self):
        p = sdp.SdpProblem(
            matrix_vars=(("X", 3),),
            objective=sdp.LinearExpr(matrix_terms=(("X", np.eye(2)),)),
        )
        with pytest.raises(sdp.SdpFormatError):
            p.validate()

    def test_non_hermitian_coefficient_rejected(self):
        with pytest.raises(sdp.SdpFormatError):
            sdp.LinearExpr(matrix_terms=(("X", np.array([[0.0, 1.0], [0.0, 0.0]])),))

    def test_lmi_factor_shape_mismatch(self):
        lmi = sdp.LmiConstraint(
            dim=2,
            constant=np.zeros((2, 2)),
            matrix_terms=(sdp.CongruenceTerm("X", 1.0, np.ones((2, 3))),),
        )
        p = sdp.SdpProblem(matrix_vars=(("X", 2),), lmi_constraints=(lmi,))
        with pytest.raises(sdp.SdpFormatError):
            p.validate()

    def test_solve_validates(self):
        p = sdp.SdpProblem(matrix_vars=(("X", 0),))
        with pytest.raises(sdp.SdpFormatError):
            sdp.solve(p)


def random_cone_program(seed):
    """Random bounded, strictly feasible LMI program in nonneg scalars.

    min c'p  s.t.  sum_i p_i A_i >= B, p >= 0, with A_i strictly PD and
    c > 0 — feasible for large p, bounded below by zero.
    """
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    count = int(rng.integers(2, 5))
    terms = []
    costs = []
    for i in range(count):
        f = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        terms.append(sdp.ScalarMatrixTerm(f"p{i}", f @ f.conj().T + 0.1 * np.eye(d)))
        costs.append((f"p{i}", float(rng.uniform(0.5, 2.0))))
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    lmi = sdp.LmiConstraint(
        dim=d, constant=-(g @ g.conj().T), scalar_terms=tuple(terms)
    )
    return sdp.SdpProblem(
        scalar_vars=tuple((name, True) for name, _ in costs),
        objective=sdp.LinearExpr(scalar_terms=tuple(costs)),
        lmi_constraints=(lmi,),
    )


class TestDenseEngine:
    """The interior-point path must honor the same solver contract."""

    CFG = sdp.SolverConfig(engine="ipm")

    def test_infeasible_detection(self):
        sol = sdp.solve(analytic_suite.infeasible_gap(), self.CFG)
        assert sol.status is sdp.SolveStatus.INFEASIBLE
        assert sol.objective_value == float("inf")

    def test_infeasible_psd_detection(self):
        sol = sdp.solve(analytic_suite.infeasible_psd_trace(), self.CFG)
        assert sol.status is sdp.SolveStatus.INFEASIBLE

    def test_unbounded_detection(self):
        sol = sdp.solve(analytic_suite.unbounded_trace(), self.CFG)
        assert sol.status is sdp.SolveStatus.UNBOUNDED
        assert sol.objective_value == float("-inf")

    def test_determinism_bitwise(self):
        problem, _ = analytic_suite.lovasz_theta_c5()
        a = sdp.solve(problem, self.CFG)
        b = sdp.solve(problem, self.CFG)
        assert a.objective_value == b.objective_value
        assert a.iterations == b.iterations
        assert np.array_equal(a.values["X"].array, b.values["X"].array)

    def test_converges_in_few_iterations(self):
        problem, _ = analytic_suite.schur_hyperbola()
        sol = sdp.solve(problem, self.CFG)
        assert sol.status is sdp.SolveStatus.OPTIMAL
        assert sol.iterations < 50

    @pytest.mark.parametrize("seed", range(10))
    def test_agrees_with_splitting_kernel(self, seed):
        problem = random_cone_program(seed)
        a = sdp.solve(problem, sdp.SolverConfig(engine="splitting"))
        b = sdp.solve(problem, self.CFG)
        assert a.status is sdp.SolveStatus.OPTIMAL
        assert b.status is sdp.SolveStatus.OPTIMAL
        assert abs(a.objective_value - b.objective_value) <= 2e-5 * (
            1.0 + abs(a.objective_value)
        )

    def test_unknown_engine_rejected(self):
        problem, _ = analytic_suite.lp_scalar_bound()
        with pytest.raises(sdp.SdpFormatError):
            sdp.solve(problem, sdp.SolverConfig(engine="simplex"))


def test_dump_problem_roundtrips_key_content(tmp_path):
    problem, _ = analytic_suite.hermitian_lmi_mix()
    path = tmp_path / "problem.txt"
    sdp.dump_problem(problem, path)
    text = path.read_text().splitlines()
    assert text[0] == "SDP-DUMP 1"
    assert "scalar_vars 1" in text
    assert any(line.startswith("lmi 0 dim 2") for line in text)
    # the constant block of the LMI appears dense row-major with re/im pairs
    idx = text.index("constant")
    row0 = [float(tok) for tok in text[idx + 1].split()]
    assert row0 == [1.0, 0.0, 0.0, 2.0]  # entry (0,0)=1, (0,1)=2i


def test_expression_evaluate():
    expr = sdp.LinearExpr(
        matrix_terms=(("X", np.array([[1.0, 1.0j], [-1.0j, 0.0]])),),
        scalar_terms=(("t", 2.0),),
        constant=0.5,
    )
    x = np.array([[2.0, -3.0j], [3.0j, 1.0]])
    # tr(C X): C @ X = [[-1, -2i], [-2i, -3]], trace -4; plus 2*1.5 + 0.5
    got = expr.evaluate({"X": x, "t": 1.5})
    assert got == pytest.approx(-4.0 + 3.0 + 0.5, rel=1e-12)
