"""Tests for the chained three-stage pipeline and its fallback policy."""

from types import SimpleNamespace

import numpy as np
import pytest

from rgsbeam import network, pipeline, sdp, stage1, stage2, stage3
from rgsbeam.hermitian import HermitianMatrix

from test_stage1 import tiny_scenario


@pytest.fixture(scope="module")
def run():
    inst = network.generate_instance(tiny_scenario(), seed=11)
    return inst, pipeline.run_pipeline(inst)


class TestRunPipeline:
    def test_feasible_and_validated(self, run):
        inst, res = run
        assert res.feasible
        res.solution.validate(inst)

    def test_relaxation_bound(self, run):
        """Recovered power can never undercut the final relaxation bound."""
        _, res = run
        assert res.solution.network_power >= res.sdr_objective - 1e-6

    def test_active_set_consistency(self, run):
        _, res = run
        assert res.active_set == res.solution.active_set
        assert res.recovery in ("eigen", "randomization")

    def test_stage_records_attached(self, run):
        inst, res = run
        assert res.stage1 is not None and res.stage1.feasible
        assert res.search is not None and res.search.feasible
        assert res.search.check_count <= stage2.max_checks(inst.L)

    def test_infeasible_instance_reported(self):
        spec = tiny_scenario(sinr_db_list=[60.0], p_max_watts=1e-3)
        inst = network.generate_instance(spec, seed=0)
        res = pipeline.run_pipeline(inst)
        assert not res.feasible
        assert res.solution is None
        assert res.active_set is None
        assert res.warning

    def test_repeat_run_identical(self, run):
        inst, res = run
        again = pipeline.run_pipeline(inst)
        assert again.solution.network_power == res.solution.network_power
        assert np.array_equal(
            again.solution.beamformers, res.solution.beamformers
        )


class TestRecoverSolution:
    def test_recovers_from_relaxation(self, run):
        inst, _ = run
        active = frozenset(range(inst.L))
        sdr = stage3.solve_sdr(inst, active)
        sol, how = pipeline.recover_solution(inst, active, sdr.lifted)
        assert sol is not None
        assert how in ("eigen", "randomization")
        assert sol.network_power >= sdr.objective - 1e-6

    def test_zero_covariances_unrecoverable(self, run):
        inst, _ = run
        zero = stage1.LiftedSolution(
            q=tuple(
                HermitianMatrix(np.zeros((inst.N, inst.N)))
                for _ in range(inst.M)
            ),
            lam=np.zeros(inst.K),
        )
        sol, how = pipeline.recover_solution(
            inst, frozenset(range(inst.L)), zero,
            stage3.RandomizationConfig(candidate_count=2),
        )
        assert sol is None and how is None


class TestCompleteFromOrdering:
    def test_matches_pipeline_tail(self, run):
        """Rerunning stages two and three from the recorded ordering
        reproduces the full pipeline's solution."""
        inst, res = run
        ordering = stage2.compute_ordering(inst, res.stage1.lifted)
        redo = pipeline.complete_from_ordering(inst, ordering)
        assert redo.feasible
        assert redo.active_set == res.active_set
        assert redo.solution.network_power == pytest.approx(
            res.solution.network_power, rel=1e-9
        )

    def test_walks_back_when_stage_three_fails(self, run, monkeypatch):
        inst, res = run
        ordering = stage2.compute_ordering(inst, res.stage1.lifted)
        j0 = res.search.ordering.j0
        if j0 == 0:
            pytest.skip("search already keeps every RRH on")
        blocked = ordering.active_set(j0)
        real = stage3.solve_sdr

        def flaky(inst_, active, **kwargs):
            if active == blocked:
                return SimpleNamespace(
                    status=sdp.SolveStatus.INFEASIBLE,
                    objective=float("inf"),
                    lifted=None,
                )
            return real(inst_, active, **kwargs)

        monkeypatch.setattr(pipeline.stage3, "solve_sdr", flaky)
        out = pipeline.complete_from_ordering(inst, ordering)
        assert out.feasible
        assert out.warning is not None and "fell back" in out.warning
        assert len(out.active_set) == inst.L - j0 + 1

    def test_search_infeasibility_short_circuits(self):
        spec = tiny_scenario(sinr_db_list=[60.0], p_max_watts=1e-3)
        inst = network.generate_instance(spec, seed=0)
        theta = np.arange(1.0, inst.L + 1)
        ordering = stage2.RrhOrdering(
            theta=theta, kappa=np.zeros(inst.L), pi=tuple(range(inst.L))
        ).validate()
        res = pipeline.complete_from_ordering(inst, ordering)
        assert not res.feasible
        assert res.search is not None and not res.search.feasible
