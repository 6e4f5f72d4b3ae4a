"""Baseline methods: subset enumeration, all-on beamforming, max-modulus
ordering."""

import numpy as np
import pytest

from rgsbeam import baselines, network, pipeline, sdp, stage3

from test_stage1 import tiny_scenario


@pytest.fixture(scope="module")
def small_instance():
    return network.generate_instance(tiny_scenario(), seed=11)


class TestExhaustiveSearch:
    def test_refuses_large_networks(self):
        spec = tiny_scenario(rrh_count=13)
        inst = network.generate_instance(spec, seed=0)
        with pytest.raises(ValueError, match="limit"):
            baselines.exhaustive_search(inst)

    def test_never_worse_than_pipeline(self, small_instance):
        res = pipeline.run_pipeline(small_instance)
        best = baselines.exhaustive_search(small_instance)
        assert best is not None
        assert best.network_power <= res.solution.network_power + 1e-6

    def test_single_rrh_network(self):
        """With one RRH the enumeration has a single candidate, so the
        result must coincide with keeping everything on."""
        spec = tiny_scenario(rrh_count=1, sinr_db_list=[0.0])
        inst = network.generate_instance(spec, seed=3)
        best = baselines.exhaustive_search(inst)
        coord = baselines.coordinated_beamforming(inst)
        assert best is not None and coord is not None
        assert best.active_set == frozenset({0})
        assert best.network_power == pytest.approx(
            coord.network_power, rel=1e-9
        )

    def test_vanishing_sinr_picks_cheapest_rrh(self):
        spec = tiny_scenario(
            sinr_db_list=[-30.0], fronthaul_power_watts=[1.0, 5.0, 9.0]
        )
        inst = network.generate_instance(spec, seed=5)
        best = baselines.exhaustive_search(inst)
        assert best.active_set == frozenset({0})
        assert best.network_power < 1.2

    def test_subset_log_covers_every_set(self, small_instance):
        log = []
        baselines.exhaustive_search(small_instance, subset_log=log)
        assert len(log) == 2 ** small_instance.L - 1
        for active, bound, power in log:
            if np.isfinite(power):
                assert power >= bound - 1e-6

    def test_monotone_pruning_same_optimum(self, small_instance):
        plain = baselines.exhaustive_search(small_instance)
        log = []
        pruned = baselines.exhaustive_search(
            small_instance, prune_monotone=True, subset_log=log
        )
        assert pruned.network_power == pytest.approx(
            plain.network_power, abs=1e-9
        )
        assert len(log) <= 2 ** small_instance.L - 1

    def test_infeasible_everywhere_returns_none(self):
        spec = tiny_scenario(sinr_db_list=[60.0], p_max_watts=1e-3)
        inst = network.generate_instance(spec, seed=0)
        assert baselines.exhaustive_search(inst) is None


class TestCoordinatedBeamforming:
    def test_keeps_all_rrhs(self, small_instance):
        sol = baselines.coordinated_beamforming(small_instance)
        assert sol is not None
        assert sol.active_set == frozenset(range(small_instance.L))
        sol.validate(small_instance)

    def test_power_meets_relaxation_bound(self, small_instance):
        sol = baselines.coordinated_beamforming(small_instance)
        sdr = stage3.solve_sdr(
            small_instance, frozenset(range(small_instance.L))
        )
        assert sol.network_power >= sdr.objective - 1e-6

    def test_infeasible_returns_none(self):
        spec = tiny_scenario(sinr_db_list=[60.0], p_max_watts=1e-3)
        inst = network.generate_instance(spec, seed=0)
        assert baselines.coordinated_beamforming(inst) is None


class TestLinfPipeline:
    def test_returns_valid_solution(self, small_instance):
        sol = baselines.linf_pipeline(small_instance)
        assert sol is not None
        sol.validate(small_instance)

    def test_repeat_run_identical(self, small_instance):
        first = baselines.linf_pipeline(small_instance)
        second = baselines.linf_pipeline(small_instance)
        assert np.array_equal(first.beamformers, second.beamformers)

    def test_infeasible_returns_none(self):
        spec = tiny_scenario(sinr_db_list=[60.0], p_max_watts=1e-3)
        inst = network.generate_instance(spec, seed=0)
        assert baselines.linf_pipeline(inst) is None


class TestSurrogateConfig:
    def test_small_problem_uses_dense_engine(self):
        problem = sdp.SdpProblem(
            matrix_vars=(("q0", 6), ("q1", 6)),
            scalar_vars=(("t", True),),
            lmi_constraints=(
                sdp.LmiConstraint(dim=7, constant=np.eye(7)),
            ),
        )
        cfg = baselines._surrogate_config(problem)
        assert cfg.engine == "ipm"

    def test_large_problem_relaxes_splitting(self):
        problem = sdp.SdpProblem(
            matrix_vars=tuple((f"q{m}", 40) for m in range(5)),
            lmi_constraints=tuple(
                sdp.LmiConstraint(dim=41, constant=np.eye(41))
                for _ in range(10)
            ),
        )
        cfg = baselines._surrogate_config(problem)
        assert cfg.engine == "splitting"
        assert cfg.tol_cone == pytest.approx(1e-4)
        assert cfg.max_iters == 20000
