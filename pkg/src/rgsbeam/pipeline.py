"""End-to-end pipeline: sparsity stage, RRH selection, beamforming.

Chains the three stages on one instance and owns the fallback policy
between them: when the beamforming stage cannot certify a solution at
the selected switch-off level, the pipeline walks the level back toward
the full active set rather than failing the trial.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import network, sdp, stage1, stage2, stage3

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "recover_solution",
    "complete_from_ordering",
    "run_pipeline",
]


@dataclass(frozen=True)
class PipelineConfig:
    stage1: stage1.Stage1Config = field(default_factory=stage1.Stage1Config)
    randomization: stage3.RandomizationConfig = field(
        default_factory=stage3.RandomizationConfig
    )
    #: second randomization attempt size when the first pass finds no
    #: feasible candidate (rare; zero disables the retry)
    retry_candidates: int = 300


@dataclass
class PipelineResult:
    """Outcome of one pipeline run.

    ``sdr_objective`` is the relaxation bound at the final active set, a
    certified lower bound on any beamformer restricted to that set.
    ``recovery`` records how the beamformers were obtained ("eigen" for
    the direct rank-one readout, "randomization" otherwise).
    """

    feasible: bool
    solution: network.BeamformingSolution | None
    active_set: frozenset | None
    sdr_objective: float
    recovery: str | None
    stage1: stage1.AlternatingResult | None
    search: stage2.SearchResult | None
    warning: str | None = None


def _infeasible(stage1_result=None, search=None, warning=None):
    return PipelineResult(
        feasible=False,
        solution=None,
        active_set=None,
        sdr_objective=float("inf"),
        recovery=None,
        stage1=stage1_result,
        search=search,
        warning=warning,
    )


def recover_solution(inst, active, lifted, randomization=None, factor_cache=None,
                     retry_candidates=300):
    """Rank-one beamformers from relaxation covariances, or None.

    Tries the direct eigen readout first, then Gaussian randomization;
    a failed randomization pass is retried once with ``retry_candidates``
    draws (when larger than the first pass; zero disables the retry).
    """
    cfg = randomization or stage3.RandomizationConfig()
    direct = stage3.extract_rank_one(inst, active, lifted)
    if direct is not None:
        return direct, "eigen"
    attempts = [cfg]
    if cfg.candidate_count < retry_candidates:
        attempts.append(
            replace(cfg, candidate_count=retry_candidates, seed=cfg.seed + 1)
        )
    for attempt in attempts:
        try:
            sol = stage3.gaussian_randomize(
                inst, active, lifted, attempt, factor_cache=factor_cache
            )
        except stage3.AllCandidatesInfeasible:
            continue
        return sol, "randomization"
    return None, None


def complete_from_ordering(inst, ordering, stage1_result=None,
                           randomization=None, factor_cache=None,
                           retry_candidates=300):
    """Stages two and three given a switch-off priority order.

    Runs the bisection for the switch-off count, then solves the
    transmit-power problem on the surviving RRHs and recovers
    beamformers.  If the relaxation turns out infeasible at the chosen
    level or recovery fails, one fewer RRH is switched off and the stage
    repeats; level 0 (all RRHs on) is the last resort.
    """
    search = stage2.binary_search_j0(inst, ordering, factor_cache=factor_cache)
    if not search.feasible:
        return _infeasible(stage1_result, search,
                           warning="full active set is infeasible")
    warning = search.warning
    count_off = search.ordering.j0
    while count_off >= 0:
        active = search.ordering.active_set(count_off)
        sdr = stage3.solve_sdr(inst, active, factor_cache=factor_cache)
        if sdr.status is sdp.SolveStatus.OPTIMAL:
            solution, how = recover_solution(
                inst, active, sdr.lifted, randomization, factor_cache,
                retry_candidates,
            )
            if solution is not None:
                return PipelineResult(
                    feasible=True,
                    solution=solution,
                    active_set=active,
                    sdr_objective=sdr.objective,
                    recovery=how,
                    stage1=stage1_result,
                    search=search,
                    warning=warning,
                )
        count_off -= 1
        warning = f"stage three fell back to switching off {count_off} RRHs"
    return _infeasible(stage1_result, search,
                       warning="beamformer recovery failed at every level")


def run_pipeline(inst, cfg=None, factor_cache=None):
    """Full three-stage run on one instance."""
    cfg = cfg or PipelineConfig()
    alt = stage1.run_alternating(inst, cfg.stage1, factor_cache=factor_cache)
    if not alt.feasible:
        return _infeasible(alt, warning="sparsity stage found no feasible point")
    ordering = stage2.compute_ordering(inst, alt.lifted)
    return complete_from_ordering(
        inst,
        ordering,
        stage1_result=alt,
        randomization=cfg.randomization,
        factor_cache=factor_cache,
        retry_candidates=cfg.retry_candidates,
    )
