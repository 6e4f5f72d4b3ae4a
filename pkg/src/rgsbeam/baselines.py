"""Reference methods the pipeline is compared against.

All three return a :class:`~rgsbeam.network.BeamformingSolution`, or
None when the instance is infeasible for that method, so the experiment
harness can treat every method uniformly.
"""

from __future__ import annotations

import numpy as np

from . import lmi, pipeline, sdp, stage2, stage3
from .hermitian import project_psd

__all__ = [
    "MAX_EXHAUSTIVE_RRHS",
    "exhaustive_search",
    "coordinated_beamforming",
    "linf_pipeline",
]

#: 2^L relaxation solves stop being tractable quickly; refuse beyond this.
MAX_EXHAUSTIVE_RRHS = 12


def exhaustive_search(inst, randomization=None, factor_cache=None,
                      prune_monotone=False, subset_log=None):
    """Best recovered solution over every nonempty active subset.

    Enumerates subsets in ascending bitmask order (bit l = RRH l active)
    and keeps the feasible solution with the smallest network power,
    first-found winning ties.  A subset whose relaxation bound already
    meets or exceeds the incumbent's power is skipped without recovery —
    recovered power can never beat the subset's own lower bound.

    ``prune_monotone`` enumerates largest sets first instead and skips
    subsets of relaxation-infeasible sets (dropping an RRH never
    restores feasibility); off by default so every subset's verdict
    comes from its own solve.  ``subset_log``, if given, receives one
    (active_set, sdr_objective, recovered_power) triple per non-pruned
    subset.
    """
    if inst.L > MAX_EXHAUSTIVE_RRHS:
        raise ValueError(
            f"exhaustive search over {inst.L} RRHs would need "
            f"{2 ** inst.L} relaxation solves; limit is {MAX_EXHAUSTIVE_RRHS}"
        )
    best = None
    infeasible_masks = []
    masks = range(1, 2 ** inst.L)
    if prune_monotone:
        # supersets must come first for their verdicts to prune anything
        masks = sorted(masks, key=lambda m: (-bin(m).count("1"), m))
    for mask in masks:
        if prune_monotone and any(
            mask & bad == mask for bad in infeasible_masks
        ):
            continue
        active = frozenset(l for l in range(inst.L) if mask >> l & 1)
        sdr = stage3.solve_sdr(inst, active, factor_cache=factor_cache)
        if sdr.status is not sdp.SolveStatus.OPTIMAL:
            infeasible_masks.append(mask)
            if subset_log is not None:
                subset_log.append((active, float("inf"), float("inf")))
            continue
        if best is not None and sdr.objective >= best.network_power - 1e-9:
            if subset_log is not None:
                subset_log.append((active, sdr.objective, float("inf")))
            continue
        solution, _ = pipeline.recover_solution(
            inst, active, sdr.lifted, randomization, factor_cache
        )
        power = solution.network_power if solution else float("inf")
        if subset_log is not None:
            subset_log.append((active, sdr.objective, power))
        if solution is not None and (
            best is None or power < best.network_power
        ):
            best = solution
    return best


def coordinated_beamforming(inst, randomization=None, factor_cache=None):
    """Transmit-power minimization with every RRH kept active."""
    active = frozenset(range(inst.L))
    sdr = stage3.solve_sdr(inst, active, factor_cache=factor_cache)
    if sdr.status is not sdp.SolveStatus.OPTIMAL:
        return None
    solution, _ = pipeline.recover_solution(
        inst, active, sdr.lifted, randomization, factor_cache
    )
    return solution


def _surrogate_config(problem):
    """Solver settings sized to the max-modulus surrogate problem.

    The interior-point engine crushes these piecewise-linear objectives
    in a few dozen iterations, but its per-iteration cost grows with
    (columns^2 x cone rows); past a few Gflop per iteration, the
    splitting kernel at a tolerance loose enough for ranking RRH blocks
    is the faster route — only the ordering of the block scores feeds
    the next stage, not the objective digits.
    """
    columns = sum(n * (2 * n + 1) for _, n in problem.matrix_vars)
    columns += len(problem.scalar_vars)
    rows = sum(c.dim * (2 * c.dim + 1) for c in problem.lmi_constraints)
    rows += len(problem.ineq_constraints)
    rows += sum(1 for _, nonneg in problem.scalar_vars if nonneg)
    if columns * columns * rows <= 3e9:
        return sdp.SolverConfig(engine="ipm")
    return sdp.SolverConfig(
        tol_eq=1e-4, tol_cone=1e-4, tol_gap=1e-4, tol_dual=1e-3,
        max_iters=20000,
    )


def _linf_scores(inst, q_list):
    """Per-RRH max entry modulus over that RRH's block rows, all groups."""
    scores = np.empty(inst.L)
    for l in range(inst.L):
        sl = inst.antenna_slice(l)
        scores[l] = max(
            float(np.max(np.abs(qm.array[sl, :]))) for qm in q_list
        )
    return scores


def linf_pipeline(inst, randomization=None, factor_cache=None, segments=24):
    """Selection driven by a max-modulus surrogate instead of stage one.

    A single SDP minimizes the polyhedral over-approximation of the sum
    of per-RRH-pair max entry moduli of the covariances; RRHs whose
    blocks carry the smallest coefficients are switched off first.
    Stages two and three run unchanged from the resulting ordering.
    """
    epigraph = lmi.build_linf_objective(inst, segments)
    problem = sdp.SdpProblem(
        matrix_vars=tuple((lmi.q_var_name(m), inst.N) for m in range(inst.M)),
        scalar_vars=tuple(
            (lmi.lambda_var_name(k), True) for k in range(inst.K)
        ) + epigraph.scalar_vars,
        objective=epigraph.objective,
        lmi_constraints=tuple(
            lmi.build_qos_lmi(inst, k).to_constraint() for k in range(inst.K)
        ),
        ineq_constraints=tuple(lmi.build_power_constraints(inst, range(inst.L)))
        + epigraph.constraints,
    )
    solution = sdp.solve(problem, _surrogate_config(problem),
                         factor_cache=factor_cache)
    if solution.status in (sdp.SolveStatus.INFEASIBLE, sdp.SolveStatus.UNBOUNDED):
        return None
    q_list = [
        project_psd(solution.values[lmi.q_var_name(m)]) for m in range(inst.M)
    ]
    theta = _linf_scores(inst, q_list)
    ordering = stage2.RrhOrdering(
        theta=theta,
        kappa=np.zeros(inst.L),
        pi=tuple(int(i) for i in np.argsort(theta, kind="stable")),
    ).validate()
    result = pipeline.complete_from_ordering(
        inst, ordering, randomization=randomization, factor_cache=factor_cache
    )
    return result.solution
