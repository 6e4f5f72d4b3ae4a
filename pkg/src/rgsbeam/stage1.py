"""Stage one: perturbed alternating optimization of the sparsity surrogate.

Alternates between a closed-form update of the simplex weights mu and an
SDP in the lifted covariances (Q, lambda) minimizing the weighted power
functional of :func:`rgsbeam.lmi.build_gs_objective` subject to the
robust QoS constraints and per-RRH budgets.  The objective trace it
produces drives the RRH ordering of stage two.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import lmi, sdp
from .hermitian import HermitianMatrix, project_psd

__all__ = [
    "SimplexWeights",
    "LiftedSolution",
    "Stage1Config",
    "InnerStatus",
    "InnerSolveResult",
    "AlternatingResult",
    "mu_update",
    "solve_inner_sdp",
    "run_alternating",
    "export_trace_csv",
]


@dataclass(frozen=True)
class SimplexWeights:
    """Positive per-RRH weights on the simplex, plus the perturbation eps."""

    mu: np.ndarray
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))

    def validate(self):
        if np.any(self.mu <= 0):
            raise ValueError("mu entries must be positive")
        if abs(self.mu.sum() - 1.0) > 1e-12:
            raise ValueError("mu must sum to 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        return self

    @staticmethod
    def uniform(count, eps):
        return SimplexWeights(np.full(count, 1.0 / count), eps).validate()


@dataclass
class LiftedSolution:
    """Lifted covariances and multipliers with the objective history.

    ``q`` holds one PSD HermitianMatrix per group (projected onto the
    cone at readout, so the PSD invariant holds exactly up to roundoff);
    ``objective_trace`` records the surrogate value after every inner
    solve and is non-increasing by construction.
    """

    q: tuple  # per-group HermitianMatrix
    lam: np.ndarray  # (K,) nonnegative
    objective_trace: tuple = ()
    sdp_solution: sdp.SdpSolution | None = None  # for warm starts

    def q_values(self):
        return {lmi.q_var_name(m): qm for m, qm in enumerate(self.q)}

    def validate(self):
        from .hermitian import min_eigenvalue

        for qm in self.q:
            if min_eigenvalue(qm) < -1e-8:
                raise ValueError("covariance block is not PSD")
        if np.any(self.lam < -1e-10):
            raise ValueError("QoS multipliers must be nonnegative")
        trace = self.objective_trace
        if any(b > a + 1e-7 for a, b in zip(trace, trace[1:])):
            raise ValueError("objective trace must be non-increasing")
        return self


class InnerStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    STALLED = "stalled"  # iteration cap; iterate quality not certified


@dataclass
class InnerSolveResult:
    status: InnerStatus
    lifted: LiftedSolution | None
    objective: float  # surrogate value including the eps constant


@dataclass(frozen=True)
class Stage1Config:
    """Knobs of the alternating loop (defaults follow the evaluation
    setup: perturbation 1e-3, absolute objective tolerance 1e-3, at most
    20 inner solves)."""

    eps: float = 1e-3
    tol: float = 1e-3
    max_iters: int = 20
    solver: sdp.SolverConfig = field(default_factory=sdp.SolverConfig)


def mu_update(lifted, inst, eps):
    """Closed-form minimizer of the surrogate over the weight simplex.

    mu_l is proportional to sqrt((P_l^c/eta_l) * sum_m (Tr(C_lm Q_m) +
    eps N)); Cauchy-Schwarz shows this is exact, no line search needed.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    w = inst.p_fronthaul / inst.eta
    scores = np.empty(inst.L)
    for l in range(inst.L):
        sl = inst.antenna_slice(l)
        block_trace = sum(
            float(np.real(np.trace(qm.array[sl, sl]))) for qm in lifted.q
        )
        scores[l] = w[l] * (max(block_trace, 0.0) + eps * inst.M * inst.N)
    root = np.sqrt(scores)
    return SimplexWeights(root / root.sum(), eps).validate()


def build_inner_problem(inst, weights):
    """The stage-one SDP: QoS LMIs, full-set budgets, surrogate objective.

    Returns (problem, objective) where objective carries the constant
    term excluded from solver data.
    """
    weights.validate()
    objective = lmi.build_gs_objective(inst, weights.mu, weights.eps)
    return (
        sdp.SdpProblem(
            matrix_vars=tuple((lmi.q_var_name(m), inst.N) for m in range(inst.M)),
            scalar_vars=tuple((lmi.lambda_var_name(k), True) for k in range(inst.K)),
            objective=objective.expr,
            lmi_constraints=tuple(
                lmi.build_qos_lmi(inst, k).to_constraint() for k in range(inst.K)
            ),
            ineq_constraints=tuple(
                lmi.build_power_constraints(inst, range(inst.L))
            ),
        ),
        objective,
    )


def _lifted_from_solution(inst, solution, trace=()):
    q = tuple(
        project_psd(solution.values[lmi.q_var_name(m)]) for m in range(inst.M)
    )
    lam = np.array(
        [max(float(solution.values[lmi.lambda_var_name(k)]), 0.0) for k in range(inst.K)]
    )
    return LiftedSolution(q=q, lam=lam, objective_trace=tuple(trace),
                          sdp_solution=solution)


def solve_inner_sdp(inst, weights, cfg=None, warm_start=None, factor_cache=None):
    """One inner minimization at fixed weights.

    The covariances are projected onto the PSD cone at readout and the
    reported objective is the surrogate evaluated analytically at the
    projected point, so trace bookkeeping stays consistent with what the
    caller can recompute.
    """
    cfg = cfg or sdp.SolverConfig()
    problem, objective = build_inner_problem(inst, weights)
    solution = sdp.solve(problem, cfg, warm_start=warm_start,
                         factor_cache=factor_cache)
    if solution.status is sdp.SolveStatus.INFEASIBLE:
        return InnerSolveResult(InnerStatus.INFEASIBLE, None, float("inf"))
    if solution.status is sdp.SolveStatus.MAX_ITERATIONS:
        lifted = _lifted_from_solution(inst, solution)
        return InnerSolveResult(
            InnerStatus.STALLED, lifted, objective.value(lifted.q_values())
        )
    lifted = _lifted_from_solution(inst, solution)
    return InnerSolveResult(
        InnerStatus.OPTIMAL, lifted, objective.value(lifted.q_values())
    )


@dataclass
class AlternatingResult:
    """Outcome of the alternating loop.

    ``lifted`` is None exactly when the problem is infeasible.
    ``converged`` reports whether the consecutive-difference rule fired
    before the iteration cap; ``warning`` carries degradation notes
    (e.g. an inner solve hit its iteration cap and the previous iterate
    was kept).
    """

    feasible: bool
    lifted: LiftedSolution | None
    weights: SimplexWeights | None
    converged: bool
    iterations: int
    warning: str | None = None

    @property
    def objective_trace(self):
        return self.lifted.objective_trace if self.lifted else ()


def run_alternating(inst, cfg=None, factor_cache=None):
    """Alternate inner SDP solves with closed-form weight updates.

    Starts from uniform weights; stops when the surrogate decreases by
    less than ``cfg.tol`` (absolute) between consecutive inner solves or
    after ``cfg.max_iters`` solves.  A candidate iterate is accepted only
    if it does not increase the surrogate at the current weights —
    solver noise can otherwise break the descent property that stage two
    relies on — so the recorded trace is monotone by construction.
    """
    cfg = cfg or Stage1Config()
    weights = SimplexWeights.uniform(inst.L, cfg.eps)
    factor_cache = factor_cache if factor_cache is not None else {}

    first = solve_inner_sdp(inst, weights, cfg.solver, factor_cache=factor_cache)
    if first.status is InnerStatus.INFEASIBLE:
        return AlternatingResult(
            feasible=False, lifted=None, weights=None, converged=False,
            iterations=1,
        )
    warning = None
    if first.status is InnerStatus.STALLED:
        warning = "inner solve 0 hit the iteration cap; iterate not certified"
    current = first.lifted
    trace = [first.objective]
    converged = False
    iterations = 1

    while iterations < cfg.max_iters:
        weights = mu_update(current, inst, cfg.eps)
        objective = lmi.build_gs_objective(inst, weights.mu, weights.eps)
        baseline = objective.value(current.q_values())
        step = solve_inner_sdp(
            inst, weights, cfg.solver,
            warm_start=current.sdp_solution, factor_cache=factor_cache,
        )
        iterations += 1
        if step.status is not InnerStatus.OPTIMAL:
            # Constraints do not depend on mu, so a mid-run infeasible or
            # stalled verdict is solver noise: keep the previous iterate
            # and stop rather than loop on an uncertifiable subproblem.
            what = ("reported infeasible"
                    if step.status is InnerStatus.INFEASIBLE
                    else "hit the iteration cap")
            warning = f"inner solve {iterations - 1} {what}; kept previous iterate"
            trace.append(baseline)
            break
        if step.objective <= baseline:
            current = step.lifted
            trace.append(step.objective)
        else:
            # reject the noisy step; the weights update alone still improves
            trace.append(baseline)
        if abs(trace[-2] - trace[-1]) < cfg.tol:
            converged = True
            break

    current = replace(current, objective_trace=tuple(trace))
    return AlternatingResult(
        feasible=True,
        lifted=current.validate(),
        weights=weights,
        converged=converged,
        iterations=iterations,
        warning=warning,
    )


def export_trace_csv(result, path):
    """Write the objective history as ``iteration,objective`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective"])
        for i, value in enumerate(result.objective_trace):
            writer.writerow([i, f"{value:.10f}"])
