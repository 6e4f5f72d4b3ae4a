"""Stage two: RRH ordering and binary search for the switch-off count.

Ranks RRHs by the trace readout of the stage-one covariances scaled by
channel gain and power prices, then bisects on how many of the
lowest-ranked RRHs can be switched off while a lifted feasibility
problem still admits a solution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import lmi, network, sdp

__all__ = [
    "RrhOrdering",
    "SearchProbe",
    "SearchResult",
    "compute_ordering",
    "phaselift_feasible",
    "binary_search_j0",
    "export_search_csv",
]


@dataclass(frozen=True)
class RrhOrdering:
    """Switch-off priorities: RRHs sorted by ascending theta.

    ``pi`` lists RRH indices from easiest to hardest to switch off, with
    index order breaking ties.  ``j0`` is the maximal number of leading
    entries of ``pi`` that can be turned off together, or None before
    the search has run.
    """

    theta: np.ndarray
    kappa: np.ndarray
    pi: tuple
    j0: int | None = None

    def off_set(self, count):
        return frozenset(self.pi[:count])

    def active_set(self, count_off):
        return frozenset(self.pi[count_off:])

    def validate(self):
        if np.any(self.theta < 0) or np.any(self.kappa < 0):
            raise ValueError("theta and kappa must be nonnegative")
        if sorted(self.pi) != list(range(len(self.theta))):
            raise ValueError("pi must be a permutation of the RRH indices")
        for a, b in zip(self.pi, self.pi[1:]):
            if (self.theta[a], a) > (self.theta[b], b):
                raise ValueError("pi must sort theta ascending with index ties")
        if self.j0 is not None and not 0 <= self.j0 <= len(self.theta):
            raise ValueError("j0 out of range")
        return self


def compute_ordering(inst, lifted):
    """Rank RRHs for switch-off from the stage-one covariances.

    theta_l = sqrt(kappa_l * eta_l / P_l^c) * sqrt(sum_m Tr(C_lm Q_m))
    where kappa_l aggregates the estimated channel energy seen at RRH l;
    a small theta_l marks a cheap-to-drop RRH.
    """
    kappa = np.empty(inst.L)
    theta = np.empty(inst.L)
    for l in range(inst.L):
        sl = inst.antenna_slice(l)
        kappa[l] = float(np.sum(np.abs(inst.h_hat[:, sl]) ** 2))
        block_trace = sum(
            float(np.real(np.trace(qm.array[sl, sl]))) for qm in lifted.q
        )
        theta[l] = math.sqrt(
            kappa[l] * inst.eta[l] / inst.p_fronthaul[l]
        ) * math.sqrt(max(block_trace, 0.0))
    pi = tuple(int(i) for i in np.argsort(theta, kind="stable"))
    return RrhOrdering(theta=theta, kappa=kappa, pi=pi).validate()


def phaselift_feasible(inst, active, cfg=None, factor_cache=None):
    """Lifted feasibility check for serving all users from ``active``.

    The instance is projected onto the active RRHs (an exact reduction:
    forcing whole blocks of the lifted variables to zero instead leaves
    the optimum on a face of the cone where the solver cannot certify
    a verdict) and a single-slack phase-I problem decides the verdict.
    Feasibility of this relaxation is necessary, not sufficient, for a
    rank-one beamformer to exist; stage three repairs rank.
    """
    active = frozenset(active)
    if not active:
        # all-zero beamformers cannot meet a positive SINR target; the
        # minimal phase-I slack is the largest gamma_k sigma_k^2
        slack = float(np.max(inst.gamma * inst.sigma2))
        return sdp.FeasibilityVerdict(
            sdp.Feasibility.INFEASIBLE, slack, sdp.SolveStatus.OPTIMAL
        )
    sub = network.restrict_to_active(inst, active)
    problem = sdp.SdpProblem(
        matrix_vars=tuple((lmi.q_var_name(m), sub.N) for m in range(sub.M)),
        scalar_vars=tuple((lmi.lambda_var_name(k), True) for k in range(sub.K)),
        objective=sdp.LinearExpr(),
        lmi_constraints=tuple(
            lmi.build_qos_lmi(sub, k).to_constraint() for k in range(sub.K)
        ),
        ineq_constraints=tuple(lmi.build_power_constraints(sub, range(sub.L))),
    )
    verdict = sdp.check_feasible(problem, cfg, factor_cache=factor_cache)
    if verdict.status is sdp.SolveStatus.MAX_ITERATIONS:
        # a stalled probe would read as infeasible; ask the other engine
        # before accepting that
        base = cfg or sdp.SolverConfig()
        other = replace(
            base, engine="splitting" if base.engine == "ipm" else "ipm"
        )
        verdict = sdp.check_feasible(problem, other, factor_cache=factor_cache)
    return verdict


@dataclass(frozen=True)
class SearchProbe:
    """One feasibility check of the search: switch off the first
    ``count_off`` RRHs in priority order."""

    count_off: int
    verdict: sdp.FeasibilityVerdict

    @property
    def is_feasible(self):
        return verdict_accepts(self.verdict)


def verdict_accepts(verdict):
    """Selection treats Marginal as Infeasible (conservative)."""
    return verdict.feasibility is sdp.Feasibility.FEASIBLE


@dataclass(frozen=True)
class SearchResult:
    feasible: bool  # False when even the full active set fails
    ordering: RrhOrdering  # with j0 set when feasible
    probes: tuple
    warning: str | None = None

    @property
    def check_count(self):
        return len(self.probes)

    def active_set(self):
        return self.ordering.active_set(self.ordering.j0)


def max_checks(rrh_count):
    """Exact probe budget of the search: 1 + ceil(log2(1 + L))."""
    return 1 + math.ceil(math.log2(1 + rrh_count))


def binary_search_j0(inst, ordering, feasibility=None, cfg=None,
                     factor_cache=None):
    """Largest prefix of the priority order that can be switched off.

    Bisects assuming feasibility is monotone in the number of active
    RRHs.  Because the check is a relaxation the assumption can fail;
    when the probe budget is not exhausted the first untested count
    above the bisection endpoint is audited, and a feasible answer there
    is taken (with a logged warning) since it is a direct witness.
    ``feasibility`` may replace the default PhaseLift probe in tests.
    """
    probe_fn = feasibility
    if probe_fn is None:
        def probe_fn(count_off):
            return phaselift_feasible(
                inst, ordering.active_set(count_off), cfg, factor_cache
            )

    L = inst.L
    budget = max_checks(L)
    probes = []

    def probe(count_off):
        verdict = probe_fn(count_off)
        probes.append(SearchProbe(count_off, verdict))
        return verdict_accepts(verdict)

    if not probe(0):
        return SearchResult(
            feasible=False, ordering=ordering, probes=tuple(probes),
            warning="serving all users with every RRH active is infeasible",
        )
    low, up = 0, L + 1  # up is a virtual always-infeasible sentinel
    while up - low > 1:
        mid = (low + up) // 2
        if probe(mid):
            low = mid
        else:
            up = mid

    j0 = low
    warning = None
    if len(probes) < budget and up + 1 <= L:
        # spare budget: audit one count the bisection never visited
        if probe(up + 1):
            warning = (
                f"feasibility is not monotone: off-count {up} failed but "
                f"{up + 1} passed; keeping the feasible endpoint"
            )
            j0 = up + 1

    if len(probes) > budget:
        raise AssertionError("probe budget exceeded")  # defends the bound
    return SearchResult(
        feasible=True,
        ordering=replace(ordering, j0=j0).validate(),
        probes=tuple(probes),
        warning=warning,
    )


def export_search_csv(result, path):
    """Write the probe transcript as ``count_off,verdict,slack`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["count_off", "verdict", "slack"])
        for probe in result.probes:
            writer.writerow([
                probe.count_off,
                probe.verdict.feasibility.value,
                f"{probe.verdict.slack:.6e}",
            ])
