"""Stage three: transmit-power minimization on the selected active set.

Solves the lifted relaxation, recovers rank-one beamformers either
directly or by Gaussian randomization with an exact power-rescaling
step, and certifies every returned solution with worst-case QoS margins
computed by a trust-region subproblem.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import lmi, network, sdp
from .hermitian import HermitianMatrix, embed_array, project_psd
from .lmi import _inv_sqrt_psd
from .stage1 import LiftedSolution

__all__ = [
    "RandomizationConfig",
    "SdrResult",
    "AllCandidatesInfeasible",
    "solve_sdr",
    "extract_rank_one",
    "gaussian_randomize",
    "worst_case_margin",
    "solution_to_csv",
]

#: Acceptance threshold on certified worst-case QoS margins.
MARGIN_FLOOR = -1e-6


class AllCandidatesInfeasible(RuntimeError):
    """No randomization candidate admitted a feasible power rescaling."""


@dataclass(frozen=True)
class RandomizationConfig:
    """Gaussian randomization knobs.

    ``scaling_tol`` bounds the cone violation of the per-candidate
    rescaling SDP; margins inherit roughly twice that, so the default
    keeps certified solutions well inside the -1e-6 acceptance floor.
    """

    candidate_count: int = 100
    scaling_tol: float = 1e-7
    seed: int = 0

    def validate(self):
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be at least 1")
        if not self.scaling_tol > 0:
            raise ValueError("scaling_tol must be positive")
        return self

    def solver_config(self):
        # The per-candidate programs are tiny but their rank-one data
        # gives the splitting kernel a very slow tail; the dense engine
        # solves them in a few milliseconds.
        return sdp.SolverConfig(
            tol_cone=self.scaling_tol,
            tol_eq=self.scaling_tol,
            tol_gap=1e-6,
            tol_dual=1e-5,
            engine="ipm",
        )


def _active_columns(inst, active):
    """Full-coordinate antenna indices of the active RRHs, sorted."""
    return np.concatenate(
        [np.arange(inst.N)[inst.antenna_slice(l)] for l in sorted(active)]
    )


@dataclass
class SdrResult:
    status: sdp.SolveStatus
    lifted: LiftedSolution | None  # covariances embedded at full size
    objective: float  # network power of the relaxation (incl. fronthaul)


def solve_sdr(inst, active, cfg=None, factor_cache=None):
    """Minimum-network-power relaxation over the active RRHs.

    Works on the projected instance (exact for the worst-case QoS
    constraints) and re-embeds the covariances at full size with zero
    rows on inactive antennas.  The reported objective includes the
    fronthaul constant of the active set.
    """
    active = frozenset(active)
    cfg = cfg or sdp.SolverConfig()
    sub = network.restrict_to_active(inst, active)
    weights = np.concatenate(
        [np.full(sub.antennas[l], 1.0 / sub.eta[l]) for l in range(sub.L)]
    )
    constant = float(sum(inst.p_fronthaul[l] for l in active))
    objective = sdp.LinearExpr(
        matrix_terms=tuple(
            (lmi.q_var_name(m), np.diag(weights).astype(complex))
            for m in range(sub.M)
        ),
        constant=constant,
    )
    problem = sdp.SdpProblem(
        matrix_vars=tuple((lmi.q_var_name(m), sub.N) for m in range(sub.M)),
        scalar_vars=tuple((lmi.lambda_var_name(k), True) for k in range(sub.K)),
        objective=objective,
        lmi_constraints=tuple(
            lmi.build_qos_lmi(sub, k).to_constraint() for k in range(sub.K)
        ),
        ineq_constraints=tuple(lmi.build_power_constraints(sub, range(sub.L))),
    )
    solution = sdp.solve(problem, cfg, factor_cache=factor_cache)
    if solution.status is sdp.SolveStatus.MAX_ITERATIONS:
        # badly scaled targets can leave the splitting iteration creeping;
        # give the other engine a chance at a definitive verdict
        other = replace(
            cfg, engine="splitting" if cfg.engine == "ipm" else "ipm"
        )
        retry = sdp.solve(problem, other, factor_cache=factor_cache)
        if retry.status is not sdp.SolveStatus.MAX_ITERATIONS:
            solution = retry
    if solution.status in (sdp.SolveStatus.INFEASIBLE, sdp.SolveStatus.UNBOUNDED):
        return SdrResult(solution.status, None, float("inf"))

    cols = _active_columns(inst, active)
    q_full = []
    for m in range(sub.M):
        q_sub = project_psd(solution.values[lmi.q_var_name(m)]).array
        arr = np.zeros((inst.N, inst.N), dtype=complex)
        arr[np.ix_(cols, cols)] = q_sub
        q_full.append(HermitianMatrix(arr))
    lam = np.array(
        [max(float(solution.values[lmi.lambda_var_name(k)]), 0.0)
         for k in range(sub.K)]
    )
    transmit = sum(
        float(np.real(np.trace(np.diag(weights) @ qm.array[np.ix_(cols, cols)])))
        for qm in q_full
    )
    lifted = LiftedSolution(q=tuple(q_full), lam=lam, sdp_solution=solution)
    return SdrResult(solution.status, lifted, transmit + constant)


# ---------------------------------------------------------------------------
# worst-case QoS margin via the trust-region subproblem
# ---------------------------------------------------------------------------


def _trs_minimum(a, b, c, tol=1e-9):
    """Exact minimum of x'Ax + 2b'x + c over the real unit ball.

    Dual 1-D search on the multiplier nu: after eigendecomposition the
    boundary condition ||-(A + nu I)^{-1} b|| = 1 is monotone in nu on
    (max(0, -d_min), inf).  The hard case — gradient orthogonal to the
    bottom eigenspace — is completed with a bottom-eigenvector component.
    """
    d, basis = np.linalg.eigh(a)
    g = basis.T @ b
    scale = max(1.0, float(np.max(np.abs(d))), float(np.linalg.norm(g)))
    tiny = 1e-13 * scale
    lo = max(0.0, -float(d[0]))

    def coeffs(nu):
        """Minimizer coordinates, and whether the norm is really infinite
        (zero denominator against a nonzero gradient coordinate)."""
        denom = d + nu
        ok = denom > tiny
        out = np.zeros_like(g)
        out[ok] = -g[ok] / denom[ok]
        return out, bool(np.any(~ok & (np.abs(g) > tiny)))

    def value(x):
        return float(x @ (d * x) + 2.0 * (g @ x) + c)

    x0, blown = coeffs(lo)
    n0 = float(np.linalg.norm(x0))
    if not blown and n0 <= 1.0:
        if lo == 0.0:
            return value(x0)  # interior minimizer of a convex model
        # hard case: pad along the bottom eigen-coordinate to the boundary
        x0[0] += math.sqrt(max(1.0 - n0 * n0, 0.0))
        return value(x0)

    hi = lo + float(np.linalg.norm(g)) + 1.0
    while True:
        x_hi, blown_hi = coeffs(hi)
        if not blown_hi and np.linalg.norm(x_hi) <= 1.0:
            break
        hi = lo + 2.0 * (hi - lo)
    left = lo
    for _ in range(200):
        mid = 0.5 * (left + hi)
        if mid <= left or mid >= hi:
            break
        x_mid, blown_mid = coeffs(mid)
        if blown_mid or np.linalg.norm(x_mid) > 1.0:
            left = mid
        else:
            hi = mid
        if hi - left <= 1e-4 * tol * max(1.0, hi):
            break
    x, _ = coeffs(hi)
    return value(x)


def _margin_quadratic(inst, v, k):
    """Real-embedded (A, b, c) of the worst-case quadratic for user k."""
    beams = v.beamformers if isinstance(v, network.BeamformingSolution) else v
    beams = np.asarray(beams, dtype=complex)
    m = inst.group_of(k)
    gmat = np.zeros((inst.N, inst.N), dtype=complex)
    for i in range(inst.M):
        coeff = 1.0 if i == m else -float(inst.gamma[k])
        gmat += coeff * np.outer(beams[i], beams[i].conj())
    root = _inv_sqrt_psd(np.asarray(inst.theta[k]))
    h = inst.h_hat[k]
    a_tilde = root @ gmat @ root
    b_tilde = root @ (gmat @ h)
    c = float(np.real(h.conj() @ gmat @ h))
    return embed_array(a_tilde), np.concatenate([b_tilde.real, b_tilde.imag]), c


def worst_case_margin(inst, v, k):
    """Certified QoS slack of user k under the worst ellipsoid error.

    Returns min over the error ball of the received quadratic minus the
    target gamma_k sigma_k^2; nonnegative means the robust constraint
    holds for this user.
    """
    a, b, c = _margin_quadratic(inst, v, k)
    quad_min = _trs_minimum(a, b, c)
    return quad_min - float(inst.gamma[k] * inst.sigma2[k])


# ---------------------------------------------------------------------------
# solution assembly
# ---------------------------------------------------------------------------


def _assemble(inst, active, beams, margins):
    active = frozenset(active)
    inactive = frozenset(range(inst.L)) - active
    power = sum(
        inst.p_fronthaul[l]
        + float(np.sum(np.abs(beams[:, inst.antenna_slice(l)]) ** 2)) / inst.eta[l]
        for l in sorted(active)
    )
    return network.BeamformingSolution(
        beamformers=beams,
        active_set=active,
        inactive_set=inactive,
        network_power=float(power),
        per_user_margin=np.asarray(margins, dtype=float),
    ).validate(inst)


def _certify(inst, active, beams):
    """Margins for candidate beamformers, with a uniform power repair.

    If some margin dips below the acceptance floor, all beamformers are
    scaled up together — margins are affine in the common power factor —
    provided no transmit budget would be exceeded.  Returns a validated
    solution or None.
    """
    margins = np.array(
        [worst_case_margin(inst, beams, k) for k in range(inst.K)]
    )
    if margins.min() >= MARGIN_FLOOR:
        return _assemble(inst, active, beams, margins)

    targets = inst.gamma * inst.sigma2
    quad = margins + targets  # worst-case received quadratic, per user
    if np.any(quad <= 0.0):
        return None
    factor = float(np.max(targets / quad))
    scaled = beams * math.sqrt(factor)
    for l in active:
        power = float(np.sum(np.abs(scaled[:, inst.antenna_slice(l)]) ** 2))
        if power > inst.p_max[l] + 1e-9:
            return None
    margins = factor * quad - targets
    return _assemble(inst, active, scaled, margins)


def extract_rank_one(inst, active, lifted, tol_ratio=1e-6):
    """Direct beamformer readout when every covariance is rank one.

    Declares success when the second eigenvalue is at most ``tol_ratio``
    times the first for every group, fixes the global phase so the
    largest-modulus entry is real nonnegative, and certifies worst-case
    margins (repairing marginal dips by a uniform power scale).  Returns
    None when randomization is required.
    """
    active = frozenset(active)
    cols = _active_columns(inst, active)
    beams = np.zeros((inst.M, inst.N), dtype=complex)
    for m, qm in enumerate(lifted.q):
        # decompose only the active sub-block: rounding in a full-size
        # eigh can smear infinitesimal weight onto the zeroed antennas,
        # and inactive RRHs must carry exactly zero power
        w, vecs = np.linalg.eigh(qm.array[np.ix_(cols, cols)])
        if w[-1] <= 0.0:
            continue  # zero covariance: zero beamformer
        if len(w) > 1 and w[-2] > tol_ratio * w[-1]:
            return None
        vec = math.sqrt(w[-1]) * vecs[:, -1]
        pivot = int(np.argmax(np.abs(vec)))
        phase = np.angle(vec[pivot])
        beams[m, cols] = vec * np.exp(-1j * phase)
    return _certify(inst, active, beams)


# ---------------------------------------------------------------------------
# Gaussian randomization
# ---------------------------------------------------------------------------


def _is_spherical(theta):
    theta = np.asarray(theta)
    t = float(theta[0, 0].real)
    return bool(
        np.allclose(theta, t * np.eye(theta.shape[0]), rtol=0,
                    atol=1e-12 * max(t, 1.0))
    )


def _p_var(m):
    return f"p{m}"


def _rescale_problem(sub, w_list):
    """Power-rescaling SDP for fixed directions w_m (reduced coords).

    Substituting Q_m = p_m w_m w_m^H makes every QoS block affine in the
    nonnegative scalars p_m.  For spherical uncertainty the block is
    compressed exactly onto span{w_m} — on the orthogonal complement it
    reduces to lambda_k >= 0, already a variable cone — which caps the
    LMI dimension at M+1 regardless of the antenna count.
    """
    spherical = all(_is_spherical(sub.theta[k]) for k in range(sub.K))
    lmis = []
    if spherical:
        stack = np.stack(w_list, axis=1)
        u_basis, svals, _ = np.linalg.svd(stack, full_matrices=False)
        rank = max(int(np.sum(svals > 1e-12 * max(svals[0], 1.0))), 1)
        basis = u_basis[:, :rank]
        reduced = basis.conj().T @ stack  # (rank, M)
        for k in range(sub.K):
            gamma = float(sub.gamma[k])
            scale = 1.0 / math.sqrt(float(sub.theta[k][0, 0].real))
            beta = np.array([w.conj() @ sub.h_hat[k] for w in w_list])
            dim = rank + 1
            terms = []
            for m in range(sub.M):
                coeff = 1.0 if m == sub.group_of(k) else -gamma
                vec = np.concatenate(
                    [scale * reduced[:, m], [np.conj(beta[m])]]
                )
                terms.append(sdp.ScalarMatrixTerm(
                    _p_var(m), coeff * np.outer(vec, vec.conj())
                ))
            lam_mat = np.eye(dim)
            lam_mat[-1, -1] = -1.0
            terms.append(sdp.ScalarMatrixTerm(lmi.lambda_var_name(k), lam_mat))
            constant = np.zeros((dim, dim))
            constant[-1, -1] = -gamma * float(sub.sigma2[k])
            lmis.append(sdp.LmiConstraint(
                dim=dim, constant=constant, scalar_terms=tuple(terms),
                label=f"rescale_qos_{k}",
            ))
    else:
        for k in range(sub.K):
            block = lmi.build_qos_lmi(sub, k)
            constant, lam_mat, per_p = block.fixed_direction_matrices(
                [np.outer(w, w.conj()) for w in w_list]
            )
            terms = [
                sdp.ScalarMatrixTerm(_p_var(m), mat)
                for m, mat in enumerate(per_p)
            ]
            terms.append(sdp.ScalarMatrixTerm(lmi.lambda_var_name(k), lam_mat))
            lmis.append(sdp.LmiConstraint(
                dim=block.dim, constant=constant, scalar_terms=tuple(terms),
                label=f"rescale_qos_{k}",
            ))

    gains = np.array([
        [float(np.sum(np.abs(w[sub.antenna_slice(l)]) ** 2)) for w in w_list]
        for l in range(sub.L)
    ])  # (L, M)
    ineqs = tuple(
        sdp.LinearExpr(
            scalar_terms=tuple(
                (_p_var(m), -gains[l, m]) for m in range(sub.M)
            ),
            constant=float(sub.p_max[l]),
        )
        for l in range(sub.L)
    )
    objective = sdp.LinearExpr(
        scalar_terms=tuple(
            (_p_var(m), float(np.sum(gains[:, m] / sub.eta)))
            for m in range(sub.M)
        ),
    )
    names = [_p_var(m) for m in range(sub.M)]
    names += [lmi.lambda_var_name(k) for k in range(sub.K)]
    return sdp.SdpProblem(
        matrix_vars=(),
        scalar_vars=tuple((n, True) for n in names),
        objective=objective,
        lmi_constraints=tuple(lmis),
        ineq_constraints=ineqs,
    )


def gaussian_randomize(inst, active, lifted, cfg=None, factor_cache=None):
    """Randomized rank-one recovery from the relaxation covariances.

    Draws ``candidate_count`` joint samples w_m from the covariances,
    solves the exact power-rescaling SDP for each, keeps the feasible
    candidate with the smallest network power (ties broken by draw
    index), and certifies the winner's worst-case margins.  Raises
    AllCandidatesInfeasible when nothing passes.
    """
    cfg = (cfg or RandomizationConfig()).validate()
    active = frozenset(active)
    sub = network.restrict_to_active(inst, active)
    cols = _active_columns(inst, active)

    factors = []
    for qm in lifted.q:
        block = qm.array[np.ix_(cols, cols)]
        w, vecs = np.linalg.eigh(block)
        keep = w > max(w[-1], 0.0) * 1e-14
        factors.append(vecs[:, keep] * np.sqrt(np.clip(w[keep], 0.0, None)))

    rng = np.random.default_rng(cfg.seed)
    solver_cfg = cfg.solver_config()
    ranked = []
    for t in range(cfg.candidate_count):
        w_list = []
        for fac in factors:
            r = fac.shape[1]
            if r == 0:
                w_list.append(np.zeros(sub.N, dtype=complex))
                continue
            g = (rng.standard_normal(r) + 1j * rng.standard_normal(r))
            w_list.append(fac @ g / math.sqrt(2.0))
        problem = _rescale_problem(sub, w_list)
        solution = sdp.solve(problem, solver_cfg, factor_cache=factor_cache)
        if solution.status is sdp.SolveStatus.MAX_ITERATIONS:
            # rare dense-engine stall: retry on the splitting kernel
            solution = sdp.solve(
                problem,
                replace(solver_cfg, engine="splitting"),
                factor_cache=factor_cache,
            )
        if solution.status is not sdp.SolveStatus.OPTIMAL:
            continue
        p = np.array([
            max(float(solution.values[_p_var(m)]), 0.0) for m in range(sub.M)
        ])
        ranked.append((float(solution.objective_value), t, p, w_list))

    ranked.sort(key=lambda item: (item[0], item[1]))
    for _, _, p, w_list in ranked:
        beams = np.zeros((inst.M, inst.N), dtype=complex)
        for m, w in enumerate(w_list):
            beams[m, cols] = math.sqrt(p[m]) * w
        solution = _certify(inst, active, beams)
        if solution is not None:
            return solution
    raise AllCandidatesInfeasible(
        f"no feasible rescaling among {cfg.candidate_count} candidates"
    )


def solution_to_csv(inst, sol, path):
    """One row per (RRH, group, antenna) coefficient plus a summary row.

    The summary stores the active set as a bitmask (bit l set when RRH l
    is active), the network power in the ``re`` column and the minimum
    worst-case margin in the ``im`` column.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "l", "m", "antenna", "re", "im"])
        for l in range(inst.L):
            sl = inst.antenna_slice(l)
            for m in range(inst.M):
                block = sol.beamformers[m, sl]
                for a, value in enumerate(block):
                    writer.writerow([
                        "coef", l, m, a,
                        f"{value.real:.12e}", f"{value.imag:.12e}",
                    ])
        bitmask = sum(1 << l for l in sol.active_set)
        writer.writerow([
            "summary", bitmask, "", "",
            f"{sol.network_power:.12e}",
            f"{float(np.min(sol.per_user_margin)):.12e}",
        ])
