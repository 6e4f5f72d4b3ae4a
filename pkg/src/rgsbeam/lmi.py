"""Constraint and objective builders for the beamforming SDPs.

Produces :class:`rgsbeam.sdp.SdpProblem` fragments from a network
instance: the robust QoS linear matrix inequality obtained from the
S-lemma, per-RRH transmit power traces, zero-power equalities for
switched-off RRHs, the weighted group-sparsity surrogate objective, and
the epigraph objective of the l1/l-infinity baseline.

Group beamforming covariances are matrix variables named ``Q0..Q{M-1}``
and the QoS multipliers are nonnegative scalars ``lam0..lam{K-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp

__all__ = [
    "q_var_name",
    "lambda_var_name",
    "BlockSelector",
    "QosLmiBlock",
    "build_qos_lmi",
    "build_power_constraints",
    "build_zero_constraints",
    "GsObjective",
    "build_gs_objective",
    "EpigraphObjective",
    "build_linf_objective",
]


def q_var_name(m):
    return f"Q{m}"


def lambda_var_name(k):
    return f"lam{k}"


@dataclass(frozen=True)
class BlockSelector:
    """Diagonal 0/1 selector C_lm picking RRH l's antenna rows.

    The realization is independent of the group index m; it is kept as a
    field so selectors can be tabulated per (l, m) pair.
    """

    l: int
    m: int

    def matrix(self, inst):
        c = np.zeros((inst.N, inst.N))
        sl = inst.antenna_slice(self.l)
        c[sl, sl] = np.eye(inst.antennas[self.l])
        return c


def _inv_sqrt_psd(theta):
    """Hermitian inverse square root; rejects (near-)singular shapes."""
    w, v = np.linalg.eigh(0.5 * (theta + theta.conj().T))
    if w[0] <= 1e-12 * max(w[-1], 1.0):
        raise ValueError("uncertainty shape matrix must be positive definite")
    return (v * (w**-0.5)) @ v.conj().T


@dataclass(eq=False)
class QosLmiBlock:
    """The robust QoS constraint of one user as an affine Hermitian block.

    With G = Q_m - gamma * sum_{i != m} Q_i for the user's group m, the
    (N+1) x (N+1) block

        [[G, G h], [h^H G, h^H G h - gamma sigma2]]
        + lam * [[Theta, 0], [0, -1]]

    is PSD iff the SINR target holds for every channel error in the
    ellipsoid (S-lemma).  ``coeffs[i]`` is the signed weight of Q_i
    inside G; lam enters only through the Theta block.
    """

    user: int
    group: int
    dim: int  # N + 1
    coeffs: np.ndarray  # (M,) signed group weights
    h_hat: np.ndarray  # (N,)
    theta: np.ndarray  # (N, N)
    gamma: float
    sigma2: float

    @property
    def lambda_var(self):
        return lambda_var_name(self.user)

    def factor(self):
        """Congruence factor J = [I_N; h^H]: J Q J^H lifts Q into the block."""
        n = self.dim - 1
        return np.vstack([np.eye(n), self.h_hat[None, :].conj()])

    def constant_matrix(self):
        c = np.zeros((self.dim, self.dim))
        c[-1, -1] = -self.gamma * self.sigma2
        return c

    def lambda_matrix(self):
        m = np.zeros((self.dim, self.dim), dtype=complex)
        m[:-1, :-1] = self.theta
        m[-1, -1] = -1.0
        return m

    def evaluate(self, q_values, lam):
        """Numeric block at given covariance matrices and multiplier."""
        n = self.dim - 1
        g = np.zeros((n, n), dtype=complex)
        for i, c in enumerate(self.coeffs):
            q = q_values[i]
            arr = q.array if hasattr(q, "array") else np.asarray(q)
            g = g + c * arr
        j = self.factor()
        return j @ g @ j.conj().T + self.constant_matrix() + lam * self.lambda_matrix()

    def to_constraint(self, prescale=True):
        """Compile to an LmiConstraint for the solver.

        With ``prescale`` the block is congruence-transformed by
        diag(Theta^{-1/2}, 1), which maps the multiplier term to the
        well-conditioned diag(I, -1) without changing the feasible set;
        essential when the uncertainty ellipsoid is small (Theta large).
        """
        n = self.dim - 1
        if prescale:
            root = _inv_sqrt_psd(self.theta)
            factor = np.vstack([root, self.h_hat[None, :].conj()])
            lam_mat = np.eye(self.dim)
            lam_mat[-1, -1] = -1.0
        else:
            factor = self.factor()
            lam_mat = self.lambda_matrix()
        terms = tuple(
            sdp.CongruenceTerm(q_var_name(i), c, factor)
            for i, c in enumerate(self.coeffs)
        )
        return sdp.LmiConstraint(
            dim=self.dim,
            constant=self.constant_matrix(),
            matrix_terms=terms,
            scalar_terms=(sdp.ScalarMatrixTerm(self.lambda_var, lam_mat),),
            label=f"qos{self.user}",
        )

    def fixed_direction_matrices(self, w_list, prescale=True):
        """LMI pieces when Q_i = p_i * W_i for fixed PSD W_i.

        Returns (constant, lambda_matrix, per-p coefficient matrices) so a
        power-rescaling problem linear in the scalars p_i can be
        assembled.
        """
        if prescale:
            root = _inv_sqrt_psd(self.theta)
            factor = np.vstack([root, self.h_hat[None, :].conj()])
            lam_mat = np.eye(self.dim)
            lam_mat[-1, -1] = -1.0
        else:
            factor = self.factor()
            lam_mat = self.lambda_matrix()
        per_p = []
        for c, w in zip(self.coeffs, w_list):
            arr = w.array if hasattr(w, "array") else np.asarray(w)
            per_p.append(c * (factor @ arr @ factor.conj().T))
        return self.constant_matrix(), lam_mat, per_p


def build_qos_lmi(inst, k):
    """S-lemma QoS block for user k over the instance's M covariances."""
    m = inst.group_of(k)
    gamma = float(inst.gamma[k])
    coeffs = np.full(inst.M, -gamma)
    coeffs[m] = 1.0
    return QosLmiBlock(
        user=k,
        group=m,
        dim=inst.N + 1,
        coeffs=coeffs,
        h_hat=inst.h_hat[k].copy(),
        theta=np.asarray(inst.theta[k]),
        gamma=gamma,
        sigma2=float(inst.sigma2[k]),
    )


def _power_trace_terms(inst, l):
    sel = BlockSelector(l, 0).matrix(inst)
    return tuple((q_var_name(m), sel) for m in range(inst.M))


def build_power_constraints(inst, active):
    """Per-RRH budget inequalities sum_m Tr(C_lm Q_m) <= P_l, l in active.

    Expressed in the solver's ``expr >= 0`` convention.
    """
    out = []
    for l in sorted(active):
        terms = tuple((name, -mat) for name, mat in _power_trace_terms(inst, l))
        out.append(sdp.LinearExpr(matrix_terms=terms, constant=float(inst.p_max[l])))
    return out


def build_zero_constraints(inst, inactive):
    """Zero-power equalities sum_m Tr(C_lm Q_m) = 0 for switched-off RRHs."""
    out = []
    for l in sorted(inactive):
        out.append(sdp.LinearExpr(matrix_terms=_power_trace_terms(inst, l)))
    return out


@dataclass(frozen=True)
class GsObjective:
    """Weighted power functional; ``constant`` carries the eps*I traces.

    ``expr`` is linear in the covariances; reported objective values are
    ``expr + constant`` so they match the surrogate's definition even
    though the constant never enters the solver.
    """

    expr: sdp.LinearExpr
    constant: float

    def value(self, q_values):
        return self.expr.evaluate(q_values) + self.constant


def build_gs_objective(inst, mu, eps):
    """Group-sparsity surrogate: 4 sum_l (P_l^c / (eta_l mu_l)) sum_m
    (Tr(C_lm Q_m) + eps N).

    ``mu`` is a positive weight vector on the simplex; ``eps`` is the
    smoothing level whose N*eps trace per (l, m) pair is returned as the
    separate constant.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (inst.L,) or np.any(mu <= 0):
        raise ValueError("mu must be a positive vector of length L")
    if not np.isclose(mu.sum(), 1.0, atol=1e-8):
        raise ValueError("mu must sum to 1")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    weights = 4.0 * inst.p_fronthaul / (inst.eta * mu)
    coeff = np.zeros((inst.N, inst.N))
    for l in range(inst.L):
        sl = inst.antenna_slice(l)
        coeff[sl, sl] += weights[l] * np.eye(inst.antennas[l])
    terms = tuple((q_var_name(m), coeff) for m in range(inst.M))
    constant = float(np.sum(weights) * inst.M * inst.N * eps)
    return GsObjective(expr=sdp.LinearExpr(matrix_terms=terms), constant=constant)


@dataclass(eq=False)
class EpigraphObjective:
    """Auxiliary variables and rows realizing a max-modulus objective."""

    objective: sdp.LinearExpr
    scalar_vars: tuple  # (name, nonneg) pairs to add to the problem
    constraints: tuple  # LinearExpr >= 0 rows
    segments: int


def _entry_coeff_matrices(n, i, j):
    """Hermitian A, B with tr(A Q) = Re Q_ij and tr(B Q) = Im Q_ij."""
    a = np.zeros((n, n), dtype=complex)
    a[i, j] += 0.5
    a[j, i] += 0.5
    b = np.zeros((n, n), dtype=complex)
    b[i, j] += 0.5j
    b[j, i] += -0.5j
    return a, b


def build_linf_objective(inst, segments=24):
    """Epigraph of sum over RRH pairs of the max entry modulus.

    One scalar t per unordered RRH pair (l1 <= l2) upper-bounds
    ``max_m max_{i in l1, j in l2} |Q_m(i, j)|`` through a polyhedral
    outer approximation of the modulus: t >= sec(pi/S) * Re(e^{-i phi_s}
    Q_ij) over S equally spaced angles, overestimating |.| by at most
    sec(pi/S) - 1 (0.9% at the default S=24).  Hermitian symmetry makes
    the (l2, l1) bound redundant, so off-diagonal pairs carry objective
    weight 2.
    """
    if segments < 3:
        raise ValueError("segments must be at least 3")
    sec = 1.0 / np.cos(np.pi / segments)
    angles = 2.0 * np.pi * np.arange(segments) / segments
    svars = []
    rows = []
    obj_terms = []
    for l1 in range(inst.L):
        s1 = inst.antenna_slice(l1)
        for l2 in range(l1, inst.L):
            s2 = inst.antenna_slice(l2)
            t_name = f"t_{l1}_{l2}"
            svars.append((t_name, True))
            obj_terms.append((t_name, 1.0 if l1 == l2 else 2.0))
            for i in range(s1.start, s1.stop):
                for j in range(s2.start, s2.stop):
                    if j < i:
                        continue
                    a, b = _entry_coeff_matrices(inst.N, i, j)
                    if i == j:
                        # diagonal entries are real: two half-planes suffice
                        seg_mats = [a, -a]
                    else:
                        seg_mats = [
                            np.cos(phi) * a + np.sin(phi) * b for phi in angles
                        ]
                    for mat in seg_mats:
                        for m in range(inst.M):
                            rows.append(
                                sdp.LinearExpr(
                                    matrix_terms=((q_var_name(m), -sec * mat),),
                                    scalar_terms=((t_name, 1.0),),
                                )
                            )
    return EpigraphObjective(
        objective=sdp.LinearExpr(scalar_terms=tuple(obj_terms)),
        scalar_vars=tuple(svars),
        constraints=tuple(rows),
        segments=segments,
    )
