"""Dense interior-point engine for small conic programs.

Solves the same standard form as the splitting kernel

    minimize    c'x
    subject to  Ax + s = b,   s in {0}^nz x R+^nn x PSD(svec),

but with a Nesterov-Todd scaled predictor-corrector iteration.  Each
step factors one dense quasidefinite system, so the cost per iteration
grows quickly with problem size; the payoff is a convergence rate that
does not degrade on degenerate data.  The splitting kernel remains the
default engine — this one exists for the small per-candidate rescaling
programs whose rank-one coefficient structure gives the first-order
iteration an extremely slow tail.

Conventions match :mod:`rgsbeam._conic`: the dual vector packs the
equality multipliers followed by the cone multipliers, the dual residual
is ``A'y + c``, and PSD blocks travel in sqrt(2)-scaled svec form.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ._conic import ConicResult, smat, svec, svec_dim

__all__ = ["solve_ipm"]

#: Interior-point steps are expensive and either converge in tens of
#: iterations or not at all; anything beyond this is a failure.
_MAX_IPM_ITERS = 200

_STEP_FRACTION = 0.99


class _ConeOps:
    """Vector algebra on the nonnegative-orthant x PSD product cone.

    Vectors are the cone rows of the standard form: ``nn`` scalar entries
    followed by one svec segment per PSD block.
    """

    def __init__(self, nn, psd_dims):
        self.nn = nn
        self.psd_dims = tuple(psd_dims)
        self.segments = []
        start = nn
        for d in self.psd_dims:
            self.segments.append((start, start + svec_dim(d), d))
            start += svec_dim(d)
        self.size = start
        self.degree = nn + sum(self.psd_dims)

    def min_eig(self, v):
        """Smallest eigenvalue across all components of the cone vector."""
        vals = [np.min(v[: self.nn])] if self.nn else []
        for lo, hi, d in self.segments:
            vals.append(float(np.linalg.eigvalsh(smat(v[lo:hi], d))[0]))
        return min(vals) if vals else 0.0

    def shift(self, v, amount):
        """v + amount * identity, in place-free form."""
        out = v.copy()
        out[: self.nn] += amount
        for lo, hi, d in self.segments:
            out[lo:hi] += amount * svec(np.eye(d))
        return out


class _Scaling:
    """Nesterov-Todd scaling point for the current (s, z) pair.

    Exposes the scaled variable ``lmbda = W z = W^{-T} s`` together with
    the linear maps needed by the Newton systems.  On PSD blocks the maps
    are congruences: ``W v = R' smat(v) R`` with ``R`` the NT factor.
    """

    def __init__(self, ops, s, z):
        self.ops = ops
        nn = ops.nn
        self.w = np.sqrt(s[:nn] / z[:nn]) if nn else np.zeros(0)
        self.lmbda = np.empty(ops.size)
        self.lmbda[:nn] = np.sqrt(s[:nn] * z[:nn])
        self.r_inv = []  # per-block R^{-1}
        self.r = []  # per-block R
        self.lam_diag = []  # per-block eigenvalues of the scaled point
        for lo, hi, d in ops.segments:
            s_mat = smat(s[lo:hi], d)
            z_mat = smat(z[lo:hi], d)
            ls = scipy.linalg.cholesky(s_mat, lower=True)
            lz = scipy.linalg.cholesky(z_mat, lower=True)
            u, sig, vt = np.linalg.svd(lz.T @ ls)
            r = ls @ vt.T / np.sqrt(sig)
            r_inv = (u / np.sqrt(sig)).T @ lz.T
            self.r.append(r)
            self.r_inv.append(r_inv)
            self.lam_diag.append(sig)
            self.lmbda[lo:hi] = svec(np.diag(sig))

    def scale_dual(self, v):
        """W v: maps dz into the scaled space."""
        out = np.empty_like(v)
        nn = self.ops.nn
        out[:nn] = self.w * v[:nn]
        for (lo, hi, d), r in zip(self.ops.segments, self.r):
            out[lo:hi] = svec(r.T @ smat(v[lo:hi], d) @ r)
        return out

    def scale_primal(self, v):
        """W^{-T} v: maps ds into the scaled space."""
        out = np.empty_like(v)
        nn = self.ops.nn
        out[:nn] = v[:nn] / self.w
        for (lo, hi, d), ri in zip(self.ops.segments, self.r_inv):
            out[lo:hi] = svec(ri @ smat(v[lo:hi], d) @ ri.T)
        return out

    def unscale_primal(self, v):
        """W^T v: adjoint of scale_dual, inverse of scale_primal."""
        out = np.empty_like(v)
        nn = self.ops.nn
        out[:nn] = self.w * v[:nn]
        for (lo, hi, d), r in zip(self.ops.segments, self.r):
            out[lo:hi] = svec(r @ smat(v[lo:hi], d) @ r.T)
        return out

    def unscale_dual(self, v):
        """W^{-1} v: recovers dz from the scaled direction W dz."""
        out = np.empty_like(v)
        nn = self.ops.nn
        out[:nn] = v[:nn] / self.w
        for (lo, hi, d), ri in zip(self.ops.segments, self.r_inv):
            out[lo:hi] = svec(ri.T @ smat(v[lo:hi], d) @ ri)
        return out

    def apply_f(self, mat):
        """W^{-T} applied to every column of a dense (rows x n) matrix."""
        out = np.empty_like(mat)
        nn = self.ops.nn
        out[:nn] = mat[:nn] / self.w[:, None] if nn else mat[:nn]
        for (lo, hi, d), ri in zip(self.ops.segments, self.r_inv):
            cols = smat(mat[lo:hi].T, d)  # (n, d, d) batched
            out[lo:hi] = svec(ri @ cols @ ri.T).T
        return out

    def jordan_lambda_solve(self, v):
        """Solve lmbda o u = v for u (Jordan product in the scaled space)."""
        out = np.empty_like(v)
        nn = self.ops.nn
        out[:nn] = v[:nn] / self.lmbda[:nn]
        for (lo, hi, d), lam in zip(self.ops.segments, self.lam_diag):
            denom = 0.5 * (lam[:, None] + lam[None, :])
            out[lo:hi] = svec(smat(v[lo:hi], d) / denom)
        return out

    def max_step(self, v):
        """Largest t with lmbda + t*v staying in the cone (inf -> 1e18)."""
        steps = []
        nn = self.ops.nn
        if nn:
            neg = v[:nn] < 0
            if np.any(neg):
                steps.append(float(np.min(-self.lmbda[:nn][neg] / v[:nn][neg])))
        for (lo, hi, d), lam in zip(self.ops.segments, self.lam_diag):
            scaled = smat(v[lo:hi], d) / np.sqrt(np.outer(lam, lam))
            low = float(np.linalg.eigvalsh(scaled)[0])
            if low < 0:
                steps.append(-1.0 / low)
        return min(steps) if steps else 1e18


def _jordan(ops, u, v):
    """Jordan product u o v on the product cone."""
    out = np.empty_like(u)
    nn = ops.nn
    out[:nn] = u[:nn] * v[:nn]
    for lo, hi, d in ops.segments:
        um = smat(u[lo:hi], d)
        vm = smat(v[lo:hi], d)
        out[lo:hi] = svec(0.5 * (um @ vm + vm @ um))
    return out


class _Kkt:
    """Factors the reduced Newton system for a fixed NT scaling.

    Eliminating ds and dz leaves the bordered system

        [ G' H^{-1} G   E' ] [dx]   [ rhs_x ]
        [ E             0  ] [dy] = [ rhs_y ]

    with H = W'W, realized through the scaled matrix F G (F = W^{-T}).
    """

    def __init__(self, e_mat, g_mat, scaling_or_none):
        self.e = e_mat
        self.g = g_mat
        fg = g_mat if scaling_or_none is None else scaling_or_none.apply_f(g_mat)
        self.fg = fg
        n = g_mat.shape[1]
        nz = e_mat.shape[0]
        kkt = np.zeros((n + nz, n + nz))
        kkt[:n, :n] = fg.T @ fg
        if nz:
            kkt[:n, n:] = e_mat.T
            kkt[n:, :n] = e_mat
        self.n = n
        self.nz = nz
        self.lu = scipy.linalg.lu_factor(kkt)

    def solve(self, rhs_x, rhs_y):
        sol = scipy.linalg.lu_solve(self.lu, np.concatenate([rhs_x, rhs_y]))
        return sol[: self.n], sol[self.n :]


def _initial_point(e_mat, g_mat, b_eq, h, c, ops):
    """Least-squares primal/dual start pushed strictly inside the cone."""
    kkt = _Kkt(e_mat, g_mat, None)
    # primal: minimize ||s|| subject to Ex = b, Gx + s = h
    x, _ = kkt.solve(g_mat.T @ h, b_eq)
    s = h - g_mat @ x
    low = ops.min_eig(s)
    if low < 1e-8:
        s = ops.shift(s, 1.0 - low)
    # dual: minimize ||z|| subject to E'y + G'z = -c
    xd, y = kkt.solve(-c, np.zeros(e_mat.shape[0]))
    z = g_mat @ xd
    low = ops.min_eig(z)
    if low < 1e-8:
        z = ops.shift(z, 1.0 - low)
    return x, y, s, z


def _certificate_status(e_mat, g_mat, b_eq, h, c, y, z, ops, tol):
    """Classify a diverging dual iterate as an infeasibility certificate."""
    obj = float(b_eq @ y) + float(h @ z)
    if obj >= -tol:
        return None
    y_n = y / -obj
    z_n = z / -obj
    scale = max(1.0, float(np.linalg.norm(y_n)), float(np.linalg.norm(z_n)))
    resid = e_mat.T @ y_n + g_mat.T @ z_n
    if np.linalg.norm(resid) <= 1e-6 * scale and ops.min_eig(z_n) >= -1e-9 * scale:
        return "infeasible"
    return None


def solve_ipm(data, cfg):
    """Interior-point counterpart of :func:`rgsbeam._conic.solve_conic`.

    Warm starts are not supported (the method builds its own strictly
    interior start); callers passing one simply lose the hint.
    """
    data.validate()
    layout = data.layout
    nz, nn = layout.n_zero, layout.n_nonneg
    m, n = data.a.shape
    a_dense = data.a.toarray()
    e_mat = a_dense[:nz]
    g_mat = a_dense[nz:]
    b_eq = data.b[:nz]
    h = data.b[nz:]
    c = data.c
    ops = _ConeOps(nn, layout.psd_dims)
    norm_c = float(np.linalg.norm(c))

    x, y, s, z = _initial_point(e_mat, g_mat, b_eq, h, c, ops)

    max_iters = min(cfg.max_iters, _MAX_IPM_ITERS)
    status = "max_iterations"
    iters_done = max_iters
    for it in range(1, max_iters + 1):
        rx = c + e_mat.T @ y + g_mat.T @ z
        ry = e_mat @ x - b_eq
        rz = g_mat @ x + s - h
        gap = float(s @ z)
        mu = gap / ops.degree

        cx = float(c @ x)
        by = float(b_eq @ y) + float(h @ z)
        eq_viol = float(np.max(np.abs(ry))) if nz else 0.0
        slack_resid = h - g_mat @ x
        cone_viol = max(0.0, -ops.min_eig(slack_resid))
        dual_norm = float(np.linalg.norm(rx))
        if (
            eq_viol <= cfg.tol_eq
            and cone_viol <= cfg.tol_cone
            and abs(cx + by) <= cfg.tol_gap * (1.0 + abs(cx) + abs(by))
            and dual_norm <= cfg.tol_dual * (1.0 + norm_c)
        ):
            status = "optimal"
            iters_done = it - 1
            break

        cert = _certificate_status(e_mat, g_mat, b_eq, h, c, y, z, ops, cfg.tol_infeas)
        if cert:
            status = cert
            iters_done = it - 1
            break
        diverged = max(
            float(np.max(np.abs(y), initial=0.0)), float(np.max(np.abs(z), initial=0.0))
        )
        if diverged > 1e12:
            status = "max_iterations"
            iters_done = it - 1
            break
        if cx < -1e12 * max(1.0, norm_c):
            status = "unbounded"
            iters_done = it - 1
            break

        try:
            scaling = _Scaling(ops, s, z)
            kkt = _Kkt(e_mat, g_mat, scaling)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            iters_done = it - 1
            break

        def newton(d_s):
            """Solve the Newton system for a complementarity target d_s."""
            rtz = rz + scaling.unscale_primal(scaling.jordan_lambda_solve(d_s))
            f_rtz = scaling.scale_primal(rtz)
            dx, dy = kkt.solve(-rx - kkt.fg.T @ f_rtz, -ry)
            dz_scaled = kkt.fg @ dx + f_rtz  # = W dz
            ds = -rz - g_mat @ dx
            return dx, dy, ds, scaling.unscale_dual(dz_scaled)

        lam2 = _jordan(ops, scaling.lmbda, scaling.lmbda)
        dx_a, dy_a, ds_a, dz_a = newton(-lam2)
        rho_a = scaling.scale_primal(ds_a)
        delta_a = scaling.scale_dual(dz_a)
        alpha_p = scaling.max_step(rho_a)
        alpha_d = scaling.max_step(delta_a)
        alpha_aff = min(1.0, alpha_p, alpha_d)
        gap_aff = float((s + alpha_aff * ds_a) @ (z + alpha_aff * dz_a))
        sigma = min(1.0, max(0.0, gap_aff / gap) ** 3)

        e_vec = ops.shift(np.zeros(ops.size), 1.0)
        d_s = -lam2 - _jordan(ops, rho_a, delta_a) + sigma * mu * e_vec
        dx, dy, ds, dz = newton(d_s)
        rho = scaling.scale_primal(ds)
        delta = scaling.scale_dual(dz)
        alpha = min(1.0, _STEP_FRACTION * min(scaling.max_step(rho), scaling.max_step(delta)))
        if alpha <= 1e-13:
            iters_done = it
            break

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        iters_done = it

    rx = c + e_mat.T @ y + g_mat.T @ z
    ry = e_mat @ x - b_eq
    cx = float(c @ x)
    by = float(b_eq @ y) + float(h @ z)
    eq_viol = float(np.max(np.abs(ry))) if nz else 0.0
    slack_resid = h - g_mat @ x
    cone_viol = max(0.0, -ops.min_eig(slack_resid))
    s_full = np.zeros(m)
    s_full[nz:] = s
    y_full = np.concatenate([y, z])
    if status in ("infeasible", "unbounded"):
        objective = float("inf") if status == "infeasible" else float("-inf")
    else:
        objective = cx
    return ConicResult(
        status=status,
        x=x,
        y=y_full,
        s=s_full,
        objective=objective,
        iterations=iters_done,
        primal_res=max(eq_viol, cone_viol),
        dual_res=float(np.linalg.norm(rx)),
        gap=abs(cx + by),
        eq_viol=eq_viol,
        cone_viol=cone_viol,
    )
