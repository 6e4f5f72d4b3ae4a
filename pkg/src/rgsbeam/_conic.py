"""Low-level real conic solver kernel.

Solves problems in the standard form

    minimize    c'x
    subject to  Ax + s = b,   s in K,

where K is a product of a zero cone (equalities), a nonnegative orthant
(inequalities), and dense PSD cones given in scaled-vector (svec) form.
The algorithm is operator splitting (Douglas-Rachford) applied to the
homogeneous self-dual embedding: each iteration solves one quasidefinite
linear system with a cached Cholesky factorization and projects onto the
cone product.  Infeasibility and unboundedness are detected through the
standard normalized certificates.

Everything here works on plain real arrays; the Hermitian-to-real
translation lives in :mod:`rgsbeam.sdp`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "ConeLayout",
    "ConicData",
    "ConicResult",
    "svec",
    "smat",
    "svec_dim",
    "solve_conic",
]


# ---------------------------------------------------------------------------
# svec / smat
# ---------------------------------------------------------------------------

_SVEC_PLANS = {}


def svec_dim(n):
    return n * (n + 1) // 2


def _svec_plan(n):
    """Cached index plan mapping symmetric n x n matrices to length-n(n+1)/2
    vectors with off-diagonal entries scaled by sqrt(2), so the Euclidean
    inner product of two svecs equals the trace inner product."""
    plan = _SVEC_PLANS.get(n)
    if plan is None:
        rows, cols = np.tril_indices(n)
        weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
        plan = (rows, cols, weights)
        _SVEC_PLANS[n] = plan
    return plan


def svec(mat):
    """Scaled lower-triangle vectorization of a symmetric matrix."""
    n = mat.shape[-1]
    rows, cols, w = _svec_plan(n)
    return mat[..., rows, cols] * w


def smat(vec, n):
    """Inverse of :func:`svec` (accepts batched input)."""
    rows, cols, w = _svec_plan(n)
    vals = np.asarray(vec) / w
    out = np.zeros(vec.shape[:-1] + (n, n))
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeLayout:
    """Row layout of K: equalities, then inequalities, then PSD blocks.

    ``psd_dims`` holds the *matrix* dimension of each real PSD block (the
    corresponding rows take ``d(d+1)/2`` svec entries each).
    """

    n_zero: int
    n_nonneg: int
    psd_dims: tuple = ()

    @property
    def total_rows(self):
        return self.n_zero + self.n_nonneg + sum(svec_dim(d) for d in self.psd_dims)

    def psd_row_ranges(self):
        start = self.n_zero + self.n_nonneg
        out = []
        for d in self.psd_dims:
            out.append((start, start + svec_dim(d), d))
            start += svec_dim(d)
        return out


@dataclass(frozen=True)
class ConicData:
    a: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    layout: ConeLayout

    def validate(self):
        m, n = self.a.shape
        if self.layout.total_rows != m:
            raise ValueError(
                f"cone layout covers {self.layout.total_rows} rows, matrix has {m}"
            )
        if self.b.shape != (m,) or self.c.shape != (n,):
            raise ValueError("b/c dimensions do not match A")


@dataclass
class ConicResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "max_iterations"
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    iterations: int
    primal_res: float
    dual_res: float
    gap: float
    eq_viol: float
    cone_viol: float


# ---------------------------------------------------------------------------
# cone projection
# ---------------------------------------------------------------------------


class _ConeProjector:
    """Projects the dual vector part onto K* = R^zero x R+ x PSD.

    PSD blocks of equal dimension are batched into a single eigenvalue
    decomposition call to keep the per-iteration Python overhead low.
    """

    def __init__(self, layout):
        self.layout = layout
        self.nz = layout.n_zero
        self.nn = layout.n_nonneg
        groups = {}
        for start, stop, d in layout.psd_row_ranges():
            groups.setdefault(d, []).append((start, stop))
        self.groups = [
            (d, np.array([r[0] for r in ranges]), svec_dim(d))
            for d, ranges in sorted(groups.items())
        ]

    def project_dual(self, y):
        """In-place projection of y onto K* (zero part left free)."""
        nz, nn = self.nz, self.nn
        if nn:
            np.clip(y[nz : nz + nn], 0.0, None, out=y[nz : nz + nn])
        for d, starts, length in self.groups:
            idx = starts[:, None] + np.arange(length)[None, :]
            batch = smat(y[idx], d)
            w, v = np.linalg.eigh(batch)
            np.clip(w, 0.0, None, out=w)
            proj = (v * w[:, None, :]) @ np.swapaxes(v, -1, -2)
            y[idx] = svec(proj)
        return y

    def project_primal_cone(self, s):
        """Projection onto K itself (used to sanitize warm starts)."""
        s = s.copy()
        s[: self.nz] = 0.0
        self.project_dual(s)  # R+ and PSD parts coincide with K*
        return s

    def min_eigs(self, block_vals):
        """Smallest eigenvalue per PSD block of a full-length row vector."""
        out = []
        for start, stop, d in self.layout.psd_row_ranges():
            out.append(float(np.linalg.eigvalsh(smat(block_vals[start:stop], d))[0]))
        return out


# ---------------------------------------------------------------------------
# equilibration
# ---------------------------------------------------------------------------


def _row_group_ids(layout):
    """Row -> scaling-group map: each equality/inequality row scales alone,
    every row of a PSD block shares one scale (cone invariance)."""
    gids = np.arange(layout.total_rows)
    next_gid = layout.n_zero + layout.n_nonneg
    for start, stop, _d in layout.psd_row_ranges():
        gids[start:stop] = next_gid
        next_gid += 1
    # compress ids to 0..G-1 (they are already sorted/contiguous)
    _, gids = np.unique(gids, return_inverse=True)
    return gids


class _GroupMax:
    """Vectorized max-reduction of entry values into groups 0..G-1."""

    def __init__(self, group_of_entry, n_groups):
        order = np.argsort(group_of_entry, kind="stable")
        self.order = order
        sorted_gids = group_of_entry[order]
        counts = np.bincount(sorted_gids, minlength=n_groups)
        self.nonempty = counts > 0
        bounds = np.zeros(n_groups, dtype=np.intp)
        bounds[1:] = np.cumsum(counts)[:-1]
        # reduceat needs in-range indices even for empty trailing groups
        self.bounds = np.minimum(bounds, max(len(order) - 1, 0))
        self.n_groups = n_groups

    def reduce(self, vals):
        out = np.ones(self.n_groups)
        if len(self.order):
            reduced = np.maximum.reduceat(vals[self.order], self.bounds)
            out[self.nonempty] = reduced[self.nonempty]
        return out


def _ruiz_equilibrate(a, layout, iters):
    """Ruiz equilibration with blockwise-uniform scaling on PSD rows.

    Returns (d_row, e_col) with the scaled matrix D A E having row and
    column infinity norms near one.
    """
    m, n = a.shape
    coo = a.tocoo()
    rows, cols, vals = coo.row, coo.col, np.abs(coo.data)

    gid_of_row = _row_group_ids(layout)
    n_groups = int(gid_of_row.max()) + 1 if m else 0
    row_reducer = _GroupMax(gid_of_row[rows], n_groups)
    col_reducer = _GroupMax(cols, n)

    d = np.ones(m)
    e = np.ones(n)
    for _ in range(iters):
        scaled = vals * d[rows] * e[cols]
        gmax = np.clip(row_reducer.reduce(scaled), 1e-12, 1e12)
        d *= 1.0 / np.sqrt(gmax[gid_of_row])

        scaled = vals * d[rows] * e[cols]
        cmax = np.clip(col_reducer.reduce(scaled), 1e-12, 1e12)
        e *= 1.0 / np.sqrt(cmax)
    return d, e


# ---------------------------------------------------------------------------
# cached linear system
# ---------------------------------------------------------------------------


class _AffineSolver:
    """Factorization of I + A'A for the projection onto Ax + s = b."""

    def __init__(self, a_scaled):
        self.a_csr = a_scaled.tocsr()
        self.at_csr = a_scaled.T.tocsr()
        gram = (a_scaled.T @ a_scaled).toarray()
        gram[np.diag_indices_from(gram)] += 1.0
        self.factor = scipy.linalg.cho_factor(gram, check_finite=False)

    def msolve(self, wx, wy):
        """Solve [[I, A'], [-A, I]] (zx, zy) = (wx, wy)."""
        zx = scipy.linalg.cho_solve(
            self.factor, wx - self.at_csr @ wy, check_finite=False
        )
        zy = wy + self.a_csr @ zx
        return zx, zy


def _structure_digest(a, layout, ruiz_iters):
    h = hashlib.blake2b(digest_size=16)
    h.update(np.asarray(a.shape).tobytes())
    h.update(a.indptr.tobytes())
    h.update(a.indices.tobytes())
    h.update(a.data.tobytes())
    h.update(repr((layout.n_zero, layout.n_nonneg, layout.psd_dims)).encode())
    h.update(str(ruiz_iters).encode())
    return h.digest()


@dataclass
class _ScaledSystem:
    d: np.ndarray
    e: np.ndarray
    affine: _AffineSolver


def _prepare_system(data, ruiz_iters, factor_cache):
    key = None
    if factor_cache is not None:
        key = _structure_digest(data.a, data.layout, ruiz_iters)
        cached = factor_cache.get(key)
        if cached is not None:
            return cached
    d, e = _ruiz_equilibrate(data.a, data.layout, ruiz_iters)
    a_scaled = sp.diags(d) @ data.a @ sp.diags(e)
    system = _ScaledSystem(d=d, e=e, affine=_AffineSolver(a_scaled.tocsc()))
    if factor_cache is not None:
        factor_cache[key] = system
    return system


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------


@dataclass
class KernelConfig:
    tol_eq: float = 1e-6
    tol_cone: float = 1e-6
    tol_gap: float = 1e-6
    tol_dual: float = 1e-6
    tol_infeas: float = 1e-6
    max_iters: int = 100_000
    alpha: float = 1.5
    check_interval: int = 50
    ruiz_iters: int = 15
    normalize_bc: bool = True


def _bc_scale(vec):
    nrm = float(np.linalg.norm(vec))
    if nrm < 1e-12:
        return 1.0
    return float(np.clip(1.0 / nrm, 1e-6, 1e6))


def solve_conic(data, cfg=None, warm_start=None, factor_cache=None):
    """Run the splitting iteration on conic data.

    Parameters
    ----------
    data : ConicData
    cfg : KernelConfig, optional
    warm_start : tuple of (x, y, s) in unscaled units, optional
    factor_cache : dict, optional
        Reusable store for the equilibration + factorization keyed by the
        constraint-matrix structure; pass the same dict across solves that
        share A (only b and c changing) to skip refactorization.
    """
    cfg = cfg or KernelConfig()
    data.validate()
    m, n = data.a.shape
    layout = data.layout
    projector = _ConeProjector(layout)
    system = _prepare_system(data, cfg.ruiz_iters, factor_cache)
    d_row, e_col = system.d, system.e

    b_rowscaled = d_row * data.b
    c_colscaled = e_col * data.c
    sigma_b = _bc_scale(b_rowscaled) if cfg.normalize_bc else 1.0
    sigma_c = _bc_scale(c_colscaled) if cfg.normalize_bc else 1.0
    b_bar = sigma_b * b_rowscaled
    c_bar = sigma_c * c_colscaled

    affine = system.affine
    z2x, z2y = affine.msolve(c_bar, b_bar)
    denom = 1.0 + float(c_bar @ z2x + b_bar @ z2y)

    norm_b = float(np.linalg.norm(data.b))
    norm_c = float(np.linalg.norm(data.c))

    # iterate state
    u = np.zeros(n + m + 1)
    v = np.zeros(n + m + 1)
    if warm_start is not None:
        x0, y0, s0 = warm_start
        u[:n] = sigma_b * x0 / e_col
        u[n : n + m] = sigma_c * y0 / d_row
        u[-1] = 1.0
        s_scaled = sigma_b * d_row * projector.project_primal_cone(np.asarray(s0))
        v[n : n + m] = s_scaled
    else:
        u[-1] = 1.0
        v[-1] = 1.0

    alpha = cfg.alpha
    nz, nn = layout.n_zero, layout.n_nonneg
    best = None

    status = "max_iterations"
    iters_done = cfg.max_iters
    for it in range(1, cfg.max_iters + 1):
        w = u + v
        zx, zy = affine.msolve(w[:n], w[n : n + m])
        ztau = (w[-1] + c_bar @ zx + b_bar @ zy) / denom
        zx -= ztau * z2x
        zy -= ztau * z2y

        # over-relaxed reflection step
        tx = alpha * zx + (1.0 - alpha) * u[:n]
        ty = alpha * zy + (1.0 - alpha) * u[n : n + m]
        ttau = alpha * ztau + (1.0 - alpha) * u[-1]

        px = tx - v[:n]
        py = ty - v[n : n + m]
        ptau = ttau - v[-1]
        projector.project_dual(py)
        if ptau < 0.0:
            ptau = 0.0

        v[:n] += px - tx
        v[n : n + m] += py - ty
        v[-1] += ptau - ttau
        u[:n] = px
        u[n : n + m] = py
        u[-1] = ptau

        if it % cfg.check_interval and it != cfg.max_iters:
            continue

        tau = u[-1]
        if tau > 1e-10:
            x = e_col * u[:n] / (tau * sigma_b)
            y = d_row * u[n : n + m] / (tau * sigma_c)
            s = v[n : n + m] / (d_row * tau * sigma_b)
            ax = data.a @ x
            r_pri = ax + s - data.b
            r_dual = data.a.T @ y + data.c
            cx = float(data.c @ x)
            by = float(data.b @ y)
            pri_norm = float(np.linalg.norm(r_pri))
            dual_norm = float(np.linalg.norm(r_dual))
            gap = abs(cx + by)

            # constraint-level violations on the x readout
            resid = data.b - ax
            eq_viol = float(np.max(np.abs(resid[:nz]))) if nz else 0.0
            cone_viol = float(np.max(-resid[nz : nz + nn], initial=0.0)) if nn else 0.0
            if layout.psd_dims:
                min_eig = min(projector.min_eigs(resid))
                cone_viol = max(cone_viol, -min_eig)

            ok = (
                eq_viol <= cfg.tol_eq
                and cone_viol <= cfg.tol_cone
                and gap <= cfg.tol_gap * (1.0 + abs(cx) + abs(by))
                and dual_norm <= cfg.tol_dual * (1.0 + norm_c)
            )
            snapshot = (x, y, s, cx, pri_norm, dual_norm, gap, eq_viol, cone_viol)
            if best is None or (eq_viol + cone_viol) <= (best[7] + best[8]):
                best = snapshot
            if ok:
                status = "optimal"
                best = snapshot
                iters_done = it
                break

        # certificates (checked whether or not tau is small: the scaling
        # below makes them meaningful only when they actually converge)
        yr = d_row * u[n : n + m]
        by_r = float(data.b @ yr)
        if by_r < 0.0:
            aty = data.a.T @ yr
            if float(np.linalg.norm(aty)) * max(norm_b, 1.0) <= cfg.tol_infeas * (-by_r):
                y_cert = -yr / by_r
                best = (
                    np.zeros(n), y_cert, np.zeros(m),
                    np.nan, np.nan, np.nan, np.nan, np.nan, np.nan,
                )
                status = "infeasible"
                iters_done = it
                break
        xr = e_col * u[:n]
        sr = v[n : n + m] / d_row
        cx_r = float(data.c @ xr)
        if cx_r < 0.0:
            axs = data.a @ xr + sr
            if float(np.linalg.norm(axs)) * max(norm_c, 1.0) <= cfg.tol_infeas * (-cx_r):
                x_cert = -xr / cx_r
                best = (
                    x_cert, np.zeros(m), -sr / cx_r,
                    np.nan, np.nan, np.nan, np.nan, np.nan, np.nan,
                )
                status = "unbounded"
                iters_done = it
                break

    if best is None:
        # never produced a usable readout (tau stayed tiny): report zeros
        best = (
            np.zeros(n), np.zeros(m), np.zeros(m),
            np.nan, np.nan, np.nan, np.nan, np.nan, np.nan,
        )

    x, y, s, cx, pri, dual, gap, eqv, conev = best
    return ConicResult(
        status=status,
        x=x,
        y=y,
        s=s,
        objective=cx,
        iterations=iters_done,
        primal_res=pri,
        dual_res=dual,
        gap=gap,
        eq_viol=eqv,
        cone_viol=conev,
    )
