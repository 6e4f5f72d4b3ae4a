"""Hermitian semidefinite programming: modeling layer and solver front end.

Problems are linear in Hermitian PSD matrix blocks and (optionally
nonnegative) real scalars, with three constraint kinds:

* LMI constraints: affine Hermitian-matrix expressions required PSD,
  built from congruence terms ``coeff * T @ Q @ T^H`` and scalar terms
  ``s * F``;
* linear trace equalities and inequalities;
* implicit cone membership of the declared variables.

Internally every Hermitian object is embedded into a real symmetric one
(:mod:`rgsbeam.hermitian`), trace coefficients are halved to compensate
the embedding's trace doubling, and the real problem is handed to the
operator-splitting kernel in :mod:`rgsbeam._conic`.  Objective values
reported back to the caller are therefore in complex-domain units.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import _conic, _ipm
from ._conic import KernelConfig, svec, svec_dim
from .hermitian import HermitianMatrix, embed_array, unembed_array

__all__ = [
    "SdpFormatError",
    "SolveStatus",
    "Feasibility",
    "FeasibilityVerdict",
    "SolverConfig",
    "LinearExpr",
    "CongruenceTerm",
    "ScalarMatrixTerm",
    "LmiConstraint",
    "SdpProblem",
    "SdpSolution",
    "solve",
    "check_feasible",
    "dump_problem",
]


class SdpFormatError(ValueError):
    """Raised for malformed problems (dimension or name mismatches)."""


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"


class Feasibility(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasibility: Feasibility
    slack: float
    status: SolveStatus

    @property
    def is_feasible(self):
        return self.feasibility is Feasibility.FEASIBLE


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration limits for :func:`solve`.

    ``tol_cone`` bounds PSD/inequality violations of the returned point,
    ``tol_eq`` bounds equality residuals, and ``tol_gap`` is the relative
    primal-dual objective gap.  ``tol_feas`` is the phase-I verdict
    threshold used by :func:`check_feasible`.

    ``engine`` selects the numerical kernel: ``"splitting"`` (default)
    runs the operator-splitting iteration, ``"ipm"`` the dense
    interior-point method.  Both satisfy the same solution contract; the
    dense engine wins on small problems with degenerate data, where the
    splitting tail is slow, but its per-iteration cost grows fast with
    block dimensions.
    """

    tol_cone: float = 1e-6
    tol_eq: float = 1e-6
    tol_gap: float = 1e-6
    tol_dual: float = 1e-6
    tol_feas: float = 1e-5
    tol_infeas: float = 1e-6
    max_iters: int = 100_000
    alpha: float = 1.5
    check_interval: int = 50
    ruiz_iters: int = 15
    normalize_bc: bool = True
    engine: str = "splitting"

    def kernel(self):
        return KernelConfig(
            tol_eq=self.tol_eq,
            tol_cone=self.tol_cone,
            tol_gap=self.tol_gap,
            tol_dual=self.tol_dual,
            tol_infeas=self.tol_infeas,
            max_iters=self.max_iters,
            alpha=self.alpha,
            check_interval=self.check_interval,
            ruiz_iters=self.ruiz_iters,
            normalize_bc=self.normalize_bc,
        )


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


def _as_hermitian_array(m, what):
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SdpFormatError(f"{what}: expected square matrix, got {a.shape}")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-9:
        raise SdpFormatError(f"{what}: matrix is not Hermitian")
    return 0.5 * (a + a.conj().T)


@dataclass(eq=False)
class LinearExpr:
    """Real affine functional: sum of tr(C_j Q_j), scalar terms, constant."""

    matrix_terms: tuple = ()  # of (var_name, Hermitian ndarray)
    scalar_terms: tuple = ()  # of (var_name, float coefficient)
    constant: float = 0.0

    def __post_init__(self):
        self.matrix_terms = tuple(
            (name, _as_hermitian_array(mat, f"trace coefficient for {name}"))
            for name, mat in self.matrix_terms
        )
        self.scalar_terms = tuple((n, float(c)) for n, c in self.scalar_terms)
        self.constant = float(self.constant)

    def shifted_by_scalar(self, name, coeff):
        return LinearExpr(
            self.matrix_terms,
            self.scalar_terms + ((name, coeff),),
            self.constant,
        )

    def evaluate(self, values):
        """Numeric value at a dict of variable values (matrices or floats)."""
        total = self.constant
        for name, mat in self.matrix_terms:
            q = values[name]
            arr = q.array if isinstance(q, HermitianMatrix) else np.asarray(q)
            total += float(np.real(np.trace(mat @ arr)))
        for name, c in self.scalar_terms:
            total += c * float(values[name])
        return total

    def negated(self):
        return LinearExpr(
            tuple((n, -m) for n, m in self.matrix_terms),
            tuple((n, -c) for n, c in self.scalar_terms),
            -self.constant,
        )


@dataclass(eq=False)
class CongruenceTerm:
    """Contribution ``coeff * T @ Q_var @ T^H`` to an LMI block."""

    var: str
    coeff: float
    factor: np.ndarray  # (block_dim, var_dim) complex

    def __post_init__(self):
        self.factor = np.asarray(self.factor, dtype=complex)
        self.coeff = float(self.coeff)


@dataclass(eq=False)
class ScalarMatrixTerm:
    """Contribution ``scalar_var * matrix`` to an LMI block."""

    var: str
    matrix: np.ndarray  # Hermitian (block_dim, block_dim)

    def __post_init__(self):
        self.matrix = _as_hermitian_array(self.matrix, f"LMI term for {self.var}")


@dataclass(eq=False)
class LmiConstraint:
    """Affine Hermitian expression required positive semidefinite."""

    dim: int
    constant: np.ndarray
    matrix_terms: tuple = ()  # of CongruenceTerm
    scalar_terms: tuple = ()  # of ScalarMatrixTerm
    label: str = ""

    def __post_init__(self):
        self.constant = _as_hermitian_array(
            self.constant, f"LMI constant ({self.label or 'unlabeled'})"
        )
        if self.constant.shape[0] != self.dim:
            raise SdpFormatError("LMI constant dimension mismatch")
        for t in self.matrix_terms:
            if t.factor.shape[0] != self.dim:
                raise SdpFormatError(
                    f"LMI factor rows {t.factor.shape[0]} != block dim {self.dim}"
                )
        for t in self.scalar_terms:
            if t.matrix.shape[0] != self.dim:
                raise SdpFormatError("LMI scalar-term dimension mismatch")


@dataclass(eq=False)
class SdpProblem:
    """Conic program over Hermitian PSD blocks and scalar variables."""

    matrix_vars: tuple = ()  # of (name, dim)
    scalar_vars: tuple = ()  # of (name, nonneg flag)
    objective: LinearExpr | None = None
    lmi_constraints: tuple = ()
    eq_constraints: tuple = ()
    ineq_constraints: tuple = ()  # each LinearExpr meaning expr >= 0

    def matrix_dims(self):
        return dict(self.matrix_vars)

    def validate(self):
        dims = {}
        for name, d in self.matrix_vars:
            if name in dims:
                raise SdpFormatError(f"duplicate matrix variable {name!r}")
            if d < 1:
                raise SdpFormatError(f"matrix variable {name!r} has dim {d}")
            dims[name] = int(d)
        scalars = {}
        for name, nonneg in self.scalar_vars:
            if name in scalars or name in dims:
                raise SdpFormatError(f"duplicate variable {name!r}")
            scalars[name] = bool(nonneg)

        def check_expr(expr, what):
            for name, mat in expr.matrix_terms:
                if name not in dims:
                    raise SdpFormatError(f"{what}: unknown matrix variable {name!r}")
                if mat.shape[0] != dims[name]:
                    raise SdpFormatError(
                        f"{what}: coefficient dim {mat.shape[0]} != variable dim"
                        f" {dims[name]} for {name!r}"
                    )
            for name, _ in expr.scalar_terms:
                if name not in scalars:
                    raise SdpFormatError(f"{what}: unknown scalar variable {name!r}")

        if self.objective is not None:
            check_expr(self.objective, "objective")
        for i, e in enumerate(self.eq_constraints):
            check_expr(e, f"equality {i}")
        for i, e in enumerate(self.ineq_constraints):
            check_expr(e, f"inequality {i}")
        for i, lmi in enumerate(self.lmi_constraints):
            what = f"LMI {lmi.label or i}"
            for t in lmi.matrix_terms:
                if t.var not in dims:
                    raise SdpFormatError(f"{what}: unknown matrix variable {t.var!r}")
                if t.factor.shape[1] != dims[t.var]:
                    raise SdpFormatError(
                        f"{what}: factor cols {t.factor.shape[1]} != variable dim"
                        f" {dims[t.var]}"
                    )
            for t in lmi.scalar_terms:
                if t.var not in scalars:
                    raise SdpFormatError(f"{what}: unknown scalar variable {t.var!r}")
        return self


@dataclass
class SdpSolution:
    """Solver output; ``values`` maps variable names to HermitianMatrix or
    float.  ``primal_residual`` is the worst constraint-level violation
    (equality residual or cone eigenvalue deficit) of the returned point;
    ``dual_residual`` is the norm of the dual stationarity residual."""

    status: SolveStatus
    values: dict
    objective_value: float
    primal_residual: float
    dual_residual: float
    gap: float = float("nan")
    iterations: int = 0
    conic_point: tuple | None = None  # (x, y, s) for warm starts

    @property
    def is_optimal(self):
        return self.status is SolveStatus.OPTIMAL


# ---------------------------------------------------------------------------
# translation to real conic form
# ---------------------------------------------------------------------------

_PROJ_CACHE = {}


def _svec_projectors(n):
    """Sparse maps between row-major vec and svec for dimension n."""
    cached = _PROJ_CACHE.get(n)
    if cached is not None:
        return cached
    rows, cols, w = _conic._svec_plan(n)
    nt = len(rows)
    # svec from vec: off-diagonal entries average the two mirror positions
    r_idx = np.concatenate([np.arange(nt), np.arange(nt)])
    c_idx = np.concatenate([rows * n + cols, cols * n + rows])
    vals = np.concatenate([w, w]) * 0.5
    diag_mask = np.concatenate([rows == cols, rows == cols])
    vals = np.where(diag_mask, 0.5, vals)  # diagonal appears twice: 0.5+0.5
    to_svec = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(nt, n * n))
    # vec from svec
    r2 = np.concatenate([rows * n + cols, cols * n + rows])
    c2 = np.concatenate([np.arange(nt), np.arange(nt)])
    v2 = np.concatenate([1.0 / w, 1.0 / w])
    v2 = np.where(np.concatenate([rows == cols, rows == cols]), 0.5, v2)
    to_vec = sp.csr_matrix((v2, (r2, c2)), shape=(n * n, nt))
    out = (to_svec, to_vec)
    _PROJ_CACHE[n] = out
    return out


def _congruence_svec_matrix(factor, var_dim):
    """Sparse matrix taking svec(embed(Q)) to svec(embed(T Q T^H))."""
    w = sp.csr_matrix(embed_array(factor))
    p2 = factor.shape[0] * 2
    d2 = var_dim * 2
    to_svec, _ = _svec_projectors(p2)
    _, to_vec = _svec_projectors(d2)
    return (to_svec @ sp.kron(w, w, format="csr") @ to_vec).tocoo()


def _half_svec_embed(mat):
    """Row/objective coefficients: tr(C Q) = <svec(embed(C))/2, svec(embed(Q))>."""
    return 0.5 * svec(embed_array(mat))


class _Compiled:
    """Column layout plus readout maps for one compiled problem."""

    def __init__(self, problem):
        problem.validate()
        self.problem = problem
        self.mvar_cols = {}
        col = 0
        for name, d in problem.matrix_vars:
            length = svec_dim(2 * d)
            self.mvar_cols[name] = (col, d, length)
            col += length
        self.scalar_cols = {}
        self.nonneg_scalars = []
        for name, nonneg in problem.scalar_vars:
            self.scalar_cols[name] = col
            if nonneg:
                self.nonneg_scalars.append(name)
            col += 1
        self.n_cols = col

    def expr_row(self, expr):
        """(column indices, values, constant) for a LinearExpr."""
        idx, vals = [], []
        for name, mat in expr.matrix_terms:
            start, d, length = self.mvar_cols[name]
            coeffs = _half_svec_embed(mat)
            idx.append(np.arange(start, start + length))
            vals.append(coeffs)
        for name, c in expr.scalar_terms:
            idx.append(np.array([self.scalar_cols[name]]))
            vals.append(np.array([c]))
        if idx:
            return np.concatenate(idx), np.concatenate(vals), expr.constant
        return np.array([], dtype=int), np.array([]), expr.constant

    def build(self):
        """Assemble ConicData and the objective offset."""
        problem = self.problem
        rows_i, cols_i, vals_i = [], [], []
        b_parts = []
        row = 0

        def add_entries(r, c, v):
            rows_i.append(np.asarray(r, dtype=np.intp))
            cols_i.append(np.asarray(c, dtype=np.intp))
            vals_i.append(np.asarray(v, dtype=float))

        # zero cone: equalities (A x = b)
        for expr in problem.eq_constraints:
            idx, vals, const = self.expr_row(expr)
            add_entries(np.full(len(idx), row), idx, vals)
            b_parts.append(np.array([-const]))
            row += 1
        n_zero = row

        # nonneg cone: inequalities expr >= 0  ->  s = const + terms.x
        for expr in problem.ineq_constraints:
            idx, vals, const = self.expr_row(expr)
            add_entries(np.full(len(idx), row), idx, -vals)
            b_parts.append(np.array([const]))
            row += 1
        for name in self.nonneg_scalars:
            add_entries([row], [self.scalar_cols[name]], [-1.0])
            b_parts.append(np.zeros(1))
            row += 1
        n_nonneg = row - n_zero

        psd_dims = []
        # PSD cones for the matrix variables themselves: s = x_block
        for name, d in problem.matrix_vars:
            start, _, length = self.mvar_cols[name]
            r = np.arange(row, row + length)
            add_entries(r, np.arange(start, start + length), -np.ones(length))
            b_parts.append(np.zeros(length))
            psd_dims.append(2 * d)
            row += length

        # PSD cones for the LMI constraints
        for lmi in problem.lmi_constraints:
            p2 = 2 * lmi.dim
            length = svec_dim(p2)
            for term in lmi.matrix_terms:
                start, d, _ = self.mvar_cols[term.var]
                kmat = _congruence_svec_matrix(term.factor, d)
                add_entries(row + kmat.row, start + kmat.col, -term.coeff * kmat.data)
            for term in lmi.scalar_terms:
                colvec = svec(embed_array(term.matrix))
                nz = np.nonzero(colvec)[0]
                add_entries(
                    row + nz,
                    np.full(len(nz), self.scalar_cols[term.var]),
                    -colvec[nz],
                )
            b_parts.append(svec(embed_array(lmi.constant)))
            psd_dims.append(p2)
            row += length

        a = sp.coo_matrix(
            (
                np.concatenate(vals_i) if vals_i else np.array([]),
                (
                    np.concatenate(rows_i) if rows_i else np.array([], dtype=np.intp),
                    np.concatenate(cols_i) if cols_i else np.array([], dtype=np.intp),
                ),
            ),
            shape=(row, self.n_cols),
        ).tocsc()
        b = np.concatenate(b_parts) if b_parts else np.zeros(0)

        c = np.zeros(self.n_cols)
        offset = 0.0
        if problem.objective is not None:
            idx, vals, offset = self.expr_row(problem.objective)
            np.add.at(c, idx, vals)

        layout = _conic.ConeLayout(
            n_zero=n_zero, n_nonneg=n_nonneg, psd_dims=tuple(psd_dims)
        )
        return _conic.ConicData(a=a, b=b, c=c, layout=layout), offset

    def read_values(self, x):
        values = {}
        for name, (start, d, length) in self.mvar_cols.items():
            block = _conic.smat(x[start : start + length], 2 * d)
            values[name] = HermitianMatrix(unembed_array(block))
        nonneg = set(self.nonneg_scalars)
        for name, col in self.scalar_cols.items():
            val = float(x[col])
            values[name] = max(val, 0.0) if name in nonneg else val
        return values


def _compile(problem):
    return _Compiled(problem)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

_STATUS_MAP = {
    "optimal": SolveStatus.OPTIMAL,
    "infeasible": SolveStatus.INFEASIBLE,
    "unbounded": SolveStatus.UNBOUNDED,
    "max_iterations": SolveStatus.MAX_ITERATIONS,
}


def solve(problem, cfg=None, warm_start=None, factor_cache=None):
    """Solve an :class:`SdpProblem`.

    Parameters
    ----------
    problem : SdpProblem
    cfg : SolverConfig, optional
    warm_start : SdpSolution or (x, y, s) tuple, optional
        Starting point from a previous solve of a problem with the same
        constraint matrix (e.g., an earlier iteration whose objective
        changed).
    factor_cache : dict, optional
        Shared store that skips re-equilibration and refactorization when
        the constraint matrix repeats across calls.

    Returns
    -------
    SdpSolution
        ``status`` is Optimal, Infeasible, Unbounded, or MaxIterations;
        depths of violation of the returned point are reported in the
        residual fields rather than silently hidden.
    """
    cfg = cfg or SolverConfig()
    compiled = _compile(problem)
    data, offset = compiled.build()

    if cfg.engine == "ipm":
        result = _ipm.solve_ipm(data, cfg.kernel())
    elif cfg.engine == "splitting":
        warm = None
        if warm_start is not None:
            point = (
                warm_start.conic_point
                if isinstance(warm_start, SdpSolution)
                else warm_start
            )
            if point is not None and len(point[0]) == data.a.shape[1]:
                warm = point
        result = _conic.solve_conic(
            data, cfg.kernel(), warm_start=warm, factor_cache=factor_cache
        )
    else:
        raise SdpFormatError(f"unknown solver engine {cfg.engine!r}")
    status = _STATUS_MAP[result.status]

    if status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITERATIONS):
        values = compiled.read_values(result.x)
        objective = result.objective + offset
    elif status is SolveStatus.INFEASIBLE:
        values = {}
        objective = float("inf")
    else:  # unbounded
        values = {}
        objective = float("-inf")

    return SdpSolution(
        status=status,
        values=values,
        objective_value=objective,
        primal_residual=max(result.eq_viol, result.cone_viol),
        dual_residual=result.dual_res,
        gap=result.gap,
        iterations=result.iterations,
        conic_point=(result.x, result.y, result.s),
    )


_SLACK = "_phase1_slack"


def phase_one_problem(problem):
    """Slack-relaxed copy: LMIs gain s*I, equalities become |resid| <= s,
    inequalities gain +s; the objective is to minimize the slack s >= 0."""
    if any(name == _SLACK for name, _ in problem.scalar_vars):
        raise SdpFormatError(f"variable name {_SLACK!r} is reserved")
    lmis = tuple(
        replace(
            lmi,
            scalar_terms=tuple(lmi.scalar_terms)
            + (ScalarMatrixTerm(_SLACK, np.eye(lmi.dim)),),
        )
        for lmi in problem.lmi_constraints
    )
    ineqs = [e.shifted_by_scalar(_SLACK, 1.0) for e in problem.ineq_constraints]
    for e in problem.eq_constraints:
        ineqs.append(e.shifted_by_scalar(_SLACK, 1.0))
        ineqs.append(e.negated().shifted_by_scalar(_SLACK, 1.0))
    return SdpProblem(
        matrix_vars=problem.matrix_vars,
        scalar_vars=tuple(problem.scalar_vars) + ((_SLACK, True),),
        objective=LinearExpr(scalar_terms=((_SLACK, 1.0),)),
        lmi_constraints=lmis,
        eq_constraints=(),
        ineq_constraints=tuple(ineqs),
    )


def check_feasible(problem, cfg=None, factor_cache=None):
    """Phase-I feasibility detection.

    Minimizes a single scalar slack that relaxes every explicit
    constraint; the verdict is Feasible when the optimal slack is at most
    ``cfg.tol_feas``, Infeasible when it exceeds ``10 * tol_feas``, and
    Marginal in between (or when the solver hits its iteration cap).
    """
    cfg = cfg or SolverConfig()
    relaxed = phase_one_problem(problem)
    sol = solve(relaxed, cfg, factor_cache=factor_cache)
    if sol.status is not SolveStatus.OPTIMAL:
        slack = sol.values.get(_SLACK, float("nan")) if sol.values else float("nan")
        return FeasibilityVerdict(Feasibility.MARGINAL, float(slack), sol.status)
    slack = float(sol.values[_SLACK])
    if slack <= cfg.tol_feas:
        verdict = Feasibility.FEASIBLE
    elif slack > 10.0 * cfg.tol_feas:
        verdict = Feasibility.INFEASIBLE
    else:
        verdict = Feasibility.MARGINAL
    return FeasibilityVerdict(verdict, slack, sol.status)


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------


def _write_complex_block(fh, mat):
    mat = np.asarray(mat, dtype=complex)
    for r in range(mat.shape[0]):
        fh.write(
            " ".join(f"{v.real:.17g} {v.imag:.17g}" for v in mat[r]) + "\n"
        )


def _write_expr(fh, kind, index, expr):
    fh.write(
        f"{kind} {index} constant {expr.constant:.17g}"
        f" matrix_terms {len(expr.matrix_terms)}"
        f" scalar_terms {len(expr.scalar_terms)}\n"
    )
    for name, mat in expr.matrix_terms:
        fh.write(f"mterm {name} dim {mat.shape[0]}\n")
        _write_complex_block(fh, mat)
    for name, coeff in expr.scalar_terms:
        fh.write(f"sterm {name} {coeff:.17g}\n")


def dump_problem(problem, path):
    """Write a plain-text listing of the problem for external cross-checks.

    The format (documented in the README) lists variables, then the
    objective, LMI blocks, equalities, and inequalities; complex matrices
    are written dense row-major as ``re im`` pairs.
    """
    problem.validate()
    with open(path, "w") as fh:
        fh.write("SDP-DUMP 1\n")
        fh.write(f"matrix_vars {len(problem.matrix_vars)}\n")
        for name, d in problem.matrix_vars:
            fh.write(f"{name} {d}\n")
        fh.write(f"scalar_vars {len(problem.scalar_vars)}\n")
        for name, nonneg in problem.scalar_vars:
            fh.write(f"{name} {int(nonneg)}\n")
        if problem.objective is None:
            fh.write("objective none\n")
        else:
            _write_expr(fh, "objective", 0, problem.objective)
        fh.write(f"lmi_count {len(problem.lmi_constraints)}\n")
        for i, lmi in enumerate(problem.lmi_constraints):
            fh.write(
                f"lmi {i} dim {lmi.dim} matrix_terms {len(lmi.matrix_terms)}"
                f" scalar_terms {len(lmi.scalar_terms)} label {lmi.label or '-'}\n"
            )
            fh.write("constant\n")
            _write_complex_block(fh, lmi.constant)
            for t in lmi.matrix_terms:
                fh.write(
                    f"cterm {t.var} coeff {t.coeff:.17g} rows {t.factor.shape[0]}"
                    f" cols {t.factor.shape[1]}\n"
                )
                _write_complex_block(fh, t.factor)
            for t in lmi.scalar_terms:
                fh.write(f"sterm {t.var} dim {t.matrix.shape[0]}\n")
                _write_complex_block(fh, t.matrix)
        fh.write(f"eq_count {len(problem.eq_constraints)}\n")
        for i, e in enumerate(problem.eq_constraints):
            _write_expr(fh, "eq", i, e)
        fh.write(f"ineq_count {len(problem.ineq_constraints)}\n")
        for i, e in enumerate(problem.ineq_constraints):
            _write_expr(fh, "ineq", i, e)
