"""Monte Carlo experiment harness: seeded sweeps, aggregation, validation.

One experiment = one scenario spec x a set of methods x ``trials``
channel draws per SINR point.  Trial t draws its instance from seed
``spec.seed + t`` so every method sees identical channels, while each
method's randomized recovery uses an independent substream labeled by
(seed, trial, method).  Outputs are two CSVs — ``summary.csv`` with per
(method, SINR) means and ``trials.csv`` with one row per (method, SINR,
trial) — whose bytes depend only on the configuration.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import baselines, lmi, network, pipeline, sdp, stage1, stage2, stage3
from .hermitian import HermitianMatrix, embed_array

__all__ = [
    "METHOD_NAMES",
    "TrialRecord",
    "MethodSummary",
    "ExperimentResult",
    "default_methods",
    "run_trial",
    "aggregate",
    "run_experiment",
    "write_summary_csv",
    "write_trials_csv",
    "read_trials_csv",
    "convergence_traces",
    "write_trace_csv",
    "CheckResult",
    "ValidationReport",
    "validate",
]

METHOD_NAMES = ("proposed", "coordinated", "linf", "exhaustive")


def default_methods(spec):
    """All methods, except exhaustive search once 2^L stops being cheap."""
    methods = ["proposed", "coordinated", "linf"]
    if spec.rrh_count <= 6:
        methods.append("exhaustive")
    return tuple(methods)


@dataclass(frozen=True)
class TrialRecord:
    """One (method, SINR, trial) outcome; powers in watts.

    ``drain_power`` is the amplifier drain sum(T_l / eta_l), so
    ``network_power == fronthaul_power + drain_power`` holds per row.
    ``search_checks`` counts stage-two feasibility solves (-1 when the
    method runs no search); ``note`` carries error text for failed
    trials.
    """

    method: str
    sinr_db: float
    trial: int
    seed: int
    feasible: bool
    network_power: float
    transmit_power: float
    drain_power: float
    fronthaul_power: float
    active_count: int
    active_mask: int
    min_margin: float
    recovery: str
    search_checks: int
    note: str = ""


@dataclass(frozen=True)
class MethodSummary:
    method: str
    sinr_db: float
    trial_count: int
    failure_count: int
    mean_network_power: float
    mean_transmit_power: float
    mean_fronthaul_power: float
    mean_active_count: float


@dataclass
class ExperimentResult:
    spec: network.ScenarioSpec
    methods: tuple
    summaries: tuple
    trials: tuple

    def summary(self, method, sinr_db):
        for s in self.summaries:
            if s.method == method and s.sinr_db == sinr_db:
                return s
        raise KeyError(f"no summary for {method!r} at {sinr_db} dB")

    def validate(self):
        for r in self.trials:
            if not r.feasible:
                continue
            gap = abs(r.network_power - (r.fronthaul_power + r.drain_power))
            if gap > 1e-9 * max(1.0, r.network_power):
                raise ValueError(f"power accounting broken in {r}")
        for s in self.summaries:
            configured = self.spec.trials
            if s.trial_count + s.failure_count != configured:
                raise ValueError(f"trial bookkeeping broken in {s}")
        return self


def _randomization_seed(base_seed, trial, method):
    """Independent labeled substream for a method's randomized recovery."""
    ss = np.random.SeedSequence(
        entropy=int(base_seed), spawn_key=(int(trial), METHOD_NAMES.index(method))
    )
    return int(ss.generate_state(1)[0])


def _record_from_solution(inst, sol, base):
    transmit = sum(sol.rrh_power(inst, l) for l in sorted(sol.active_set))
    drain = sum(
        sol.rrh_power(inst, l) / inst.eta[l] for l in sorted(sol.active_set)
    )
    fronthaul = float(sum(inst.p_fronthaul[l] for l in sorted(sol.active_set)))
    return replace(
        base,
        feasible=True,
        network_power=float(sol.network_power),
        transmit_power=float(transmit),
        drain_power=float(drain),
        fronthaul_power=fronthaul,
        active_count=len(sol.active_set),
        active_mask=sum(1 << l for l in sol.active_set),
        min_margin=float(np.min(sol.per_user_margin)),
    )


def run_trial(spec, sinr_db, trial, methods):
    """All methods on the trial's shared channel draw; never raises."""
    inst = network.generate_instance(spec, seed=spec.seed + trial, sinr_db=sinr_db)
    records = []
    for method in methods:
        rnd = stage3.RandomizationConfig(
            seed=_randomization_seed(spec.seed, trial, method)
        )
        base = TrialRecord(
            method=method,
            sinr_db=float(sinr_db),
            trial=trial,
            seed=spec.seed + trial,
            feasible=False,
            network_power=float("inf"),
            transmit_power=float("inf"),
            drain_power=float("inf"),
            fronthaul_power=float("inf"),
            active_count=0,
            active_mask=0,
            min_margin=float("nan"),
            recovery="",
            search_checks=-1,
        )
        try:
            if method == "proposed":
                res = pipeline.run_pipeline(
                    inst, pipeline.PipelineConfig(randomization=rnd)
                )
                if res.feasible:
                    records.append(
                        replace(
                            _record_from_solution(inst, res.solution, base),
                            recovery=res.recovery or "",
                            search_checks=res.search.check_count,
                        )
                    )
                else:
                    records.append(replace(base, note=res.warning or "infeasible"))
            elif method == "coordinated":
                sol = baselines.coordinated_beamforming(inst, randomization=rnd)
                records.append(
                    _record_from_solution(inst, sol, base)
                    if sol is not None
                    else replace(base, note="infeasible")
                )
            elif method == "linf":
                sol = baselines.linf_pipeline(inst, randomization=rnd)
                records.append(
                    _record_from_solution(inst, sol, base)
                    if sol is not None
                    else replace(base, note="infeasible")
                )
            elif method == "exhaustive":
                sol = baselines.exhaustive_search(inst, randomization=rnd)
                records.append(
                    _record_from_solution(inst, sol, base)
                    if sol is not None
                    else replace(base, note="infeasible")
                )
            else:
                raise ValueError(f"unknown method {method!r}")
        except ValueError:
            raise  # configuration errors should abort loudly
        except Exception as exc:  # per-trial failure: record, keep sweeping
            records.append(
                replace(base, note=f"{type(exc).__name__}: {exc}"[:120])
            )
    return tuple(records)


def aggregate(records, methods=None, sinr_db_list=None):
    """Per (method, SINR) means over feasible trials, deterministic fold.

    Records are summed in (method, SINR, trial) order, so aggregating
    any permutation or concatenation of the same trial rows reproduces
    identical floats.
    """
    if methods is None:
        methods = tuple(dict.fromkeys(r.method for r in records))
    if sinr_db_list is None:
        sinr_db_list = tuple(sorted({r.sinr_db for r in records}))
    summaries = []
    for method in methods:
        for sinr in sinr_db_list:
            rows = sorted(
                (r for r in records if r.method == method and r.sinr_db == sinr),
                key=lambda r: r.trial,
            )
            ok = [r for r in rows if r.feasible]
            n = len(ok)

            def mean(field):
                if not n:
                    return float("nan")
                return sum(getattr(r, field) for r in ok) / n

            summaries.append(
                MethodSummary(
                    method=method,
                    sinr_db=float(sinr),
                    trial_count=n,
                    failure_count=len(rows) - n,
                    mean_network_power=mean("network_power"),
                    mean_transmit_power=mean("transmit_power"),
                    mean_fronthaul_power=mean("fronthaul_power"),
                    mean_active_count=mean("active_count"),
                )
            )
    return tuple(summaries)


def _trial_unit(args):
    spec, sinr_db, trial, methods = args
    return run_trial(spec, sinr_db, trial, methods)


def run_experiment(config, methods=None, trials=None, seed=None, out_dir=None,
                   jobs=1, progress=None):
    """Full sweep over ``spec.sinr_db_list`` x trials x methods.

    ``config`` is a scenario TOML path or a ScenarioSpec.  ``trials`` /
    ``seed`` override the spec; ``jobs`` > 1 dispatches trials to a
    process pool (the fold back into summaries stays ordered, so results
    are identical to a sequential run).  When ``out_dir`` is given,
    ``summary.csv`` and ``trials.csv`` are written there.
    """
    spec = config if isinstance(config, network.ScenarioSpec) else \
        network.load_scenario(config)
    if trials is not None or seed is not None:
        spec = replace(
            spec,
            trials=spec.trials if trials is None else int(trials),
            seed=spec.seed if seed is None else int(seed),
        ).validate()
    methods = tuple(methods) if methods else default_methods(spec)
    for m in methods:
        if m not in METHOD_NAMES:
            raise ValueError(f"unknown method {m!r}; known: {METHOD_NAMES}")
    if "exhaustive" in methods and spec.rrh_count > baselines.MAX_EXHAUSTIVE_RRHS:
        raise ValueError(
            f"exhaustive search infeasible for L={spec.rrh_count} RRHs"
        )
    units = [
        (spec, sinr, t, methods)
        for sinr in spec.sinr_db_list
        for t in range(spec.trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_trial_unit, units, chunksize=1))
    else:
        batches = []
        for unit in units:
            batches.append(_trial_unit(unit))
            if progress is not None:
                progress(unit[1], unit[2])
    records = tuple(r for batch in batches for r in batch)
    result = ExperimentResult(
        spec=spec,
        methods=methods,
        summaries=aggregate(records, methods, spec.sinr_db_list),
        trials=records,
    ).validate()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_summary_csv(result, os.path.join(out_dir, "summary.csv"))
        write_trials_csv(result, os.path.join(out_dir, "trials.csv"))
    return result


_SUMMARY_COLUMNS = (
    "method", "sinr_db", "trials", "failures", "mean_network_power_w",
    "mean_transmit_power_w", "mean_fronthaul_power_w", "mean_active_rrhs",
)

_TRIAL_COLUMNS = (
    "method", "sinr_db", "trial", "seed", "feasible", "network_power_w",
    "transmit_power_w", "drain_power_w", "fronthaul_power_w", "active_count",
    "active_mask", "min_margin", "recovery", "search_checks", "note",
)


def write_summary_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for s in result.summaries:
            writer.writerow([
                s.method, repr(s.sinr_db), s.trial_count, s.failure_count,
                repr(s.mean_network_power), repr(s.mean_transmit_power),
                repr(s.mean_fronthaul_power), repr(s.mean_active_count),
            ])


def write_trials_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRIAL_COLUMNS)
        for r in result.trials:
            writer.writerow([
                r.method, repr(r.sinr_db), r.trial, r.seed, int(r.feasible),
                repr(r.network_power), repr(r.transmit_power),
                repr(r.drain_power), repr(r.fronthaul_power), r.active_count,
                r.active_mask, repr(r.min_margin), r.recovery,
                r.search_checks, r.note,
            ])


def read_trials_csv(path):
    """Parse rows written by :func:`write_trials_csv` back into records."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != _TRIAL_COLUMNS:
            raise ValueError(f"unexpected trial CSV header in {path}")
        for row in reader:
            records.append(TrialRecord(
                method=row["method"],
                sinr_db=float(row["sinr_db"]),
                trial=int(row["trial"]),
                seed=int(row["seed"]),
                feasible=bool(int(row["feasible"])),
                network_power=float(row["network_power_w"]),
                transmit_power=float(row["transmit_power_w"]),
                drain_power=float(row["drain_power_w"]),
                fronthaul_power=float(row["fronthaul_power_w"]),
                active_count=int(row["active_count"]),
                active_mask=int(row["active_mask"]),
                min_margin=float(row["min_margin"]),
                recovery=row["recovery"],
                search_checks=int(row["search_checks"]),
                note=row["note"],
            ))
    return tuple(records)


# ---------------------------------------------------------------------------
# convergence traces
# ---------------------------------------------------------------------------


def convergence_traces(spec, count=None, cfg=None, sinr_db=None):
    """Stage-one objective traces on ``count`` seeded instances.

    Returns (seed, AlternatingResult) pairs; instance i uses seed
    ``spec.seed + i`` at the first (or given) SINR point.
    """
    count = spec.trials if count is None else int(count)
    out = []
    for i in range(count):
        inst = network.generate_instance(spec, seed=spec.seed + i, sinr_db=sinr_db)
        out.append((spec.seed + i, stage1.run_alternating(inst, cfg)))
    return tuple(out)


def write_trace_csv(traces, path):
    """One row per (instance, iteration) with the surrogate objective."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "seed", "iteration", "objective"])
        for idx, (seed, result) in enumerate(traces):
            for it, value in enumerate(result.objective_trace):
                writer.writerow([idx, seed, it, repr(float(value))])


# ---------------------------------------------------------------------------
# validation suites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float  # worst observed error/margin for the check
    budget: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    level: str
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def format(self):
        lines = [f"validation level={self.level}"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"  [{status}] {c.name}: measured={c.measured:.3e} "
                f"budget={c.budget:.3e}"
                + (f" ({c.detail})" if c.detail else "")
            )
        lines.append("result: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


_VALIDATION_SCENARIO = {
    "rrh_count": 3,
    "antennas_per_rrh": 2,
    "group_sizes": [2, 1],
    "error_radius": 0.05,
    "sinr_db_list": [4.0],
    "fronthaul_power_watts": 5.6,
    "eta": 0.25,
    "p_max_watts": 10.0,
    "trials": 1,
    "seed": 0,
}

_SCENARIO_ONE = {
    "rrh_count": 5,
    "antennas_per_rrh": 2,
    "group_sizes": [2, 2],
    "error_radius": 0.01,
    "sinr_db_list": [0.0, 2.0, 4.0, 6.0, 8.0],
    "fronthaul_power_watts": 5.6,
    "eta": 0.25,
    "p_max_watts": 10.0,
    "trials": 50,
    "seed": 2024,
}


def _random_psd(rng, n, scale=1.0):
    f = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return HermitianMatrix(scale * (f @ f.conj().T) / n)


def _check_solver_analytic():
    """A few problems with pencil-and-paper optima, on both engines."""
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    cases = []
    # min x subject to x >= 3
    cases.append((
        sdp.SdpProblem(
            scalar_vars=(("x", True),),
            objective=sdp.LinearExpr(scalar_terms=(("x", 1.0),)),
            ineq_constraints=(
                sdp.LinearExpr(scalar_terms=(("x", 1.0),), constant=-3.0),
            ),
        ),
        3.0,
    ))
    # min tr(A X) over the spectraplex: the bottom eigenvalue, 1
    cases.append((
        sdp.SdpProblem(
            matrix_vars=(("X", 2),),
            objective=sdp.LinearExpr(matrix_terms=(("X", a),)),
            eq_constraints=(
                sdp.LinearExpr(matrix_terms=(("X", np.eye(2)),), constant=-1.0),
            ),
        ),
        1.0,
    ))
    # min t subject to t I - A >= 0: the top eigenvalue, 3
    cases.append((
        sdp.SdpProblem(
            scalar_vars=(("t", True),),
            objective=sdp.LinearExpr(scalar_terms=(("t", 1.0),)),
            lmi_constraints=(
                sdp.LmiConstraint(
                    dim=2,
                    constant=-a,
                    scalar_terms=(sdp.ScalarMatrixTerm("t", np.eye(2)),),
                ),
            ),
        ),
        3.0,
    ))
    worst = 0.0
    for engine in ("splitting", "ipm"):
        cfg = sdp.SolverConfig(engine=engine)
        for problem, expected in cases:
            sol = sdp.solve(problem, cfg)
            if sol.status is not sdp.SolveStatus.OPTIMAL:
                return CheckResult(
                    "solver_analytic", False, math.inf, 1e-5,
                    f"{engine}: unexpected status {sol.status.name}",
                )
            worst = max(
                worst,
                abs(sol.objective_value - expected) / max(1.0, abs(expected)),
            )
        # verdict problems: empty feasible set and unbounded descent
        infeasible = sdp.SdpProblem(
            scalar_vars=(("x", True),),
            ineq_constraints=(
                sdp.LinearExpr(scalar_terms=(("x", 1.0),), constant=-1.0),
                sdp.LinearExpr(scalar_terms=(("x", -1.0),)),
            ),
        )
        if sdp.solve(infeasible, cfg).status is not sdp.SolveStatus.INFEASIBLE:
            return CheckResult("solver_analytic", False, math.inf, 1e-5,
                               f"{engine}: missed infeasibility")
        unbounded = sdp.SdpProblem(
            scalar_vars=(("x", True),),
            objective=sdp.LinearExpr(scalar_terms=(("x", -1.0),)),
        )
        if sdp.solve(unbounded, cfg).status is not sdp.SolveStatus.UNBOUNDED:
            return CheckResult("solver_analytic", False, math.inf, 1e-5,
                               f"{engine}: missed unboundedness")
    return CheckResult("solver_analytic", worst <= 1e-5, worst, 1e-5,
                       "both engines")


def _check_weight_identity(count):
    """Closed-form weights vs the square-of-weighted-root-sum identity."""
    inst = network.generate_instance(
        network.scenario_from_dict(_VALIDATION_SCENARIO), seed=1
    )
    rng = np.random.default_rng(10)
    w = inst.p_fronthaul / inst.eta
    eps = 1e-3
    worst = 0.0
    for _ in range(count):
        q = tuple(_random_psd(rng, inst.N) for _ in range(inst.M))
        lifted = stage1.LiftedSolution(q=q, lam=np.zeros(inst.K))
        star = stage1.mu_update(lifted, inst, eps)
        lhs = lmi.build_gs_objective(inst, star.mu, eps).value(lifted.q_values())
        root_sum = 0.0
        for l in range(inst.L):
            sl = inst.antenna_slice(l)
            tr = sum(float(np.real(np.trace(qm.array[sl, sl]))) for qm in q)
            root_sum += math.sqrt(w[l] * (tr + eps * inst.M * inst.N))
        rhs = (2.0 * root_sum) ** 2
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return CheckResult("weight_update_identity", worst <= 1e-10, worst, 1e-10,
                       f"{count} random covariance draws")


def _check_norm_identity(count):
    """Surrogate at optimal weights, eps=0, equals the squared mixed norm."""
    inst = network.generate_instance(
        network.scenario_from_dict(_VALIDATION_SCENARIO), seed=2
    )
    rng = np.random.default_rng(11)
    w = inst.p_fronthaul / inst.eta
    worst = 0.0
    for _ in range(count):
        beams = rng.standard_normal((inst.M, inst.N)) \
            + 1j * rng.standard_normal((inst.M, inst.N))
        q_values = {
            lmi.q_var_name(m): np.outer(v, v.conj()) for m, v in enumerate(beams)
        }
        block = np.array([
            math.sqrt(float(np.sum(np.abs(beams[:, inst.antenna_slice(l)]) ** 2)))
            for l in range(inst.L)
        ])
        root = np.sqrt(w) * block
        mu = root / root.sum()
        lhs = lmi.build_gs_objective(inst, mu, 0.0).value(q_values)
        omega_sq = (2.0 * float(root.sum())) ** 2
        worst = max(worst, abs(lhs - omega_sq) / max(1.0, omega_sq))
    return CheckResult("sparsity_norm_identity", worst <= 1e-8, worst, 1e-8,
                       f"{count} random beamformers")


def _grid_quadratic_min(a, b, c, points):
    """Grid oracle for min of x'Ax + 2b'x + c over the unit ball.

    Scans a dense grid of dual multipliers, mapping each to a feasible
    point (scaled to the ball when outside, padded along the bottom
    eigenvector when inside); the unconstrained stationary point is also
    tried when the model is convex.  Pure evaluation, no root finding.
    """
    d, basis = np.linalg.eigh(a)
    g = basis.T @ b
    lo = max(0.0, -float(d[0]))
    span = float(np.linalg.norm(g)) + 1.0
    nus = lo + span * (np.arange(points) + 1.0) / points
    denom = d[None, :] + nus[:, None]  # strictly positive: nu > max(0, -d0)
    x = -g[None, :] / denom
    norms = np.linalg.norm(x, axis=1)
    values = []
    outside = norms > 1.0
    if np.any(outside):
        scaled = x[outside] / norms[outside, None]
        values.append(
            np.einsum("ij,j,ij->i", scaled, d, scaled)
            + 2.0 * scaled @ g + c
        )
    inside = ~outside
    if np.any(inside):
        rest = norms[inside] ** 2 - x[inside, 0] ** 2
        pad = np.sqrt(np.clip(1.0 - rest, 0.0, None))
        for sign in (1.0, -1.0):
            y = x[inside].copy()
            y[:, 0] = sign * pad  # land exactly on the sphere
            values.append(np.einsum("ij,j,ij->i", y, d, y) + 2.0 * y @ g + c)
        if lo == 0.0:  # interior stationary points are feasible as-is
            y = x[inside]
            values.append(np.einsum("ij,j,ij->i", y, d, y) + 2.0 * y @ g + c)
    return float(min(np.min(v) for v in values))


def _check_margin_grid(instances, points):
    """Trust-region margins against the dual-grid oracle, N=3 networks."""
    spec = network.scenario_from_dict(dict(
        _VALIDATION_SCENARIO, rrh_count=3, antennas_per_rrh=1,
    ))
    rng = np.random.default_rng(12)
    worst = 0.0
    for i in range(instances):
        inst = network.generate_instance(spec, seed=100 + i)
        beams = 0.5 * (
            rng.standard_normal((inst.M, inst.N))
            + 1j * rng.standard_normal((inst.M, inst.N))
        )
        for k in range(inst.K):
            margin = stage3.worst_case_margin(inst, beams, k)
            a, b, c = stage3._margin_quadratic(inst, beams, k)
            target = float(inst.gamma[k] * inst.sigma2[k])
            oracle = _grid_quadratic_min(a, b, c, points) - target
            worst = max(worst, abs(margin - oracle))
    return CheckResult("margin_grid_oracle", worst <= 1e-4, worst, 1e-4,
                       f"{instances} instances x {points} grid points")


def _check_slemma_sampling(instances, samples, cone_tol=None):
    """Solved stage-one covariances sampled across the error ellipsoid.

    Draws points on and inside each user's ellipsoid and evaluates the
    lifted QoS quadratic directly; the robust constraints certify these
    can never dip below the margin floor.  ``cone_tol`` overrides the
    stage-one solver's cone tolerance (loosening it to ~1e-1 must make
    this check fail; that path is exercised by tests).
    """
    spec = network.scenario_from_dict(_VALIDATION_SCENARIO)
    cfg = None
    if cone_tol is not None:
        # the knob loosens every stopping criterion: the kernel refines
        # all residuals together, so a lone cone bound would never bind
        ct = float(cone_tol)
        cfg = stage1.Stage1Config(
            solver=sdp.SolverConfig(
                tol_cone=ct, tol_eq=ct, tol_gap=ct, tol_dual=ct
            )
        )
    rng = np.random.default_rng(13)
    worst = math.inf
    solved = 0
    for i in range(instances):
        inst = network.generate_instance(spec, seed=200 + i)
        res = stage1.run_alternating(inst, cfg)
        if not res.feasible:
            continue
        solved += 1
        q = [qm.array for qm in res.lifted.q]
        for k in range(inst.K):
            m = inst.group_of(k)
            gmat = q[m] - float(inst.gamma[k]) * sum(
                q[j] for j in range(inst.M) if j != m
            )
            radius = 1.0 / math.sqrt(float(np.asarray(inst.theta[k])[0, 0].real))
            u = rng.standard_normal((samples, inst.N)) \
                + 1j * rng.standard_normal((samples, inst.N))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = rng.uniform(0.0, 1.0, size=(samples, 1)) ** (1.0 / (2 * inst.N))
            r[: samples // 2] = 1.0
            h = inst.h_hat[k] + radius * r * u
            vals = np.real(np.einsum("ij,jk,ik->i", h.conj(), gmat, h))
            margin = float(np.min(vals)) - float(inst.gamma[k] * inst.sigma2[k])
            worst = min(worst, margin)
    detail = f"{solved}/{instances} instances x {samples} samples per user"
    return CheckResult("s_lemma_sampling", worst >= -1e-6 and solved > 0,
                       worst, -1e-6, detail)


def _check_embedding_spectrum():
    rng = np.random.default_rng(14)
    worst = 0.0
    for _ in range(20):
        h = _random_psd(rng, 5).array + 1j * np.triu(np.ones((5, 5)), 1) * 0.1
        h = 0.5 * (h + h.conj().T)
        emb = embed_array(h)
        want = np.repeat(np.sort(np.linalg.eigvalsh(h)), 2)
        got = np.sort(np.linalg.eigvalsh(emb))
        worst = max(worst, float(np.max(np.abs(want - got))))
    return CheckResult("embedding_spectrum", worst <= 1e-9, worst, 1e-9,
                       "20 random Hermitian matrices, doubled spectra")


def _check_exhaustive_bound(instances):
    """Proposed pipeline vs the subset-enumeration optimum, plus the
    stage-two probe budget, on small-network instances."""
    spec = network.scenario_from_dict(_SCENARIO_ONE)
    worst = -math.inf
    budget = stage2.max_checks(spec.rrh_count)
    for i in range(instances):
        inst = network.generate_instance(spec, seed=spec.seed + i, sinr_db=4.0)
        res = pipeline.run_pipeline(inst)
        best = baselines.exhaustive_search(inst)
        if not res.feasible or best is None:
            return CheckResult("exhaustive_bound", False, math.inf, 1e-6,
                               f"instance {i} infeasible")
        if res.search.check_count > budget:
            return CheckResult(
                "exhaustive_bound", False, float(res.search.check_count),
                float(budget), f"probe budget exceeded on instance {i}",
            )
        worst = max(worst, best.network_power - res.solution.network_power)
    return CheckResult("exhaustive_bound", worst <= 1e-6, worst, 1e-6,
                       f"{instances} instances at 4 dB, probe budget held")


def validate(level="quick", cone_tol=None):
    """Run the oracle suites; ``full`` adds the slow comparisons."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    full = level == "full"
    checks = [
        _check_solver_analytic(),
        _check_weight_identity(1000 if full else 200),
        _check_norm_identity(1000 if full else 200),
        _check_margin_grid(50 if full else 10, 10 ** 6 if full else 10 ** 5),
        _check_slemma_sampling(20 if full else 5,
                               10_000 if full else 2_000, cone_tol),
        _check_embedding_spectrum(),
    ]
    if full:
        checks.append(_check_exhaustive_bound(10))
    return ValidationReport(level, tuple(checks))
