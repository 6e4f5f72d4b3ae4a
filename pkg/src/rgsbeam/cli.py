"""Command-line entry points: experiment sweeps, validation, one-shot solves.

``rgsbeam run config.toml`` sweeps a scenario and writes summary/trial
CSVs; ``rgsbeam validate`` runs the oracle checks; ``rgsbeam solve``
handles a single JSON-described instance; ``rgsbeam trace`` exports
stage-one objective traces.  Output directories resolve from --out-dir,
then $RGSBEAM_OUT_DIR, then ./results.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import baselines, harness, network, pipeline, stage3

ENV_OUT_DIR = "RGSBEAM_OUT_DIR"


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rgsbeam",
        description="robust group sparse beamforming experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="sweep a scenario config, write CSVs")
    run_p.add_argument("config", help="scenario TOML path")
    run_p.add_argument(
        "--methods",
        help="comma-separated subset of: " + ",".join(harness.METHOD_NAMES),
    )
    run_p.add_argument("--trials", type=int, help="override spec trial count")
    run_p.add_argument("--seed", type=int, help="override spec base seed")
    run_p.add_argument("--out-dir", dest="out_dir")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="worker processes (default 1)")

    val_p = sub.add_parser("validate", help="run the oracle check suites")
    val_p.add_argument("--level", choices=("quick", "full"), default="quick")
    val_p.add_argument(
        "--cone-tol", dest="cone_tol", type=float,
        help="override the stage-one solver cone tolerance (testing knob)",
    )

    solve_p = sub.add_parser("solve", help="solve one JSON-described instance")
    solve_p.add_argument("instance", help="instance JSON path, or - for stdin")
    solve_p.add_argument("--method", choices=harness.METHOD_NAMES,
                         default="proposed")
    solve_p.add_argument("--out", help="write the result JSON here")
    solve_p.add_argument("--csv", help="also export beamformers as CSV here")

    trace_p = sub.add_parser("trace", help="export stage-one objective traces")
    trace_p.add_argument("config", help="scenario TOML path")
    trace_p.add_argument("--instances", type=int,
                         help="instance count (default: spec trials)")
    trace_p.add_argument("--out-dir", dest="out_dir")
    return parser


def _resolve_out_dir(arg):
    return arg or os.environ.get(ENV_OUT_DIR) or "results"


def _cmd_run(args):
    methods = None
    if args.methods:
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    out_dir = _resolve_out_dir(args.out_dir)

    def progress(sinr, trial):
        print(f"  finished sinr={sinr:g} dB trial={trial}", flush=True)

    result = harness.run_experiment(
        args.config,
        methods=methods,
        trials=args.trials,
        seed=args.seed,
        out_dir=out_dir,
        jobs=args.jobs,
        progress=progress,
    )
    print(f"{'method':<12} {'sinr_db':>7} {'trials':>6} {'fail':>4} "
          f"{'network_w':>10} {'transmit_w':>10} {'active':>6}")
    for s in result.summaries:
        print(f"{s.method:<12} {s.sinr_db:>7.1f} {s.trial_count:>6} "
              f"{s.failure_count:>4} {s.mean_network_power:>10.4f} "
              f"{s.mean_transmit_power:>10.4f} {s.mean_active_count:>6.2f}")
    print(f"wrote {os.path.join(out_dir, 'summary.csv')} and "
          f"{os.path.join(out_dir, 'trials.csv')}")
    return 0


def _cmd_validate(args):
    report = harness.validate(args.level, cone_tol=args.cone_tol)
    print(report.format())
    return 0 if report.passed else 1


def _load_instance(payload):
    spec = network.scenario_from_dict(payload["scenario"])
    inst = network.generate_instance(
        spec,
        seed=int(payload.get("seed", spec.seed)),
        sinr_db=payload.get("sinr_db"),
    )
    if "h_hat" in payload:
        h = np.asarray(payload["h_hat"]["re"], dtype=float) \
            + 1j * np.asarray(payload["h_hat"]["im"], dtype=float)
        if h.shape != inst.h_hat.shape:
            raise ValueError(
                f"h_hat shape {h.shape} does not match ({inst.K}, {inst.N})"
            )
        h.setflags(write=False)
        inst = dataclasses.replace(inst, h_hat=h).validate()
    return inst


def _solve_one(inst, method, randomization):
    if method == "proposed":
        res = pipeline.run_pipeline(
            inst, pipeline.PipelineConfig(randomization=randomization)
        )
        return res.solution, res.recovery or ""
    if method == "coordinated":
        return baselines.coordinated_beamforming(
            inst, randomization=randomization
        ), ""
    if method == "linf":
        return baselines.linf_pipeline(inst, randomization=randomization), ""
    return baselines.exhaustive_search(inst, randomization=randomization), ""


def _cmd_solve(args):
    if args.instance == "-":
        payload = json.load(sys.stdin)
    else:
        with open(args.instance) as fh:
            payload = json.load(fh)
    inst = _load_instance(payload)
    randomization = stage3.RandomizationConfig(
        seed=int(payload.get("randomization_seed", 0))
    )
    sol, recovery = _solve_one(inst, args.method, randomization)
    if sol is None:
        report = {"feasible": False, "method": args.method}
    else:
        report = {
            "feasible": True,
            "method": args.method,
            "active_rrhs": sorted(sol.active_set),
            "network_power_w": sol.network_power,
            "min_margin": float(np.min(sol.per_user_margin)),
            "recovery": recovery,
            "beamformers": {
                "re": sol.beamformers.real.tolist(),
                "im": sol.beamformers.imag.tolist(),
            },
        }
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if sol is not None and args.csv:
        stage3.solution_to_csv(inst, sol, args.csv)
    return 0 if sol is not None else 1


def _cmd_trace(args):
    spec = network.load_scenario(args.config)
    traces = harness.convergence_traces(spec, count=args.instances)
    out_dir = _resolve_out_dir(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "traces.csv")
    harness.write_trace_csv(traces, path)
    converged = sum(1 for _, r in traces if r.converged)
    print(f"{converged}/{len(traces)} instances converged; wrote {path}")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "solve": _cmd_solve,
        "trace": _cmd_trace,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
