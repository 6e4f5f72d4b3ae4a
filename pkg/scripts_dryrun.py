"""Reduced-trial direction check for the two benchmark scenarios."""
import sys
import time

sys.path.insert(0, "src")

from rgsbeam import harness, network  # noqa: E402


def progress(record):
    print(
        f"  {record.method:12s} sinr={record.sinr_db:4.1f} trial={record.trial}"
        f" power={record.network_power:8.3f} active={record.active_count}",
        flush=True,
    )


def table(result, field):
    print(f"--- {field} ---")
    header = "method      " + "".join(f"{s:>9.1f}" for s in result.spec.sinr_db_list)
    print(header)
    for method in result.methods:
        cells = "".join(
            f"{getattr(result.summary(method, s), field):9.3f}"
            for s in result.spec.sinr_db_list
        )
        print(f"{method:12s}{cells}")


def main():
    t0 = time.perf_counter()
    spec1 = network.load_scenario("configs/scenario_one.toml")
    r1 = harness.run_experiment(
        spec1, trials=8, out_dir="/tmp/dry_s1", progress=progress
    )
    print(f"\n=== scenario one (8 trials) {time.perf_counter()-t0:.0f}s ===")
    table(r1, "mean_active_count")
    table(r1, "mean_network_power")

    t1 = time.perf_counter()
    spec2 = network.load_scenario("configs/scenario_two.toml")
    r2 = harness.run_experiment(
        spec2, methods=("proposed", "coordinated", "linf"),
        trials=6, out_dir="/tmp/dry_s2", progress=progress,
    )
    print(f"\n=== scenario two (6 trials) {time.perf_counter()-t1:.0f}s ===")
    table(r2, "mean_active_count")
    table(r2, "mean_network_power")
    table(r2, "mean_fronthaul_power")

    print("\n--- direction checks ---")
    ok = True
    counts = {
        m: [r1.summary(m, s).mean_active_count for s in spec1.sinr_db_list]
        for m in r1.methods
    }
    for m in ("proposed", "linf", "exhaustive"):
        mono = all(b >= a - 1e-12 for a, b in zip(counts[m], counts[m][1:]))
        print(f"counts monotone {m}: {mono}")
        ok &= mono
    gap_linf = max(p - l for p, l in zip(counts["proposed"], counts["linf"]))
    gap_exh = max(p - e for p, e in zip(counts["proposed"], counts["exhaustive"]))
    print(f"max proposed-linf count gap: {gap_linf:+.3f} (need <= 0.15)")
    print(f"max proposed-exhaustive count gap: {gap_exh:+.3f} (need <= 0.2)")
    ok &= gap_linf <= 0.15 and gap_exh <= 0.2
    for s in spec1.sinr_db_list:
        p = r1.summary("proposed", s).mean_network_power
        e = r1.summary("exhaustive", s).mean_network_power
        c = r1.summary("coordinated", s).mean_network_power
        ratio = p / e
        below = p < c
        print(f"sinr {s}: proposed/exhaustive={ratio:.4f}"
              f" below-coordinated={below}")
        ok &= ratio <= 1.05
        if s <= 4.0:
            ok &= below
    for s in (0.0, 2.0):
        p = r2.summary("proposed", s).mean_network_power
        l = r2.summary("linf", s).mean_network_power
        print(f"s2 sinr {s}: proposed net {p:.3f} < linf net {l:.3f}: {p < l}")
        ok &= p < l
    for s in spec2.sinr_db_list:
        pf = r2.summary("proposed", s).mean_fronthaul_power
        lf = r2.summary("linf", s).mean_fronthaul_power
        print(f"s2 sinr {s}: proposed fh {pf:.3f} < linf fh {lf:.3f}: {pf < lf}")
        ok &= pf < lf
    print(f"\nALL DIRECTIONS OK: {ok}")
    print(f"total {time.perf_counter()-t0:.0f}s")


if __name__ == "__main__":
    main()
