"""Throughput comparison of the compiled and pure-Python path kernels.

Runs the same replica batches through both backends, checks that they
produce bit-identical terminal records (they share one stream layout,
so any divergence is a bug, not jitter), then times each and reports
paths/s, events/s, and the speedup.

Usage::

    python3 benchmarks/bench_kernels.py [--n 20000] [--threads 4] [--repeat 3]
"""

import argparse
import time

import numpy as np

from ssmp_lab.kernel import available_kernel_names, run_replicas
from ssmp_lab.map_core import JumpLaw, LevyComponent, MapSpec


def drift_spec() -> MapSpec:
    """Switching drifts only: the cheapest event loop (two-state)."""
    return MapSpec.build(
        [[-1.0, 1.0], [1.0, -1.0]],
        (LevyComponent(drift=1.0), LevyComponent(drift=-3.0)),
    )


def jumpy_workload_spec() -> MapSpec:
    """Compound-Poisson jumps, mixtures, and switch jumps all active."""
    comp0 = LevyComponent(drift=-1.0, cp_rate=1.0, cp_jump_law=JumpLaw.exponential(0.5, +1))
    comp1 = LevyComponent(
        drift=0.5,
        cp_rate=0.5,
        cp_jump_law=JumpLaw.mixture(
            (0.6, 0.4), (JumpLaw.exponential(0.4, -1), JumpLaw.point_mass(0.3))
        ),
    )
    return MapSpec.build(
        [[-2.0, 2.0], [1.5, -1.5]],
        (comp0, comp1),
        {(0, 1): JumpLaw.point_mass(0.2), (1, 0): JumpLaw.exponential(0.3, -1)},
    )


WORKLOADS = (
    ("drift, fixed horizon", drift_spec(), dict(horizon=200.0)),
    ("jumpy, fixed horizon", jumpy_workload_spec(), dict(horizon=200.0)),
    ("jumpy, passage depth", jumpy_workload_spec(), dict(down_level=-60.0)),
)


def check_agreement(n: int, threads: int) -> None:
    for label, spec, stop in WORKLOADS:
        batches = [
            run_replicas(spec, n=min(n, 2000), seed=7, threads=threads, kernel=k, **stop)
            for k in available_kernel_names()
        ]
        first = batches[0]
        for other in batches[1:]:
            for field in ("t_end", "xi_end", "state_end", "reason", "n_events"):
                a, b = getattr(first, field), getattr(other, field)
                if not np.array_equal(a, b):
                    raise SystemExit(f"kernel mismatch on {label!r}, field {field}")
    names = "/".join(available_kernel_names())
    print(f"agreement: {names} produce identical records on all workloads\n")


def bench(n: int, threads: int, repeat: int) -> None:
    header = f"{'workload':24} {'kernel':9} {'paths/s':>12} {'events/s':>13} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, spec, stop in WORKLOADS:
        rates = {}
        events = 0
        for kernel in available_kernel_names():
            best = 0.0
            for r in range(repeat):
                t0 = time.perf_counter()
                batch = run_replicas(
                    spec, n=n, seed=1234 + r, threads=threads, kernel=kernel, **stop
                )
                dt = time.perf_counter() - t0
                best = max(best, n / dt)
                events = int(batch.n_events.sum())
            rates[kernel] = best
        floor = min(rates.values())
        for kernel, rate in rates.items():
            ev_rate = rate / n * events
            print(f"{label:24} {kernel:9} {rate:12.0f} {ev_rate:13.0f} {rate / floor:7.1f}x")
        print()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20_000, help="replicas per timing run")
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=3, help="keep the best of this many runs")
    args = parser.parse_args()
    check_agreement(args.n, args.threads)
    bench(args.n, args.threads, args.repeat)


if __name__ == "__main__":
    main()
