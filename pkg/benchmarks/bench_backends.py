"""Benchmark the backward-induction kernels: compiled extension vs NumPy.

Runs the full-scale reference instance (91 energy x 86 temperature states,
101 actions, 96 intervals) plus a half-resolution variant, and reports the
per-phase timings of each backend. Invoke as:

    python benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

from chargeopt import electrical
from chargeopt.aging import default_params
from chargeopt.evaluation import default_scenario
from chargeopt.optimizer import (
    HAVE_COMPILED,
    BatteryModels,
    backward_induction,
    build_grids,
    build_transition_table,
    forward_integration,
)
from chargeopt.thermal import ThermalPlant, plant_linear_model


def bench(scenario, models, backend, repeats):
    grids = build_grids(scenario)
    t0 = time.perf_counter()
    table = build_transition_table(scenario, models, grids)
    t_table = time.perf_counter() - t0
    times = []
    for _ in range(repeats):
        g = build_grids(scenario)
        t1 = time.perf_counter()
        backward_induction(scenario, g, models, table=table, backend=backend)
        times.append(time.perf_counter() - t1)
    t2 = time.perf_counter()
    sol = forward_integration(scenario, g, models)
    t_fwd = time.perf_counter() - t2
    return t_table, min(times), t_fwd, sol


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    models = BatteryModels(
        tables=electrical.default_tables(),
        thermal=plant_linear_model(ThermalPlant(), dt_min=5.0),
        aging=default_params(),
    )
    full = default_scenario()
    coarse = replace(full, e_step=1.6, theta_step=2.0, p_step=2.0)
    backends = ["python"] + (["compiled"] if HAVE_COMPILED else [])
    if not HAVE_COMPILED:
        print("note: compiled kernel not built; benchmarking the NumPy backend only\n")

    print(f"{'instance':10s} {'backend':9s} {'table s':>8s} {'backward s':>11s} {'forward s':>10s} {'total EUR':>10s}")
    reference = {}
    for label, s in (("full", full), ("coarse", coarse)):
        for backend in backends:
            t_table, t_back, t_fwd, sol = bench(s, models, backend, args.repeats)
            print(
                f"{label:10s} {backend:9s} {t_table:8.3f} {t_back:11.3f} {t_fwd:10.3f} {sol.cost.total:10.4f}"
            )
            reference.setdefault(label, sol.cost.total)
            if abs(reference[label] - sol.cost.total) > 1e-9:
                raise SystemExit("backends disagree on the optimum")
        if len(backends) == 2:
            py = bench(s, models, "python", 1)[1]
            cy = bench(s, models, "compiled", 1)[1]
            print(f"{label:10s} speedup (backward pass): {py / cy:.1f}x\n")


if __name__ == "__main__":
    main()
