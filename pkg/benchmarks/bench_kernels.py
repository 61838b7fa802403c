#!/usr/bin/env python3
"""Timing comparison of the numba and numpy integration kernels.

Runs the two-filter sideband capture (the package's hot loop) with each
backend and reports wall time plus the worst element-wise deviation between
the two final states.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--fock 6]
"""

import argparse
import os
import time

import numpy as np


def run(backend: str, fock: int):
    os.environ["MODETOMO_BACKEND"] = backend
    # reimport so the flag is honored regardless of prior state
    from modetomo import (Boxcar, SimConfig, SystemParams, TemporalFilter,
                          evolve_cascaded)
    from modetomo.units import mhz_to_angular, ns_to_seconds

    gamma = float(mhz_to_angular(8.0))
    params = SystemParams(gamma=gamma, rabi=4.04 * gamma)
    cfg = SimConfig(fock_cutoff=fock, t0=float(ns_to_seconds(200.0)))
    T = float(ns_to_seconds(100.0))
    f1 = TemporalFilter(Boxcar(), detuning=-params.rabi, start=cfg.t0, duration=T)
    f2 = TemporalFilter(Boxcar(), detuning=params.rabi, start=cfg.t0, duration=T)
    return evolve_cascaded(params, f1, f2, cfg)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--fock", type=int, default=6)
    args = ap.parse_args()

    states = {}
    for backend in ("numba", "numpy"):
        run(backend, args.fock)  # warm up (JIT compile / caches)
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            res = run(backend, args.fock)
            times.append(time.perf_counter() - t0)
        states[backend] = res.state.matrix
        print(f"{backend:>6}: best {min(times) * 1e3:8.1f} ms  "
              f"mean {np.mean(times) * 1e3:8.1f} ms over {args.repeat} runs")
    diff = np.max(np.abs(states["numba"] - states["numpy"]))
    print(f"max |state difference| between backends: {diff:.3e}")
    os.environ.pop("MODETOMO_BACKEND", None)


if __name__ == "__main__":
    main()
