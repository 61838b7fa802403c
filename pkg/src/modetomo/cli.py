"""Configuration-driven command line front end.

Subcommands reproduce the package's studies end to end and write
machine-readable CSV/JSON into an output directory, together with the fully
resolved configuration that produced them.  All units at this boundary are
MHz and ns; everything internal is SI angular.

    modetomo spectrum     --out out/          single-mode occupation sweeps
    modetomo grid         --out out/          two-mode moment maps
    modetomo entangle-map --out out/          E_N and g12 maps + reconstructions
    modetomo delay-study  --out out/          E_N versus window delay
    modetomo hg-study     --out out/          Hermite-Gauss E_N versus detuning
    modetomo tomo         --out out/          full synthetic measurement pipeline
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .dynamics import SimConfig, SystemParams, evolve_cascaded, single_mode_capture
from .filters import Boxcar, HermiteGauss, TemporalFilter, overlap
from .observables import (MomentIndex, MomentVector, enumerate_moments, fidelity,
                          g2_cross, log_negativity, moment, moments_of_state, purity)
from .pipeline import (NoiseModel, captured_input_amplitude, denoise_general,
                       quantum_efficiency, remove_background, synthesize_dataset)
from .spaces import partial_trace, truncate_mode_levels
from .tomography import build_sensing_matrix, en_map, reconstruct_cs, reconstruct_ls
from .units import mhz_to_angular, ns_to_seconds

DEFAULT_CONFIG = {
    "physical": {
        "gamma_mhz": 8.0,            # decay rate over 2 pi
        "rabi_over_gamma": 4.04,
    },
    "filters": {
        "shape": "boxcar",
        "duration_ns": 100.0,
        "phase": 0.0,
        "delay_ns": 0.0,             # applied to filter 2
        "delta1_mhz": {"start": -40.0, "stop": 40.0, "count": 21},
        "delta2_mhz": {"start": -40.0, "stop": 40.0, "count": 21},
    },
    "sim": {
        "fock_cutoff": 6,
        "t0_ns": 200.0,
        "dt_ns": 0.0,                # 0 -> automatic step
    },
    "pipeline": {
        "shots": 1_000_000,
        "n_added": 11.0,
        "seed": 20260811,
        "gain": 1.0,
        "gain_phase_rad": 0.0,
        "leak_amplitude": 0.0,       # scales the captured drive reflection
        "leak_phase_rad": 0.0,
        "save_dataset": False,
    },
    "tomography": {
        "method": "both",            # ls | cs | both
        "moments": "27",             # 27 | 325
        "cutoff": 5,
    },
    "spectrum": {
        "rabi_over_gamma": [0.5, 1.0, 2.0, 3.0, 4.04],
        "durations_ns": [12.5, 25.0, 50.0, 100.0, 200.0],
    },
    "delay": {
        "delays_ns": {"start": -125.0, "stop": 125.0, "count": 11},
        "delta1_over_rabi": -1.0,
        "delta2_over_rabi": 1.0,
    },
    "hg": {
        # drive and width that maximize the Hermite-Gauss entanglement
        "rabi_over_gamma": 2.0,
        "width_ns": 11.0,
        "orders": [0, 1],
        "delta1_mhz": {"start": -10.0, "stop": 10.0, "count": 11},
        "delta2_mhz": 0.0,
    },
    "entangle": {
        "recon_delta1_mhz": {"start": -40.0, "stop": -10.0, "count": 9},
        "recon_delta2_mhz": {"start": 10.0, "stop": 40.0, "count": 9},
        "reconstruct": True,
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path, "rb") as fh:
        user = tomllib.load(fh)
    return _deep_merge(DEFAULT_CONFIG, user)


def _axis(spec) -> np.ndarray:
    """Grid axis from either {start, stop, count} or an explicit list."""
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["count"]))
    return np.asarray(spec, dtype=float)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot echo config value {v!r}")


def echo_config(cfg: dict, out: Path) -> None:
    lines = []

    def emit(table: dict, prefix: str):
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subs = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix:
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            lines.append(f"{k} = {_toml_value(v)}")
        if scalars or not prefix:
            lines.append("")
        for k, v in subs.items():
            emit(v, f"{prefix}.{k}" if prefix else k)

    emit(cfg, "")
    (out / "config.toml").write_text("\n".join(lines))


def _params(cfg: dict) -> SystemParams:
    gamma = float(mhz_to_angular(cfg["physical"]["gamma_mhz"]))
    return SystemParams(gamma=gamma, rabi=float(cfg["physical"]["rabi_over_gamma"]) * gamma)


def _sim_config(cfg: dict) -> SimConfig:
    dt = float(cfg["sim"]["dt_ns"])
    return SimConfig(fock_cutoff=int(cfg["sim"]["fock_cutoff"]),
                     dt=None if dt == 0.0 else float(ns_to_seconds(dt)),
                     t0=float(ns_to_seconds(cfg["sim"]["t0_ns"])))


def _boxcar_pair(cfg: dict, d1_mhz: float, d2_mhz: float, delay_ns: float = None):
    t0 = float(ns_to_seconds(cfg["sim"]["t0_ns"]))
    T = float(ns_to_seconds(cfg["filters"]["duration_ns"]))
    phase = float(cfg["filters"]["phase"])
    delay = cfg["filters"]["delay_ns"] if delay_ns is None else delay_ns
    f1 = TemporalFilter(Boxcar(), detuning=float(mhz_to_angular(d1_mhz)),
                        phase=phase, start=t0, duration=T)
    f2 = TemporalFilter(Boxcar(), detuning=float(mhz_to_angular(d2_mhz)),
                        phase=phase, start=t0, duration=T,
                        delay=float(ns_to_seconds(delay)))
    return f1, f2


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])


def _write_state_json(path: Path, rho) -> None:
    payload = {
        "dims": list(rho.space.dims),
        "re": [float(x) for x in rho.matrix.real.reshape(-1)],
        "im": [float(x) for x in rho.matrix.imag.reshape(-1)],
    }
    path.write_text(json.dumps(payload))


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg: dict, out: Path, threads: int) -> None:
    gamma = float(mhz_to_angular(cfg["physical"]["gamma_mhz"]))
    sim = _sim_config(cfg)
    t0 = sim.t0
    T_fixed = float(ns_to_seconds(cfg["filters"]["duration_ns"]))
    deltas = _axis(cfg["filters"]["delta1_mhz"])
    jobs = []
    for r in cfg["spectrum"]["rabi_over_gamma"]:
        for d in deltas:
            jobs.append((float(r) * gamma, T_fixed, float(d)))
    rabi_fixed = float(cfg["physical"]["rabi_over_gamma"]) * gamma
    for T_ns in cfg["spectrum"]["durations_ns"]:
        for d in deltas:
            jobs.append((rabi_fixed, float(ns_to_seconds(T_ns)), float(d)))

    def one(job):
        rabi, T, d_mhz = job
        params = SystemParams(gamma=gamma, rabi=rabi)
        f1 = TemporalFilter(Boxcar(), detuning=float(mhz_to_angular(d_mhz)),
                            start=t0, duration=T)
        res = single_mode_capture(params, f1, sim)
        nbar = moment_single(res.state)
        return [d_mhz, rabi / (2e6 * np.pi), T * 1e9, nbar]

    rows = _pool_map(one, jobs, threads)
    _write_csv(out / "spectrum.csv", ["delta_mhz", "rabi_mhz", "duration_ns", "nbar"],
               rows)


def moment_single(state) -> float:
    """<a+ a> of the mode factor of a qubit (x) mode state."""
    mode = partial_trace(state, [1])
    n = np.arange(mode.dim)
    return float((np.diag(mode.matrix).real * n).sum())


GRID_MOMENTS = {
    "a1": MomentIndex(0, 1, 0, 0),
    "a2": MomentIndex(0, 0, 0, 1),
    "a1sq": MomentIndex(0, 2, 0, 0),
    "a2sq": MomentIndex(0, 0, 0, 2),
    "n1": MomentIndex(1, 1, 0, 0),
    "n2": MomentIndex(0, 0, 1, 1),
    "a1a2": MomentIndex(0, 1, 0, 1),
    "a1dag_a2": MomentIndex(1, 0, 0, 1),
}


def _two_mode_grid(cfg, threads):
    params = _params(cfg)
    sim = _sim_config(cfg)
    d1s = _axis(cfg["filters"]["delta1_mhz"])
    d2s = _axis(cfg["filters"]["delta2_mhz"])
    points = [(d1, d2) for d1 in d1s for d2 in d2s]

    def one(pt):
        f1, f2 = _boxcar_pair(cfg, pt[0], pt[1])
        res = evolve_cascaded(params, f1, f2, sim)
        return partial_trace(res.state, [1, 2])

    states = _pool_map(one, points, threads)
    return points, states


def cmd_grid(cfg: dict, out: Path, threads: int) -> None:
    points, states = _two_mode_grid(cfg, threads)
    for name, idx in GRID_MOMENTS.items():
        rows = []
        for (d1, d2), rho in zip(points, states):
            val = moment(rho, idx)
            rows.append([d1, d2, val.real, val.imag])
        _write_csv(out / f"moment_{name}.csv",
                   ["delta1_mhz", "delta2_mhz", "re", "im"], rows)


def cmd_entangle_map(cfg: dict, out: Path, threads: int) -> None:
    points, states = _two_mode_grid(cfg, threads)
    rows_en, rows_g12 = [], []
    for (d1, d2), rho in zip(points, states):
        rows_en.append([d1, d2, log_negativity(rho), "Direct"])
        try:
            g = g2_cross(rho)
        except ZeroDivisionError:
            g = float("nan")
        rows_g12.append([d1, d2, g])
    _write_csv(out / "en_direct.csv", ["delta1_mhz", "delta2_mhz", "en", "status"], rows_en)
    _write_csv(out / "g12.csv", ["delta1_mhz", "delta2_mhz", "g12"], rows_g12)

    if not cfg["entangle"]["reconstruct"]:
        return
    cutoff = int(cfg["tomography"]["cutoff"])
    nmax = 2 if cfg["tomography"]["moments"] == "27" else 4
    order = 4 if cfg["tomography"]["moments"] == "27" else None
    indices = enumerate_moments(nmax, order)
    sensing = build_sensing_matrix(indices, cutoff)

    d1s = _axis(cfg["entangle"]["recon_delta1_mhz"])
    d2s = _axis(cfg["entangle"]["recon_delta2_mhz"])
    rpoints = [(d1, d2) for d1 in d1s for d2 in d2s]
    params = _params(cfg)
    sim = _sim_config(cfg)

    def one(pt):
        f1, f2 = _boxcar_pair(cfg, pt[0], pt[1])
        res = evolve_cascaded(params, f1, f2, sim)
        rho = truncate_mode_levels(partial_trace(res.state, [1, 2]), cutoff)
        return log_negativity(rho), moments_of_state(rho, indices)

    direct = _pool_map(one, rpoints, threads)
    mvs = [mv for _, mv in direct]
    rows_direct = [[d1, d2, en, "Direct"] for (d1, d2), (en, _) in zip(rpoints, direct)]
    _write_csv(out / "en_recon_direct.csv",
               ["delta1_mhz", "delta2_mhz", "en", "status"], rows_direct)

    methods = {"ls": "LS", "cs": "CS"}
    wanted = cfg["tomography"]["method"]
    for key, method in methods.items():
        if wanted not in (key, "both"):
            continue
        result = en_map(mvs, sensing, method)
        rows = [[d1, d2, en, status]
                for (d1, d2), (en, status) in zip(rpoints, result)]
        _write_csv(out / f"en_recon_{key}.csv",
                   ["delta1_mhz", "delta2_mhz", "en", "status"], rows)


def cmd_delay_study(cfg: dict, out: Path, threads: int) -> None:
    params = _params(cfg)
    sim = _sim_config(cfg)
    rabi_mhz = params.rabi / mhz_to_angular(1.0)
    d1 = float(cfg["delay"]["delta1_over_rabi"]) * rabi_mhz
    d2 = float(cfg["delay"]["delta2_over_rabi"]) * rabi_mhz
    delays = _axis(cfg["delay"]["delays_ns"])

    def one(delay_ns):
        f1, f2 = _boxcar_pair(cfg, d1, d2, delay_ns=float(delay_ns))
        res = evolve_cascaded(params, f1, f2, sim)
        return log_negativity(partial_trace(res.state, [1, 2]))

    ens = _pool_map(one, delays, threads)
    _write_csv(out / "delay_study.csv", ["delay_ns", "en"],
               [[d, e] for d, e in zip(delays, ens)])


def cmd_hg_study(cfg: dict, out: Path, threads: int) -> None:
    gamma = float(mhz_to_angular(cfg["physical"]["gamma_mhz"]))
    params = SystemParams(gamma=gamma, rabi=float(cfg["hg"]["rabi_over_gamma"]) * gamma)
    sim = _sim_config(cfg)
    w = float(ns_to_seconds(cfg["hg"]["width_ns"]))
    n1, n2 = (int(n) for n in cfg["hg"]["orders"])
    d1s = _axis(cfg["hg"]["delta1_mhz"])
    d2 = float(cfg["hg"]["delta2_mhz"])

    def one(d1):
        # detuned pairs lose field orthogonality; report the overlap and the
        # pre-clamp negativity so inflated E_N values can be screened out
        f1 = TemporalFilter(HermiteGauss(n1, w), detuning=float(mhz_to_angular(d1)),
                            start=sim.t0)
        f2 = TemporalFilter(HermiteGauss(n2, w), detuning=float(mhz_to_angular(d2)),
                            start=sim.t0)
        res = evolve_cascaded(params, f1, f2, sim)
        return (log_negativity(partial_trace(res.state, [1, 2])),
                abs(overlap(f1, f2)), res.min_eigenvalue)

    rows = _pool_map(one, d1s, threads)
    _write_csv(out / "hg_study.csv",
               ["delta1_mhz", "en", "filter_overlap", "min_eigenvalue"],
               [[d, e, ov, me] for d, (e, ov, me) in zip(d1s, rows)])


def cmd_tomo(cfg: dict, out: Path, threads: int) -> None:
    params = _params(cfg)
    sim = _sim_config(cfg)
    rabi_mhz = float(params.rabi / mhz_to_angular(1.0))
    d1s = _axis(cfg["filters"]["delta1_mhz"])
    d2s = _axis(cfg["filters"]["delta2_mhz"])
    # single working point: the opposite sidebands unless the grid is 1x1
    d1 = float(d1s[0]) if len(d1s) == 1 else -rabi_mhz
    d2 = float(d2s[0]) if len(d2s) == 1 else rabi_mhz
    f1, f2 = _boxcar_pair(cfg, d1, d2)

    res = evolve_cascaded(params, f1, f2, sim)
    rho_full = partial_trace(res.state, [1, 2])
    cutoff = int(cfg["tomography"]["cutoff"])
    rho_direct = truncate_mode_levels(rho_full, cutoff)
    _write_state_json(out / "rho_direct.json", rho_direct)

    indices = enumerate_moments(2, 4)
    exact = moments_of_state(rho_direct, indices)
    exact.to_csv(out / "moments_exact.csv")

    pcfg = cfg["pipeline"]
    noise = NoiseModel(float(pcfg["n_added"]))
    gain = float(pcfg["gain"]) * np.exp(1j * float(pcfg["gain_phase_rad"]))
    leak_scale = float(pcfg["leak_amplitude"]) * np.exp(1j * float(pcfg["leak_phase_rad"]))
    leak = (leak_scale * captured_input_amplitude(params, f1),
            leak_scale * captured_input_amplitude(params, f2))
    ds = synthesize_dataset(rho_full, noise, int(pcfg["shots"]), int(pcfg["seed"]),
                            gain=gain, leak=leak)
    if pcfg["save_dataset"]:
        ds.save(out / "dataset.npz")

    raw = denoise_general(ds, indices)
    raw.to_csv(out / "moments_raw.csv")
    reference = moments_of_state(
        rho_direct, [(0, 1, 0, 0), (0, 0, 0, 1), (1, 1, 0, 0), (0, 0, 1, 1)])
    corrected, fit = remove_background(raw, params, (f1, f2), reference)
    corrected.to_csv(out / "moments_measured.csv")

    sensing = build_sensing_matrix(indices, cutoff)
    summary = {
        "delta1_mhz": d1, "delta2_mhz": d2,
        "seed": int(pcfg["seed"]), "shots": int(pcfg["shots"]),
        "n_added": noise.n_added,
        "quantum_efficiency": quantum_efficiency(noise),
        "en_direct": log_negativity(rho_direct),
        "purity_direct": purity(rho_direct),
        "background_fit": {
            "amplitude": fit.amplitude, "leak_amplitude": fit.leak_amplitude,
            "phase_a": fit.phase_a, "phase_b": fit.phase_b,
            "residual": fit.residual,
        },
    }
    for key, recon in (("ls", reconstruct_ls), ("cs", reconstruct_cs)):
        if cfg["tomography"]["method"] not in (key, "both"):
            continue
        r = recon(corrected, sensing)
        summary[f"status_{key}"] = r.status
        summary[f"iterations_{key}"] = r.iterations
        if r.rho is not None:
            _write_state_json(out / f"rho_{key}.json", r.rho)
            summary[f"en_{key}"] = log_negativity(r.rho)
            summary[f"fidelity_{key}"] = fidelity(r.rho, rho_direct)
            summary[f"purity_{key}"] = purity(r.rho)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))


COMMANDS = {
    "spectrum": cmd_spectrum,
    "grid": cmd_grid,
    "entangle-map": cmd_entangle_map,
    "delay-study": cmd_delay_study,
    "hg-study": cmd_hg_study,
    "tomo": cmd_tomo,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="modetomo", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override pipeline seed")
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["pipeline"]["seed"] = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out)
    COMMANDS[args.command](cfg, out, max(1, args.threads))
    return 0


if __name__ == "__main__":
    sys.exit(main())
