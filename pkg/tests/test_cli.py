import csv
import json
import math

import numpy as np
import pytest

from modetomo.cli import DEFAULT_CONFIG, _axis, load_config, main

MICRO = """
[filters.delta1_mhz]
start = -36.0
stop = -28.0
count = 3

[filters.delta2_mhz]
start = 28.0
stop = 36.0
count = 3

[spectrum]
rabi_over_gamma = [4.04]
durations_ns = [100.0]

[delay]
delays_ns = {{ start = -40.0, stop = 40.0, count = 3 }}

[hg]
delta1_mhz = {{ start = -4.0, stop = 4.0, count = 3 }}

[entangle]
recon_delta1_mhz = {{ start = -34.0, stop = -30.0, count = 2 }}
recon_delta2_mhz = {{ start = 30.0, stop = 34.0, count = 2 }}

[pipeline]
shots = 12000
n_added = 1.0
seed = 77

[tomography]
method = "{method}"
moments = "325"
"""


def write_micro(tmp_path, method="ls"):
    path = tmp_path / "micro.toml"
    path.write_text(MICRO.format(method=method))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_when_no_file(self):
        cfg = load_config(None)
        assert cfg == DEFAULT_CONFIG

    def test_merge_preserves_unrelated_defaults(self, tmp_path):
        cfg = load_config(write_micro(tmp_path))
        assert cfg["pipeline"]["shots"] == 12000
        assert cfg["physical"]["gamma_mhz"] == 8.0
        assert cfg["filters"]["duration_ns"] == 100.0

    def test_axis_forms(self):
        assert np.allclose(_axis({"start": 0.0, "stop": 1.0, "count": 3}), [0, 0.5, 1])
        assert np.allclose(_axis([1.0, 2.0]), [1, 2])

    def test_config_echo(self, tmp_path):
        out = tmp_path / "out"
        main(["delay-study", "--config", write_micro(tmp_path), "--out", str(out)])
        echoed = (out / "config.toml").read_text()
        assert "[delay]" in echoed
        assert "shots = 12000" in echoed


class TestSpectrum:
    def test_columns_and_peak(self, tmp_path):
        out = tmp_path / "out"
        main(["spectrum", "--config", write_micro(tmp_path), "--out", str(out)])
        rows = read_csv(out / "spectrum.csv")
        assert set(rows[0]) == {"delta_mhz", "rabi_mhz", "duration_ns", "nbar"}
        assert all(float(r["nbar"]) > 0 for r in rows)


class TestGrid:
    def test_moment_maps(self, tmp_path):
        out = tmp_path / "out"
        main(["grid", "--config", write_micro(tmp_path), "--out", str(out)])
        rows = read_csv(out / "moment_a1a2.csv")
        assert len(rows) == 9
        # the pair moment peaks on the anti-diagonal of opposite sidebands
        mags = {(float(r["delta1_mhz"]), float(r["delta2_mhz"])):
                abs(complex(float(r["re"]), float(r["im"]))) for r in rows}
        peak = max(mags, key=mags.get)
        assert peak[0] == pytest.approx(-32.0) and peak[1] == pytest.approx(32.0)
        # first moments are near zero at the sidebands
        a1 = read_csv(out / "moment_a1.csv")
        for r in a1:
            assert abs(complex(float(r["re"]), float(r["im"]))) < 0.05


class TestEntangleMap:
    def test_direct_and_reconstruction(self, tmp_path):
        out = tmp_path / "out"
        main(["entangle-map", "--config", write_micro(tmp_path), "--out", str(out)])
        direct = read_csv(out / "en_direct.csv")
        assert len(direct) == 9
        best = max(float(r["en"]) for r in direct)
        assert best > 0.04
        g12 = read_csv(out / "g12.csv")
        assert all(float(r["g12"]) > 1.0 for r in g12)
        recon = read_csv(out / "en_recon_ls.csv")
        ref = {(r["delta1_mhz"], r["delta2_mhz"]): float(r["en"])
               for r in read_csv(out / "en_recon_direct.csv")}
        for r in recon:
            assert r["status"] == "Converged"
            assert float(r["en"]) == pytest.approx(
                ref[(r["delta1_mhz"], r["delta2_mhz"])], abs=0.01)


class TestDelayStudy:
    def test_symmetry_and_peak(self, tmp_path):
        out = tmp_path / "out"
        main(["delay-study", "--config", write_micro(tmp_path), "--out", str(out)])
        rows = read_csv(out / "delay_study.csv")
        ens = {float(r["delay_ns"]): float(r["en"]) for r in rows}
        assert ens[0.0] == max(ens.values())
        assert ens[-40.0] == pytest.approx(ens[40.0], rel=0.05)

    def test_byte_identical_rerun(self, tmp_path):
        cfgp = write_micro(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["delay-study", "--config", cfgp, "--out", str(out1)])
        main(["delay-study", "--config", cfgp, "--out", str(out2), "--threads", "2"])
        assert (out1 / "delay_study.csv").read_bytes() == \
               (out2 / "delay_study.csv").read_bytes()


class TestHgStudy:
    def test_zero_detuning_point(self, tmp_path):
        out = tmp_path / "out"
        main(["hg-study", "--config", write_micro(tmp_path), "--out", str(out)])
        rows = read_csv(out / "hg_study.csv")
        ens = {float(r["delta1_mhz"]): float(r["en"]) for r in rows}
        assert ens[0.0] > 0.1
        # zero detuning is the only field-orthogonal pair in the sweep
        clean = [r for r in rows if float(r["filter_overlap"]) < 1e-6]
        assert len(clean) == 1 and float(clean[0]["delta1_mhz"]) == 0.0
        assert float(clean[0]["min_eigenvalue"]) > -1e-7


class TestTomo:
    def test_end_to_end(self, tmp_path):
        out = tmp_path / "out"
        main(["tomo", "--config", write_micro(tmp_path), "--out", str(out)])
        summary = json.loads((out / "summary.json").read_text())
        assert summary["quantum_efficiency"] == pytest.approx(0.5 / 1.5)
        assert summary["status_ls"] == "Converged"
        assert summary["en_direct"] > 0.04
        assert summary["fidelity_ls"] > 0.75
        rho = json.loads((out / "rho_ls.json").read_text())
        assert rho["dims"] == [5, 5]
        assert len(rho["re"]) == 625
        mm = read_csv(out / "moments_measured.csv")
        assert len(mm) == 27

    def test_seed_flag_overrides(self, tmp_path):
        out1, out2, out3 = (tmp_path / n for n in ("a", "b", "c"))
        cfgp = write_micro(tmp_path)
        main(["tomo", "--config", cfgp, "--out", str(out1), "--seed", "123"])
        main(["tomo", "--config", cfgp, "--out", str(out2), "--seed", "123"])
        main(["tomo", "--config", cfgp, "--out", str(out3), "--seed", "124"])
        raw1 = (out1 / "moments_raw.csv").read_bytes()
        assert raw1 == (out2 / "moments_raw.csv").read_bytes()
        assert raw1 != (out3 / "moments_raw.csv").read_bytes()
