import math

import numpy as np
import pytest

from modetomo import (Boxcar, DensityMatrix, HilbertSpace, MomentIndex, MomentVector,
                      SystemParams, TemporalFilter, enumerate_moments, moment,
                      moments_of_state)
from modetomo.pipeline import (FIRST_SECOND_INDICES, BackgroundFit, InterleavedDataset,
                               NoiseModel, _affine_transform, captured_input_amplitude,
                               denoise_first_second, denoise_general,
                               quantum_efficiency, remove_background,
                               synthesize_dataset)
from modetomo.units import mhz_to_angular

from conftest import GAMMA, RABI, T0, T_BOX


def coherent_two_mode(alpha1, alpha2, d=6):
    def coherent(a):
        n = np.arange(d)
        v = a ** n / np.sqrt([math.factorial(int(k)) for k in n])
        v = v / np.linalg.norm(v)
        return np.outer(v, v.conj())
    return DensityMatrix(HilbertSpace([d, d]),
                         np.kron(coherent(alpha1), coherent(alpha2)))


def vacuum_two_mode(d=4):
    m = np.zeros((d * d, d * d), dtype=complex)
    m[0, 0] = 1.0
    return DensityMatrix(HilbertSpace([d, d]), m)


class TestQuantumEfficiency:
    def test_reference_value(self):
        assert quantum_efficiency(NoiseModel(11.0)) == pytest.approx(0.5 / 11.5)
        assert quantum_efficiency(NoiseModel(11.0)) == pytest.approx(0.043, abs=5e-4)

    def test_ideal(self):
        assert quantum_efficiency(NoiseModel(0.0)) == 1.0

    def test_half(self):
        assert quantum_efficiency(NoiseModel(0.5)) == 0.5

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(-1.0)


class TestSynthesize:
    def test_vacuum_antinormal_unit(self):
        # <S+ S> of vacuum with no added noise is the commutator contribution 1
        ds = synthesize_dataset(vacuum_two_mode(), NoiseModel(0.0), 50_000, seed=7)
        for k in (0, 1):
            power = np.mean(np.abs(ds.on_shots[:, k]) ** 2)
            sig = np.std(np.abs(ds.on_shots[:, k]) ** 2) / math.sqrt(ds.n)
            assert abs(power - 1.0) < 3 * sig

    def test_coherent_mean(self):
        alpha = 0.45 - 0.2j
        rho = coherent_two_mode(alpha, 0.0)
        exact = moment(rho, (0, 1, 0, 0))
        ds = synthesize_dataset(rho, NoiseModel(0.0), 60_000, seed=11)
        mean = ds.on_shots[:, 0].mean()
        sig = ds.on_shots[:, 0].std() / math.sqrt(ds.n)
        assert abs(mean - exact) < 3 * sig

    def test_off_shots_centered(self):
        ds = synthesize_dataset(vacuum_two_mode(), NoiseModel(2.0), 50_000, seed=3)
        for k in (0, 1):
            mean = ds.off_shots[:, k].mean()
            sig = ds.off_shots[:, k].std() / math.sqrt(ds.n)
            assert abs(mean) < 3 * sig

    def test_seed_reproducibility(self, sideband_modes):
        a = synthesize_dataset(sideband_modes, NoiseModel(1.0), 12_000, seed=42)
        b = synthesize_dataset(sideband_modes, NoiseModel(1.0), 12_000, seed=42)
        assert np.array_equal(a.on_shots, b.on_shots)
        assert np.array_equal(a.off_shots, b.off_shots)

    def test_validation(self, sideband_modes):
        with pytest.raises(ValueError):
            synthesize_dataset(sideband_modes, NoiseModel(0.0), 0, seed=1)


class TestDatasetIO:
    def test_npz_round_trip(self, tmp_path, sideband_modes):
        ds = synthesize_dataset(sideband_modes, NoiseModel(1.5), 11_000, seed=5)
        path = tmp_path / "shots.npz"
        ds.save(path)
        back = InterleavedDataset.load(path)
        assert np.array_equal(back.on_shots, ds.on_shots)
        assert np.array_equal(back.off_shots, ds.off_shots)
        assert back.seed == 5 and back.n_added == 1.5

    def test_csv_round_trip(self, tmp_path):
        ds = synthesize_dataset(vacuum_two_mode(), NoiseModel(0.25), 10_000, seed=9)
        path = tmp_path / "shots.csv"
        ds.save(path)
        back = InterleavedDataset.load(path)
        assert np.allclose(back.on_shots, ds.on_shots)
        assert np.allclose(back.off_shots, ds.off_shots)
        assert back.seed == 9 and back.n_added == 0.25


class TestDenoise:
    def test_noiseless_recovers_first_moment(self):
        rho = coherent_two_mode(0.4, -0.3j)
        ds = synthesize_dataset(rho, NoiseModel(0.0), 60_000, seed=21)
        mv = denoise_first_second(ds)
        for idx in ((0, 1, 0, 0), (0, 0, 0, 1)):
            exact = moment(rho, idx)
            got = mv.get(idx)
            sig = mv.sigmas[mv.indices.index(MomentIndex(*idx))]
            assert abs(got - exact) < 3 * sig

    def test_vacuum_all_zero(self):
        ds = synthesize_dataset(vacuum_two_mode(), NoiseModel(3.0), 60_000, seed=22)
        mv = denoise_first_second(ds)
        within = sum(abs(v) < 3 * s for v, s in zip(mv.values, mv.sigmas))
        assert within >= len(mv) - 1

    def test_noisy_second_moments(self, sideband_modes):
        ds = synthesize_dataset(sideband_modes, NoiseModel(11.0), 120_000, seed=23)
        mv = denoise_first_second(ds)
        for idx in ((1, 1, 0, 0), (0, 0, 1, 1), (0, 1, 0, 1)):
            exact = moment(sideband_modes, idx)
            got = mv.get(idx)
            sig = mv.sigmas[mv.indices.index(MomentIndex(*idx))]
            assert abs(got - exact) < 3 * sig

    def test_general_matches_first_second(self, sideband_modes):
        ds = synthesize_dataset(sideband_modes, NoiseModel(2.0), 30_000, seed=24)
        a = denoise_first_second(ds)
        b = denoise_general(ds, FIRST_SECOND_INDICES)
        assert np.allclose(a.values, b.values, atol=1e-10)
        assert np.allclose(a.sigmas, b.sigmas, atol=1e-10)

    def test_noiseless_channel_order_matching(self):
        # with h in vacuum only the antinormal vacuum correction survives in
        # the unmixing, so the recovered moments match the state's directly
        rho = coherent_two_mode(0.3, 0.2)
        ds = synthesize_dataset(rho, NoiseModel(0.0), 80_000, seed=26)
        mv = denoise_general(ds, [(0, 1, 0, 0), (1, 1, 0, 0)])
        for pos, idx in enumerate(((0, 1, 0, 0), (1, 1, 0, 0))):
            exact = moment(rho, idx)
            assert abs(mv.get(idx) - exact) < 3 * mv.sigmas[pos]
        # the raw on-record second moment carries the vacuum unit on top
        raw_n = np.mean(np.abs(ds.on_shots[:, 0]) ** 2)
        assert raw_n - mv.get((1, 1, 0, 0)).real == pytest.approx(1.0, abs=0.02)

    def test_conjugation_consistency(self, sideband_modes):
        ds = synthesize_dataset(sideband_modes, NoiseModel(1.0), 30_000, seed=27)
        mv = denoise_general(ds, [(0, 1, 0, 1), (1, 0, 1, 0)])
        assert mv.values[1] == pytest.approx(np.conj(mv.values[0]), abs=1e-12)

    def test_round_trip_fourth_order(self, sideband_modes):
        indices = enumerate_moments(2, 4)
        exact = moments_of_state(sideband_modes, indices)
        ds = synthesize_dataset(sideband_modes, NoiseModel(1.0), 150_000, seed=28)
        mv = denoise_general(ds, indices)
        within = sum(abs(got - ex) <= 3 * sig
                     for got, ex, sig in zip(mv.values, exact.values, mv.sigmas))
        assert within >= math.ceil(0.95 * len(indices))

    def test_sigma_scales_inverse_sqrt_n(self, sideband_modes):
        idx = [(1, 1, 0, 0), (0, 1, 0, 1)]
        sig_small = np.zeros(2)
        sig_big = np.zeros(2)
        for rep, seed in enumerate((31, 32, 33)):
            small = synthesize_dataset(sideband_modes, NoiseModel(2.0), 40_000, seed=seed)
            big = synthesize_dataset(sideband_modes, NoiseModel(2.0), 80_000, seed=seed + 10)
            sig_small += denoise_general(small, idx).sigmas
            sig_big += denoise_general(big, idx).sigmas
        ratio = sig_small / sig_big
        assert np.all(ratio > math.sqrt(2) * 0.8)
        assert np.all(ratio < math.sqrt(2) * 1.2)

    def test_insufficient_statistics(self, sideband_modes):
        ds = synthesize_dataset(sideband_modes, NoiseModel(0.0), 5_000, seed=1)
        with pytest.raises(ValueError, match="shots"):
            denoise_first_second(ds)
        with pytest.raises(ValueError, match="shots"):
            denoise_general(ds, [(0, 1, 0, 0)])


def sideband_pair():
    f1 = TemporalFilter(Boxcar(), detuning=-RABI, start=T0, duration=T_BOX)
    f2 = TemporalFilter(Boxcar(), detuning=RABI, start=T0, duration=T_BOX)
    return f1, f2


def informative_pair():
    f1 = TemporalFilter(Boxcar(), detuning=float(mhz_to_angular(-5.0)), start=T0,
                        duration=T_BOX)
    f2 = TemporalFilter(Boxcar(), detuning=float(mhz_to_angular(7.0)), start=T0,
                        duration=T_BOX)
    return f1, f2


REFERENCE_INDICES = [(0, 1, 0, 0), (0, 0, 0, 1), (1, 1, 0, 0), (0, 0, 1, 1)]


class TestBackgroundRemoval:
    def test_captured_input_sinc_structure(self, params):
        f1, _ = sideband_pair()
        amp = captured_input_amplitude(params, f1)
        delta = f1.detuning
        expect = abs(params.rabi / math.sqrt(params.gamma) * math.sqrt(T_BOX)
                     * np.sin(delta * T_BOX / 2) / (delta * T_BOX / 2))
        assert abs(amp) == pytest.approx(expect, rel=1e-9)

    def test_identity_fit(self, params, sideband_modes_n5):
        indices = enumerate_moments(2, 4)
        raw = moments_of_state(sideband_modes_n5, indices)
        ref = moments_of_state(sideband_modes_n5, REFERENCE_INDICES)
        corrected, fit = remove_background(raw, params, sideband_pair(), ref)
        assert fit.amplitude == pytest.approx(1.0, abs=1e-4)
        assert fit.leak_amplitude == pytest.approx(0.0, abs=1e-4)
        assert np.allclose(corrected.values, raw.values, atol=1e-4)
        # the fitted first moments match the reference by construction
        for idx in ((0, 1, 0, 0), (0, 0, 0, 1)):
            assert corrected.get(idx) == pytest.approx(ref.get(idx), abs=1e-6)

    def test_recovers_injected_gain_and_leak(self, params, sideband_modes_n5):
        gain = 0.93 * np.exp(-0.25j)
        leak_scale = 0.8 * np.exp(0.6j)
        f1, f2 = informative_pair()
        indices = enumerate_moments(2, 4)
        exact = moments_of_state(sideband_modes_n5, indices)
        ref = moments_of_state(sideband_modes_n5, REFERENCE_INDICES)
        leak = np.array([leak_scale * captured_input_amplitude(params, f)
                         for f in (f1, f2)])
        c_fwd = 1.0 / gain
        distorted_vals, _ = _affine_transform(exact, c_fwd, -c_fwd * leak)
        distorted = MomentVector(indices, distorted_vals, np.zeros(len(indices)))
        corrected, fit = remove_background(distorted, params, (f1, f2), ref)
        assert fit.amplitude == pytest.approx(abs(gain), abs=1e-3)
        assert fit.phase_a == pytest.approx(np.angle(gain) % (2 * np.pi), abs=1e-3)
        assert fit.leak_amplitude == pytest.approx(abs(leak_scale), abs=1e-3)
        assert np.allclose(corrected.values, exact.values, atol=1e-4)

    def test_connected_correlation_displacement_invariant(self, sideband_modes_n5):
        # displacing the inputs only shifts first moments; the connected
        # second-order correlation must stay put under the affine map
        indices = enumerate_moments(2, 4)
        mv = moments_of_state(sideband_modes_n5, indices)
        d = np.array([0.2 - 0.1j, -0.05 + 0.3j])
        shifted_vals, _ = _affine_transform(mv, 1.0 + 0.0j, d)
        shifted = MomentVector(indices, shifted_vals, np.zeros(len(indices)))

        def connected(m):
            return m.get((0, 1, 0, 1)) - m.get((0, 1, 0, 0)) * m.get((0, 0, 0, 1))

        assert connected(shifted) == pytest.approx(connected(mv), abs=1e-12)

    def test_fit_fields_validated(self):
        with pytest.raises(ValueError):
            BackgroundFit(-1.0, 0.0, 0.0, 0.0, 0.0)
