import os

import numpy as np
import pytest
from scipy.linalg import expm

from modetomo import (Boxcar, SimConfig, SystemParams, TemporalFilter,
                      evolve_cascaded, fidelity, log_negativity, moment,
                      partial_trace, qubit_steady_state, single_mode_capture)
from modetomo.dynamics import default_timestep, liouvillian_matrix
from modetomo.units import mhz_to_angular, ns_to_seconds

from conftest import GAMMA, RABI, T0, T_BOX, sideband_filters


def gaussian_elimination_steady_state(params):
    """Independent oracle: solve L rho = 0 with the trace row by elimination."""
    L = liouvillian_matrix(params)
    A = np.zeros((4, 4), dtype=complex)
    b = np.zeros(4, dtype=complex)
    A[:3] = L[:3]
    A[3, 0] = A[3, 3] = 1.0  # trace condition replaces the dependent row
    b[3] = 1.0
    n = 4
    M = np.concatenate([A, b[:, None]], axis=1)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        M[[col, piv]] = M[[piv, col]]
        M[col] = M[col] / M[col, col]
        for row in range(n):
            if row != col:
                M[row] = M[row] - M[row, col] * M[col]
    return M[:, 4].reshape(2, 2)


class TestSteadyState:
    def test_no_drive_is_ground(self):
        rho = qubit_steady_state(SystemParams(gamma=GAMMA, rabi=0.0)).matrix
        assert np.allclose(rho, np.diag([1.0, 0.0]))

    def test_saturation_limit(self):
        rho = qubit_steady_state(SystemParams(gamma=GAMMA, rabi=1e4 * GAMMA)).matrix
        assert np.allclose(np.diag(rho).real, [0.5, 0.5], atol=1e-6)

    def test_against_elimination_oracle(self, params):
        rho = qubit_steady_state(params).matrix
        oracle = gaussian_elimination_steady_state(params)
        assert np.allclose(rho, oracle, atol=1e-12)

    def test_excited_population_value(self, params):
        # resonant two-level steady state: p_e = (W/2)^2 / (G^2/4 + W^2/2)
        rho = qubit_steady_state(params).matrix
        w, g = params.rabi, params.gamma
        expect = (w ** 2 / 4) / (g ** 2 / 4 + w ** 2 / 2)
        assert rho[1, 1].real == pytest.approx(expect, rel=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            SystemParams(gamma=0.0, rabi=1.0)
        with pytest.raises(ValueError):
            SystemParams(gamma=1.0, rabi=-1.0)
        with pytest.raises(ValueError):
            SystemParams(gamma=1.0, rabi=1.0, drive_detuning=0.5)


def regression_mode_occupation(params, filt, npts=1600):
    """<a+ a> of a filtered mode from two-time emitter correlations.

    Independent of the capture machinery: builds <s+(t) s(t')> on a grid via
    the quantum regression theorem and integrates it against the filter.
    """
    L = liouvillian_matrix(params)
    rho_ss = qubit_steady_state(params).matrix
    s = np.array([[0, 1], [0, 0]], dtype=complex)
    lo, hi = filt.window
    ts = np.linspace(lo, hi, npts)
    dt = ts[1] - ts[0]
    P = expm(L * dt)
    g = np.empty(npts, dtype=complex)
    x = (s @ rho_ss).reshape(-1)
    for i in range(npts):
        g[i] = np.trace(s.conj().T @ x.reshape(2, 2))
        x = P @ x
    i, j = np.meshgrid(np.arange(npts), np.arange(npts), indexing="ij")
    corr = np.where(i >= j, g[np.abs(i - j)], np.conj(g[np.abs(i - j)]))
    f = np.asarray(filt.value(ts))
    f = f / np.sqrt((np.abs(f) ** 2).sum() * dt)
    return float((params.gamma * np.einsum("i,j,ij->", np.conj(f), f, corr)
                  * dt * dt).real)


class TestSingleModeCapture:
    def test_no_drive_gives_vacuum(self, sim_config):
        params = SystemParams(gamma=GAMMA, rabi=0.0)
        f1 = TemporalFilter(Boxcar(), detuning=0.0, start=T0, duration=T_BOX)
        res = single_mode_capture(params, f1, sim_config)
        mode = partial_trace(res.state, [1])
        assert mode.matrix[0, 0].real == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("delta_mhz,fock", [(0.0, 8), (-32.32, 6), (18.0, 6)])
    def test_occupation_matches_regression_oracle(self, params, delta_mhz, fock):
        # the central peak holds ~0.75 photons and needs a deeper cutoff
        f1 = TemporalFilter(Boxcar(), detuning=float(mhz_to_angular(delta_mhz)),
                            start=T0, duration=T_BOX)
        res = single_mode_capture(params, f1, SimConfig(fock_cutoff=fock, t0=T0))
        mode = partial_trace(res.state, [1])
        nbar = float(sum(n * mode.matrix[n, n].real for n in range(mode.dim)))
        oracle = regression_mode_occupation(params, f1)
        assert nbar == pytest.approx(oracle, rel=2e-3)

    def test_trace_drift_reported(self, params, sim_config, sideband_capture):
        assert sideband_capture.trace_drift < 1e-6


class TestCascadedCapture:
    def test_no_drive_gives_vacuum_modes(self, sim_config):
        params = SystemParams(gamma=GAMMA, rabi=0.0)
        f1, f2 = sideband_filters()
        res = evolve_cascaded(params, f1, f2, sim_config)
        modes = partial_trace(res.state, [1, 2])
        assert modes.matrix[0, 0].real == pytest.approx(1.0, abs=1e-9)

    def test_cutoff_adequate(self, sideband_capture):
        assert sideband_capture.cutoff_adequate
        assert sideband_capture.top_level_population < 1e-4

    def test_positive_entanglement_at_sidebands(self, sideband_modes):
        assert log_negativity(sideband_modes) > 0.04

    def test_largest_coherence_couples_00_and_11(self, sideband_modes):
        m = sideband_modes.matrix.copy()
        np.fill_diagonal(m, 0.0)
        nc = 6
        i, j = np.unravel_index(np.argmax(np.abs(m)), m.shape)
        pair = {divmod(i, nc), divmod(j, nc)}
        assert pair == {(0, 0), (1, 1)}

    def test_filter_independence(self, params, sim_config, sideband_capture):
        # reduced state of mode 1 must match a single-filter run with f1 alone
        f1, _ = sideband_filters()
        single = single_mode_capture(params, f1, sim_config)
        mode1_joint = partial_trace(sideband_capture.state, [1])
        mode1_single = partial_trace(single.state, [1])
        assert fidelity(mode1_joint, mode1_single) > 0.999

    def test_phase_invariance(self, params, sim_config, sideband_modes):
        f1, f2 = sideband_filters(phase=1.234)
        res = evolve_cascaded(params, f1, f2, sim_config)
        en_rot = log_negativity(partial_trace(res.state, [1, 2]))
        assert en_rot == pytest.approx(log_negativity(sideband_modes), abs=1e-6)

    def test_step_halving_convergence(self, params, sideband_modes):
        base = SimConfig(fock_cutoff=6, t0=T0)
        dt0 = default_timestep(params, T_BOX)
        f1, f2 = sideband_filters()
        fine = evolve_cascaded(params, f1, f2,
                               SimConfig(fock_cutoff=6, t0=T0, dt=dt0 / 2))
        en_base = log_negativity(sideband_modes)
        en_fine = log_negativity(partial_trace(fine.state, [1, 2]))
        assert abs(en_fine - en_base) / en_base < base.rel_tol
        n_base = moment(sideband_modes, (1, 1, 0, 0)).real
        n_fine = moment(partial_trace(fine.state, [1, 2]), (1, 1, 0, 0)).real
        assert abs(n_fine - n_base) / n_base < base.rel_tol

    def test_backends_agree(self, params, sim_config, sideband_capture):
        if os.environ.get("MODETOMO_BACKEND") == "numpy":
            pytest.skip("numpy backend already active")
        f1, f2 = sideband_filters()
        os.environ["MODETOMO_BACKEND"] = "numpy"
        try:
            res = evolve_cascaded(params, f1, f2, sim_config)
        finally:
            del os.environ["MODETOMO_BACKEND"]
        diff = np.max(np.abs(res.state.matrix - sideband_capture.state.matrix))
        assert diff < 1e-12


class TestConfigValidation:
    def test_sim_config(self):
        with pytest.raises(ValueError):
            SimConfig(fock_cutoff=2)
        with pytest.raises(ValueError):
            SimConfig(dt=-1.0)

    def test_default_timestep_caps(self, params):
        dt = default_timestep(params, T_BOX)
        assert dt <= 1.0 / (200 * params.gamma)
        assert dt <= T_BOX / 2000
        no_drive = SystemParams(gamma=GAMMA, rabi=0.0)
        assert np.isfinite(default_timestep(no_drive, T_BOX))
