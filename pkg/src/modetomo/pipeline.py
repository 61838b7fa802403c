"""Synthetic heterodyne records and their reduction to mode moments.

A measured record for mode k is S_k = a_k + h_k+, the target mode plus a
conjugated amplifier noise mode carrying n_added photons.  Drive-on and
drive-off shots are interleaved so the off records (target in vacuum)
calibrate every noise moment.  Raw record moments mix target and noise
moments through a product of binomials; the denoisers invert that mixing
recursively, lowest order first.

Shot synthesis draws from the exact outcome distribution: the two-mode
Husimi Q function of the state convolved with a complex Gaussian of
variance n_added per mode.  Sampling is eigenstate mixture + rejection from
a uniform disk proposal, with all randomness from one counter-based Philox
stream so datasets are reproducible from their seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import SystemParams
from .filters import TemporalFilter
from .observables import MomentIndex, MomentVector
from .spaces import DensityMatrix

_REJECTION_BATCH = 1 << 18
_MAX_REJECTION_ROUNDS = 4000
SEGMENTS = 20
MIN_SHOTS = 10_000
NOISE_ORDER_CAP = 8


@dataclass(frozen=True)
class NoiseModel:
    """Amplification-chain noise, in added photons per mode."""

    n_added: float

    def __post_init__(self):
        if self.n_added < 0:
            raise ValueError(f"n_added must be >= 0, got {self.n_added}")


def quantum_efficiency(noise: NoiseModel) -> float:
    """eta = (1/2) / (1/2 + n_added)."""
    return 0.5 / (0.5 + noise.n_added)


@dataclass
class InterleavedDataset:
    """Paired drive-on / drive-off complex shot records for both modes."""

    on_shots: np.ndarray      # (n, 2) complex
    off_shots: np.ndarray     # (n, 2) complex
    seed: int
    n_added: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.on_shots = np.asarray(self.on_shots, dtype=complex)
        self.off_shots = np.asarray(self.off_shots, dtype=complex)
        if self.on_shots.shape != self.off_shots.shape or self.on_shots.ndim != 2 \
                or self.on_shots.shape[1] != 2:
            raise ValueError("on/off shot arrays must both have shape (n, 2)")

    @property
    def n(self) -> int:
        return self.on_shots.shape[0]

    def save(self, path) -> None:
        path = str(path)
        if path.endswith(".npz"):
            np.savez_compressed(path, on=self.on_shots, off=self.off_shots,
                                seed=self.seed, n_added=self.n_added)
            return
        with open(path, "w", newline="") as fh:
            fh.write(f"# seed={self.seed}\n")
            fh.write(f"# n_added={self.n_added!r}\n")
            for key, val in sorted(self.meta.items()):
                fh.write(f"# {key}={val!r}\n")
            w = csv.writer(fh)
            w.writerow(["shot_index", "on_off", "re_s1", "im_s1", "re_s2", "im_s2"])
            for tag, shots in (("on", self.on_shots), ("off", self.off_shots)):
                for i, (s1, s2) in enumerate(shots):
                    w.writerow([i, tag, repr(float(s1.real)), repr(float(s1.imag)),
                                repr(float(s2.real)), repr(float(s2.imag))])

    @classmethod
    def load(cls, path) -> "InterleavedDataset":
        path = str(path)
        if path.endswith(".npz"):
            data = np.load(path)
            return cls(data["on"], data["off"], int(data["seed"]), float(data["n_added"]))
        seed, n_added, meta = 0, 0.0, {}
        on, off = [], []
        with open(path, newline="") as fh:
            header_done = False
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    key = key.strip()
                    if key == "seed":
                        seed = int(val)
                    elif key == "n_added":
                        n_added = float(val)
                    elif key:
                        meta[key] = val
                    continue
                if not header_done:
                    header_done = True  # column header row
                    continue
                idx, tag, r1, i1, r2, i2 = line.strip().split(",")
                rec = [complex(float(r1), float(i1)), complex(float(r2), float(i2))]
                (on if tag == "on" else off).append(rec)
        return cls(np.array(on), np.array(off), seed, n_added, meta)


_PROPOSAL_VARIANCE = 2.0  # per-mode variance of the Gaussian proposal


def _sample_pure_q(psi: np.ndarray, count: int, radius: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` points from the two-mode Husimi Q of a pure state.

    Rejection sampling on a disk of the given radius per mode, proposing
    from a complex Gaussian truncated to the disk.  The envelope constant is
    certified on a radial grid and additionally checked shot by shot, so a
    violated bound raises instead of skewing the distribution.
    """
    d1, d2 = psi.shape
    f1 = np.sqrt(np.cumprod(np.concatenate([[1.0], np.arange(1, d1)])))
    f2 = np.sqrt(np.cumprod(np.concatenate([[1.0], np.arange(1, d2)])))
    coef = psi / np.outer(f1, f2)

    s2 = _PROPOSAL_VARIANCE
    decay = 1.0 - 1.0 / s2
    # envelope constant: sup over the disk of exp(-decay r^2) |poly|^2 with the
    # polynomial bounded through the triangle inequality on a radial grid
    r = np.linspace(0.0, radius, 512)
    pow1 = np.power.outer(r, np.arange(d1))   # (512, d1)
    pow2 = np.power.outer(r, np.arange(d2))
    p_bound = pow1 @ np.abs(coef) @ pow2.T    # (512, 512)
    gauss = np.exp(-decay * r * r)
    m_const = 1.05 * s2 ** 2 * float(np.max(np.outer(gauss, gauss) * p_bound ** 2))

    out = np.empty((count, 2), dtype=complex)
    got = 0
    scale = s2 ** 2 / m_const
    for _ in range(_MAX_REJECTION_ROUNDS):
        if got >= count:
            break
        m = _REJECTION_BATCH
        a1 = _complex_normal(rng, m, s2)
        a2 = _complex_normal(rng, m, s2)
        u = rng.random(m)
        r2 = np.abs(a1) ** 2 + np.abs(a2) ** 2
        inside = (np.abs(a1) <= radius) & (np.abs(a2) <= radius)
        b1 = np.conj(a1)
        b2 = np.conj(a2)
        # Horner over mode 2 nested in powers of mode 1
        inner = np.zeros_like(b1)
        for n1 in range(d1 - 1, -1, -1):
            row = np.zeros_like(b2)
            for n2 in range(d2 - 1, -1, -1):
                row = row * b2 + coef[n1, n2]
            inner = inner * b1 + row
        prob = scale * np.exp(-decay * r2) * np.abs(inner) ** 2
        if np.any(prob[inside] > 1.0):
            raise RuntimeError("rejection envelope violated; proposal bound too small")
        sel = np.flatnonzero(inside & (u < prob))
        take = min(count - got, sel.size)
        out[got:got + take, 0] = a1[sel[:take]]
        out[got:got + take, 1] = a2[sel[:take]]
        got += take
    if got < count:
        raise RuntimeError("rejection sampling failed to reach the requested count")
    return out


def synthesize_dataset(rho: DensityMatrix, noise: NoiseModel, n: int, seed: int,
                       gain: complex = 1.0 + 0.0j,
                       leak: tuple[complex, complex] = (0.0 + 0.0j, 0.0 + 0.0j),
                       ) -> InterleavedDataset:
    """Generate n on-shots from ``rho`` and n vacuum off-shots.

    ``gain`` and ``leak`` model the measurement chain: the recorded signal is
    (alpha + leak_k) / gain before noise is added (drive-off shots see the
    same 1/gain but no leak).  Defaults are the ideal chain.
    """
    if n < 1:
        raise ValueError("need at least one shot")
    if rho.space.nfactors != 2:
        raise ValueError("synthesize_dataset needs a two-mode state")
    d1, d2 = rho.space.dims
    rng = np.random.Generator(np.random.Philox(seed))

    w, v = np.linalg.eigh(rho.matrix)
    w = np.clip(w[::-1], 0.0, None)
    v = v[:, ::-1]
    w = w / w.sum()
    counts = rng.multinomial(n, w)
    radius = math.sqrt(max(d1, d2)) + 4.0

    alphas = np.empty((n, 2), dtype=complex)
    pos = 0
    for j, cnt in enumerate(counts):
        if cnt == 0:
            continue
        psi = v[:, j].reshape(d1, d2)
        if abs(abs(psi[0, 0]) - 1.0) < 1e-12:
            # vacuum eigenvector: its Q is exactly a unit complex Gaussian
            alphas[pos:pos + cnt] = _complex_normal(rng, (cnt, 2), 1.0)
        else:
            alphas[pos:pos + cnt] = _sample_pure_q(psi, cnt, radius, rng)
        pos += cnt
    alphas = alphas[rng.permutation(n)]

    c = 1.0 / complex(gain)
    on = (alphas + np.asarray(leak, dtype=complex)[None, :]) * c
    on += _complex_normal(rng, (n, 2), noise.n_added)
    off = _complex_normal(rng, (n, 2), 1.0) * c
    off += _complex_normal(rng, (n, 2), noise.n_added)
    return InterleavedDataset(on, off, seed, noise.n_added,
                              {"gain": complex(gain), "leak": tuple(map(complex, leak))})


def _complex_normal(rng, shape, variance):
    if variance == 0.0:
        return np.zeros(shape, dtype=complex)
    s = math.sqrt(variance / 2.0)
    return rng.normal(0.0, s, shape) + 1j * rng.normal(0.0, s, shape)


# ---------------------------------------------------------------------------
# moment estimation and unmixing


def _closure(indices) -> list[MomentIndex]:
    """All elementwise-<= sub-indices of the given indices (identity included)."""
    seen = set()
    for idx in indices:
        idx = MomentIndex(*idx)
        for m1 in range(idx.m1 + 1):
            for n1 in range(idx.n1 + 1):
                for m2 in range(idx.m2 + 1):
                    for n2 in range(idx.n2 + 1):
                        seen.add(MomentIndex(m1, n1, m2, n2))
    return sorted(seen, key=lambda i: (i.order,) + tuple(i))


_MOMENT_CHUNK = 100_000


def _raw_moments(shots: np.ndarray, indices) -> dict[MomentIndex, complex]:
    """Empirical means of conj(S1)^m1 S1^n1 conj(S2)^m2 S2^n2 over shots.

    Evaluated in fixed chunks so the power tables stay small for large n.
    """
    idxs = [MomentIndex(*i) for i in indices]
    me = max((max(i) for i in idxs), default=0)
    n = shots.shape[0]
    sums = np.zeros(len(idxs), dtype=complex)
    for lo in range(0, n, _MOMENT_CHUNK):
        s1 = shots[lo:lo + _MOMENT_CHUNK, 0]
        s2 = shots[lo:lo + _MOMENT_CHUNK, 1]
        p1 = np.column_stack([s1 ** k for k in range(me + 1)])
        p2 = np.column_stack([s2 ** k for k in range(me + 1)])
        c1, c2 = np.conj(p1), np.conj(p2)
        for j, i in enumerate(idxs):
            sums[j] += np.sum(c1[:, i.m1] * p1[:, i.n1] * c2[:, i.m2] * p2[:, i.n2])
    return {i: complex(sums[j] / n) for j, i in enumerate(idxs)}


def _binom_products(idx: MomentIndex, sub: MomentIndex) -> float:
    return (math.comb(idx.m1, sub.m1) * math.comb(idx.n1, sub.n1)
            * math.comb(idx.m2, sub.m2) * math.comb(idx.n2, sub.n2))


def _unmix(raw_on, raw_off, targets) -> dict[MomentIndex, complex]:
    """Solve the binomial mixing relation for the target-mode moments.

    raw record moment(t) = sum over sub <= t of binomials * target(sub)
    * noise(t - sub), with noise moments taken directly from the off records
    (a target in vacuum contributes nothing to normal-ordered moments).
    """
    order = sorted(raw_on, key=lambda i: (i.order,) + tuple(i))
    target = {}
    for idx in order:
        val = raw_on[idx]
        for sub in order:
            if sub == idx or any(s > t for s, t in zip(sub, idx)):
                continue
            rest = MomentIndex(*(t - s for t, s in zip(idx, sub)))
            if rest.order > NOISE_ORDER_CAP:
                continue
            val -= _binom_products(idx, sub) * target[sub] * raw_off[rest]
        target[idx] = val
    return {MomentIndex(*t): target[MomentIndex(*t)] for t in targets}


def _segment_bounds(n: int, segments: int = SEGMENTS):
    edges = np.linspace(0, n, segments + 1).astype(int)
    return list(zip(edges[:-1], edges[1:]))


def denoise_general(ds: InterleavedDataset, indices) -> MomentVector:
    """Recover target-mode moments for the given indices from the records.

    Standard deviations come from re-running the estimate on 20 data
    segments: sigma is the scatter of the segment estimates scaled down to
    the full sample size.
    """
    if ds.n < MIN_SHOTS:
        raise ValueError(f"need at least {MIN_SHOTS} shots, got {ds.n}")
    targets = [MomentIndex(*i) for i in indices]
    closure = _closure(targets)
    full = _unmix(_raw_moments(ds.on_shots, closure),
                  _raw_moments(ds.off_shots, closure), targets)

    seg_vals = np.empty((SEGMENTS, len(targets)), dtype=complex)
    for s, (lo, hi) in enumerate(_segment_bounds(ds.n)):
        est = _unmix(_raw_moments(ds.on_shots[lo:hi], closure),
                     _raw_moments(ds.off_shots[lo:hi], closure), targets)
        seg_vals[s] = [est[t] for t in targets]
    scatter = np.sqrt(np.var(seg_vals.real, axis=0, ddof=1)
                      + np.var(seg_vals.imag, axis=0, ddof=1))
    sigmas = scatter / math.sqrt(SEGMENTS)
    return MomentVector(targets, np.array([full[t] for t in targets]), sigmas)


FIRST_SECOND_INDICES = [
    MomentIndex(0, 1, 0, 0), MomentIndex(0, 0, 0, 1),
    MomentIndex(0, 2, 0, 0), MomentIndex(0, 0, 0, 2),
    MomentIndex(1, 1, 0, 0), MomentIndex(0, 0, 1, 1),
    MomentIndex(0, 1, 0, 1), MomentIndex(1, 0, 0, 1),
]


def denoise_first_second(ds: InterleavedDataset) -> MomentVector:
    """First- and second-order mode moments via the explicit low-order formulas.

    Written out by hand (rather than through the general unmixing engine) so
    the two routes check each other.
    """
    if ds.n < MIN_SHOTS:
        raise ValueError(f"need at least {MIN_SHOTS} shots, got {ds.n}")

    def estimate(on, off):
        s1, s2 = on[:, 0], on[:, 1]
        v1, v2 = off[:, 0], off[:, 1]
        mv1, mv2 = v1.mean(), v2.mean()
        a1 = s1.mean() - mv1
        a2 = s2.mean() - mv2
        out = {
            MomentIndex(0, 1, 0, 0): a1,
            MomentIndex(0, 0, 0, 1): a2,
            # <a^2> = <S^2> - <V^2> - 2 <a><h+>
            MomentIndex(0, 2, 0, 0): (s1 ** 2).mean() - (v1 ** 2).mean() - 2 * a1 * mv1,
            MomentIndex(0, 0, 0, 2): (s2 ** 2).mean() - (v2 ** 2).mean() - 2 * a2 * mv2,
            # <a+ a> = <|S|^2> - <|V|^2> - <a+><h+> - <a><h>
            MomentIndex(1, 1, 0, 0): (np.abs(s1) ** 2).mean() - (np.abs(v1) ** 2).mean()
                - np.conj(a1) * mv1 - a1 * np.conj(mv1),
            MomentIndex(0, 0, 1, 1): (np.abs(s2) ** 2).mean() - (np.abs(v2) ** 2).mean()
                - np.conj(a2) * mv2 - a2 * np.conj(mv2),
            # <a1 a2> = <S1 S2> - <V1 V2> - <a1><h2+> - <a2><h1+>
            MomentIndex(0, 1, 0, 1): (s1 * s2).mean() - (v1 * v2).mean()
                - a1 * mv2 - a2 * mv1,
            # <a1+ a2> = <S1* S2> - <V1* V2> - <a1+><h2+> - <a2><h1>
            MomentIndex(1, 0, 0, 1): (np.conj(s1) * s2).mean() - (np.conj(v1) * v2).mean()
                - np.conj(a1) * mv2 - a2 * np.conj(mv1),
        }
        return out

    full = estimate(ds.on_shots, ds.off_shots)
    seg_vals = np.empty((SEGMENTS, len(FIRST_SECOND_INDICES)), dtype=complex)
    for s, (lo, hi) in enumerate(_segment_bounds(ds.n)):
        est = estimate(ds.on_shots[lo:hi], ds.off_shots[lo:hi])
        seg_vals[s] = [est[t] for t in FIRST_SECOND_INDICES]
    scatter = np.sqrt(np.var(seg_vals.real, axis=0, ddof=1)
                      + np.var(seg_vals.imag, axis=0, ddof=1))
    sigmas = scatter / math.sqrt(SEGMENTS)
    values = np.array([full[t] for t in FIRST_SECOND_INDICES])
    return MomentVector(list(FIRST_SECOND_INDICES), values, sigmas)


# ---------------------------------------------------------------------------
# coherent background removal


@dataclass(frozen=True)
class BackgroundFit:
    """Gain/phase of the chain (A, phi_a) and of the input leak (B, phi_b)."""

    amplitude: float
    leak_amplitude: float
    phase_a: float
    phase_b: float
    residual: float

    def __post_init__(self):
        if self.amplitude < 0 or self.leak_amplitude < 0:
            raise ValueError("fitted amplitudes must be nonnegative")


def captured_input_amplitude(params: SystemParams, filt: TemporalFilter) -> complex:
    """Reflected-drive amplitude captured by a filter, at baseband.

    The drive is constant in its rotating frame, so the capture reduces to
    the filter's window integral of exp(i Delta t) times Omega/sqrt(Gamma).
    """
    from scipy.integrate import quad

    from .filters import Boxcar

    t_lo, t_hi = filt.window
    delta = filt.detuning
    if isinstance(filt.shape, Boxcar):
        if abs(delta) < 1e-12:
            osc = t_hi - t_lo
        else:
            osc = (np.exp(1j * delta * t_hi) - np.exp(1j * delta * t_lo)) / (1j * delta)
        proj = osc / np.sqrt(filt.duration)
    else:
        re, _ = quad(lambda t: filt.envelope(t) * np.cos(delta * t), t_lo, t_hi, limit=400)
        im, _ = quad(lambda t: filt.envelope(t) * np.sin(delta * t), t_lo, t_hi, limit=400)
        proj = complex(re, im)
    return params.rabi / np.sqrt(params.gamma) * proj


def remove_background(raw: MomentVector, params: SystemParams,
                      filters: tuple[TemporalFilter, TemporalFilter],
                      reference: MomentVector,
                      ) -> tuple[MomentVector, BackgroundFit]:
    """Fit chain gain/phase and drive leak, then return corrected moments.

    The fit equates the simulated first and second moments with the
    transformed measured ones; the returned vector applies the resulting
    affine map  a_k -> A e^{i phi_a} a_k^meas - B e^{i phi_b} in_k  to every
    moment in ``raw`` (exact binomial expansion, sigmas propagated linearly).
    """
    in_amp = np.array([captured_input_amplitude(params, f) for f in filters])
    a_idx = [MomentIndex(0, 1, 0, 0), MomentIndex(0, 0, 0, 1)]
    n_idx = [MomentIndex(1, 1, 0, 0), MomentIndex(0, 0, 1, 1)]
    meas_a = np.array([raw.get(i) for i in a_idx])
    meas_n = np.array([raw.get(i).real for i in n_idx])
    ref_a = np.array([reference.get(i) for i in a_idx])
    ref_n = np.array([reference.get(i).real for i in n_idx])

    scale_a = max(np.max(np.abs(ref_a)), np.max(np.abs(meas_a)), 1e-12)
    scale_n = max(np.max(np.abs(ref_n)), 1e-12)

    def model(theta):
        amp, phi_a, leak, phi_b = theta
        c = amp * np.exp(1j * phi_a)
        d = leak * np.exp(1j * phi_b) * in_amp
        first = c * meas_a - d
        second = (amp ** 2 * meas_n + np.abs(d) ** 2
                  - 2.0 * np.real(np.conj(c * meas_a) * d))
        return first, second

    def cost(theta):
        first, second = model(theta)
        return (np.sum(np.abs(first - ref_a) ** 2) / scale_a ** 2
                + np.sum((second - ref_n) ** 2) / scale_n ** 2)

    best = None
    for phi0 in np.arange(8) * (2 * np.pi / 8):
        res = minimize(cost, x0=[1.0, phi0, 0.1, 0.0], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise RuntimeError("background fit did not converge")
    amp, phi_a, leak, phi_b = best.x
    if amp < 0:
        amp, phi_a = -amp, phi_a + np.pi
    if leak < 0:
        leak, phi_b = -leak, phi_b + np.pi
    fit = BackgroundFit(amp, leak, phi_a % (2 * np.pi), phi_b % (2 * np.pi),
                        float(best.fun))

    c = amp * np.exp(1j * phi_a)
    d = leak * np.exp(1j * phi_b) * in_amp
    corrected, sigmas = _affine_transform(raw, c, d)
    return MomentVector(raw.indices, corrected, sigmas), fit


def _affine_transform(mv: MomentVector, c: complex, d: np.ndarray):
    """Moments of a_k' = c a_k - d_k from moments of a_k (binomial expansion)."""
    values = np.empty(len(mv), dtype=complex)
    sig2 = np.zeros(len(mv))
    sig_lookup = {i: s for i, s in zip(mv.indices, mv.sigmas)}
    for j, idx in enumerate(mv.indices):
        total = 0.0 + 0.0j
        for sub in _closure([idx]):
            if any(s > t for s, t in zip(sub, idx)):
                continue
            coef = (_binom_products(idx, sub)
                    * np.conj(c) ** sub.m1 * c ** sub.n1
                    * np.conj(c) ** sub.m2 * c ** sub.n2
                    * (-np.conj(d[0])) ** (idx.m1 - sub.m1)
                    * (-d[0]) ** (idx.n1 - sub.n1)
                    * (-np.conj(d[1])) ** (idx.m2 - sub.m2)
                    * (-d[1]) ** (idx.n2 - sub.n2))
            try:
                val = mv.get(sub) if not sub.is_identity else 1.0
            except KeyError:
                raise KeyError(
                    f"moment set is not closed: {sub} needed for {idx}") from None
            total += coef * val
            s = sig_lookup.get(sub.canonical(), 0.0)
            sig2[j] += np.abs(coef) ** 2 * s ** 2
        values[j] = total
    return values, np.sqrt(sig2)
