"""Moments, entanglement, and state-comparison metrics for two-mode states.

A moment index (m1, n1, m2, n2) denotes <(a1+)^m1 a1^n1 (a2+)^m2 a2^n2>.
Conjugating a moment swaps creation and annihilation exponents per mode, so
only the lexicographically smaller representative of each conjugate pair is
kept ("canonical").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .spaces import DensityMatrix, partial_transpose, trace_norm


class MomentIndex(NamedTuple):
    m1: int
    n1: int
    m2: int
    n2: int

    @property
    def order(self) -> int:
        return self.m1 + self.n1 + self.m2 + self.n2

    def conjugate(self) -> "MomentIndex":
        return MomentIndex(self.n1, self.m1, self.n2, self.m2)

    def is_canonical(self) -> bool:
        return self <= self.conjugate()

    def canonical(self) -> "MomentIndex":
        return min(self, self.conjugate())

    @property
    def is_identity(self) -> bool:
        return self.order == 0


@dataclass
class MomentVector:
    """Ordered set of moment values with per-moment standard deviations."""

    indices: list[MomentIndex]
    values: np.ndarray
    sigmas: np.ndarray = field(default=None)

    def __post_init__(self):
        self.indices = [MomentIndex(*i) for i in self.indices]
        self.values = np.asarray(self.values, dtype=complex)
        if self.sigmas is None:
            self.sigmas = np.zeros(len(self.indices))
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if not (len(self.indices) == self.values.size == self.sigmas.size):
            raise ValueError("indices, values, and sigmas must have equal length")
        if np.any(self.sigmas < 0):
            raise ValueError("sigmas must be nonnegative")

    def __len__(self) -> int:
        return len(self.indices)

    def get(self, idx) -> complex:
        """Value at an index, resolving conjugates of stored entries."""
        idx = MomentIndex(*idx)
        lookup = {i: k for k, i in enumerate(self.indices)}
        if idx in lookup:
            return complex(self.values[lookup[idx]])
        if idx.conjugate() in lookup:
            return complex(np.conj(self.values[lookup[idx.conjugate()]]))
        raise KeyError(f"moment {idx} not present")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self._write(fh)

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    def _write(self, fh) -> None:
        w = csv.writer(fh)
        w.writerow(["m1", "n1", "m2", "n2", "re", "im", "sigma"])
        for idx, val, sig in zip(self.indices, self.values, self.sigmas):
            w.writerow([idx.m1, idx.n1, idx.m2, idx.n2,
                        repr(float(val.real)), repr(float(val.imag)), repr(float(sig))])

    @classmethod
    def from_csv(cls, path) -> "MomentVector":
        indices, values, sigmas = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                indices.append(MomentIndex(int(row["m1"]), int(row["n1"]),
                                           int(row["m2"]), int(row["n2"])))
                values.append(complex(float(row["re"]), float(row["im"])))
                sigmas.append(float(row["sigma"]))
        return cls(indices, np.array(values), np.array(sigmas))


def enumerate_moments(max_exp: int, max_order: int | None = None,
                      include_identity: bool | None = None) -> list[MomentIndex]:
    """All canonical moment indices with exponents <= max_exp.

    ``max_order`` bounds the total order if given.  By default the identity
    moment is included only for unbounded order (the convention under which
    the standard 27- and 325-moment sets come out).
    """
    if max_exp < 0:
        raise ValueError("max_exp must be >= 0")
    if include_identity is None:
        include_identity = max_order is None
    out = []
    rng = range(max_exp + 1)
    for m1 in rng:
        for n1 in rng:
            for m2 in rng:
                for n2 in rng:
                    idx = MomentIndex(m1, n1, m2, n2)
                    if max_order is not None and idx.order > max_order:
                        continue
                    if idx.is_identity and not include_identity:
                        continue
                    if idx.is_canonical():
                        out.append(idx)
    return out


@lru_cache(maxsize=None)
def _ladder_powers(dim: int, max_power: int):
    a = np.zeros((dim, dim), dtype=complex)
    n = np.arange(1, dim)
    a[n - 1, n] = np.sqrt(n)
    powers = [np.eye(dim, dtype=complex)]
    for _ in range(max_power):
        powers.append(powers[-1] @ a)
    return tuple(powers)


@lru_cache(maxsize=None)
def moment_operator(dims: tuple[int, int], idx: MomentIndex) -> np.ndarray:
    """(a1+)^m1 a1^n1 (x) (a2+)^m2 a2^n2 on the truncated two-mode space."""
    d1, d2 = dims
    if max(idx.m1, idx.n1) > d1 - 1 or max(idx.m2, idx.n2) > d2 - 1:
        raise ValueError(f"moment exponents {tuple(idx)} exceed cutoff {dims}")
    p1 = _ladder_powers(d1, d1 - 1)
    p2 = _ladder_powers(d2, d2 - 1)
    op1 = p1[idx.m1].conj().T @ p1[idx.n1]
    op2 = p2[idx.m2].conj().T @ p2[idx.n2]
    out = np.kron(op1, op2)
    out.setflags(write=False)
    return out


def moment(rho: DensityMatrix, idx) -> complex:
    """Tr[rho (a1+)^m1 a1^n1 (a2+)^m2 a2^n2] on a two-mode state."""
    idx = MomentIndex(*idx)
    dims = rho.space.dims
    if len(dims) != 2:
        raise ValueError(f"moment needs a two-mode state, got factors {dims}")
    op = moment_operator(dims, idx)
    return complex(np.trace(rho.matrix @ op))


def moments_of_state(rho: DensityMatrix, indices: Iterable) -> MomentVector:
    idx = [MomentIndex(*i) for i in indices]
    vals = np.array([moment(rho, i) for i in idx])
    return MomentVector(idx, vals, np.zeros(len(idx)))


def log_negativity(rho: DensityMatrix, transpose_factor: int = 0) -> float:
    """log2 of the trace norm of the partial transpose, clamped at zero."""
    if rho.space.nfactors != 2:
        raise ValueError("log_negativity needs a bipartite state")
    pt = partial_transpose(rho, transpose_factor)
    en = float(np.log2(trace_norm(pt)))
    if en < -1e-9:
        return en  # genuinely negative values indicate a numerical problem upstream
    return max(en, 0.0)


def g2_cross(rho: DensityMatrix) -> float:
    """Zero-delay two-photon cross-correlation <n1 n2>/(<n1><n2>)."""
    n1 = moment(rho, (1, 1, 0, 0)).real
    n2 = moment(rho, (0, 0, 1, 1)).real
    if n1 <= 0 or n2 <= 0:
        raise ZeroDivisionError("cross-correlation undefined for empty modes")
    num = moment(rho, (1, 1, 1, 1)).real
    return num / (n1 * n2)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.where((w < 0) & (w >= -1e-9), 0.0, w)
    if w.min() < 0:
        raise ValueError(f"matrix square root of non-PSD input (min eigenvalue {w.min():.3e})")
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: DensityMatrix, rho_prime: DensityMatrix) -> float:
    """Uhlmann overlap (Tr sqrt(sqrt(rho) rho' sqrt(rho)))^2."""
    if rho.space.dims != rho_prime.space.dims:
        raise ValueError("fidelity needs states on the same space")
    s = _psd_sqrt(rho.matrix)
    inner = _psd_sqrt(s @ rho_prime.matrix @ s)
    val = float(np.trace(inner).real) ** 2
    return min(max(val, 0.0), 1.0)


def purity(rho: DensityMatrix) -> float:
    return float(np.trace(rho.matrix @ rho.matrix).real)
