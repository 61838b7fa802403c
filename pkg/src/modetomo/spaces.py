"""Dense complex linear algebra over explicit tensor-product spaces.

The composite space used throughout is qubit (x) mode1 (x) mode2, in that
fixed factor order.  Everything here is a plain ``numpy`` matrix tagged
with the list of factor dimensions; all values are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-9
POSITIVITY_REJECT = -1e-2


def _readonly(matrix: np.ndarray) -> np.ndarray:
    out = np.array(matrix, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of finite-dimensional factors."""

    dims: tuple[int, ...]

    def __init__(self, dims):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def nfactors(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class Operator:
    """Square complex matrix acting on a HilbertSpace."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        if m.shape[0] != self.space.dim:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match space dimension {self.space.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)


@dataclass(frozen=True)
class DensityMatrix:
    """Valid quantum state: Hermitian, unit trace, positive within tolerance.

    Negative eigenvalues are projected to zero and the state renormalized:
    silently inside ``POSITIVITY_TOL`` (ODE round-off territory), with a
    logged warning between there and ``POSITIVITY_REJECT``.  The warned band
    exists because the two-filter capture equation is not of Lindblad form
    while both windows are open; for overlapping non-orthogonal filters a
    model-inherent negativity up to order 1e-3 survives at zero step size.
    Clamping then yields the closest physical state (and can only lower the
    entanglement read off it).  Anything below the reject limit is treated
    as a broken state.
    """

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"state matrix shape {m.shape} does not match space dimension {self.space.dim}"
            )
        herm_err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if herm_err > HERMITICITY_TOL:
            raise ValueError(f"state is not Hermitian (max asymmetry {herm_err:.3e})")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"state trace {tr!r} is not 1 within {TRACE_TOL}")
        w = np.linalg.eigvalsh(m)
        if w.min() < POSITIVITY_REJECT:
            raise ValueError(f"state has negative eigenvalue {w.min():.3e}")
        if w.min() < 0.0:
            m = _clamp_negative_eigenvalues(m)
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.space.dim


def _clamp_negative_eigenvalues(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    # inside POSITIVITY_TOL this is plain float noise, not worth surfacing
    level = logging.WARNING if w.min() < POSITIVITY_TOL else logging.DEBUG
    log.log(level, "clamping negative state eigenvalues (min %.3e)", w.min())
    w = np.clip(w, 0.0, None)
    m = (v * w) @ v.conj().T
    return m / np.trace(m).real


def annihilation(dim: int) -> Operator:
    """Bosonic lowering operator truncated to ``dim`` Fock levels."""
    if dim < 2:
        raise ValueError(f"annihilation operator needs dim >= 2, got {dim}")
    a = np.zeros((dim, dim), dtype=complex)
    n = np.arange(1, dim)
    a[n - 1, n] = np.sqrt(n)
    return Operator(HilbertSpace([dim]), a)


def qubit_lowering() -> Operator:
    """|g><e| in the (g, e) basis."""
    return Operator(HilbertSpace([2]), np.array([[0, 1], [0, 0]], dtype=complex))


def embed(op: Operator, factor_index: int, space: HilbertSpace) -> Operator:
    """Extend a single-factor operator to the full space by identities.

    Factor order is preserved: ``embed(a, 1, [2, N, N])`` is I (x) a (x) I.
    """
    if not 0 <= factor_index < space.nfactors:
        raise IndexError(f"factor index {factor_index} out of range for {space.dims}")
    d = space.dims[factor_index]
    if op.space.dim != d:
        raise ValueError(
            f"operator dimension {op.space.dim} does not match factor {factor_index} "
            f"of dimension {d}"
        )
    left = int(np.prod(space.dims[:factor_index], initial=1))
    right = int(np.prod(space.dims[factor_index + 1:], initial=1))
    m = np.kron(np.kron(np.eye(left), op.matrix), np.eye(right))
    return Operator(space, m)


def partial_transpose(rho: DensityMatrix, factor_index: int) -> np.ndarray:
    """Transpose one tensor factor of a state; returns a bare matrix.

    The result is Hermitian and unit trace but generally not positive --
    negativity of its spectrum is the point.
    """
    dims = rho.space.dims
    if not 0 <= factor_index < len(dims):
        raise IndexError(f"factor index {factor_index} out of range for {dims}")
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    perm = list(range(2 * n))
    perm[factor_index], perm[n + factor_index] = perm[n + factor_index], perm[factor_index]
    d = rho.dim
    return t.transpose(perm).reshape(d, d)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"trace norm needs a square matrix, got shape {m.shape}")
    return float(np.linalg.svd(m, compute_uv=False).sum())


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every factor not listed in ``keep`` (order preserved)."""
    dims = rho.space.dims
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one factor")
    if any(k < 0 or k >= len(dims) for k in keep):
        raise IndexError(f"keep indices {keep} out of range for {dims}")
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # contract discarded factors pairwise, highest first so axes stay valid
    removed = 0
    for ax in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + n - removed)
        removed += 1
    kept_dims = [dims[k] for k in keep]
    d = int(np.prod(kept_dims))
    return DensityMatrix(HilbertSpace(kept_dims), t.reshape(d, d))


def truncate_mode_levels(rho: DensityMatrix, cutoff: int) -> DensityMatrix:
    """Project every factor onto its lowest ``cutoff`` levels and renormalize."""
    dims = rho.space.dims
    if any(cutoff > d for d in dims):
        raise ValueError(f"cutoff {cutoff} exceeds a factor dimension in {dims}")
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    sl = tuple(slice(0, cutoff) for _ in range(2 * n))
    t = t[sl]
    d = cutoff ** n
    m = t.reshape(d, d)
    m = m / np.trace(m).real
    return DensityMatrix(HilbertSpace([cutoff] * n), m)
