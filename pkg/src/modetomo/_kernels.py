"""RK4 integration kernels for the capture master equation.

The right-hand side is evaluated in the half-Kraus form

    drho/dt = K rho + (K rho)^dag + sum_k c_k rho c_k^dag - (m-1) G s rho s^dag

with K = K0 - sum_k [ |g_k|^2/2 n_k + sqrt(G) conj(g_k) a_k^dag s ] and
c_k = g_k a_k + sqrt(G) s.  Every operator involved (qubit lowering, mode
ladders, their products) has at most one nonzero per row and column, so the
numba kernel applies them as index-gather passes in O(d^2) per term instead
of dense O(d^3) products.  Couplings are precomputed on the half-step grid,
so the kernels never call back into Python.

Set MODETOMO_BACKEND=numpy to force the pure-numpy twin, which evaluates the
same right-hand side with dense matrix products (same results, slower).
"""

import os

import numpy as np

_ENV_VAR = "MODETOMO_BACKEND"


def selected_backend() -> str:
    """Active kernel backend, honoring the MODETOMO_BACKEND override."""
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice in ("numpy", "numba"):
        return choice
    if choice:
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        return "numpy"


def permwt(m: np.ndarray):
    """Row representation of a matrix with <= 1 nonzero per row: M[r, perm[r]] = wt[r]."""
    m = np.asarray(m)
    d = m.shape[0]
    perm = np.zeros(d, dtype=np.int64)
    wt = np.zeros(d, dtype=complex)
    for r in range(d):
        nz = np.flatnonzero(m[r])
        if nz.size > 1:
            raise ValueError("matrix is not permutation-scale (row has >1 nonzero)")
        if nz.size == 1:
            perm[r] = nz[0]
            wt[r] = m[r, nz[0]]
    return perm, wt


class KernelOperators:
    """Precomputed operator data shared by both kernel backends."""

    def __init__(self, sigma: np.ndarray, mode_ops, gamma: float, rabi: float):
        self.sigma = np.ascontiguousarray(sigma)
        self.mode_ops = np.ascontiguousarray(np.stack(mode_ops))
        self.gamma = float(gamma)
        self.rabi = float(rabi)
        d = sigma.shape[0]
        m = self.mode_ops.shape[0]

        self.num_ops = np.ascontiguousarray(
            np.stack([a.conj().T @ a for a in self.mode_ops]))
        self.cross_ops = np.ascontiguousarray(
            np.stack([a.conj().T @ sigma for a in self.mode_ops]))
        h = -0.5j * rabi * (sigma.conj().T - sigma)
        self.k0 = np.ascontiguousarray(
            -1j * h - 0.5 * gamma * (sigma.conj().T @ sigma))

        # gather representations for the structured kernel
        self.perm_sig, self.wt_sig = permwt(sigma)
        self.perm_sigd, self.wt_sigd = permwt(sigma.conj().T)
        pa = np.zeros((m, d), dtype=np.int64)
        wa = np.zeros((m, d), dtype=complex)
        pc = np.zeros((m, d), dtype=np.int64)
        wc = np.zeros((m, d), dtype=complex)
        nd = np.zeros((m, d), dtype=float)
        for k in range(m):
            pa[k], wa[k] = permwt(self.mode_ops[k])
            pc[k], wc[k] = permwt(self.cross_ops[k])
            nd[k] = np.diag(self.num_ops[k]).real
        self.perm_a, self.wt_a = pa, wa
        self.perm_c, self.wt_c = pc, wc
        self.num_diag = nd
        self.pe_diag = np.ascontiguousarray(np.diag(sigma.conj().T @ sigma).real)


def _rhs_numpy(rho, gs, ops: KernelOperators):
    m = ops.mode_ops.shape[0]
    sqrt_gamma = np.sqrt(ops.gamma)
    K = ops.k0.copy()
    for k in range(m):
        g = gs[k]
        K -= (0.5 * abs(g) ** 2) * ops.num_ops[k]
        K -= (sqrt_gamma * np.conj(g)) * ops.cross_ops[k]
    Z = K @ rho
    out = Z + Z.conj().T
    for k in range(m):
        c = gs[k] * ops.mode_ops[k] + sqrt_gamma * ops.sigma
        out += (c @ rho) @ c.conj().T
    if m > 1:
        out -= ((m - 1) * ops.gamma) * ((ops.sigma @ rho) @ ops.sigma.conj().T)
    return out


def rk4_capture_numpy(rho0, dt, ops: KernelOperators, g_half):
    rho = rho0.copy()
    nsteps = (g_half.shape[1] - 1) // 2
    drift = 0.0
    for i in range(nsteps):
        ga = g_half[:, 2 * i]
        gb = g_half[:, 2 * i + 1]
        gc = g_half[:, 2 * i + 2]
        k1 = _rhs_numpy(rho, ga, ops)
        k2 = _rhs_numpy(rho + (0.5 * dt) * k1, gb, ops)
        k3 = _rhs_numpy(rho + (0.5 * dt) * k2, gb, ops)
        k4 = _rhs_numpy(rho + dt * k3, gc, ops)
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        drift = max(drift, abs(np.trace(rho).real - 1.0))
    return rho, drift


def _build_numba_kernel():
    from numba import njit

    @njit(cache=True, nogil=True, inline="always")
    def gather_rows(out, rho, perm, wt, coeff):
        # out += coeff * X rho for X[r, perm[r]] = wt[r]
        d = out.shape[0]
        for r in range(d):
            w = coeff * wt[r]
            if w != 0:
                src = perm[r]
                for c in range(d):
                    out[r, c] += w * rho[src, c]

    @njit(cache=True, nogil=True, inline="always")
    def sandwich(out, rho, permL, wtL, permR, wtR, coeff):
        # out += coeff * X rho Y^dag, X/Y in row representation
        d = out.shape[0]
        for r in range(d):
            wl = coeff * wtL[r]
            if wl != 0:
                src = permL[r]
                for c in range(d):
                    wr = np.conj(wtR[c])
                    if wr != 0:
                        out[r, c] += wl * wr * rho[src, permR[c]]

    @njit(cache=True, nogil=True)
    def rhs(out, z, rho, gs, rabi_half, gamma, sqrt_gamma,
            perm_sig, wt_sig, perm_sigd, wt_sigd, perm_a, wt_a, perm_c, wt_c,
            pe_diag, num_diag):
        d = rho.shape[0]
        m = perm_a.shape[0]
        # Z = K rho accumulated row by row
        for r in range(d):
            dc = -0.5 * gamma * pe_diag[r]
            for k in range(m):
                g = gs[k]
                dc -= 0.5 * (g.real * g.real + g.imag * g.imag) * num_diag[k, r]
            for c in range(d):
                z[r, c] = dc * rho[r, c]
        gather_rows(z, rho, perm_sigd, wt_sigd, -rabi_half)
        gather_rows(z, rho, perm_sig, wt_sig, rabi_half)
        for k in range(m):
            gather_rows(z, rho, perm_c[k], wt_c[k], -sqrt_gamma * np.conj(gs[k]))
        # out = Z + Z^dag
        for r in range(d):
            for c in range(d):
                out[r, c] = z[r, c] + np.conj(z[c, r])
        # sandwich terms
        sandwich(out, rho, perm_sig, wt_sig, perm_sig, wt_sig, gamma + 0.0j)
        for k in range(m):
            g = gs[k]
            gg = g.real * g.real + g.imag * g.imag
            sandwich(out, rho, perm_a[k], wt_a[k], perm_a[k], wt_a[k], gg + 0.0j)
            sandwich(out, rho, perm_a[k], wt_a[k], perm_sig, wt_sig, sqrt_gamma * g)
            sandwich(out, rho, perm_sig, wt_sig, perm_a[k], wt_a[k], sqrt_gamma * np.conj(g))

    @njit(cache=True, nogil=True)
    def rk4(rho0, dt, g_half, rabi_half, gamma, sqrt_gamma,
            perm_sig, wt_sig, perm_sigd, wt_sigd, perm_a, wt_a, perm_c, wt_c,
            pe_diag, num_diag):
        rho = rho0.copy()
        d = rho.shape[0]
        z = np.empty((d, d), dtype=np.complex128)
        k1 = np.empty((d, d), dtype=np.complex128)
        k2 = np.empty((d, d), dtype=np.complex128)
        k3 = np.empty((d, d), dtype=np.complex128)
        k4 = np.empty((d, d), dtype=np.complex128)
        tmp = np.empty((d, d), dtype=np.complex128)
        nsteps = (g_half.shape[1] - 1) // 2
        drift = 0.0
        for i in range(nsteps):
            ga = g_half[:, 2 * i].copy()
            gb = g_half[:, 2 * i + 1].copy()
            gc = g_half[:, 2 * i + 2].copy()
            rhs(k1, z, rho, ga, rabi_half, gamma, sqrt_gamma, perm_sig, wt_sig,
                perm_sigd, wt_sigd, perm_a, wt_a, perm_c, wt_c, pe_diag, num_diag)
            for r in range(d):
                for c in range(d):
                    tmp[r, c] = rho[r, c] + 0.5 * dt * k1[r, c]
            rhs(k2, z, tmp, gb, rabi_half, gamma, sqrt_gamma, perm_sig, wt_sig,
                perm_sigd, wt_sigd, perm_a, wt_a, perm_c, wt_c, pe_diag, num_diag)
            for r in range(d):
                for c in range(d):
                    tmp[r, c] = rho[r, c] + 0.5 * dt * k2[r, c]
            rhs(k3, z, tmp, gb, rabi_half, gamma, sqrt_gamma, perm_sig, wt_sig,
                perm_sigd, wt_sigd, perm_a, wt_a, perm_c, wt_c, pe_diag, num_diag)
            for r in range(d):
                for c in range(d):
                    tmp[r, c] = rho[r, c] + dt * k3[r, c]
            rhs(k4, z, tmp, gc, rabi_half, gamma, sqrt_gamma, perm_sig, wt_sig,
                perm_sigd, wt_sigd, perm_a, wt_a, perm_c, wt_c, pe_diag, num_diag)
            tr = 0.0
            h = dt / 6.0
            for r in range(d):
                for c in range(d):
                    rho[r, c] += h * (k1[r, c] + 2.0 * (k2[r, c] + k3[r, c]) + k4[r, c])
                tr += rho[r, r].real
            err = abs(tr - 1.0)
            if err > drift:
                drift = err
        return rho, drift

    return rk4


_numba_kernel = None


def rk4_capture(rho0, dt, ops: KernelOperators, g_half):
    """Integrate the capture master equation; returns (rho, max trace drift)."""
    global _numba_kernel
    rho0 = np.ascontiguousarray(rho0, dtype=complex)
    g_half = np.ascontiguousarray(g_half, dtype=complex)
    if selected_backend() == "numba":
        if _numba_kernel is None:
            _numba_kernel = _build_numba_kernel()
        return _numba_kernel(
            rho0, float(dt), g_half, 0.5 * ops.rabi, ops.gamma, np.sqrt(ops.gamma),
            ops.perm_sig, ops.wt_sig, ops.perm_sigd, ops.wt_sigd,
            ops.perm_a, ops.wt_a, ops.perm_c, ops.wt_c,
            ops.pe_diag, ops.num_diag)
    return rk4_capture_numpy(rho0, float(dt), ops, g_half)
