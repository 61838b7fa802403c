"""Density-matrix reconstruction from moment vectors by convex optimization.

Both solvers run an ADMM operator-splitting loop whose only expensive
pieces are a cached eigenbasis solve for the data-fidelity step and a
25x25 eigen-projection onto the set of Hermitian, positive, unit-trace
matrices (eigenvalue simplex projection).  No external conic solver is
involved, which keeps every iterate auditable.

least squares:      min || (B - A vec(rho)) / eps ||_2   s.t. rho PSD, Tr rho = 1
compressed sensing: min || vec(rho) ||_1   s.t. || B - A vec(rho) ||_2 <= ||eps||_2,
                    rho PSD, Tr rho = 1

The l1 norm sums |rho_ij| over complex entries.  Infeasibility of the
compressed-sensing ball (minimal achievable residual above ||eps||_2) is
detected with a preparatory unweighted least-squares solve and reported,
never silently relaxed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .observables import MomentIndex, MomentVector, log_negativity, moment_operator
from .spaces import DensityMatrix, HilbertSpace

MAX_ITER = 50_000
TOL = 1e-7
SIGMA_FLOOR = 1e-12
_BALANCE_EVERY = 25


@dataclass(frozen=True)
class SensingMatrix:
    """Linear map from vec(rho) (row-major) to the moment vector."""

    indices: tuple[MomentIndex, ...]
    cutoff: int
    matrix: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.cutoff * self.cutoff


def build_sensing_matrix(indices, cutoff: int) -> SensingMatrix:
    """Rows are vec((O_r)^T) so that row . vec(rho) = Tr[rho O_r]."""
    idx = tuple(MomentIndex(*i) for i in indices)
    d = cutoff * cutoff
    rows = np.empty((len(idx), d * d), dtype=complex)
    for r, i in enumerate(idx):
        op = moment_operator((cutoff, cutoff), i)
        rows[r] = op.T.reshape(-1)
    return SensingMatrix(idx, cutoff, rows)


@dataclass(frozen=True)
class TomographyResult:
    rho: DensityMatrix | None
    method: str
    objective: float
    constraint_residual: float
    status: str            # Converged | Infeasible | MaxIter
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status == "Converged"


def prepare_sigmas(sigmas: np.ndarray) -> np.ndarray:
    """Replace zero/missing sigmas so the weighting stays finite."""
    s = np.asarray(sigmas, dtype=float).copy()
    pos = s[s > 0]
    fill = max(SIGMA_FLOOR, 1e-3 * float(np.median(pos))) if pos.size else SIGMA_FLOOR
    s[s <= 0] = fill
    return s


def _simplex_project(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of real eigenvalues onto {w >= 0, sum w = 1}."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(u) + 1)
    cond = u - css / k > 0
    rho = k[cond][-1]
    theta = css[rho - 1] / rho
    return np.clip(w - theta, 0.0, None)


def _project_state(m: np.ndarray) -> np.ndarray:
    """Projection onto Hermitian, positive, unit-trace matrices."""
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    w = _simplex_project(w)
    return (v * w) @ v.conj().T


class _EigSolver:
    """Solves (c I + M) x = rhs for Hermitian PSD M via one eigendecomposition."""

    def __init__(self, m: np.ndarray):
        self.lam, self.vec = np.linalg.eigh(m)
        self.lam = np.clip(self.lam, 0.0, None)

    def solve(self, c: float, rhs: np.ndarray) -> np.ndarray:
        return self.vec @ ((self.vec.conj().T @ rhs) / (self.lam + c))


def _transpose_perm(d: int) -> np.ndarray:
    idx = np.arange(d * d).reshape(d, d)
    return idx.T.reshape(-1)


class _HermitianLsqInit:
    """Pseudoinverse warm start: the weighted least-squares Hermitian matrix.

    Conjugate moments of a Hermitian state are linearly dependent on the
    stored canonical ones through the vec-transpose permutation, so stacking
    them yields a (usually) fully determined real system; its solution is the
    exact state whenever the moments are exact and complete.
    """

    def __init__(self, a_matrix: np.ndarray, w: np.ndarray, d: int):
        p = _transpose_perm(d)
        aw = a_matrix * w[:, None]
        aug = np.vstack([aw, np.conj(aw)[:, p]])
        u, s, vh = np.linalg.svd(aug, full_matrices=False)
        keep = s > 1e-10 * s[0]
        self.pinv = (vh[keep].conj().T / s[keep]) @ u[:, keep].conj().T
        # smallest singular value of the fully determining map, if it is one
        self.sigma_min = float(s[-1]) if (keep.all() and len(s) == aug.shape[1]) else 0.0
        self.w = w
        self.d = d

    def state(self, b: np.ndarray) -> np.ndarray:
        rhs = np.concatenate([self.w * b, self.w * np.conj(b)])
        x = (self.pinv @ rhs).reshape(self.d, self.d)
        return _project_state(x)


def _soft_threshold(w: np.ndarray, kappa: float) -> np.ndarray:
    mag = np.abs(w)
    scale = np.maximum(1.0 - kappa / np.maximum(mag, 1e-300), 0.0)
    return w * scale


def reconstruct_ls(B: MomentVector, A: SensingMatrix, *,
                   solver: _EigSolver | None = None,
                   init: _HermitianLsqInit | None = None,
                   tol: float = TOL) -> TomographyResult:
    """Sigma-weighted least squares over physical states."""
    eps = prepare_sigmas(B.sigmas)
    w_report = 1.0 / eps
    # global weight scale does not move the argmin but wrecks the ADMM
    # residual scales (uniform 1e12 weights otherwise), so normalize it away
    w = w_report / float(np.median(w_report))
    Aw = A.matrix * w[:, None]
    bw = B.values * w
    if solver is None:
        solver = _EigSolver(2.0 * (Aw.conj().T @ Aw))
    rhs0 = 2.0 * (Aw.conj().T @ bw)

    d = A.state_dim
    n = d * d
    if init is None:
        init = _HermitianLsqInit(A.matrix, w, d)
    z = init.state(B.values).reshape(-1)
    u = np.zeros(n, dtype=complex)
    mu = max(float(np.mean(solver.lam)), 1e-12)
    status = "MaxIter"
    it = 0
    for it in range(1, MAX_ITER + 1):
        x = solver.solve(mu, rhs0 + mu * (z - u))
        z_old = z
        z = _project_state((x + u).reshape(d, d)).reshape(-1)
        u = u + x - z
        r = np.linalg.norm(x - z)
        s = mu * np.linalg.norm(z - z_old)
        stop = tol * max(1.0, np.linalg.norm(z))
        if r < stop and s < stop:
            status = "Converged"
            break
        if it % _BALANCE_EVERY == 0:
            if r > 10 * s and mu < 1e18 * np.mean(solver.lam + 1e-300):
                mu *= 2.0
                u *= 0.5
            elif s > 10 * r:
                mu *= 0.5
                u *= 2.0
    rho = DensityMatrix(HilbertSpace([A.cutoff, A.cutoff]), z.reshape(d, d))
    objective = float(np.linalg.norm((A.matrix @ z - B.values) * w_report))
    return TomographyResult(rho, "LS", objective, float(r), status, it)


class _BallPreimage:
    """Exact Euclidean projection onto {z : ||A z - B||_2 <= r}.

    Only the row-space coordinates of z move.  When the unconstrained point
    falls outside the ball, the multiplier of the regularized normal
    equations is found from a scalar secular equation by bisection.
    """

    def __init__(self, a_matrix: np.ndarray):
        u, s, vh = np.linalg.svd(a_matrix, full_matrices=False)
        keep = s > 1e-12 * s[0]
        self.u = u[:, keep]
        self.s = s[keep]
        self.vh = vh[keep]
        if keep.sum() < a_matrix.shape[0]:
            # rows outside the numerical range: their component of B is fixed
            self.row_defect = True
        else:
            self.row_defect = False

    def residual_floor(self, b: np.ndarray) -> float:
        """Part of ||A z - B|| no z can remove (zero for full row rank)."""
        if not self.row_defect:
            return 0.0
        return float(np.linalg.norm(b - self.u @ (self.u.conj().T @ b)))

    def project(self, z: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
        beta = self.u.conj().T @ b
        a = self.vh @ z
        floor2 = max(np.linalg.norm(b) ** 2 - np.linalg.norm(beta) ** 2, 0.0)
        room2 = radius ** 2 - floor2
        if room2 <= 0:
            # best possible: match the reachable component exactly
            zeta = beta / self.s
            return z + self.vh.conj().T @ (zeta - a)
        miss = self.s * a - beta
        if np.vdot(miss, miss).real <= room2:
            return z
        s2 = self.s * self.s

        def g(lam):
            zeta = (a + lam * self.s * beta) / (1.0 + lam * s2)
            v = self.s * zeta - beta
            return np.vdot(v, v).real - room2

        lo, hi = 0.0, 1.0
        while g(hi) > 0:
            hi *= 4.0
            if hi > 1e18:
                break
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * max(1.0, hi):
                break
        lam = hi
        zeta = (a + lam * self.s * beta) / (1.0 + lam * s2)
        return z + self.vh.conj().T @ (zeta - a)


def _dykstra_feasible(ball: _BallPreimage, b: np.ndarray, radius: float, d: int,
                      start: np.ndarray, iters: int = 500, gap_tol: float = 0.2 * TOL):
    """Dykstra alternating projections between the state set and the ball set.

    Returns (state-set point, gap): the gap estimates the distance between
    the two sets at the found pair; a positive stall means they do not
    intersect.  The returned point is always PSD with unit trace.
    """
    x = start.reshape(-1).copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    gap = math.inf
    y = x
    for _ in range(iters):
        y = _project_state((x + p).reshape(d, d)).reshape(-1)
        p = x + p - y
        x_new = ball.project(y + q, b, radius)
        q = y + q - x_new
        gap = float(np.linalg.norm(y - x_new))
        x = x_new
        if gap < gap_tol:
            break
    y = _project_state((x + p).reshape(d, d)).reshape(-1)
    return y, gap


def reconstruct_cs(B: MomentVector, A: SensingMatrix, *,
                   ball: _BallPreimage | None = None,
                   init: _HermitianLsqInit | None = None,
                   unit_solver: _EigSolver | None = None) -> TomographyResult:
    """l1-minimizing reconstruction inside the measurement-uncertainty ball.

    Consensus ADMM over three exact proximal maps: complex soft threshold for
    the l1 objective, eigenvalue projection for the state set, and the
    row-space ball projection for the data constraint.  Infeasibility is
    certified by the unweighted least-squares minimizer: if even the
    smallest achievable residual misses the ball, no state can reach it.
    """
    eps = prepare_sigmas(B.sigmas)
    # the solver cannot certify residuals below its own resolution, so balls
    # smaller than TOL are widened to it (still within the 1e-7 guarantee)
    radius = max(float(np.linalg.norm(eps)), TOL)
    feas_slack = TOL * max(1.0, float(np.linalg.norm(B.values)))

    d = A.state_dim
    if init is None:
        init = _HermitianLsqInit(A.matrix, np.ones(len(B)), d)
    if ball is None:
        ball = _BallPreimage(A.matrix)

    if init.sigma_min > 0 and 2.0 * radius / init.sigma_min <= 1e-4:
        # the ball pins the state to within far less than any tolerance of
        # interest, so every feasible point is the solution
        point, gap = _dykstra_feasible(ball, B.values, radius, d,
                                       init.state(B.values), iters=3000)
        if gap > max(feas_slack, 10 * TOL):
            return TomographyResult(None, "CS", math.inf, gap, "Infeasible", 0)
        rho = DensityMatrix(HilbertSpace([A.cutoff, A.cutoff]), point.reshape(d, d))
        viol = max(0.0, float(np.linalg.norm(A.matrix @ point - B.values)) - radius)
        return TomographyResult(rho, "CS", float(np.abs(point).sum()), viol,
                                "Converged", 0)

    flat = MomentVector(list(B.indices), B.values, np.ones(len(B)))
    ls_res = reconstruct_ls(flat, A, solver=unit_solver, init=init)
    if ls_res.objective > radius + max(1e3 * feas_slack, 1e-4):
        # even the residual minimizer misses the ball by far more than
        # solver slack could explain
        return TomographyResult(None, "CS", math.inf, ls_res.objective - radius,
                                "Infeasible", 0)
    feas_point, gap = _dykstra_feasible(ball, B.values, radius, d,
                                        ls_res.rho.matrix.reshape(-1), iters=4000,
                                        gap_tol=1e-9)
    start_viol = max(0.0, float(np.linalg.norm(A.matrix @ feas_point - B.values)) - radius)
    if start_viol > max(feas_slack, 10 * TOL):
        return TomographyResult(None, "CS", math.inf, start_viol, "Infeasible", 0)
    anchor = feas_point.copy()
    x = feas_point.copy()
    v2 = x.copy()
    u1 = np.zeros_like(x)
    u2 = np.zeros_like(x)
    u3 = np.zeros_like(x)
    mu = 10.0
    alpha = 1.8  # over-relaxation
    status = "MaxIter"
    it = 0
    bvals = B.values
    sq3n = math.sqrt(3 * x.size)
    sqn = math.sqrt(x.size)
    for it in range(1, MAX_ITER + 1):
        v1 = _soft_threshold(x - u1, 1.0 / mu)
        v2 = _project_state((x - u2).reshape(d, d)).reshape(-1)
        v3 = ball.project(x - u3, bvals, radius)
        w1 = alpha * v1 + (1 - alpha) * x
        w2 = alpha * v2 + (1 - alpha) * x
        w3 = alpha * v3 + (1 - alpha) * x
        x_old = x
        x = (w1 + u1 + w2 + u2 + w3 + u3) / 3.0
        u1 += w1 - x
        u2 += w2 - x
        u3 += w3 - x
        r = math.sqrt(np.linalg.norm(v1 - x) ** 2 + np.linalg.norm(v2 - x) ** 2
                      + np.linalg.norm(v3 - x) ** 2)
        s = mu * math.sqrt(3.0) * float(np.linalg.norm(x - x_old))
        vn = math.sqrt(np.linalg.norm(v1) ** 2 + np.linalg.norm(v2) ** 2
                       + np.linalg.norm(v3) ** 2)
        un = math.sqrt(np.linalg.norm(u1) ** 2 + np.linalg.norm(u2) ** 2
                       + np.linalg.norm(u3) ** 2)
        eps_pri = sq3n * TOL + TOL * max(vn, math.sqrt(3.0) * np.linalg.norm(x))
        eps_dual = sqn * TOL + TOL * mu * un
        if r < eps_pri and s < eps_dual:
            status = "Converged"
            break
        if it % _BALANCE_EVERY == 0:
            if r > 10 * s:
                mu *= 2.0
                u1 *= 0.5
                u2 *= 0.5
                u3 *= 0.5
            elif s > 10 * r:
                mu *= 0.5
                u1 *= 2.0
                u2 *= 2.0
                u3 *= 2.0
    # land exactly on the intersection before reporting
    rho_vec, _ = _dykstra_feasible(ball, bvals, radius, d, v2,
                                   iters=3000, gap_tol=1e-10)

    def viol_of(vec):
        return max(0.0, float(np.linalg.norm(A.matrix @ vec - bvals)) - radius)

    ball_violation = viol_of(rho_vec)
    if ball_violation > feas_slack and viol_of(anchor) < ball_violation:
        # retreat along the segment toward the certified feasible anchor
        # (both constraint sets are convex, so the violation is convex in t)
        lo_t, hi_t = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo_t + hi_t)
            cand = (1 - mid) * rho_vec + mid * anchor
            if viol_of(cand) > feas_slack:
                lo_t = mid
            else:
                hi_t = mid
        rho_vec = (1 - hi_t) * rho_vec + hi_t * anchor
        ball_violation = viol_of(rho_vec)
    rho_m = rho_vec.reshape(d, d)
    if status == "Converged" and ball_violation > feas_slack:
        status = "MaxIter"
    rho = DensityMatrix(HilbertSpace([A.cutoff, A.cutoff]), rho_m)
    objective = float(np.abs(rho_m).sum())
    return TomographyResult(rho, "CS", objective, ball_violation, status, it)


def reconstruct(B: MomentVector, A: SensingMatrix, method: str) -> TomographyResult:
    if method.upper() == "LS":
        return reconstruct_ls(B, A)
    if method.upper() == "CS":
        return reconstruct_cs(B, A)
    raise ValueError(f"unknown reconstruction method {method!r}")


def en_map(moment_vectors, A: SensingMatrix, method: str):
    """Reconstruct every grid point and report (E_N, status) pairs.

    Failures are recorded per point (E_N = NaN) and never abort the grid.
    """
    method = method.upper()
    d = A.state_dim
    if method == "LS":
        ls_cache: dict[bytes, tuple[_EigSolver, _HermitianLsqInit]] = {}
    else:
        ones = np.ones(len(A.indices))
        Au = A.matrix
        shared = {"ball": _BallPreimage(Au),
                  "init": _HermitianLsqInit(Au, ones, d),
                  "unit_solver": _EigSolver(2.0 * (Au.conj().T @ Au))}
    out = []
    for mv in moment_vectors:
        try:
            if method == "LS":
                w = 1.0 / prepare_sigmas(mv.sigmas)
                w = w / float(np.median(w))
                key = w.tobytes()
                if key not in ls_cache:
                    Aw = A.matrix * w[:, None]
                    ls_cache[key] = (_EigSolver(2.0 * (Aw.conj().T @ Aw)),
                                     _HermitianLsqInit(A.matrix, w, d))
                solver, init = ls_cache[key]
                res = reconstruct_ls(mv, A, solver=solver, init=init)
            else:
                res = reconstruct_cs(mv, A, **shared)
        except Exception:  # noqa: BLE001 - per-point isolation is the contract
            out.append((math.nan, "Error"))
            continue
        if res.rho is None or not res.converged:
            out.append((math.nan, res.status))
        else:
            out.append((log_negativity(res.rho), res.status))
    return out
