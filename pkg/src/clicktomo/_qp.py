"""Interior-point solver for the smoothed least-squares POVM fit.

Solves, for an M x N matrix ``X``::

    minimize    fit/2 * ||F X - P||_F^2 + smooth/2 * sum_{i,n} (X[i,n] - X[i+1,n])^2
    subject to  X 1 = 1,  X >= 0

with a primal-dual Mehrotra predictor-corrector method. The Hessian of every
column is ``smooth * L + fit * F'F`` with ``L`` the tridiagonal path
Laplacian; see :class:`_BandedKKT` for how the Newton system is solved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


@dataclass
class QPResult:
    x: np.ndarray
    z: np.ndarray
    nu: np.ndarray
    iterations: int
    converged: bool
    status: str


def laplacian_bands(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the path-graph Laplacian of size ``m``."""
    diag = np.full(m, 2.0)
    if m == 1:
        diag[0] = 0.0
    else:
        diag[0] = diag[-1] = 1.0
    return diag, -np.ones(m - 1)


class _BandedKKT:
    """Newton matrix of one interior-point step, factorized once.

    Unknowns are ordered row by row as ``X[i, 0..N-1], w_i`` (``w`` the
    row-sum multiplier step), which makes the smoothing, barrier and
    row-sum parts banded with half-bandwidth N + 1. The ``fit * F'F`` term
    has rank D*N and is added back with the Woodbury identity.
    """

    def __init__(self, ldiag, loff, theta, smooth, vt, fit):
        M, N = theta.shape
        b = N + 1
        self.shape = (M, N)
        n_u = M * b
        kl = ku = b
        ab = np.zeros((2 * kl + ku + 1, n_u))

        def put(rows, cols, vals):
            ab[kl + ku + rows - cols, cols] = vals

        ix = (np.arange(M)[:, None] * b + np.arange(N)[None, :])
        put(ix.ravel(), ix.ravel(), (smooth * ldiag[:, None] + theta).ravel())
        nu_ix = np.repeat(np.arange(M) * b + N, N)
        put(ix.ravel(), nu_ix, 1.0)
        put(nu_ix, ix.ravel(), 1.0)
        if M > 1 and smooth != 0.0:
            up = ix[:-1].ravel()
            vals = np.repeat(smooth * loff, N)
            put(up, up + b, vals)
            put(up + b, up, vals)
        self.lu, self.piv, info = sla.lapack.dgbtrf(ab, kl, ku)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded KKT factorization failed (info={info})")
        self.kl, self.ku, self.b = kl, ku, b
        if fit != 0.0 and vt.shape[1]:
            self.q = self._band_solve(vt)
            cap = np.eye(vt.shape[1]) / fit + vt.T @ self.q
            # symmetric positive definite in exact arithmetic, but without
            # smoothing the barrier scaling can make Cholesky break down
            self.cap = sla.lu_factor(cap, check_finite=False)
            self.vt = vt
        else:
            self.q = None

    def _band_solve(self, rhs):
        x, info = sla.lapack.dgbtrs(self.lu, self.kl, self.ku, rhs, self.piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed (info={info})")
        return x

    def solve(self, g, r):
        """Solve ``[K 1; 1' 0] [dX; w] = [g; r]``; returns ``(dX, w)``."""
        M, N = self.shape
        rhs = np.concatenate([g, r[:, None]], axis=1).ravel()
        y = self._band_solve(rhs)
        if self.q is not None:
            y = y - self.q @ sla.lu_solve(self.cap, self.vt.T @ y, check_finite=False)
        u = y.reshape(M, N + 1)
        return u[:, :N], u[:, N]


def solve_smoothed_ls(
    F: np.ndarray,
    P: np.ndarray,
    smooth: float,
    fit: float = 2.0,
    tol: float = 1e-11,
    gap_tol: float = 1e-10,
    max_iter: int = 200,
) -> QPResult:
    """Minimize the smoothed least-squares objective over row-stochastic ``X``.

    Stops once primal and dual residuals are below ``tol`` and the
    complementarity ``sum(x * z)`` is below ``gap_tol`` times the objective
    (or below the rounding level of the objective, whichever is larger).
    The relative gap test matters: entries whose multipliers are of the
    order of ``smooth`` would otherwise stall far from zero.
    """
    D, M = F.shape
    N = P.shape[1]
    ldiag, loff = laplacian_bands(M)
    FtF = F.T @ F
    if D == 0:
        fit = 0.0
    C = -fit * (F.T @ P)
    offset = 0.5 * fit * float(np.sum(P * P))
    scale = 1.0 + np.abs(C).max() + fit * np.abs(FtF).max() + 2.0 * smooth
    # the objective is evaluated as offset + (small terms), so it carries an
    # absolute rounding error of about eps * offset; no gap test can go below it
    gap_floor = 10.0 * np.finfo(float).eps * max(offset, 1.0)

    def hess(X):
        lx = ldiag[:, None] * X
        lx[:-1] += loff[:, None] * X[1:]
        lx[1:] += loff[:, None] * X[:-1]
        return smooth * lx + fit * (FtF @ X)

    # vt[:, (n, d)] scatters F[d] into the X[:, n] slots of the banded layout
    vt = np.zeros((M * (N + 1), D * N))
    for n in range(N):
        vt[np.arange(M) * (N + 1) + n, n * D:(n + 1) * D] = F.T

    X = np.full((M, N), 1.0 / N)
    Z = np.full((M, N), scale)
    nu = np.zeros(M)
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        HX = hess(X)
        rd = HX + C - nu[:, None] - Z
        r0 = X.sum(axis=1) - 1.0
        obj = 0.5 * float(np.sum(X * HX)) + float(np.sum(C * X)) + offset
        gap = float(np.sum(X * Z))
        if (
            np.abs(r0).max() < tol
            and np.abs(rd).max() < tol * scale
            and gap < max(gap_tol * abs(obj), gap_floor)
        ):
            status = "optimal"
            break
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            status = "numerical"
            break

        kkt = _BandedKKT(ldiag, loff, Z / X, smooth, vt, fit)

        def direction(rc):
            dX, w = kkt.solve(-rd - rc / X, -r0)
            dZ = (-rc - Z * dX) / X
            return dX, dZ, -w

        def max_step(v, dv):
            neg = dv < 0
            if not neg.any():
                return 1.0
            return min(1.0, float((-v[neg] / dv[neg]).min()))

        mu = gap / X.size
        dXa, dZa, _ = direction(X * Z)
        a_aff = min(max_step(X, dXa), max_step(Z, dZa))
        mu_aff = float(((X + a_aff * dXa) * (Z + a_aff * dZa)).mean())
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dX, dZ, dnu = direction(X * Z + dXa * dZa - sigma * mu)
        alpha = min(1.0, 0.995 * min(max_step(X, dX), max_step(Z, dZ)))
        X = np.maximum(X + alpha * dX, 1e-300)
        Z = np.maximum(Z + alpha * dZ, 1e-300)
        nu = nu + alpha * dnu
    return QPResult(X, Z, nu, it, status == "optimal", status)
