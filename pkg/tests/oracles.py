"""Independent reference implementations used only by the tests.

Nothing here shares code with the package: each oracle takes a different
route to the same quantity (enumeration, explicit sampling, a generic
convex solver, exact arithmetic).
"""

import itertools
from fractions import Fraction
from math import comb, factorial

import mpmath
import numpy as np


def brute_occupancy(m, k):
    """Distinct-pixel distribution by enumerating all k**m photon assignments."""
    counts = np.zeros(k + 1)
    for assignment in itertools.product(range(k), repeat=m):
        counts[len(set(assignment))] += 1
    return counts / k**m


def inclusion_exclusion_occupancy(m, k):
    """Closed form C(K,j) sum_l (-1)^l C(j,l) ((j-l)/K)^m in exact rationals."""
    out = []
    for j in range(k + 1):
        s = sum((-1) ** l * comb(j, l) * Fraction(j - l, k) ** m for l in range(j + 1))
        out.append(float(comb(k, j) * s))
    return np.array(out)


def pixel_level_clicks(n_photons, n_pixels, efficiency, dark, xtalk, n_samples, rng):
    """Sample the click count by simulating every photon and every pixel.

    Each photon is detected with ``efficiency`` and lands on a uniformly
    random pixel; unfired pixels dark-click; then every (fired source,
    unfired target) pair independently induces a click with ``xtalk``.
    """
    fired = np.zeros((n_samples, n_pixels), dtype=bool)
    if n_photons:
        detected = rng.random((n_samples, n_photons)) < efficiency
        where = rng.integers(0, n_pixels, size=(n_samples, n_photons))
        for p in range(n_photons):
            fired[np.arange(n_samples), where[:, p]] |= detected[:, p]
    fired |= rng.random((n_samples, n_pixels)) < dark
    links = rng.random((n_samples, n_pixels, n_pixels)) < xtalk
    induced = np.any(fired[:, :, None] & links, axis=1)
    fired = fired | induced
    return np.bincount(fired.sum(axis=1), minlength=n_pixels + 1) / n_samples


def brute_simplex_projection(v):
    """Euclidean simplex projection by trying every support set."""
    v = np.asarray(v, dtype=float)
    n = v.size
    best, best_d = None, np.inf
    for r in range(1, n + 1):
        for support in itertools.combinations(range(n), r):
            s = list(support)
            w = np.zeros(n)
            w[s] = v[s] - (v[s].sum() - 1.0) / r
            if w.min() < -1e-15:
                continue
            d = np.sum((w - v) ** 2)
            if d < best_d:
                best, best_d = w, d
    return best


def _difference_matrix(m):
    d = np.zeros((max(m - 1, 0), m))
    for i in range(m - 1):
        d[i, i], d[i, i + 1] = 1.0, -1.0
    return d


def squared_objective(P, F, X, eps):
    D = _difference_matrix(X.shape[0])
    return float(np.sum((P - F @ X) ** 2) + eps * np.sum((D @ X) ** 2))


def active_set_qp(P, F, eps):
    """Global minimizer of ``||P - F X||^2 + eps ||D X||^2`` over row-stochastic X.

    Enumerates every combination of row supports, solves the equality-
    constrained least squares on that face, keeps the feasible candidate of
    lowest objective. Exponential; only for M, N <= 3.
    """
    M, N = F.shape[1], P.shape[1]
    D = _difference_matrix(M)
    supports = [s for r in range(1, N + 1) for s in itertools.combinations(range(N), r)]
    best, best_f = None, np.inf
    for combo in itertools.product(supports, repeat=M):
        idx = [(i, n) for i, s in enumerate(combo) for n in s]
        k = len(idx)
        # columns of the linear map vec(X) -> (vec(F X), vec(D X))
        A = np.zeros((P.size, k))
        B = np.zeros((D.shape[0] * N, k))
        for c, (i, n) in enumerate(idx):
            A[n::N, c] = F[:, i]
            if D.size:
                B[n::N, c] = D[:, i]
        H = 2 * (A.T @ A + eps * B.T @ B)
        g = 2 * A.T @ P.ravel()
        E = np.zeros((M, k))
        for c, (i, n) in enumerate(idx):
            E[i, c] = 1.0
        kkt = np.block([[H, E.T], [E, np.zeros((M, M))]])
        rhs = np.concatenate([g, np.ones(M)])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        X = np.zeros((M, N))
        for c, (i, n) in enumerate(idx):
            X[i, n] = sol[c]
        if X.min() < -1e-10 or np.abs(X.sum(axis=1) - 1).max() > 1e-8:
            continue
        f = squared_objective(P, F, X, eps)
        if f < best_f - 1e-14:
            best, best_f = X, f
    return best, best_f


def cvxpy_povm(P, F, eps, residual="squared"):
    """Same problem through a generic conic solver."""
    import cvxpy as cp

    M, N = F.shape[1], P.shape[1]
    X = cp.Variable((M, N))
    fit = F @ X - P
    r = cp.sum_squares(fit) if residual == "squared" else cp.norm(fit, "fro")
    smooth = cp.sum_squares(X[1:] - X[:-1]) if M > 1 else 0
    prob = cp.Problem(cp.Minimize(r + eps * smooth), [X >= 0, cp.sum(X, axis=1) == 1])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return np.asarray(X.value), float(prob.value)


def laguerre_exact(n, u, dps=60):
    """``exp(-u/2) L_n(u)`` from the explicit coefficient sum at high precision."""
    with mpmath.workdps(dps):
        u = mpmath.mpf(u)
        s = mpmath.fsum(
            mpmath.mpf(comb(n, k)) * (-u) ** k / factorial(k) for k in range(n + 1)
        )
        return float(mpmath.exp(-u / 2) * s)


def poisson_pmf_exact(mu, i, dps=50):
    with mpmath.workdps(dps):
        return mpmath.exp(-mpmath.mpf(mu)) * mpmath.mpf(mu) ** i / mpmath.factorial(i)
