"""Regularized inversion of ``P = F Pi`` for a phase-insensitive POVM.

The POVM is stored as an M x N matrix whose rows are conditional outcome
distributions, ``Pi[i, n] = p(n clicks | i photons)``. It is found by

    minimize   ||P - F Pi|| + eps * sum_{i,n} (Pi[i, n] - Pi[i+1, n])^2
    subject to every row of Pi on the probability simplex,

with the plain Frobenius norm (``residual="frobenius"``, default) or its
square (``residual="squared"``).

The squared variant is a smooth convex QP and can be solved either by
projected gradient (with exact per-row simplex projection) or by the
interior-point method in :mod:`clicktomo._qp`. The Frobenius variant is
non-smooth exactly where its solutions tend to sit (zero residual), so it is
reduced to a one-dimensional search over squared problems: for ``t > 0``,
``||R|| = min_t ||R||^2 / (2t) + t / 2``, hence the minimizer is the
squared-residual solution with weight ``2 * eps * t`` at the fixed point
``t = ||R||``. Because ``||R(t)|| / t`` is non-increasing, the fixed point is
bracketed and found by root finding in ``log t``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ._qp import solve_smoothed_ls
from .exceptions import PovmError, ShapeError, TomographyError

RESIDUALS = ("frobenius", "squared")
METHODS = ("interior_point", "projected_gradient")
STEP_RULES = ("fixed_lipschitz", "backtracking")

#: Largest negative entry silently clamped to zero on output.
CLAMP_TOL = 1e-12
#: Row-sum tolerance of a valid POVM matrix.
ROW_SUM_TOL = 1e-8


@dataclass(frozen=True)
class PovmMatrix:
    """Diagonal POVM: ``entries[i, n]`` is the probability of outcome ``n`` given ``i`` photons."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ShapeError(f"POVM matrix must be 2-D, got shape {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def truncation_dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def column(self, n: int) -> np.ndarray:
        return self.entries[:, n]

    def check(self, tol: float = ROW_SUM_TOL) -> None:
        """Raise :class:`PovmError` unless entries lie in [0, 1] and rows sum to one."""
        e = self.entries
        if not np.all(np.isfinite(e)):
            raise PovmError("POVM matrix has non-finite entries")
        if e.min() < -tol or e.max() > 1 + tol:
            raise PovmError(f"POVM entries outside [0, 1]: min {e.min():.3g}, max {e.max():.3g}")
        dev = np.abs(e.sum(axis=1) - 1.0)
        if dev.max() > tol:
            i = int(dev.argmax())
            raise PovmError(f"row {i} of the POVM sums to {e[i].sum():.12g}, not 1")


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`reconstruct`.

    ``max_iterations`` and ``rel_tolerance`` apply to the projected-gradient
    loop. The interior-point method treats ``max_iterations`` as a budget of
    Newton steps shared by all inner solves and ``rel_tolerance`` as the
    relative accuracy of the fixed-point search.
    """

    epsilon: float = 0.1
    max_iterations: int = 200_000
    rel_tolerance: float = 1e-10
    step_rule: str = "fixed_lipschitz"
    residual: str = "frobenius"
    method: str = "interior_point"
    accelerate: bool = True

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise TomographyError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.max_iterations < 1:
            raise TomographyError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.rel_tolerance > 0:
            raise TomographyError(f"rel_tolerance must be > 0, got {self.rel_tolerance}")
        if self.step_rule not in STEP_RULES:
            raise TomographyError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if self.residual not in RESIDUALS:
            raise TomographyError(f"residual must be one of {RESIDUALS}, got {self.residual!r}")
        if self.method not in METHODS:
            raise TomographyError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "projected_gradient" and self.residual != "squared":
            raise TomographyError(
                "projected gradient needs a smooth objective; use residual='squared' "
                "or method='interior_point'"
            )


@dataclass
class SolveDiagnostics:
    iterations_used: int
    final_objective: float
    final_residual_norm: float
    converged: bool
    method: str = ""
    residual: str = ""
    trace: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        return d


def _arrays(P, F, Pi=None):
    p = np.asarray(getattr(P, "entries", P), dtype=float)
    f = np.asarray(getattr(F, "entries", F), dtype=float)
    if p.ndim != 2 or f.ndim != 2 or p.shape[0] != f.shape[0]:
        raise ShapeError(f"outcome matrix {p.shape} and probe matrix {f.shape} do not conform")
    if Pi is None:
        return p, f
    x = np.asarray(getattr(Pi, "entries", Pi), dtype=float)
    if x.shape != (f.shape[1], p.shape[1]):
        raise ShapeError(f"POVM matrix has shape {x.shape}, expected {(f.shape[1], p.shape[1])}")
    return p, f, x


def smoothing_penalty(Pi) -> float:
    """Sum of squared differences between neighbouring photon numbers (unweighted)."""
    x = np.asarray(getattr(Pi, "entries", Pi), dtype=float)
    return float(np.sum(np.diff(x, axis=0) ** 2))


def _laplacian_apply(x):
    # gradient of sum (x_i - x_{i+1})^2 is 2 L x
    lx = np.zeros_like(x)
    d = np.diff(x, axis=0)
    lx[:-1] -= d
    lx[1:] += d
    return lx


def objective(P, F, Pi, epsilon: float, residual: str = "frobenius") -> float:
    """Reconstruction objective: residual norm (or its square) plus ``epsilon`` times the smoothing penalty."""
    p, f, x = _arrays(P, F, Pi)
    r = np.linalg.norm(f @ x - p)
    fit = r * r if residual == "squared" else r
    return float(fit + epsilon * smoothing_penalty(x))


def objective_gradient(P, F, Pi, epsilon: float, residual: str = "frobenius") -> np.ndarray:
    """Gradient of :func:`objective` with respect to ``Pi``.

    For the Frobenius residual the gradient does not exist at zero residual;
    a zero vector is used for the residual part there.
    """
    p, f, x = _arrays(P, F, Pi)
    r = f @ x - p
    if residual == "squared":
        g = 2.0 * f.T @ r
    else:
        nr = np.linalg.norm(r)
        g = f.T @ r / nr if nr > 0 else np.zeros_like(x)
    return g + 2.0 * epsilon * _laplacian_apply(x)


def project_rows_simplex(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``V`` onto the probability simplex.

    Sort-based algorithm, ``O(N log N)`` per row.
    """
    V = np.asarray(V, dtype=float)
    # the projection commutes with adding a constant to a row; shifting the
    # row maximum to zero avoids cancellation when entries are large
    V = V - V.max(axis=1, keepdims=True)
    n = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    k = np.arange(1, n + 1)
    cond = U - css / k > 0
    rho = n - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(V.shape[0]), rho - 1] / rho
    return np.maximum(V - tau[:, None], 0.0)


def project_row_simplex(v) -> np.ndarray:
    """Euclidean projection of a vector onto ``{w : w >= 0, sum(w) = 1}``."""
    v = np.asarray(v, dtype=float)
    return project_rows_simplex(v[None, :])[0]


def _finalize(x: np.ndarray) -> np.ndarray:
    lo = x.min()
    if lo < -CLAMP_TOL:
        raise PovmError(f"solver produced a negative POVM entry {lo:.3g}")
    x = np.clip(x, 0.0, None)
    return x / x.sum(axis=1, keepdims=True)


def _projected_gradient(p, f, cfg: SolverConfig):
    eps = cfg.epsilon
    squared = lambda x: objective(p, f, x, eps, "squared")  # noqa: E731
    grad = lambda x: objective_gradient(p, f, x, eps, "squared")  # noqa: E731
    lip = 2.0 * (np.linalg.norm(f, 2) ** 2 + 4.0 * eps)
    backtrack = cfg.step_rule == "backtracking"

    def step(y, gy, fy, lk):
        # one projected step from y; with backtracking, grow lk until the
        # quadratic upper bound holds
        while True:
            x_new = project_rows_simplex(y - gy / lk)
            f_new = squared(x_new)
            if not backtrack:
                return x_new, f_new, lk
            d = x_new - y
            if f_new <= fy + np.sum(gy * d) + 0.5 * lk * np.sum(d * d) + 1e-15 * abs(fy):
                return x_new, f_new, lk
            lk *= 2.0

    m, n = f.shape[1], p.shape[1]
    x = np.full((m, n), 1.0 / n)
    fx = squared(x)
    trace = [fx]
    y, fy, t = x, fx, 1.0
    lk = lip / 8.0 if backtrack else lip
    # objective values closer than this are rounding noise (an exact fit
    # leaves f ~ (machine eps * ||P||)^2, where relative changes are meaningless)
    noise_floor = 1e3 * np.finfo(float).eps ** 2 * max(float(np.sum(p * p)), 1.0)
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if backtrack:
            lk = max(lk / 2.0, 1e-12)
        x_new, f_new, lk = step(y, grad(y), fy, lk)
        if f_new > fx:
            # momentum overshoot: restart from x with a plain step
            t = 1.0
            x_new, f_new, lk = step(x, grad(x), fx, lk)
        change = fx - f_new
        if cfg.accelerate:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
            fy = squared(y) if backtrack else 0.0
        else:
            y, fy = x_new, f_new
        x, fx = x_new, f_new
        trace.append(fx)
        if abs(change) <= max(cfg.rel_tolerance * abs(fx), noise_floor):
            converged = True
            break
    return x, it, converged, trace


def _interior_point(p, f, cfg: SolverConfig):
    eps = cfg.epsilon
    budget = [cfg.max_iterations]
    ok = [True]

    def solve(smooth):
        cap = min(200, budget[0])
        if cap < 1:
            ok[0] = False
            return np.full((f.shape[1], p.shape[1]), 1.0 / p.shape[1])
        res = solve_smoothed_ls(f, p, smooth=smooth, fit=2.0, max_iter=cap)
        budget[0] -= res.iterations
        ok[0] &= res.converged
        return res.x

    if cfg.residual == "squared" or eps == 0.0:
        # with eps = 0 both residuals share their minimizers
        x = solve(2.0 * eps)
        return x, cfg.max_iterations - budget[0], ok[0]

    cache = {}

    def at(log_t):
        if log_t not in cache:
            x = solve(4.0 * eps * math.exp(log_t))
            cache[log_t] = (x, float(np.linalg.norm(f @ x - p)))
        return cache[log_t]

    def gap(log_t):
        r = at(log_t)[1]
        return (math.log(r) if r > 0 else -745.0) - log_t

    # the uniform POVM bounds the optimal residual from above
    t_hi = float(np.linalg.norm(f @ np.full((f.shape[1], p.shape[1]), 1.0 / p.shape[1]) - p))
    floor = 1e-14 * max(1.0, float(np.linalg.norm(p)))
    if t_hi <= floor:
        x = solve(4.0 * eps * floor)
        return x, cfg.max_iterations - budget[0], ok[0]
    hi = math.log(t_hi)
    lo = hi
    while True:
        r = at(lo)[1]
        if r > math.exp(lo):
            break
        hi = lo
        lo = min(lo, math.log(max(r, floor))) - math.log(100.0)
        if lo < math.log(floor) or not ok[0]:
            # residual stays below t all the way down: exact-fit limit
            return at(max(lo, math.log(floor)))[0], cfg.max_iterations - budget[0], ok[0]
    if hi == lo:
        return at(lo)[0], cfg.max_iterations - budget[0], ok[0]
    xtol = max(cfg.rel_tolerance, 1e-6)
    root = brentq(gap, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=60)
    x = at(root)[0]
    return x, cfg.max_iterations - budget[0], ok[0]


def reconstruct(P, F, config: SolverConfig | None = None) -> tuple[PovmMatrix, SolveDiagnostics]:
    """Reconstruct the POVM from outcome matrix ``P`` and probe matrix ``F``.

    Returns the POVM and solver diagnostics. A solve that runs out of
    iterations still returns its best iterate, with ``converged=False``.
    """
    cfg = config or SolverConfig()
    p, f = _arrays(P, F)
    if cfg.method == "projected_gradient":
        x, iters, converged, trace = _projected_gradient(p, f, cfg)
    else:
        x, iters, converged = _interior_point(p, f, cfg)
        trace = []
    x = _finalize(x)
    diag = SolveDiagnostics(
        iterations_used=int(iters),
        final_objective=objective(p, f, x, cfg.epsilon, cfg.residual),
        final_residual_norm=float(np.linalg.norm(f @ x - p)),
        converged=bool(converged),
        method=cfg.method,
        residual=cfg.residual,
        trace=trace,
    )
    return PovmMatrix(x), diag


def sweep_smoothing(
    P,
    F,
    eps_grid: Sequence[float],
    target: tuple[int, int] = (0, 1),
    config: SolverConfig | None = None,
    max_workers: int = 1,
) -> list[tuple[float, float]]:
    """Reconstruct once per smoothing weight and report element ``target = (i, n)``."""
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid:
        raise TomographyError("eps_grid must not be empty")
    base = config or SolverConfig()
    i, n = target

    def one(eps):
        cfg = SolverConfig(**{**asdict(base), "epsilon": eps})
        return reconstruct(P, F, cfg)[0].entries[i, n]

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            values = list(pool.map(one, eps_grid))
    else:
        values = [one(e) for e in eps_grid]
    return [(e, float(v)) for e, v in zip(eps_grid, values)]


def povm_to_dict(
    povm: PovmMatrix,
    epsilon: float | None = None,
    diagnostics: SolveDiagnostics | None = None,
    metadata: dict | None = None,
) -> dict:
    out = {
        "truncation_dim": povm.truncation_dim,
        "n_outcomes": povm.n_outcomes,
        "columns": [[float(v) for v in povm.entries[:, n]] for n in range(povm.n_outcomes)],
        "epsilon": epsilon,
        "diagnostics": diagnostics.to_dict() if diagnostics else {},
    }
    if metadata is not None:
        out["metadata"] = metadata
    return out


def povm_from_dict(data: dict) -> PovmMatrix:
    try:
        cols = np.asarray(data["columns"], dtype=float)
        m, n = int(data["truncation_dim"]), int(data["n_outcomes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise PovmError(f"malformed POVM record: {exc}") from None
    if cols.shape != (n, m):
        raise PovmError(f"columns have shape {cols.shape}, header says {(n, m)}")
    return PovmMatrix(cols.T)


def write_povm_json(path: str | Path, povm: PovmMatrix, **kwargs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(povm_to_dict(povm, **kwargs), fh, indent=1)
        fh.write("\n")


def read_povm_json(path: str | Path) -> PovmMatrix:
    with open(path, encoding="utf-8") as fh:
        return povm_from_dict(json.load(fh))
