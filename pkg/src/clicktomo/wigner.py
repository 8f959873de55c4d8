"""Phase-space (Wigner) representation of diagonal POVM elements.

Convention: quadratures ``x``, ``p`` with hbar = 1, so the vacuum is a
Gaussian of variance 1/2 and ``W_0(0, 0) = 1/pi``. The Fock-state Wigner
function is ``W_i(x, p) = (-1)^i / pi * exp(-r^2) * L_i(2 r^2)`` with
``r^2 = x^2 + p^2``, and every ``W_i`` integrates to one.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DomainError

_RESCALE = 1e150
_LOG_RESCALE = float(np.log(_RESCALE))


def _laguerre_sum(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``sum_n coeffs[n] * exp(-u/2) * L_n(u)`` by forward recurrence.

    The running Laguerre values are kept relative to a per-point scale
    ``exp(logs)``; whenever they grow past 1e150 everything is divided down,
    so neither the polynomial nor the Gaussian factor overflows or
    underflows for large ``n`` or ``u``.
    """
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    prev = np.zeros_like(u)
    cur = np.ones_like(u)
    logs = -0.5 * u
    acc = coeffs[0] * cur
    for n in range(len(coeffs) - 1):
        prev, cur = cur, ((2 * n + 1 - u) * cur - n * prev) / (n + 1)
        acc = acc + coeffs[n + 1] * cur
        big = np.abs(cur) > _RESCALE
        if big.any():
            prev[big] /= _RESCALE
            cur[big] /= _RESCALE
            acc[big] /= _RESCALE
            logs[big] += _LOG_RESCALE
    return (acc * np.exp(logs)).reshape(shape)


def laguerre_function(n: int, u) -> np.ndarray:
    """``exp(-u/2) * L_n(u)``, bounded by one in magnitude for ``u >= 0``."""
    if n < 0:
        raise DomainError(f"Laguerre index must be >= 0, got {n}")
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    return _laguerre_sum(coeffs, np.asarray(u, dtype=float))


def fock_wigner(i: int, x, p) -> np.ndarray:
    """Wigner function of the Fock state ``|i>`` at ``(x, p)`` (broadcast)."""
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    sign = -1.0 if i % 2 else 1.0
    return sign / np.pi * laguerre_function(i, 2.0 * (x * x + p * p))


def povm_wigner_at(theta, x, p, cutoff: float = 1e-15) -> np.ndarray:
    """``sum_i theta_i W_i(x, p)`` for one POVM column.

    Terms beyond the last ``i`` with ``theta_i / pi >= cutoff`` are dropped;
    since ``|W_i| <= 1/pi`` each dropped term is below ``cutoff``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise DomainError("theta must be a non-empty 1-d array")
    keep = np.nonzero(np.abs(theta) / np.pi >= cutoff)[0]
    n_max = int(keep[-1]) if keep.size else 0
    coeffs = theta[: n_max + 1] * np.where(np.arange(n_max + 1) % 2, -1.0, 1.0) / np.pi
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    r2 = x * x + p * p
    # W depends on r only; evaluate each distinct radius once
    uniq, inverse = np.unique(r2, return_inverse=True)
    return _laguerre_sum(coeffs, 2.0 * uniq)[inverse].reshape(r2.shape)


@dataclass(frozen=True)
class WignerGrid:
    """Wigner values on a square grid; ``values[j, k]`` is at ``(x_axis[j], p_axis[k])``."""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "x_axis": self.x_axis.tolist(),
            "p_axis": self.p_axis.tolist(),
            "values": self.values.tolist(),
        }

    def write_json(self, path: str | Path, metadata: dict | None = None) -> None:
        doc = self.to_dict()
        if metadata is not None:
            doc["metadata"] = metadata
        Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")

    def write_csv(self, path: str | Path, comment: str = "") -> None:
        """Long format: one ``x,p,w`` line per grid point."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "p", "w"])
            for j, xv in enumerate(self.x_axis):
                for k, pv in enumerate(self.p_axis):
                    writer.writerow([repr(float(xv)), repr(float(pv)), repr(float(self.values[j, k]))])


def povm_wigner(theta, extent: float = 4.0, resolution: int = 201) -> WignerGrid:
    """Tabulate one POVM element's Wigner function on ``[-extent, extent]^2``."""
    if extent <= 0:
        raise DomainError(f"extent must be > 0, got {extent}")
    if resolution < 2:
        raise DomainError(f"resolution must be >= 2, got {resolution}")
    axis = np.linspace(-extent, extent, resolution)
    xx, pp = np.meshgrid(axis, axis, indexing="ij")
    return WignerGrid(axis, axis.copy(), povm_wigner_at(theta, xx, pp))
