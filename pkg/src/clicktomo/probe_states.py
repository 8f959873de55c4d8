"""Coherent-state probes: calibration, truncation and the Poisson probe matrix."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .exceptions import DomainError, TruncationError

#: Minimum row sum a truncated Poisson row may have.
ROW_SUM_FLOOR = 1.0 - 1e-6


@dataclass(frozen=True)
class CalibrationConstants:
    """Constants of the calibration detector used to set probe amplitudes.

    ``eta_cal_sigma`` is a relative 1-sigma uncertainty. ``dark_prob_cal`` is
    kept for the record only; click probabilities are expected to be
    dark-corrected already.
    """

    eta_cal: float = 0.83
    eta_cal_sigma: float = 0.05
    dark_prob_cal: float = 2e-7

    def __post_init__(self):
        if not (0.0 < self.eta_cal <= 1.0):
            raise DomainError(f"eta_cal must lie in (0, 1], got {self.eta_cal}")
        if self.eta_cal_sigma < 0:
            raise DomainError(f"eta_cal_sigma must be >= 0, got {self.eta_cal_sigma}")
        if self.dark_prob_cal < 0:
            raise DomainError(f"dark_prob_cal must be >= 0, got {self.dark_prob_cal}")


@dataclass(frozen=True)
class CoherentProbe:
    mean_photon: float
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.mean_photon) and self.mean_photon >= 0):
            raise DomainError(
                f"mean photon number must be finite and >= 0, got {self.mean_photon!r}"
            )


@dataclass(frozen=True)
class ProbeMatrix:
    """D x M matrix of truncated Poisson photon-number distributions.

    Row ``d`` belongs to ``probes[d]``; column ``i`` is the Fock index.
    """

    entries: np.ndarray
    probes: tuple[CoherentProbe, ...]
    truncation_dim: int = field(init=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "probes", tuple(self.probes))
        object.__setattr__(self, "truncation_dim", entries.shape[1])

    @property
    def shape(self):
        return self.entries.shape

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.probes]

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean_photon for p in self.probes])


def calibrate_mean_photon(p_click: float, calib: CalibrationConstants) -> float:
    """Mean photon number of a pulse from the calibration detector click probability.

    Inverts ``p_click = 1 - exp(-eta_cal * n)`` for Poissonian light.

    Raises:
        DomainError: if ``p_click`` is outside ``[0, 1)``.
    """
    if not (0.0 <= p_click < 1.0):
        raise DomainError(
            f"click probability must lie in [0, 1), got {p_click!r}; "
            "a saturated detector does not determine the mean photon number"
        )
    if p_click == 0.0:
        return 0.0
    return -math.log1p(-p_click) / calib.eta_cal


def default_probe_ladder(count_d: int) -> list[CoherentProbe]:
    """Probe set with mean photon numbers ``d**2`` for ``d = 0 .. count_d - 1``."""
    if count_d < 1:
        raise DomainError(f"need at least one probe, got {count_d}")
    return [CoherentProbe(float(d * d), f"d{d:02d}") for d in range(count_d)]


def choose_truncation(max_mean_photon: float, k_sigma: float = 6.0) -> int:
    """Fock dimension reaching ``k_sigma`` standard deviations above the largest probe.

    The returned value is a dimension, i.e. the largest kept index plus one.
    """
    if max_mean_photon < 0:
        raise DomainError(f"max_mean_photon must be >= 0, got {max_mean_photon}")
    if k_sigma <= 0:
        raise DomainError(f"k_sigma must be > 0, got {k_sigma}")
    return int(math.ceil(max_mean_photon + k_sigma * math.sqrt(max_mean_photon))) + 1


def sufficient_truncation(max_mean_photon: float, k_sigma: float = 6.0) -> int:
    """:func:`choose_truncation`, enlarged until the row-sum floor is met.

    The k-sigma rule undershoots for small means (the Poisson tail is
    heavier than Gaussian below a mean of about 4); beyond that the two agree.
    """
    m = choose_truncation(max_mean_photon, k_sigma)
    while poisson_rows([max_mean_photon], m)[0].sum() < ROW_SUM_FLOOR:
        m += 1
    return m


def poisson_rows(means: Sequence[float] | np.ndarray, truncation_dim: int) -> np.ndarray:
    """Poisson pmf rows ``exp(-mu) mu**i / i!`` evaluated in log space."""
    mu = np.asarray(means, dtype=float)[:, None]
    i = np.arange(truncation_dim, dtype=float)[None, :]
    # xlogy(0, 0) == 0 keeps the vacuum row exact
    rows = np.exp(xlogy(i, mu) - mu - gammaln(i + 1.0))
    # a truncated pmf holds at most unit mass, but exp(lgamma) carries
    # ~1e-13 relative error for large i and the row can sum past 1; pull
    # such rows back by a factor within that error
    over = np.nonzero(rows.sum(axis=1) > 1.0)[0]
    for d in over:
        rows[d] /= rows[d].sum()
        while rows[d].sum() > 1.0:
            rows[d] *= 1.0 - 4.0 * np.finfo(float).eps
    return rows


def build_probe_matrix(
    probes: Iterable[CoherentProbe], truncation_dim: int, check: bool = True
) -> ProbeMatrix:
    """Assemble the probe matrix F for ``probes`` truncated at ``truncation_dim``.

    Raises:
        TruncationError: if ``check`` and a row keeps less than ``1 - 1e-6``
            of its probability.
    """
    probes = list(probes)
    if truncation_dim < 1:
        raise DomainError(f"truncation_dim must be >= 1, got {truncation_dim}")
    entries = poisson_rows([p.mean_photon for p in probes], truncation_dim)
    if check:
        sums = entries.sum(axis=1)
        for probe, s in zip(probes, sums):
            if s < ROW_SUM_FLOOR:
                raise TruncationError(
                    f"probe {probe.label!r} (mean {probe.mean_photon:g}) keeps only "
                    f"{s:.9f} of its photon-number distribution at M={truncation_dim}; "
                    f"use M >= {sufficient_truncation(probe.mean_photon)}"
                )
    return ProbeMatrix(entries, tuple(probes))


def read_probes_csv(path: str | Path, calib: CalibrationConstants | None = None) -> list[CoherentProbe]:
    """Read probes from ``label,mean_photon`` or ``label,p_click`` CSV.

    A ``p_click`` column is converted with :func:`calibrate_mean_photon`,
    which requires ``calib``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        cols = reader.fieldnames or []
        if "label" not in cols or not ({"mean_photon", "p_click"} & set(cols)):
            raise DomainError(
                f"{path}: expected header 'label,mean_photon' or 'label,p_click', got {cols}"
            )
        probes = []
        for row in reader:
            try:
                if "mean_photon" in cols:
                    mu = float(row["mean_photon"])
                else:
                    if calib is None:
                        raise DomainError(f"{path}: p_click column needs calibration constants")
                    mu = calibrate_mean_photon(float(row["p_click"]), calib)
            except (TypeError, ValueError) as exc:
                if isinstance(exc, DomainError):
                    raise
                raise DomainError(f"{path}: bad row {row}: {exc}") from None
            probes.append(CoherentProbe(mu, row["label"]))
    return probes


def write_probes_csv(path: str | Path, probes: Iterable[CoherentProbe], comment: str = "") -> None:
    """Write ``label,mean_photon`` CSV, optionally preceded by a ``#`` comment line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "mean_photon"])
        for p in probes:
            writer.writerow([p.label, repr(float(p.mean_photon))])
