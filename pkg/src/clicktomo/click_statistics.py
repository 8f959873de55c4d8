"""Turning cumulative threshold counts into outcome probabilities."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import CountsError, ShapeError


@dataclass(frozen=True)
class ThresholdCounts:
    """Counts from one probe state.

    ``trials`` is the number of pulses (``c_0``, "at least zero clicks") and
    ``cumulative[n - 1]`` the number of pulses in which at least ``n`` pixels
    fired.
    """

    trials: int
    cumulative: tuple[int, ...]
    probe_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "cumulative", tuple(int(c) for c in self.cumulative))
        object.__setattr__(self, "trials", int(self.trials))

    @property
    def n_outcomes(self) -> int:
        return len(self.cumulative) + 1

    def check(self) -> None:
        """Raise :class:`CountsError` unless ``trials >= c_1 >= c_2 >= ... >= 0``."""
        if self.trials <= 0:
            raise CountsError(f"probe {self.probe_label!r}: trials must be > 0, got {self.trials}")
        chain = (self.trials,) + self.cumulative
        for n in range(len(chain) - 1):
            if chain[n] < chain[n + 1]:
                raise CountsError(
                    f"probe {self.probe_label!r}: c{n + 1}={chain[n + 1]} exceeds "
                    f"c{n}={chain[n]}; counts must be non-increasing in the threshold"
                )
        if chain[-1] < 0:
            raise CountsError(f"probe {self.probe_label!r}: negative count c{len(chain) - 1}")


@dataclass(frozen=True)
class OutcomeMatrix:
    """D x N matrix of outcome probabilities, one row per probe."""

    entries: np.ndarray
    probe_order: tuple[str, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "probe_order", tuple(self.probe_order))

    @property
    def n_outcomes(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape


def orthogonalize(tc: ThresholdCounts) -> list[int]:
    """Exact-count vector ``c'_n = c_n - c_{n+1}``; the top outcome keeps ``c_{N-1}``."""
    tc.check()
    chain = (tc.trials,) + tc.cumulative
    exact = [chain[n] - chain[n + 1] for n in range(len(chain) - 1)]
    exact.append(chain[-1])
    return exact


def cumulate(exact: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Inverse of :func:`orthogonalize`: returns ``(trials, cumulative)``."""
    tail = np.cumsum(np.asarray(exact, dtype=np.int64)[::-1])[::-1]
    return int(tail[0]), tuple(int(c) for c in tail[1:])


def build_outcome_matrix(all_counts: Sequence[ThresholdCounts]) -> OutcomeMatrix:
    if len(all_counts) == 0:
        raise ShapeError("need counts for at least one probe")
    n = all_counts[0].n_outcomes
    rows = []
    for tc in all_counts:
        if tc.n_outcomes != n:
            raise ShapeError(
                f"probe {tc.probe_label!r} has {tc.n_outcomes} outcomes, expected {n}"
            )
        rows.append(np.asarray(orthogonalize(tc), dtype=float) / tc.trials)
    return OutcomeMatrix(np.vstack(rows), tuple(tc.probe_label for tc in all_counts))


def read_counts_csv(path: str | Path) -> list[ThresholdCounts]:
    """Read a ``probe_label,trials,c1,...,cK`` file. Rows are not validated here.

    Lines starting with ``#`` are skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader, None)
        if header is None or header[:2] != ["probe_label", "trials"]:
            raise CountsError(f"{path}: expected header 'probe_label,trials,c1,...', got {header}")
        expected = [f"c{k}" for k in range(1, len(header) - 1)]
        if header[2:] != expected:
            raise CountsError(f"{path}: threshold columns must be {expected}, got {header[2:]}")
        out = []
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise CountsError(f"{path}: data row {rowno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [int(v) for v in row[1:]]
            except ValueError as exc:
                raise CountsError(f"{path}: data row {rowno}: {exc}") from None
            out.append(ThresholdCounts(values[0], tuple(values[1:]), row[0]))
    return out


def write_counts_csv(path: str | Path, all_counts: Iterable[ThresholdCounts], comment: str = "") -> None:
    all_counts = list(all_counts)
    k = len(all_counts[0].cumulative) if all_counts else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["probe_label", "trials"] + [f"c{j}" for j in range(1, k + 1)])
        for tc in all_counts:
            writer.writerow([tc.probe_label, tc.trials, *tc.cumulative])


def match_probes(all_counts: Sequence[ThresholdCounts], probes: Sequence) -> list:
    """Order ``probes`` (anything with a ``label``) like the count rows.

    Rows are matched by label. If neither side carries labels, they are
    matched by position. Anything else raises :class:`ShapeError`.
    """
    if len(all_counts) != len(probes):
        raise ShapeError(f"{len(all_counts)} count rows but {len(probes)} probes")
    labels = [tc.probe_label for tc in all_counts]
    probe_labels = [p.label for p in probes]
    if not any(labels) and not any(probe_labels):
        return list(probes)
    by_label = {p.label: p for p in probes}
    if len(by_label) != len(probes):
        raise ShapeError("probe labels are not unique")
    missing = [lb for lb in labels if lb not in by_label]
    if missing:
        raise ShapeError(f"no probe calibration for count row(s) {missing}")
    return [by_label[lb] for lb in labels]
