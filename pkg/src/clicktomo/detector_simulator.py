"""Exact forward model of a K-pixel click-detector array.

Photons are thinned with the per-photon efficiency, routed uniformly onto the
pixels, unfired pixels may dark-click, and every fired pixel may then induce
a click in each still-unfired pixel (one round, no cascades). All stages are
composed as exact transition matrices over the number of fired pixels, so
:func:`true_povm` is exact up to floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binom

from . import figures_of_merit as fom
from .click_statistics import OutcomeMatrix, ThresholdCounts, cumulate
from .exceptions import DomainError
from .povm_solver import PovmMatrix
from .probe_states import CoherentProbe, ProbeMatrix, build_probe_matrix, sufficient_truncation


@dataclass(frozen=True)
class ArrayDetectorModel:
    """Synthetic array detector.

    Attributes:
        n_pixels: number of pixels K; the detector has K + 1 outcomes.
        efficiency: per-photon detection probability.
        dark_prob: per-pixel dark-click probability per detection window.
        xtalk_prob: probability that one fired pixel triggers one given
            unfired pixel.
    """

    n_pixels: int = 4
    efficiency: float = 0.63
    dark_prob: float = 0.0
    xtalk_prob: float = 0.0

    def __post_init__(self):
        if self.n_pixels < 1:
            raise DomainError(f"n_pixels must be >= 1, got {self.n_pixels}")
        for name in ("efficiency", "dark_prob", "xtalk_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    @property
    def n_outcomes(self) -> int:
        return self.n_pixels + 1


def _occupancy_table(max_m: int, k: int) -> np.ndarray:
    # occ[m, j] = P(j distinct pixels hit | m photons); one photon at a time
    occ = np.zeros((max_m + 1, k + 1))
    occ[0, 0] = 1.0
    j = np.arange(k + 1)
    stay = j / k
    move = (k - j) / k
    for m in range(1, max_m + 1):
        occ[m] = occ[m - 1] * stay
        occ[m, 1:] += occ[m - 1, :-1] * move[:-1]
    return occ


def occupied_pixel_distribution(m_detected: int, k: int) -> np.ndarray:
    """Distribution of the number of distinct pixels hit by ``m_detected`` photons.

    Photons land independently and uniformly on ``k`` pixels. Computed with
    a one-photon-at-a-time recursion, which stays positive for any ``m``.
    """
    if m_detected < 0 or k < 1:
        raise DomainError(f"need m >= 0 and K >= 1, got m={m_detected}, K={k}")
    return _occupancy_table(m_detected, k)[m_detected]


def _fire_unfired(k: int, prob_given_fired) -> np.ndarray:
    """Transition matrix f -> f + Binomial(K - f, p(f))."""
    t = np.zeros((k + 1, k + 1))
    for f in range(k + 1):
        t[f, f:] = binom.pmf(np.arange(k - f + 1), k - f, prob_given_fired(f))
    return t


def _noise_transition(model: ArrayDetectorModel) -> np.ndarray:
    k = model.n_pixels
    dark = _fire_unfired(k, lambda f: model.dark_prob)
    xtalk = _fire_unfired(k, lambda f: 1.0 - (1.0 - model.xtalk_prob) ** f)
    return dark @ xtalk


def _povm_rows(model: ArrayDetectorModel, truncation_dim: int) -> np.ndarray:
    i = np.arange(truncation_dim)
    m = np.arange(truncation_dim)
    thinning = binom.pmf(m[None, :], i[:, None], model.efficiency)
    occ = _occupancy_table(truncation_dim - 1, model.n_pixels)
    return thinning @ occ @ _noise_transition(model)


def click_distribution_given_photons(model: ArrayDetectorModel, i: int) -> np.ndarray:
    """``p(k clicks | i photons)`` for ``k = 0 .. K``."""
    if i < 0:
        raise DomainError(f"photon number must be >= 0, got {i}")
    return _povm_rows(model, i + 1)[i]


def true_povm(model: ArrayDetectorModel, truncation_dim: int) -> PovmMatrix:
    if truncation_dim < 1:
        raise DomainError(f"truncation_dim must be >= 1, got {truncation_dim}")
    return PovmMatrix(_povm_rows(model, truncation_dim))


def exact_outcome_matrix(model: ArrayDetectorModel, F: ProbeMatrix) -> OutcomeMatrix:
    """Noise-free outcome probabilities ``F @ Pi_true``."""
    pi = true_povm(model, F.truncation_dim).entries
    return OutcomeMatrix(F.entries @ pi, F.labels)


def simulate_counts(
    model: ArrayDetectorModel,
    probes: Sequence[CoherentProbe],
    trials_per_probe: int,
    seed: int,
) -> list[ThresholdCounts]:
    """Finite-sample threshold counts, one multinomial draw per probe.

    Probe ``d`` uses a generator seeded from ``(seed, d)``, so results do not
    depend on evaluation order.
    """
    if trials_per_probe < 1:
        raise DomainError(f"trials_per_probe must be >= 1, got {trials_per_probe}")
    probes = list(probes)
    m = sufficient_truncation(max(p.mean_photon for p in probes))
    F = build_probe_matrix(probes, m)
    probs = exact_outcome_matrix(model, F).entries
    out = []
    for d, (probe, row) in enumerate(zip(probes, probs)):
        rng = np.random.default_rng([seed, d])
        row = np.clip(row, 0.0, None)
        exact = rng.multinomial(trials_per_probe, row / row.sum())
        trials, cumulative = cumulate(exact)
        out.append(ThresholdCounts(trials, cumulative, probe.label or f"d{d:02d}"))
    return out


def tune_model(
    efficiency: float = 0.63,
    target_dark: float = 5.9e-6,
    target_xtalk: float = 0.14,
    n_pixels: int = 4,
    rounds: int = 6,
) -> ArrayDetectorModel:
    """Find model parameters whose POVM read-offs hit the given device values.

    The targets are the device-level efficiency, dark-count and cross-talk
    read-offs of :mod:`clicktomo.figures_of_merit`. Dark clicks lower the
    no-click probability for one photon, so the per-pixel efficiency of the
    returned model sits slightly below ``efficiency``. The three parameters
    are solved by alternating one-dimensional root finding.
    """
    eta, dark, xtalk = efficiency, target_dark / n_pixels, 0.0
    # the one-photon two-click probability peaks at 1 / (K - 1)
    x_peak = 1.0 / max(n_pixels - 1, 1)

    def readoff(e, d, x, fn):
        return fn(true_povm(ArrayDetectorModel(n_pixels, e, d, x), 2))

    for _ in range(rounds):
        if target_xtalk > 0:
            xtalk = brentq(
                lambda x: readoff(eta, dark, x, fom.crosstalk_probability) - target_xtalk,
                0.0, x_peak, xtol=1e-15, rtol=1e-14,
            )
        if target_dark > 0:
            dark = brentq(
                lambda d: readoff(eta, d, xtalk, fom.dark_count_probability) - target_dark,
                0.0, 1.0 / n_pixels, xtol=1e-18, rtol=1e-14,
            )
        if 0 < efficiency < 1:
            eta = brentq(
                lambda e: readoff(e, dark, xtalk, fom.efficiency) - efficiency,
                0.0, 1.0, xtol=1e-16, rtol=1e-15,
            )
    return ArrayDetectorModel(n_pixels, eta, dark, xtalk)
