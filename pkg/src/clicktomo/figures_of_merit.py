"""Detector figures of merit read off a reconstructed POVM, with Monte-Carlo errors."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .exceptions import DimensionError


def _entries(povm) -> np.ndarray:
    return np.asarray(getattr(povm, "entries", povm), dtype=float)


def efficiency(povm) -> float:
    """Probability of any click given one incident photon, ``1 - p(0|1)``."""
    e = _entries(povm)
    if e.shape[0] < 2 or e.shape[1] < 2:
        raise DimensionError(f"efficiency needs M >= 2 and N >= 2, POVM is {e.shape}")
    return float(1.0 - e[1, 0])


def dark_count_probability(povm) -> float:
    """Single-click probability with no incident photons, ``p(1|0)``."""
    e = _entries(povm)
    if e.shape[1] < 2:
        raise DimensionError(f"dark counts need N >= 2, POVM is {e.shape}")
    return float(e[0, 1])


def crosstalk_probability(povm) -> float:
    """Excess two-click probability for one photon: ``p(2|1) - p(1|1) p(1|0)``.

    Not clamped; a small negative value means no detectable cross-talk.
    """
    e = _entries(povm)
    if e.shape[0] < 2 or e.shape[1] < 3:
        raise DimensionError(f"cross-talk needs M >= 2 and N >= 3, POVM is {e.shape}")
    return float(e[1, 2] - e[1, 1] * e[0, 1])


_MERITS = (
    ("efficiency", efficiency),
    ("dark_prob", dark_count_probability),
    ("xtalk_prob", crosstalk_probability),
)


@dataclass
class MeritReport:
    """Figures of merit; sigmas are ``None`` when no Monte Carlo was run."""

    efficiency: float
    dark_prob: float
    xtalk_prob: float
    efficiency_sigma: float | None = None
    dark_prob_sigma: float | None = None
    xtalk_prob_sigma: float | None = None
    epsilon: float | None = None
    n_mc_samples: int = 0
    excluded_samples: int = 0
    mc_mean: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "efficiency": self.efficiency,
            "efficiency_sigma": self.efficiency_sigma,
            "dark_prob": self.dark_prob,
            "dark_prob_sigma": self.dark_prob_sigma,
            "xtalk_prob": self.xtalk_prob,
            "xtalk_prob_sigma": self.xtalk_prob_sigma,
            "epsilon": self.epsilon,
            "n_mc_samples": self.n_mc_samples,
            "excluded_samples": self.excluded_samples,
        }
        if self.n_mc_samples == 0:
            for k in ("efficiency_sigma", "dark_prob_sigma", "xtalk_prob_sigma"):
                del out[k]
        else:
            out["mc_mean"] = dict(self.mc_mean)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def merit_report(povm, epsilon: float | None = None) -> MeritReport:
    """Central values only."""
    return MeritReport(
        efficiency=efficiency(povm),
        dark_prob=dark_count_probability(povm),
        xtalk_prob=crosstalk_probability(povm),
        epsilon=epsilon,
    )


def perturbation_factors(n_probes: int, rel_sigma: float, seed: int, sample: int,
                         correlated: bool = False) -> np.ndarray:
    """Multiplicative factors on the probe mean photon numbers for one MC sample.

    Drawn from ``N(1, rel_sigma)``, truncated at zero; a single shared factor
    when ``correlated``. Seeded by ``(seed, sample)``.
    """
    rng = np.random.default_rng([seed, sample])
    if correlated:
        f = np.full(n_probes, rng.normal(1.0, rel_sigma))
    else:
        f = rng.normal(1.0, rel_sigma, size=n_probes)
    return np.maximum(f, 0.0)


def propagate_uncertainty(
    raw_counts: Sequence,
    calib_means: Sequence,
    amplitude_rel_sigma: float = 0.05,
    n_samples: int = 100,
    config=None,
    seed: int = 0,
    truncation_sigma: float = 6.0,
    correlated: bool = False,
    max_workers: int = 1,
) -> MeritReport:
    """Propagate probe-amplitude calibration error into the figures of merit.

    The central values come from the unperturbed reconstruction. Each of the
    ``n_samples`` Monte-Carlo samples rescales every probe mean photon number
    by a factor from :func:`perturbation_factors`, rebuilds the probe matrix
    and reconstructs again; the reported sigmas are the sample standard
    deviations. Samples whose solve did not converge are dropped and counted
    in ``excluded_samples``.

    Args:
        raw_counts: threshold counts, one per probe.
        calib_means: the calibrated probes (matched to counts by label).
        amplitude_rel_sigma: relative 1-sigma error of the mean photon numbers.
        n_samples: number of Monte-Carlo samples, at least 2.
        config: :class:`~clicktomo.povm_solver.SolverConfig`.
        seed: base seed; sample ``s`` uses ``(seed, s)``.
        truncation_sigma: truncation rule for every rebuilt probe matrix.
        correlated: share one factor among all probes.
        max_workers: threads used for the samples; results do not depend on it.
    """
    from .click_statistics import build_outcome_matrix, match_probes
    from .povm_solver import SolverConfig, reconstruct
    from .probe_states import build_probe_matrix, sufficient_truncation

    if amplitude_rel_sigma < 0:
        raise ValueError(f"amplitude_rel_sigma must be >= 0, got {amplitude_rel_sigma}")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    config = config or SolverConfig()
    probes = match_probes(raw_counts, calib_means)
    P = build_outcome_matrix(raw_counts)

    def solve(ps):
        mu_max = max(p.mean_photon for p in ps)
        F = build_probe_matrix(ps, sufficient_truncation(mu_max, truncation_sigma))
        return reconstruct(P, F, config)

    central_povm, _ = solve(probes)
    report = merit_report(central_povm, config.epsilon)

    def sample(s):
        factors = perturbation_factors(len(probes), amplitude_rel_sigma, seed, s, correlated)
        ps = [replace(p, mean_photon=p.mean_photon * f) for p, f in zip(probes, factors)]
        povm, diag = solve(ps)
        if not diag.converged:
            return None
        return [fn(povm) for _, fn in _MERITS]

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(sample, range(n_samples)))
    else:
        results = [sample(s) for s in range(n_samples)]
    kept = np.array([r for r in results if r is not None], dtype=float).reshape(-1, len(_MERITS))
    report.n_mc_samples = n_samples
    report.excluded_samples = n_samples - kept.shape[0]
    for k, (name, _) in enumerate(_MERITS):
        col = kept[:, k]
        sigma = float(col.std(ddof=1)) if col.size >= 2 else float("nan")
        setattr(report, f"{name}_sigma", sigma)
        report.mc_mean[name] = float(col.mean()) if col.size else float("nan")
    return report
