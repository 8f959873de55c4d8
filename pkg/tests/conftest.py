import numpy as np
import pytest

from clicktomo import (
    SolverConfig,
    build_outcome_matrix,
    build_probe_matrix,
    choose_truncation,
    default_probe_ladder,
    reconstruct,
    simulate_counts,
    tune_model,
)
from clicktomo.detector_simulator import exact_outcome_matrix

# device-level targets of the closed-loop runs
TARGET_EFFICIENCY = 0.63
TARGET_DARK = 5.9e-6
TARGET_XTALK = 0.14
FULL_M = choose_truncation(332)
TRIALS = 5_000_000
NOISE_SEED = 20240611


@pytest.fixture(scope="session")
def device_model():
    return tune_model(TARGET_EFFICIENCY, TARGET_DARK, TARGET_XTALK, n_pixels=4)


@pytest.fixture(scope="session")
def ladder_probes():
    return default_probe_ladder(19)


@pytest.fixture(scope="session")
def full_F(ladder_probes):
    return build_probe_matrix(ladder_probes, FULL_M)


@pytest.fixture(scope="session")
def exact_P(device_model, full_F):
    return exact_outcome_matrix(device_model, full_F)


@pytest.fixture(scope="session")
def noisy_counts(device_model, ladder_probes):
    return simulate_counts(device_model, ladder_probes, TRIALS, NOISE_SEED)


@pytest.fixture(scope="session")
def noisy_P(noisy_counts):
    return build_outcome_matrix(noisy_counts)


@pytest.fixture(scope="session")
def exact_fit(exact_P, full_F):
    return reconstruct(exact_P, full_F, SolverConfig(epsilon=0.1))


@pytest.fixture(scope="session")
def noisy_fit(noisy_P, full_F):
    return reconstruct(noisy_P, full_F, SolverConfig(epsilon=0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
