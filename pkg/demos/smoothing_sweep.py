"""Dark-count element versus smoothing weight.

Below a threshold the reconstructed dark-click probability is flat; above it
the penalty drags the zero-photon row towards its neighbours and the value
climbs by orders of magnitude.

    python3 demos/smoothing_sweep.py
"""

import numpy as np

from clicktomo import (
    build_outcome_matrix,
    build_probe_matrix,
    choose_truncation,
    default_probe_ladder,
    simulate_counts,
    sweep_smoothing,
    tune_model,
)


def main():
    model = tune_model(efficiency=0.63, target_dark=5.9e-6, target_xtalk=0.14)
    probes = default_probe_ladder(19)
    F = build_probe_matrix(probes, choose_truncation(332))
    P = build_outcome_matrix(simulate_counts(model, probes, 5_000_000, seed=1))
    grid = np.logspace(-3, 0, 13)
    for eps, value in sweep_smoothing(P, F, grid, target=(0, 1)):
        bar = "#" * int(max(0.0, 15 + 2 * np.log10(value)))
        print(f"eps={eps:8.4f}  theta_0^(1)={value:10.3e}  {bar}")


if __name__ == "__main__":
    main()
