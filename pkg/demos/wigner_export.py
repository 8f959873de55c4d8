"""Wigner functions of the reconstructed one- and two-click elements.

Writes ``wigner_n1.csv`` and ``wigner_n2.csv`` (columns x, p, w) to the
current directory and prints the value at the origin, which is negative for
the one-click element.

    python3 demos/wigner_export.py
"""

from clicktomo import (
    SolverConfig,
    build_probe_matrix,
    choose_truncation,
    default_probe_ladder,
    povm_wigner,
    reconstruct,
    tune_model,
)
from clicktomo.detector_simulator import exact_outcome_matrix


def main():
    model = tune_model(efficiency=0.63, target_dark=5.9e-6, target_xtalk=0.14)
    F = build_probe_matrix(default_probe_ladder(19), choose_truncation(332))
    pi, _ = reconstruct(exact_outcome_matrix(model, F), F, SolverConfig(epsilon=0.1))
    for n in (1, 2):
        grid = povm_wigner(pi.column(n), extent=4.0, resolution=201)
        grid.write_csv(f"wigner_n{n}.csv", comment=f"outcome={n}")
        centre = grid.values[100, 100]
        print(f"outcome {n}: W(0,0)={centre:+.4f}, min={grid.values.min():+.4f}, max={grid.values.max():+.4f}")


if __name__ == "__main__":
    main()
