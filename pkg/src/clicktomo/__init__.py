"""Detector tomography of photon-number-resolving click-detector arrays."""

__version__ = "0.1.0"

from .click_statistics import (
    OutcomeMatrix,
    ThresholdCounts,
    build_outcome_matrix,
    match_probes,
    orthogonalize,
    read_counts_csv,
    write_counts_csv,
)
from .detector_simulator import ArrayDetectorModel, simulate_counts, true_povm, tune_model
from .exceptions import (
    CountsError,
    DimensionError,
    DomainError,
    PovmError,
    ShapeError,
    TomographyError,
    TruncationError,
)
from .figures_of_merit import (
    MeritReport,
    crosstalk_probability,
    dark_count_probability,
    efficiency,
    merit_report,
    propagate_uncertainty,
)
from .povm_solver import (
    PovmMatrix,
    SolveDiagnostics,
    SolverConfig,
    objective,
    read_povm_json,
    reconstruct,
    sweep_smoothing,
    write_povm_json,
)
from .probe_states import (
    CalibrationConstants,
    CoherentProbe,
    ProbeMatrix,
    build_probe_matrix,
    calibrate_mean_photon,
    choose_truncation,
    default_probe_ladder,
    read_probes_csv,
    sufficient_truncation,
    write_probes_csv,
)
from .wigner import WignerGrid, fock_wigner, povm_wigner
