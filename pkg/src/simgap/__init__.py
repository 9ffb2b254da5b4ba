"""Calibrated sim-to-real gap estimates with finite-sample coverage guarantees."""

from .calibration import (
    CalibrationReport, QuantileCurve, auc_cal, band, calibrated_curve, calibration_report, cvar_cal,
    empirical_quantile, epsilon_correction, guaranteed_coverage, new_scenario_set,
)
from .confidence_sets import ConfidenceSet, build_confidence_set, confidence_set_around, split_gamma_joint
from .discrepancy import PseudoGap, compute_pseudo_gaps, pairwise_sup
from .domain import (
    BoundedScalar, Dataset, Empirical1D, LossSpec, ScenarioRecord, Simplex, evaluate_loss, validate_dataset,
)
from .estimators import PairwiseComparator, SimToRealCalibrator
from .exceptions import (
    DatasetInvalid, KLUndefined, MeshTooCoarse, NumericalError, RegimeWarning, SchemaError, SimGapError,
    ValidationError,
)
from .io import ingest, write_dataset
from .pairwise import PairwiseReport, compute_pairwise

__version__ = "0.1.0"

__all__ = [
    "BoundedScalar", "CalibrationReport", "ConfidenceSet", "Dataset", "DatasetInvalid", "Empirical1D",
    "KLUndefined", "LossSpec", "MeshTooCoarse", "NumericalError", "PairwiseComparator", "PairwiseReport",
    "PseudoGap", "QuantileCurve", "RegimeWarning", "ScenarioRecord", "SchemaError", "SimGapError",
    "SimToRealCalibrator", "Simplex", "ValidationError", "auc_cal", "band", "build_confidence_set",
    "calibrated_curve", "calibration_report", "compute_pairwise", "compute_pseudo_gaps", "confidence_set_around",
    "cvar_cal", "empirical_quantile", "epsilon_correction", "evaluate_loss", "guaranteed_coverage", "ingest",
    "new_scenario_set", "pairwise_sup", "split_gamma_joint", "validate_dataset", "write_dataset",
]
