"""Binning Calibration - post-hoc calibration of binary classifier scores with distribution-free guarantees."""

__version__ = "1.0.0"

from .assessment import (
    DiscretePredictorDistribution,
    ValidityCurve,
    aggregate_curves,
    curve_auc,
    ece_discrete,
    plugin_ece,
    validity_conditional,
    validity_marginal,
)
from .calibrators import (
    CalibratorKind,
    fit_calibrator,
    fit_fixed_width,
    fit_isotonic,
    fit_randomized_umd,
    fit_scaling_binning,
    fit_umd,
    fit_umd_original,
    fit_ums,
)
from .errors import CalibrationError, DataError, FitError, InvalidConfigurationError
from .guarantees import (
    GuaranteeResult,
    eps_randomized,
    eps_umd,
    eps_umd_original,
    guarantee,
    required_n,
    ums_required_n,
)
from .model import BinningModel, Dataset, ScoredSample, SeededRng, assign_bin, predict

__all__ = [
    "BinningModel",
    "Dataset",
    "ScoredSample",
    "SeededRng",
    "assign_bin",
    "predict",
    "CalibratorKind",
    "fit_calibrator",
    "fit_umd",
    "fit_umd_original",
    "fit_randomized_umd",
    "fit_ums",
    "fit_fixed_width",
    "fit_isotonic",
    "fit_scaling_binning",
    "DiscretePredictorDistribution",
    "ValidityCurve",
    "validity_marginal",
    "validity_conditional",
    "curve_auc",
    "plugin_ece",
    "ece_discrete",
    "aggregate_curves",
    "GuaranteeResult",
    "eps_umd",
    "eps_umd_original",
    "eps_randomized",
    "guarantee",
    "required_n",
    "ums_required_n",
    "CalibrationError",
    "DataError",
    "InvalidConfigurationError",
    "FitError",
]
