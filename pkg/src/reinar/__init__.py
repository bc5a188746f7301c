"""Random-environment geometric INAR models of higher order.

Simulation, transform-then-cluster estimation of the environment states,
conditional maximum likelihood and one-step prediction.
"""

from .cluster import align_and_count, baseline_states, kmeans, renes_states, search_C, search_dp
from .configs import COMBO_NAMES, reference_model, reference_renes
from .likelihood import FitResult, cml_fit, cond_pmf, geom_pmf, loglik, predict, rms, thin_pmf
from .model import EnvChainSpec, InfeasibleParameters, ModelParams, order_sequence, validate_model
from .preestimate import PreEstimates, RenesConfig, build_features, durbin_levinson, pacf, trim
from .sampling import SimOutput, innovation_params, simulate

__version__ = "0.1.0"

__all__ = [
    "COMBO_NAMES", "EnvChainSpec", "FitResult", "InfeasibleParameters", "ModelParams", "PreEstimates",
    "RenesConfig", "SimOutput", "align_and_count", "baseline_states", "build_features", "cml_fit",
    "cond_pmf", "durbin_levinson", "geom_pmf", "innovation_params", "kmeans", "loglik", "order_sequence",
    "pacf", "reference_model", "reference_renes", "predict", "renes_states", "rms", "search_C", "search_dp",
    "simulate", "thin_pmf", "trim", "validate_model",
]
