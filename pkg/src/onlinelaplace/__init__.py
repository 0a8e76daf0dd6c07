"""Online Laplace and online linear-model hyperparameter tuning for small MLP regressors."""

__version__ = "0.1.0"

from .estimator import OnlineLaplaceRegressor
from .model import Hyperparams, LinearArchitecture, MlpArchitecture

__all__ = ["Hyperparams", "LinearArchitecture", "MlpArchitecture", "OnlineLaplaceRegressor"]
