"""scikit-learn compatible regressor around the training procedures."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import Split, SplitSpec, Standardizer, permutation, split_sizes
from .model import Hyperparams, MlpArchitecture
from .predict import PredictiveGaussian, gaussian_log_likelihood, predict
from .tangent import ggn, linearize
from .train import TrainConfig, run


class OnlineLaplaceRegressor(RegressorMixin, BaseEstimator):
    """Tanh MLP whose weight decay and noise level are tuned during training.

    Parameters
    ----------
    procedure : {"ol", "lm", "offline"}
        ``"ol"`` updates ``(alpha, beta)`` from the Laplace evidence at the
        current weights after every step; ``"lm"`` from the tangent linear
        model's evidence; ``"offline"`` keeps them fixed, early-stops on a
        validation split and tunes them post hoc for the predictive.
    hidden_units : int
    max_steps : int
        Full-batch Adam steps.
    alpha, beta : float
        Initial prior and noise precisions (in standardised units).
    learning_rate, decay : float
        Adam step size and its per-step exponential decay.
    damping : float in [0, 1]
        Log-space damping of the hyperparameter update; 1 is undamped.
    validation_fraction : float
        Share of the training rows held out for early stopping (offline only).
    posthoc : {"lf", "lh"}
        Objective for the offline predictive hyperparameters.
    standardize : bool
        Standardise features and targets using training statistics.
    random_state : int
    """

    def __init__(
        self,
        procedure="ol",
        hidden_units=50,
        max_steps=1000,
        alpha=1.0,
        beta=1.0,
        learning_rate=0.01,
        decay=0.9999,
        damping=1.0,
        validation_fraction=0.1,
        posthoc="lf",
        standardize=True,
        random_state=0,
    ):
        self.procedure = procedure
        self.hidden_units = hidden_units
        self.max_steps = max_steps
        self.alpha = alpha
        self.beta = beta
        self.learning_rate = learning_rate
        self.decay = decay
        self.damping = damping
        self.validation_fraction = validation_fraction
        self.posthoc = posthoc
        self.standardize = standardize
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        cfg = TrainConfig(
            procedure=self.procedure,
            max_steps=self.max_steps,
            hyper_init=Hyperparams(self.alpha, self.beta),
            seed=self.random_state,
            damping=self.damping,
            record_every=max(1, self.max_steps // 100),
            lr0=self.learning_rate,
            decay=self.decay,
            diagnostics=False,
        )
        val_idx = np.array([], dtype=int)
        train_idx = np.arange(len(y))
        if self.procedure == "offline":
            spec = SplitSpec(seed=self.random_state, test_fraction=0.0,
                             val_fraction=self.validation_fraction, use_validation=True)
            _, n_val, _ = split_sizes(len(y), spec)
            if n_val < 1:
                raise ValueError("too few samples for a validation split")
            perm = permutation(len(y), self.random_state, 0)
            val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])

        if self.standardize:
            self.scaler_ = Standardizer.fit(X[train_idx], y[train_idx])
        else:
            d = X.shape[1]
            self.scaler_ = Standardizer(np.zeros(d), np.ones(d), 0.0, 1.0, np.zeros(d, bool))
        sc = self.scaler_
        Xs, ys = sc.transform_X(X), sc.transform_y(y)
        split = Split(Xs[train_idx], ys[train_idx])
        if len(val_idx):
            split.X_val, split.y_val = Xs[val_idx], ys[val_idx]
        split.scaler = sc

        self.arch_ = MlpArchitecture(X.shape[1], self.hidden_units)
        kw = {"posthoc": self.posthoc} if self.procedure == "offline" else {}
        res = run(self.arch_, split, cfg, **kw)
        self.params_ = res.params
        self.hyper_ = res.hyper
        self.alpha_, self.beta_ = res.hyper.alpha, res.hyper.beta
        self.trace_ = res.trace
        self.ggn_ = ggn(linearize(self.arch_, self.params_, split.X_train), self.hyper_)
        return self

    def predict_distribution(self, X):
        """Linearised-Laplace Gaussian per row, in original target units."""
        check_is_fitted(self, "params_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        sc = self.scaler_
        p = predict(self.arch_, self.params_, self.ggn_, sc.transform_X(X), self.hyper_)
        return p.rescale(sc.target_std, sc.target_mean)

    def predict(self, X, return_std=False):
        p = self.predict_distribution(X)
        return (p.mean, p.std) if return_std else p.mean

    def log_likelihood(self, X, y):
        """Mean predictive log-density of ``y`` in original units."""
        p = self.predict_distribution(X)
        return gaussian_log_likelihood(p.mean, p.variance, np.asarray(y, dtype=np.float64))


__all__ = ["OnlineLaplaceRegressor", "PredictiveGaussian"]
