import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from onlinelaplace import OnlineLaplaceRegressor


@pytest.fixture(scope="module")
def xy():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((80, 3)) * [1.0, 5.0, 0.2] + [0, 10, 0]
    y = 3 * np.sin(X[:, 0]) + 0.4 * X[:, 1] + 0.3 * rng.standard_normal(80) + 100
    return X, y


def test_params_round_trip():
    est = OnlineLaplaceRegressor(procedure="lm", hidden_units=7, damping=0.5)
    params = est.get_params()
    assert params["hidden_units"] == 7 and params["damping"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(max_steps=3)
    assert twin.max_steps == 3 and est.max_steps == 1000


def test_unfitted():
    with pytest.raises(NotFittedError):
        OnlineLaplaceRegressor().predict(np.zeros((1, 2)))


@pytest.mark.parametrize("procedure", ["ol", "lm", "offline"])
def test_fit_predict(xy, procedure):
    X, y = xy
    est = OnlineLaplaceRegressor(procedure=procedure, hidden_units=8, max_steps=300).fit(X, y)
    assert est.n_features_in_ == 3
    mean, std = est.predict(X, return_std=True)
    assert mean.shape == std.shape == (80,)
    assert np.all(std > 0)
    # predictions come back in original units
    assert abs(np.mean(mean) - np.mean(y)) < np.std(y)
    assert est.score(X, y) > 0.5
    assert np.isfinite(est.log_likelihood(X, y))
    assert est.alpha_ > 0 and est.beta_ > 0


def test_offline_keeps_hyper_during_training(xy):
    X, y = xy
    est = OnlineLaplaceRegressor(procedure="offline", hidden_units=5, max_steps=50, posthoc="lh").fit(X, y)
    assert set(est.trace_.column("alpha")) == {1.0}


def test_deterministic(xy):
    X, y = xy
    a = OnlineLaplaceRegressor(hidden_units=5, max_steps=40, random_state=3).fit(X, y).predict(X)
    b = OnlineLaplaceRegressor(hidden_units=5, max_steps=40, random_state=3).fit(X, y).predict(X)
    np.testing.assert_array_equal(a, b)


def test_feature_count_checked(xy):
    X, y = xy
    est = OnlineLaplaceRegressor(hidden_units=4, max_steps=5).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :2])


def test_cross_validation(xy):
    X, y = xy
    scores = cross_val_score(OnlineLaplaceRegressor(hidden_units=5, max_steps=100), X, y, cv=2)
    assert scores.shape == (2,) and np.all(np.isfinite(scores))
