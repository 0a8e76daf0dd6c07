import math

import numpy as np
import pytest

from onlinelaplace.exceptions import DimensionMismatch
from onlinelaplace.model import (
    Hyperparams,
    LinearArchitecture,
    MlpArchitecture,
    forward,
    jacobian,
    loss,
    loss_gradient,
)
from onlinelaplace.verify import central_difference, random_mlp_instance, relative_error


def naive_forward(arch, w, X):
    """Neuron-by-neuron evaluation, independent of the vectorised path."""
    d, h = arch.input_dim, arch.hidden_units
    out = []
    for x in X:
        total = w[-1]
        for j in range(h):
            pre = w[d * h + j]
            for k in range(d):
                pre += x[k] * w[k * h + j]
            total += w[d * h + h + j] * math.tanh(pre)
        out.append(total)
    return np.array(out)


def test_param_count():
    assert MlpArchitecture(13).n_params == 14 * 50 + 50 + 1
    assert MlpArchitecture(6, 50).n_params == 401


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(0.0, 1.0)
    with pytest.raises(ValueError):
        Hyperparams(1.0, math.inf)


class TestForward:
    def test_zero_weights(self):
        arch = MlpArchitecture(3, 4)
        X = np.random.default_rng(0).standard_normal((5, 3))
        np.testing.assert_array_equal(forward(arch, np.zeros(arch.n_params), X), np.zeros(5))

    def test_zero_preactivation_gives_output_bias(self):
        arch = MlpArchitecture(1, 1)
        w = arch.pack([[0.0]], [0.0], [2.0], 0.7)
        assert forward(arch, w, np.array([[3.0]]))[0] == pytest.approx(0.7)

    def test_matches_naive(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            arch, w, X, _, _ = random_mlp_instance(rng)
            np.testing.assert_allclose(forward(arch, w, X), naive_forward(arch, w, X), atol=1e-12)

    def test_hidden_permutation_invariance(self):
        rng = np.random.default_rng(2)
        arch = MlpArchitecture(3, 6)
        w = rng.standard_normal(arch.n_params)
        W1, b1, w2, b2 = arch.unpack(w)
        p = rng.permutation(6)
        w_perm = arch.pack(W1[:, p], b1[p], w2[p], b2)
        X = rng.standard_normal((7, 3))
        np.testing.assert_allclose(forward(arch, w_perm, X), forward(arch, w, X), atol=1e-14)

    def test_dimension_checks(self):
        arch = MlpArchitecture(2, 3)
        with pytest.raises(DimensionMismatch):
            forward(arch, np.zeros(arch.n_params + 1), np.zeros((1, 2)))
        with pytest.raises(DimensionMismatch):
            forward(arch, np.zeros(arch.n_params), np.zeros((1, 3)))


class TestLoss:
    def test_zero(self):
        arch = MlpArchitecture(2, 3)
        assert loss(arch, np.zeros(arch.n_params), np.ones((4, 2)), np.zeros(4), Hyperparams()) == 0.0

    def test_data_term_only(self):
        arch = MlpArchitecture(2, 3)
        y = np.array([2.0, 0.0, 0.0])
        assert loss(arch, np.zeros(arch.n_params), np.ones((3, 2)), y, Hyperparams(5.0, 1.0)) == 2.0

    def test_matches_elementwise(self):
        rng = np.random.default_rng(3)
        arch, w, X, y, m = random_mlp_instance(rng)
        f = naive_forward(arch, w, X)
        expected = m.beta / 2 * sum((yi - fi) ** 2 for yi, fi in zip(y, f)) + m.alpha / 2 * sum(wi**2 for wi in w)
        assert loss(arch, w, X, y, m) == pytest.approx(expected, rel=1e-12)


class TestGradient:
    def test_stationary_for_interpolating_linear_model(self):
        arch = LinearArchitecture(2)
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        y = np.array([0.0, 0.0])
        np.testing.assert_array_equal(loss_gradient(arch, np.zeros(2), X, y, Hyperparams()), 0.0)

    def test_prior_only_when_fit_is_exact(self):
        rng = np.random.default_rng(4)
        arch, w, X, _, m = random_mlp_instance(rng)
        y = forward(arch, w, X)
        np.testing.assert_allclose(loss_gradient(arch, w, X, y, m), m.alpha * w, atol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            arch, w, X, y, m = random_mlp_instance(rng)
            fd = central_difference(lambda v: loss(arch, v, X, y, m), w)
            assert relative_error(fd, loss_gradient(arch, w, X, y, m)) < 1e-5

    def test_chain_rule_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            arch, w, X, y, m = random_mlp_instance(rng)
            J = jacobian(arch, w, X)
            expected = m.beta * J.T @ (forward(arch, w, X) - y) + m.alpha * w
            got = loss_gradient(arch, w, X, y, m)
            assert np.linalg.norm(got - expected) <= 1e-10 * max(1.0, np.linalg.norm(expected))


class TestJacobian:
    def test_structure_at_zero(self):
        arch = MlpArchitecture(2, 3)
        X = np.array([[0.5, -1.0], [2.0, 1.0]])
        J = jacobian(arch, np.zeros(arch.n_params), X)
        np.testing.assert_array_equal(J[:, -1], 1.0)
        np.testing.assert_array_equal(J[:, 9:12], 0.0)  # hidden-to-output, tanh(0) = 0
        np.testing.assert_array_equal(J[:, :9], 0.0)  # first layer, scaled by w2 = 0

    def test_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            arch, w, X, _, _ = random_mlp_instance(rng)
            fd = central_difference(lambda v: arch.forward(v, X), w)
            assert relative_error(fd, jacobian(arch, w, X)) < 1e-5

    def test_duplicated_rows(self):
        rng = np.random.default_rng(8)
        arch = MlpArchitecture(3, 5)
        w = rng.standard_normal(arch.n_params)
        x = rng.standard_normal(3)
        J = jacobian(arch, w, np.stack([x, rng.standard_normal(3), x]))
        np.testing.assert_array_equal(J[0], J[2])


def test_init_params_scale():
    arch = MlpArchitecture(16, 200)
    w = arch.init_params(np.random.default_rng(0))
    W1, b1, w2, b2 = arch.unpack(w)
    assert np.all(b1 == 0) and b2 == 0
    assert np.std(W1) == pytest.approx(1 / 4, rel=0.05)
    assert np.std(w2) == pytest.approx(1 / math.sqrt(200), rel=0.15)
