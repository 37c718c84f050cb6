import math

import numpy as np
import pytest
from pydantic import ValidationError

import dnn
from dnn import LabeledMatrix, Network
from errors import ArgumentError, DivergenceError
from models import TrainConfig


def random_data(m=5, d=4, k=3, seed=0):
    rng = np.random.default_rng(seed)
    return LabeledMatrix.from_labels(rng.normal(size=(m, d)), rng.integers(0, k, size=m), k)


def separable_data():
    rng = np.random.default_rng(21)
    left = rng.normal(loc=-3.0, scale=0.5, size=(10, 2))
    right = rng.normal(loc=3.0, scale=0.5, size=(10, 2))
    return LabeledMatrix.from_labels(np.vstack([left, right]), [0] * 10 + [1] * 10, 2)


def numeric_gradients(net, data, l2_lambda, step=1e-4):
    grads = []
    for z, theta in enumerate(net.weights):
        numeric = np.zeros_like(theta)
        for index in np.ndindex(theta.shape):
            original = theta[index]
            theta[index] = original + step
            plus = dnn.cost(net, data, l2_lambda)
            theta[index] = original - step
            minus = dnn.cost(net, data, l2_lambda)
            theta[index] = original
            numeric[index] = (plus - minus) / (2 * step)
        grads.append(numeric)
    return grads


def test_sigmoid():
    assert dnn.sigmoid(0.0) == 0.5
    assert dnn.sigmoid(800.0) == 1.0
    assert dnn.sigmoid(-800.0) == 0.0
    x = np.linspace(-30, 30, 121)
    np.testing.assert_allclose(dnn.sigmoid(-x), 1 - dnn.sigmoid(x), atol=1e-15)


def test_topology():
    assert dnn.topology(36, 2) == [36, 54, 54, 54, 54, 2]
    assert dnn.topology(27, 10) == [27, 41, 41, 41, 41, 10]


def test_init_weights():
    net = dnn.init_weights([36, 54, 5], seed=3)
    assert [w.shape for w in net.weights] == [(54, 37), (5, 55)]
    assert np.all(np.abs(net.weights[0]) <= math.sqrt(6 / 90))
    assert np.all(np.abs(net.weights[1]) <= math.sqrt(6 / 59))
    again = dnn.init_weights([36, 54, 5], seed=3)
    for a, b in zip(net.weights, again.weights):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ArgumentError):
        dnn.init_weights([4], seed=0)
    with pytest.raises(ArgumentError):
        dnn.init_weights([4, 0, 2], seed=0)


def test_forward_zero_weights():
    net = Network(layer_sizes=[3, 4, 2], weights=[np.zeros((4, 4)), np.zeros((2, 5))])
    activations = dnn.forward(net, np.array([1.0, -2.0, 0.5]))
    assert all(np.all(a == 0.5) for a in activations[1:])


def test_forward_hand_computed():
    theta1 = np.array([[0.1, 0.5, -0.3], [-0.2, 0.4, 0.8]])
    theta2 = np.array([[0.3, -1.0, 0.7]])
    net = Network(layer_sizes=[2, 2, 1], weights=[theta1, theta2])
    x = np.array([1.0, 2.0])
    h1 = 1 / (1 + math.exp(-(0.1 + 0.5 * 1 - 0.3 * 2)))
    h2 = 1 / (1 + math.exp(-(-0.2 + 0.4 * 1 + 0.8 * 2)))
    out = 1 / (1 + math.exp(-(0.3 - 1.0 * h1 + 0.7 * h2)))
    assert dnn.forward(net, x)[-1][0] == pytest.approx(out, rel=1e-14)


def test_forward_rejects_wrong_width():
    with pytest.raises(ArgumentError):
        dnn.forward(dnn.init_weights([3, 2], 0), np.ones(4))


def test_cost_examples():
    net = Network(layer_sizes=[1, 1], weights=[np.zeros((1, 2))])
    data = LabeledMatrix(inputs=[[0.0]], targets=[[1.0]])
    assert dnn.cost(net, data) == pytest.approx(math.log(2))
    saturated = Network(layer_sizes=[1, 1], weights=[np.array([[1e4, 0.0]])])
    assert dnn.cost(saturated, data) < 1e-11


def test_cost_mean_form():
    net = dnn.init_weights([4, 3, 3], seed=1)
    data = random_data()
    doubled = LabeledMatrix(inputs=np.vstack([data.inputs, data.inputs]), targets=np.vstack([data.targets, data.targets]))
    assert dnn.cost(net, doubled) == pytest.approx(dnn.cost(net, data), rel=1e-14)


def test_output_delta():
    np.testing.assert_array_equal(dnn.output_delta([0.2, 0.8], [0.2, 0.8]), [0.0, 0.0])
    assert dnn.output_delta([0.7], [1.0])[0] == pytest.approx(-0.3)


def test_hidden_delta():
    theta = np.array([[0.5, 1.0, -2.0], [0.1, 0.5, 0.25]])
    np.testing.assert_array_equal(dnn.hidden_delta(np.zeros(2), theta, np.array([0.3, 0.6])), [0.0, 0.0])
    np.testing.assert_array_equal(dnn.hidden_delta(np.ones(2), theta, np.array([1.0, 0.0])), [0.0, 0.0])
    delta = dnn.hidden_delta(np.array([0.2, -0.4]), theta, np.array([0.3, 0.6]))
    expected = [(1.0 * 0.2 + 0.5 * -0.4) * 0.3 * 0.7, (-2.0 * 0.2 + 0.25 * -0.4) * 0.6 * 0.4]
    np.testing.assert_allclose(delta, expected, rtol=1e-14)


@pytest.mark.parametrize('l2_lambda', [0.0, 0.1])
def test_gradients_match_finite_differences(l2_lambda):
    net = dnn.init_weights([4, 6, 6, 6, 6, 3], seed=5)
    data = random_data(m=5)
    analytic = dnn.accumulate_gradients(net, data, l2_lambda)
    for a, n in zip(analytic, numeric_gradients(net, data, l2_lambda)):
        np.testing.assert_allclose(a, n, rtol=1e-6, atol=1e-9)


def test_regularisation_adds_lambda_theta():
    net = dnn.init_weights([4, 5, 3], seed=2)
    data = random_data()
    plain = dnn.accumulate_gradients(net, data, 0.0)
    decayed = dnn.accumulate_gradients(net, data, 0.25)
    for p, d, theta in zip(plain, decayed, net.weights):
        np.testing.assert_allclose(d[:, 1:] - p[:, 1:], 0.25 * theta[:, 1:], rtol=1e-12, atol=1e-15)
        np.testing.assert_array_equal(d[:, 0], p[:, 0])


def test_gradient_vanishes_on_saturated_fit():
    net = Network(layer_sizes=[1, 1], weights=[np.array([[0.0, 1e4]])])
    data = LabeledMatrix(inputs=[[1.0]], targets=[[1.0]])
    (gradient,) = dnn.accumulate_gradients(net, data)
    assert np.linalg.norm(gradient) <= 1e-9


def test_train_separable_toy():
    net = dnn.init_weights([2, 4, 2], seed=0)
    trained, report = dnn.train(net, separable_data(), TrainConfig(iterations=150, learning_rate=0.3), name='toy')
    assert report.network == 'toy'
    assert len(report.records) == 150
    assert [r.iteration for r in report.records] == list(range(1, 151))
    assert report.final.train_ca == 100.0
    assert report.final.test_ca is None
    assert not np.array_equal(trained.weights[0], net.weights[0])


def test_small_step_cost_is_monotone():
    net = dnn.init_weights([4, 6, 3], seed=4)
    _, report = dnn.train(net, random_data(m=12, seed=4), TrainConfig(iterations=100, learning_rate=0.01))
    costs = report.costs
    assert all(later <= earlier + 1e-12 for earlier, later in zip(costs, costs[1:]))


def test_single_iteration_is_one_update():
    net = dnn.init_weights([4, 3, 3], seed=6)
    data = random_data()
    config = TrainConfig(iterations=1, learning_rate=0.3)
    trained, report = dnn.train(net, data, config)
    assert len(report.records) == 1
    gradients = dnn.accumulate_gradients(net, data)
    for before, after, gradient in zip(net.weights, trained.weights, gradients):
        np.testing.assert_allclose(after, before - 0.3 * gradient, rtol=1e-14, atol=1e-16)
    assert report.final.cost == pytest.approx(dnn.cost(trained, data))


def test_train_with_monitor_and_tolerance():
    data = separable_data()
    net = dnn.init_weights([2, 4, 2], seed=1)
    _, report = dnn.train(net, data, TrainConfig(iterations=500, learning_rate=0.3, tolerance=1e-3), monitor=data)
    assert len(report.records) < 500
    assert all(r.test_ca is not None for r in report.records)


def test_train_reports_divergence():
    net = Network(layer_sizes=[1, 2], weights=[np.array([[np.nan, 1.0], [0.0, 1.0]])])
    data = LabeledMatrix(inputs=[[1.0]], targets=[[1.0, 0.0]])
    with pytest.raises(DivergenceError) as exc:
        dnn.train(net, data, TrainConfig(iterations=3), name='master')
    assert exc.value.network == 'master'
    assert exc.value.iteration == 1
    assert exc.value.exit_code == 2


def test_predict():
    net = Network(layer_sizes=[1, 2], weights=[np.array([[0.0, 1.0], [0.0, 1.0]])])
    index, outputs = dnn.predict(net, np.array([0.3]))
    assert index == 0 and outputs[0] == outputs[1]
    net = Network(layer_sizes=[1, 2], weights=[np.array([[2.0, 0.0], [-1.5, 0.0]])])
    assert dnn.predict(net, np.array([0.0]))[0] == 0
    net = Network(layer_sizes=[1, 2], weights=[np.array([[-2.0, 0.0], [1.5, 0.0]])])
    assert dnn.predict(net, np.array([0.0]))[0] == 1


def test_network_serialised_form():
    net = dnn.init_weights([3, 4, 2], seed=8)
    data = net.model_dump(mode='json')
    assert list(data) == ['layer_sizes', 'init_seed', 'init_scheme', 'weights']
    assert data['init_scheme'] == dnn.INIT_SCHEME
    assert len(data['weights'][0]) == 4 and len(data['weights'][0][0]) == 4
    restored = Network.model_validate(data)
    assert restored.layer_sizes == [3, 4, 2] and restored.init_seed == 8
    for a, b in zip(net.weights, restored.weights):
        np.testing.assert_array_equal(a, b)


def test_network_rejects_misshapen_weights():
    with pytest.raises(ValidationError):
        Network(layer_sizes=[2, 3], weights=[np.zeros((3, 2))])
    with pytest.raises(ValidationError):
        Network(layer_sizes=[2, 3, 1], weights=[np.zeros((3, 3))])
    with pytest.raises(ValidationError):
        LabeledMatrix(inputs=[[0.0], [1.0]], targets=[[1.0, 0.0]])
    with pytest.raises(ValidationError):
        LabeledMatrix(inputs=[[0.0]], targets=[[1.0, 1.0]])


def test_training_leaves_initial_network_untouched():
    net = dnn.init_weights([4, 3, 3], seed=6)
    before = [theta.copy() for theta in net.weights]
    trained, _ = dnn.train(net, random_data(), TrainConfig(iterations=3))
    for original, theta in zip(before, net.weights):
        np.testing.assert_array_equal(original, theta)
    assert trained.init_seed == 6
