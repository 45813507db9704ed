import numpy as np
import numpy.testing as npt
import pytest

from sklearn_cvae.exceptions import NumericalError, ShapeError
from sklearn_cvae.nn import (MlpParams, OptimizerState, finite_diff_grad,
                             make_optimizer, mlp_backward, mlp_forward,
                             optimizer_step, relative_error)


def _random_net(seed, n_layers=None):
    rng = np.random.default_rng(seed)
    depth = n_layers if n_layers is not None else rng.integers(1, 4)
    widths = list(rng.integers(1, 9, size=depth + 1))
    params = MlpParams.initialize(widths, rng)
    for b in params.biases:
        b += rng.normal(scale=0.1, size=b.shape)
    return params, rng


def test_forward_identity():
    params = MlpParams([np.eye(2)], [np.zeros(2)])
    _, out = mlp_forward(params, [0.3, -0.2])
    npt.assert_array_equal(out, [0.3, -0.2])


def test_forward_zero_weight():
    params = MlpParams([np.zeros((2, 3))], [np.array([1.0, 2.0])])
    _, out = mlp_forward(params, [5.0, -1.0, 0.5])
    npt.assert_array_equal(out, [1.0, 2.0])


def test_forward_two_layers_by_hand():
    params = MlpParams.initialize([2, 3, 2], np.random.default_rng(42))
    x = np.array([1.0, 0.0])
    hidden, out = mlp_forward(params, x)
    W0, W1 = params.weights
    b0, b1 = params.biases
    expected = W1 @ np.tanh(W0 @ x + b0) + b1
    npt.assert_allclose(out, expected, rtol=1e-14)
    assert len(hidden) == 2
    npt.assert_array_equal(hidden[0], x)


def test_forward_batch_matches_rows():
    params, rng = _random_net(3, n_layers=2)
    x = rng.uniform(size=(4, params.input_width))
    _, batch_out = mlp_forward(params, x)
    for row, expected in zip(x, batch_out):
        npt.assert_allclose(mlp_forward(params, row)[1], expected,
                            rtol=1e-12)


def test_forward_shape_error():
    params = MlpParams([np.eye(2)], [np.zeros(2)])
    with pytest.raises(ShapeError):
        mlp_forward(params, [1.0, 2.0, 3.0])


def test_layers_must_chain():
    with pytest.raises(ShapeError):
        MlpParams([np.zeros((3, 2)), np.zeros((2, 4))],
                  [np.zeros(3), np.zeros(2)])
    with pytest.raises(ShapeError):
        MlpParams([np.zeros((3, 2))], [np.zeros(2)])
    with pytest.raises(ValueError):
        MlpParams([np.zeros((3, 2))], [np.zeros(3)],
                  hidden_activation='relu')


def test_widths_and_parameters():
    params = MlpParams.initialize([5, 4, 3], np.random.default_rng(0))
    assert params.widths == [5, 4, 3]
    assert params.n_layers == 2
    assert params.n_parameters == 5 * 4 + 4 + 4 * 3 + 3
    assert [a.shape for a in params.parameters()] == [(4, 5), (4,), (3, 4),
                                                      (3,)]
    bound = 1.0 / np.sqrt(5)
    assert np.all(np.abs(params.weights[0]) <= bound)
    npt.assert_array_equal(params.biases[0], 0.0)


def test_copy_is_independent():
    params, _ = _random_net(1)
    clone = params.copy()
    assert clone == params
    clone.weights[0][0, 0] += 1.0
    assert clone != params


def test_backward_zero_cotangent():
    params, rng = _random_net(5, n_layers=2)
    x = rng.uniform(size=(3, params.input_width))
    hidden, out = mlp_forward(params, x)
    grads = mlp_backward(params, hidden, np.zeros_like(out))
    for g in grads.parameters():
        npt.assert_array_equal(g, 0.0)
    npt.assert_array_equal(grads.input_grad, 0.0)


def test_backward_single_affine_layer():
    rng = np.random.default_rng(0)
    W = rng.normal(size=(3, 4))
    params = MlpParams([W], [np.zeros(3)])
    x = rng.normal(size=4)
    c = np.array([1.0, -2.0, 0.5])
    hidden, _ = mlp_forward(params, x)
    grads = mlp_backward(params, hidden, c)
    npt.assert_allclose(grads.weights[0], np.outer(c, x), rtol=1e-14)
    npt.assert_allclose(grads.biases[0], c)
    npt.assert_allclose(grads.input_grad, W.T @ c, rtol=1e-14)


def test_backward_shape_error():
    params, rng = _random_net(2, n_layers=1)
    hidden, out = mlp_forward(params, rng.uniform(size=params.input_width))
    with pytest.raises(ShapeError):
        mlp_backward(params, hidden, np.zeros(out.size + 1))


@pytest.mark.parametrize('seed', range(20))
def test_backward_matches_finite_differences(seed):
    params, rng = _random_net(seed)
    x = rng.uniform(-1, 1, size=(3, params.input_width))
    c = rng.normal(size=(3, params.output_width))

    def loss(p):
        return float(np.sum(mlp_forward(p, x)[1] * c))

    hidden, _ = mlp_forward(params, x)
    analytic = mlp_backward(params, hidden, c)
    numeric = finite_diff_grad(loss, params)
    assert relative_error(analytic, numeric) <= 1e-5


def test_backward_is_linear():
    params, rng = _random_net(11, n_layers=3)
    x = rng.uniform(size=(2, params.input_width))
    hidden, out = mlp_forward(params, x)
    g1, g2 = rng.normal(size=out.shape), rng.normal(size=out.shape)
    a, b = 0.7, -1.3
    combined = mlp_backward(params, hidden, a * g1 + b * g2)
    first = mlp_backward(params, hidden, g1)
    second = mlp_backward(params, hidden, g2)
    for c, p, q in zip(combined.parameters(), first.parameters(),
                       second.parameters()):
        npt.assert_allclose(c, a * p + b * q, rtol=1e-12, atol=1e-12)


def test_determinism():
    first, rng1 = _random_net(9)
    second, rng2 = _random_net(9)
    x = rng1.uniform(size=first.input_width)
    npt.assert_array_equal(x, rng2.uniform(size=second.input_width))
    h1, out1 = mlp_forward(first, x)
    h2, out2 = mlp_forward(second, x)
    npt.assert_array_equal(out1, out2)
    g1 = mlp_backward(first, h1, np.ones_like(out1))
    g2 = mlp_backward(second, h2, np.ones_like(out2))
    assert g1 == g2


def test_finite_diff_quadratic_and_constant():
    g = finite_diff_grad(lambda p: float(p[0] ** 2), np.array([3.0]))
    assert abs(g[0] - 6.0) < 1e-8
    g = finite_diff_grad(lambda p: 4.0, np.array([1.0, -2.0]))
    npt.assert_array_equal(g, 0.0)


def test_finite_diff_restores_parameters():
    p = np.array([[1.0, 2.0], [3.0, 4.0]])
    finite_diff_grad(lambda q: float(np.sum(q ** 3)), p)
    npt.assert_array_equal(p, [[1.0, 2.0], [3.0, 4.0]])


def test_finite_diff_errors():
    with pytest.raises(NumericalError):
        finite_diff_grad(lambda p: float('nan'), np.array([1.0]))
    with pytest.raises(ValueError):
        finite_diff_grad(lambda p: 0.0, np.array([1.0]), h=0.0)


def test_relative_error():
    a = np.array([1.0, -2.0])
    assert relative_error(a, a.copy()) == 0.0
    assert relative_error(a, np.array([1.0, -1.0])) == pytest.approx(0.5)
    assert relative_error(np.zeros(2), np.zeros(2)) == 0.0


@pytest.mark.parametrize('algorithm', ['adam', 'sgd'])
def test_zero_gradient_leaves_parameters(algorithm):
    p = np.array([1.0, -3.0])
    optimizer_step(make_optimizer(algorithm, 0.1), p, np.zeros(2))
    npt.assert_array_equal(p, [1.0, -3.0])


def test_sgd_ascent_step():
    p = np.array([1.0])
    optimizer_step(make_optimizer('sgd', 0.1), p, np.array([2.0]))
    npt.assert_allclose(p, [1.2])


def test_adam_first_step_magnitude():
    lr = 1e-3
    g = np.array([1e-3, 1.0, -100.0])
    p = np.zeros(3)
    state = make_optimizer('adam', lr)
    optimizer_step(state, p, g)
    npt.assert_allclose(p, lr * np.sign(g), rtol=1e-4)
    assert state.step == 1


def test_adam_state_tracks_network():
    params, _ = _random_net(4, n_layers=2)
    grads = params.zeros_like()
    for g in grads.parameters():
        g += 1.0
    before = params.copy()
    state = make_optimizer()
    optimizer_step(state, params, grads)
    optimizer_step(state, params, grads)
    assert state.step == 2
    assert [m.shape for m in state.m] == [a.shape for a in params.parameters()]
    for new, old in zip(params.parameters(), before.parameters()):
        assert np.all(new > old)


def test_nan_gradient_refused():
    p = np.array([1.0, 2.0])
    state = make_optimizer('adam')
    with pytest.raises(NumericalError):
        optimizer_step(state, p, np.array([np.nan, 0.0]))
    npt.assert_array_equal(p, [1.0, 2.0])
    assert state.step == 0


def test_optimizer_shape_and_config_errors():
    with pytest.raises(ShapeError):
        optimizer_step(make_optimizer(), np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        OptimizerState(algorithm='rmsprop')
    with pytest.raises(ValueError):
        make_optimizer('sgd', learning_rate=0.0)
