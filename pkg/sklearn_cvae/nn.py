"""Dense multilayer perceptrons with hand-written backpropagation.

Both networks of the variational autoencoder are instances of
:class:`MlpParams`: hidden layers apply ``tanh`` and the last layer is
affine. Gradients are computed by :func:`mlp_backward` and checked against
:func:`finite_diff_grad`. :func:`optimizer_step` performs gradient *ascent*
since the training objective (the ELBO) is maximized.
"""
# License: BSD 3 clause
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalError, ShapeError

__all__ = ['MlpParams', 'GradientBuffer', 'OptimizerState', 'mlp_forward',
           'mlp_backward', 'finite_diff_grad', 'make_optimizer',
           'optimizer_step', 'relative_error']

ACTIVATIONS = ('tanh',)


class MlpParams:
    """Weights and biases of a multilayer perceptron.

    Parameters
    ----------
    weights : list of ndarray
        ``weights[i]`` has shape (out_i, in_i). Consecutive layers must chain,
        i.e. ``weights[i + 1].shape[1] == weights[i].shape[0]``.

    biases : list of ndarray
        ``biases[i]`` has shape (out_i,).

    hidden_activation : {"tanh"}, optional (default="tanh")
        Non-linearity applied after every layer but the last.
    """

    def __init__(self, weights, biases, hidden_activation='tanh'):
        if hidden_activation not in ACTIVATIONS:
            raise ValueError("Unknown hidden activation {!r}; expected one "
                             "of {}".format(hidden_activation, ACTIVATIONS))
        if len(weights) == 0 or len(weights) != len(biases):
            raise ShapeError("Need one bias per weight matrix and at least "
                             "one layer, got {} weights and {} biases"
                             .format(len(weights), len(biases)))

        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.hidden_activation = hidden_activation

        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError("Layer {}: weight {} and bias {} are not "
                                 "congruent".format(i, w.shape, b.shape))
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError("Layer {} expects {} inputs but layer {} "
                                 "emits {}".format(
                                     i, w.shape[1], i - 1,
                                     self.weights[i - 1].shape[0]))

    @classmethod
    def initialize(cls, widths, rng, hidden_activation='tanh'):
        """Draw a network with layer widths ``widths[0] -> ... -> widths[-1]``.

        Entries are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
        """
        if len(widths) < 2:
            raise ValueError("Need at least an input and an output width")
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, hidden_activation=hidden_activation)

    @property
    def widths(self):
        """Layer widths, input first."""
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_width(self):
        return self.weights[0].shape[1]

    @property
    def output_width(self):
        return self.weights[-1].shape[0]

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        """Every parameter array in order W0, b0, W1, b1, ..."""
        arrays = []
        for w, b in zip(self.weights, self.biases):
            arrays.extend((w, b))
        return arrays

    @property
    def n_parameters(self):
        return sum(a.size for a in self.parameters())

    def copy(self):
        return type(self)([w.copy() for w in self.weights],
                          [b.copy() for b in self.biases],
                          hidden_activation=self.hidden_activation)

    def zeros_like(self):
        """A :class:`GradientBuffer` of zeros congruent with this network."""
        return GradientBuffer([np.zeros_like(w) for w in self.weights],
                              [np.zeros_like(b) for b in self.biases],
                              hidden_activation=self.hidden_activation)

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.parameters())

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        mine, theirs = self.parameters(), other.parameters()
        return (len(mine) == len(theirs) and
                all(a.shape == b.shape and np.array_equal(a, b)
                    for a, b in zip(mine, theirs)))

    def __repr__(self):
        return "{}(widths={})".format(type(self).__name__, self.widths)


class GradientBuffer(MlpParams):
    """Partial derivatives congruent with an :class:`MlpParams`.

    ``input_grad`` holds the derivative with respect to the network input
    when the buffer comes from :func:`mlp_backward`.
    """

    input_grad = None

    def __iadd__(self, other):
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine += theirs
        return self

    def scale(self, factor):
        for a in self.parameters():
            a *= factor
        return self


def _check_input(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.input_width:
        raise ShapeError("Network expects inputs of width {}, got shape {}"
                         .format(params.input_width, x.shape))
    return x


def mlp_forward(params, x):
    """Run the network forward.

    Parameters
    ----------
    params : MlpParams
        Network to evaluate.

    x : array-like, shape (in_width,) or (n_samples, in_width)
        Input vector or batch of input rows.

    Returns
    -------
    hidden : list of ndarray
        Cached layer inputs, ``hidden[0]`` is ``x`` and ``hidden[i]`` the
        tanh activation feeding layer ``i``. Pass it to :func:`mlp_backward`.

    output : ndarray, shape (out_width,) or (n_samples, out_width)
        Affine output of the last layer.
    """
    x = _check_input(params, x)
    hidden = [x]
    a = x
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w.T + b
        if i < last:
            a = np.tanh(a)
            hidden.append(a)
    return hidden, a


def mlp_backward(params, hidden, output_grad):
    """Backpropagate ``output_grad`` through the network.

    Parameters
    ----------
    params : MlpParams
        Network used in the matching :func:`mlp_forward` call.

    hidden : list of ndarray
        Activations cached by :func:`mlp_forward`.

    output_grad : array-like
        Derivative of the loss with respect to the network output, same
        shape as the forward output.

    Returns
    -------
    grads : GradientBuffer
        Derivatives for every weight and bias, summed over the batch, with
        the derivative with respect to the input in ``grads.input_grad``.
    """
    if len(hidden) != params.n_layers:
        raise ShapeError("Expected {} cached activations, got {}"
                         .format(params.n_layers, len(hidden)))
    output_grad = np.asarray(output_grad, dtype=np.float64)
    single = output_grad.ndim == 1
    delta = np.atleast_2d(output_grad)
    if delta.shape[1] != params.output_width or \
            delta.shape[0] != np.atleast_2d(hidden[0]).shape[0]:
        raise ShapeError("Output gradient of shape {} does not match the "
                         "forward pass".format(output_grad.shape))

    grads = params.zeros_like()
    for i in range(params.n_layers - 1, -1, -1):
        a_in = np.atleast_2d(hidden[i])
        grads.weights[i] = delta.T @ a_in
        grads.biases[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            # tanh'(a) = 1 - tanh(a)^2
            delta = delta * (1.0 - a_in ** 2)

    grads.input_grad = delta[0] if single else delta
    return grads


def _parameter_arrays(params):
    if isinstance(params, np.ndarray):
        return [params]
    return params.parameters()


def finite_diff_grad(loss_fn, params, h=1e-5):
    """Central finite-difference gradient of ``loss_fn`` at ``params``.

    Each scalar parameter is perturbed in place by ``+h`` and ``-h`` and
    restored afterwards, so ``loss_fn`` must read its parameters from the
    object it receives.

    Parameters
    ----------
    loss_fn : callable
        ``loss_fn(params) -> float``, deterministic.

    params : ndarray or object with ``parameters()`` and ``zeros_like()``
        Point of evaluation (:class:`MlpParams`, ``VaeParams``, or a plain
        array).

    h : float, optional (default=1e-5)
        Step size.

    Returns
    -------
    grads : same type as ``params.zeros_like()`` (or ndarray)

    Examples
    --------
    >>> import numpy as np
    >>> g = finite_diff_grad(lambda p: float(p[0] ** 2), np.array([3.0]))
    >>> bool(abs(g[0] - 6.0) < 1e-8)
    True
    """
    if h <= 0:
        raise ValueError("Step h must be positive, got {}".format(h))

    if isinstance(params, np.ndarray):
        grads = np.zeros_like(params, dtype=np.float64)
    else:
        grads = params.zeros_like()

    for p, g in zip(_parameter_arrays(params), _parameter_arrays(grads)):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = loss_fn(params)
            p[idx] = orig - h
            down = loss_fn(params)
            p[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericalError("Non-finite loss while perturbing "
                                     "parameter at {}".format(idx))
            g[idx] = (up - down) / (2.0 * h)
    return grads


def relative_error(analytic, numeric, floor=1e-8):
    """Largest absolute discrepancy scaled by the largest gradient magnitude.

    Computed as ``max|a - b| / max(max|a|, max|b|, floor)`` over all
    parameters at once.
    """
    a = np.concatenate([x.ravel() for x in _parameter_arrays(analytic)])
    b = np.concatenate([x.ravel() for x in _parameter_arrays(numeric)])
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0),
                floor)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


@dataclass
class OptimizerState:
    """State of a first-order optimizer.

    Gradients handed to :func:`optimizer_step` are gradients of an objective
    to *maximize*; the update moves parameters along them.
    """

    algorithm: str = 'adam'
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.algorithm not in ('adam', 'sgd'):
            raise ValueError("Unknown optimizer {!r}; expected 'adam' or "
                             "'sgd'".format(self.algorithm))
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive, got {}"
                             .format(self.learning_rate))


def make_optimizer(algorithm='adam', learning_rate=1e-3):
    return OptimizerState(algorithm=algorithm, learning_rate=learning_rate)


def optimizer_step(state, params, grads):
    """Apply one ascent step to ``params`` in place and return them.

    Adam is implemented on the negated gradient (descent on ``-objective``),
    which is the same as ascent on the objective.

    Raises
    ------
    NumericalError
        If any gradient entry is NaN or infinite; ``params`` and ``state``
        are left untouched.
    """
    p_arrays = _parameter_arrays(params)
    g_arrays = _parameter_arrays(grads)
    if len(p_arrays) != len(g_arrays) or any(
            p.shape != g.shape for p, g in zip(p_arrays, g_arrays)):
        raise ShapeError("Gradients are not congruent with parameters")
    if not all(np.all(np.isfinite(g)) for g in g_arrays):
        raise NumericalError("Non-finite gradient, step refused")

    state.step += 1
    if state.algorithm == 'sgd':
        for p, g in zip(p_arrays, g_arrays):
            p += state.learning_rate * g
        return params

    if not state.m:
        state.m = [np.zeros_like(p) for p in p_arrays]
        state.v = [np.zeros_like(p) for p in p_arrays]

    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    step_size = state.learning_rate / bc1
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        descent = -g
        m *= state.beta1
        m += (1.0 - state.beta1) * descent
        v *= state.beta2
        v += (1.0 - state.beta2) * (descent * descent)
        p -= step_size * m / (np.sqrt(v / bc2) + state.epsilon)
    return params
