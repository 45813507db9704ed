"""Functional core of the collective variational autoencoder.

One inference network maps an ``n``-vector (a user's rating row or a
side-information column over the ``n`` items) to the mean and log-variance
of a ``k``-dimensional Gaussian; one generation network maps a latent
sample back to ``n`` logits. Rating rows are scored with a weighted
Bernoulli likelihood, feature columns with a weighted unit-variance Gaussian
likelihood, and the KL term is scaled by ``beta``.
"""
# License: BSD 3 clause
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .exceptions import CheckpointError, NumericalError, ShapeError
from .nn import (MlpParams, finite_diff_grad, mlp_backward, mlp_forward,
                 relative_error)
from .utils import check_rng

__all__ = ['ModelConfig', 'LatentGaussian', 'VaeParams', 'HEADS', 'encode',
           'reparameterize', 'decode', 'bernoulli_loglik', 'gaussian_loglik',
           'kl_standard_normal', 'elbo_batch', 'check_elbo_gradient',
           'predict_scores', 'latent_means', 'sample_prior',
           'save_checkpoint', 'load_checkpoint']

logger = logging.getLogger(__name__)

HEADS = ('bernoulli', 'gaussian')
CHECKPOINT_MAGIC = b'CVAE1'


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the model and its objective.

    Parameters
    ----------
    latent_dim : int
        Dimension ``k`` of the latent space.

    encoder_widths, decoder_widths : tuple of int
        Hidden layer widths of the inference and generation networks.

    alpha : float
        Weight (>= 1) of positive entries in both likelihoods.

    beta : float
        Weight (>= 0) of the KL term.

    n_mc_samples : int
        Monte-Carlo samples ``L`` of the latent code per datapoint.
    """

    latent_dim: int = 100
    encoder_widths: tuple = (1000,)
    decoder_widths: tuple = (1000,)
    alpha: float = 1.0
    beta: float = 1.0
    n_mc_samples: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'encoder_widths',
                           tuple(int(w) for w in self.encoder_widths))
        object.__setattr__(self, 'decoder_widths',
                           tuple(int(w) for w in self.decoder_widths))
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1, got {}"
                             .format(self.latent_dim))
        if any(w < 1 for w in self.encoder_widths + self.decoder_widths):
            raise ValueError("Hidden widths must be >= 1")
        if not self.alpha >= 1:
            raise ValueError("alpha must be >= 1, got {}".format(self.alpha))
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0, got {}".format(self.beta))
        if self.n_mc_samples < 1:
            raise ValueError("n_mc_samples must be >= 1, got {}"
                             .format(self.n_mc_samples))


@dataclass
class LatentGaussian:
    """Diagonal Gaussian ``N(mu, diag(sigma ** 2))``, one row per sample."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.shape != self.sigma.shape:
            raise ShapeError("mu {} and sigma {} differ in shape"
                             .format(self.mu.shape, self.sigma.shape))


class VaeParams:
    """Inference and generation networks shared by ratings and side info.

    Parameters
    ----------
    inference : MlpParams
        ``n -> encoder widths -> 2k``; the first ``k`` outputs are the mean,
        the last ``k`` the log-variance.

    generation : MlpParams
        ``k -> decoder widths -> n``.
    """

    def __init__(self, inference, generation):
        if not (isinstance(inference, MlpParams) and
                isinstance(generation, MlpParams)):
            raise TypeError("Both networks must be MlpParams")
        if inference.output_width % 2:
            raise ShapeError("Inference output width {} is not 2k"
                             .format(inference.output_width))
        k = inference.output_width // 2
        if generation.input_width != k:
            raise ShapeError("Generation network expects {} latent inputs, "
                             "inference network emits k={}"
                             .format(generation.input_width, k))
        if generation.output_width != inference.input_width:
            raise ShapeError("Networks disagree on the number of items: {} in,"
                             " {} out".format(inference.input_width,
                                              generation.output_width))
        self.inference = inference
        self.generation = generation

    @classmethod
    def initialize(cls, n_items, config, rng):
        """Fresh networks for ``n_items`` items drawn from ``rng``."""
        k = config.latent_dim
        inference = MlpParams.initialize(
            [n_items, *config.encoder_widths, 2 * k], rng)
        generation = MlpParams.initialize(
            [k, *config.decoder_widths, n_items], rng)
        return cls(inference, generation)

    @property
    def n_items(self):
        return self.inference.input_width

    @property
    def latent_dim(self):
        return self.generation.input_width

    def parameters(self):
        return self.inference.parameters() + self.generation.parameters()

    @property
    def n_parameters(self):
        return self.inference.n_parameters + self.generation.n_parameters

    def zeros_like(self):
        return VaeParams(self.inference.zeros_like(),
                         self.generation.zeros_like())

    def copy(self):
        return VaeParams(self.inference.copy(), self.generation.copy())

    def is_finite(self):
        return self.inference.is_finite() and self.generation.is_finite()

    def __eq__(self, other):
        if not isinstance(other, VaeParams):
            return NotImplemented
        return (self.inference == other.inference and
                self.generation == other.generation)

    def __repr__(self):
        return "VaeParams(inference={}, generation={})".format(
            self.inference.widths, self.generation.widths)


def _encode(params, x):
    hidden, out = mlp_forward(params.inference, x)
    if not np.all(np.isfinite(out)):
        raise NumericalError("Inference network produced non-finite values")
    k = params.latent_dim
    return hidden, out[..., :k], out[..., k:]


def encode(params, x):
    """Variational posterior of an input row (or batch of rows).

    ``mu`` is the mean head output and ``sigma = exp(0.5 * logvar)``.
    """
    _, mu, logvar = _encode(params, x)
    sigma = np.exp(0.5 * logvar)
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise NumericalError("Log-variance head out of range")
    return LatentGaussian(mu, sigma)


def reparameterize(lg, eps):
    """``z = mu + eps * sigma``."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape[-1] != lg.mu.shape[-1]:
        raise ShapeError("eps has {} dimensions, latent space has {}"
                         .format(eps.shape[-1], lg.mu.shape[-1]))
    return lg.mu + eps * lg.sigma


def decode(params, z):
    """Raw logits (Bernoulli head) / means (Gaussian head) of a latent code."""
    _, logits = mlp_forward(params.generation, z)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("Generation network produced non-finite values")
    return logits


def _loglik_terms(target, f, is_bernoulli, alpha):
    """Per-row log-likelihoods and their derivatives w.r.t. ``f``."""
    target = np.atleast_2d(target)
    f = np.atleast_2d(f)
    pos = target > 0.5
    is_bernoulli = np.asarray(is_bernoulli, dtype=bool).reshape(-1, 1)

    bern = np.where(pos, alpha * log_expit(f), log_expit(-f))
    d_bern = np.where(pos, alpha * expit(-f), -expit(f))
    gauss = np.where(pos, -0.5 * alpha * (1.0 - f) ** 2, -0.5 * f ** 2)
    d_gauss = np.where(pos, alpha * (1.0 - f), -f)

    terms = np.where(is_bernoulli, bern, gauss)
    grad = np.where(is_bernoulli, d_bern, d_gauss)
    return terms.sum(axis=1), grad


def bernoulli_loglik(y, logits, alpha=1.0):
    """Weighted logistic log-likelihood of binary ratings.

    ``alpha * sum_{y=1} log sigmoid(f) + sum_{y=0} log(1 - sigmoid(f))``,
    evaluated through ``log_expit`` so that large logits never overflow.

    Examples
    --------
    >>> round(bernoulli_loglik([1, 0], [0.0, 0.0], alpha=2), 6)
    -2.079442
    """
    rows, _ = _loglik_terms(np.asarray(y, dtype=np.float64),
                            np.asarray(logits, dtype=np.float64), True, alpha)
    return float(rows.sum())


def gaussian_loglik(x, f, alpha=1.0):
    """Weighted unit-variance Gaussian log-likelihood of binary features.

    ``-(alpha / 2) * sum_{x=1} (1 - f) ** 2 - (1 / 2) * sum_{x=0} f ** 2``.
    The ``-0.5 * log(2 * pi)`` normalizing constants are dropped.
    """
    rows, _ = _loglik_terms(np.asarray(x, dtype=np.float64),
                            np.asarray(f, dtype=np.float64), False, alpha)
    return float(rows.sum())


def kl_standard_normal(lg):
    """``KL(N(mu, diag sigma^2) || N(0, I))`` summed over all entries.

    Examples
    --------
    >>> kl_standard_normal(LatentGaussian([0.0, 0.0], [1.0, 1.0]))
    0.0
    """
    if np.any(lg.sigma <= 0):
        raise ValueError("sigma must be strictly positive")
    return float(0.5 * np.sum(lg.mu ** 2 + lg.sigma ** 2 - 1.0 -
                              2.0 * np.log(lg.sigma)))


def _resolve_heads(heads, n_rows):
    if isinstance(heads, str):
        heads = [heads] * n_rows
    heads = list(heads)
    if len(heads) != n_rows:
        raise ShapeError("Got {} heads for {} datapoints"
                         .format(len(heads), n_rows))
    unknown = set(heads) - set(HEADS)
    if unknown:
        raise ValueError("Unknown likelihood head(s) {}; expected one of {}"
                         .format(sorted(unknown), HEADS))
    return np.array([h == 'bernoulli' for h in heads])


def _draw_eps(eps_source, shape):
    if isinstance(eps_source, np.random.Generator):
        return eps_source.standard_normal(shape)
    eps = np.asarray(eps_source, dtype=np.float64)
    if eps.shape != shape:
        raise ShapeError("Expected eps of shape {}, got {}"
                         .format(shape, eps.shape))
    return eps


def elbo_batch(params, batch, heads, config, eps_source, compute_grad=True):
    """Monte-Carlo ELBO of a batch and its gradient.

    Parameters
    ----------
    params : VaeParams
        Current networks.

    batch : array-like, shape (n_samples, n_items)
        Rating rows and / or side-information columns.

    heads : {"bernoulli", "gaussian"} or sequence of those
        Likelihood of every datapoint (one string applies to all rows).

    config : ModelConfig
        Supplies ``alpha``, ``beta`` and ``n_mc_samples``.

    eps_source : numpy.random.Generator or array-like
        Either a generator standard-normal noise is drawn from, or frozen
        noise of shape (n_mc_samples, n_samples, latent_dim).

    compute_grad : bool, optional (default=True)
        Skip the backward pass when False (gradient returned as None).

    Returns
    -------
    value : float
        ``(1/L) sum_l sum_batch loglik - beta * sum_batch KL``.

    grads : VaeParams or None
        Gradient of ``value`` with respect to every parameter.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("Empty batch")
    if x.shape[1] != params.n_items:
        raise ShapeError("Batch rows have {} entries, model has {} items"
                         .format(x.shape[1], params.n_items))
    is_bernoulli = _resolve_heads(heads, x.shape[0])
    L, k = config.n_mc_samples, params.latent_dim
    eps = _draw_eps(eps_source, (L, x.shape[0], k))

    enc_hidden, mu, logvar = _encode(params, x)
    sigma = np.exp(0.5 * logvar)
    var = sigma ** 2

    value = 0.0
    d_mu = np.zeros_like(mu)
    d_logvar = np.zeros_like(logvar)
    grad_gen = params.generation.zeros_like() if compute_grad else None
    for l in range(L):
        z = mu + eps[l] * sigma
        dec_hidden, logits = mlp_forward(params.generation, z)
        if not np.all(np.isfinite(logits)):
            raise NumericalError("Generation network produced non-finite "
                                 "values")
        rows, d_logits = _loglik_terms(x, logits, is_bernoulli, config.alpha)
        value += rows.sum() / L
        if compute_grad:
            g = mlp_backward(params.generation, dec_hidden, d_logits / L)
            grad_gen += g
            d_mu += g.input_grad
            d_logvar += 0.5 * g.input_grad * eps[l] * sigma

    kl = -0.5 * np.sum(1.0 + logvar - mu ** 2 - var)
    value -= config.beta * kl
    if not np.isfinite(value):
        raise NumericalError("Non-finite ELBO")
    if not compute_grad:
        return float(value), None

    d_mu -= config.beta * mu
    d_logvar -= config.beta * 0.5 * (var - 1.0)
    grad_inf = mlp_backward(params.inference, enc_hidden,
                            np.hstack([d_mu, d_logvar]))
    return float(value), VaeParams(grad_inf, grad_gen)


def check_elbo_gradient(params, batch, heads, config, eps, h=1e-5,
                        corrupt=False):
    """Relative error between the analytic and the numeric ELBO gradient.

    ``eps`` must be frozen noise so that the objective is deterministic.
    ``corrupt=True`` adds one to the first analytic entry; a working check
    must then report a large error.
    """
    eps = np.asarray(eps, dtype=np.float64)
    _, analytic = elbo_batch(params, batch, heads, config, eps)
    if corrupt:
        analytic.parameters()[0].flat[0] += 1.0
    numeric = finite_diff_grad(
        lambda p: elbo_batch(p, batch, heads, config, eps,
                             compute_grad=False)[0], params, h=h)
    return relative_error(analytic, numeric)


def predict_scores(params, y_rows):
    """Ranking scores ``f_theta(mu(f_phi(y)))`` of training rating rows.

    No latent noise is drawn. Scores are logits; the sigmoid is monotone
    so it would not change any ranking.
    """
    return decode(params, latent_means(params, y_rows))


def latent_means(params, rows):
    """Posterior means: the user matrix ``U`` for rating rows, ``Z`` for
    feature columns."""
    _, mu, _ = _encode(params, rows)
    return mu


def sample_prior(params, n_users, random_state):
    """Draw rating rows from the generative model.

    ``u ~ N(0, I)`` then ``y ~ Bernoulli(sigmoid(f_theta(u)))``.
    """
    random_state = check_rng(random_state, 'synth')
    u = random_state.standard_normal((n_users, params.latent_dim))
    p = expit(decode(params, u))
    return (random_state.uniform(size=p.shape) < p).astype(np.float64)


def save_checkpoint(path, params, manifest=None):
    """Write ``params`` in the ``CVAE1`` format.

    The file starts with the magic line ``CVAE1``, then ``key = value``
    manifest lines closed by ``end``, then every parameter array as
    little-endian float64 in declaration order (inference network first,
    ``W`` before ``b`` for each layer).
    """
    header = {'n_items': params.n_items,
              'latent_dim': params.latent_dim,
              'inference_widths': ','.join(map(str, params.inference.widths)),
              'generation_widths': ','.join(map(str,
                                                params.generation.widths)),
              'hidden_activation': params.inference.hidden_activation}
    for key, value in (manifest or {}).items():
        if key in header or '\n' in str(value) or '=' in str(key):
            raise ValueError("Invalid manifest entry {!r}".format(key))
        header[key] = value

    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC + b'\n')
        for key, value in header.items():
            f.write('{} = {}\n'.format(key, value).encode('utf-8'))
        f.write(b'end\n')
        for array in params.parameters():
            f.write(np.ascontiguousarray(array, dtype='<f8').tobytes())


def _parse_widths(value):
    return [int(w) for w in value.split(',') if w]


def load_checkpoint(path):
    """Read a ``CVAE1`` file.

    Returns
    -------
    params : VaeParams

    manifest : dict of str
        Every manifest entry, values as written.
    """
    with open(path, 'rb') as f:
        if f.readline().rstrip(b'\n') != CHECKPOINT_MAGIC:
            raise CheckpointError("{} is not a CVAE1 checkpoint".format(path))
        manifest = {}
        while True:
            line = f.readline()
            if not line:
                raise CheckpointError("{}: truncated manifest".format(path))
            line = line.decode('utf-8').rstrip('\n')
            if line == 'end':
                break
            key, sep, value = line.partition(' = ')
            if not sep:
                raise CheckpointError("{}: bad manifest line {!r}"
                                      .format(path, line))
            manifest[key] = value
        payload = f.read()

    try:
        inf_widths = _parse_widths(manifest['inference_widths'])
        gen_widths = _parse_widths(manifest['generation_widths'])
        activation = manifest.get('hidden_activation', 'tanh')
    except KeyError as exc:
        raise CheckpointError("{}: manifest lacks {}".format(path, exc)) \
            from None

    data = np.frombuffer(payload, dtype='<f8')
    offset = 0
    networks = []
    for widths in (inf_widths, gen_widths):
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            for shape in ((fan_out, fan_in), (fan_out,)):
                size = int(np.prod(shape))
                if offset + size > data.size:
                    raise CheckpointError("{}: parameter data truncated"
                                          .format(path))
                chunk = data[offset:offset + size].astype(np.float64)
                offset += size
                (weights if len(shape) == 2 else biases).append(
                    chunk.reshape(shape))
        networks.append(MlpParams(weights, biases,
                                  hidden_activation=activation))
    if offset != data.size or len(payload) % 8:
        raise CheckpointError("{}: trailing bytes after parameters"
                              .format(path))
    return VaeParams(*networks), manifest
