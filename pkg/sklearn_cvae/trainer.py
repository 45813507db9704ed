"""Two-phase training of the collective variational autoencoder.

Phase one (``pretrain``) fits the shared networks to the side-information
columns with the Gaussian head; the result is the fVAE baseline. Phase two
(``refine``) continues on the users' rating rows with the Bernoulli head; a
refinement started from a fresh initialization is the rVAE baseline.
"""
# License: BSD 3 clause
import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .data import binarize
from .exceptions import NumericalError, ShapeError
from .nn import make_optimizer, optimizer_step
from .utils import PHASES, derive_rng
from .vae import ModelConfig, VaeParams, elbo_batch

__all__ = ['TrainConfig', 'TrainRun', 'METHODS', 'METHOD_DEFAULTS',
           'init_params', 'pretrain', 'refine', 'train_cvae', 'fit_method',
           'write_epoch_log']

logger = logging.getLogger(__name__)

METHODS = ('cvae', 'fvae', 'rvae')

# Network scales and the parameters selected on the Games data.
METHOD_DEFAULTS = {
    'cvae': dict(encoder_widths=(1000,), decoder_widths=(1000,), alpha=2.0,
                 beta_pretrain=0.1, beta_refine=2.0),
    'fvae': dict(encoder_widths=(1000,), decoder_widths=(1000,), alpha=6.0,
                 beta_pretrain=0.1),
    'rvae': dict(encoder_widths=(200,), decoder_widths=(200,), alpha=4.0,
                 beta_refine=0.1),
}


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on.

    The defaults follow the reference setup: one hidden layer of 1000 units
    on each side, ``k = 100``, batches of 100, one latent sample per
    datapoint. ``beta_pretrain`` is small and ``beta_refine`` larger, so that
    the rating phase stays close to the prior learnt from side information.
    """

    latent_dim: int = 100
    encoder_widths: tuple = (1000,)
    decoder_widths: tuple = (1000,)
    alpha: float = 1.0
    beta_pretrain: float = 0.1
    beta_refine: float = 2.0
    n_mc_samples: int = 1
    epochs_pretrain: int = 100
    epochs_refine: int = 100
    batch_size: int = 100
    learning_rate: float = 1e-3
    optimizer: str = 'adam'
    seed: int = 0

    def __post_init__(self):
        for name in ('encoder_widths', 'decoder_widths'):
            object.__setattr__(self, name,
                               tuple(int(w) for w in getattr(self, name)))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1, got {}"
                             .format(self.batch_size))
        if self.epochs_pretrain < 0 or self.epochs_refine < 0:
            raise ValueError("Epoch counts must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ('adam', 'sgd'):
            raise ValueError("optimizer must be 'adam' or 'sgd', got {!r}"
                             .format(self.optimizer))
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        # validates the model fields of both phases
        for phase in PHASES:
            self.model_config(phase)

    def model_config(self, phase):
        """:class:`ModelConfig` of ``phase`` ("pretrain" or "refine")."""
        beta = {'pretrain': self.beta_pretrain,
                'refine': self.beta_refine}[phase]
        return ModelConfig(latent_dim=self.latent_dim,
                           encoder_widths=self.encoder_widths,
                           decoder_widths=self.decoder_widths,
                           alpha=self.alpha, beta=beta,
                           n_mc_samples=self.n_mc_samples)

    @classmethod
    def for_method(cls, method, **overrides):
        """Configuration with the defaults of ``method`` and ``overrides``."""
        if method not in METHODS:
            raise ValueError("Unknown method {!r}; expected one of {}"
                             .format(method, METHODS))
        return cls(**{**METHOD_DEFAULTS[method], **overrides})

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class TrainRun:
    """Record of one training phase."""

    config: TrainConfig
    phase: str
    epoch_log: list = field(default_factory=list)

    @property
    def beta(self):
        return self.config.model_config(self.phase).beta

    @property
    def objectives(self):
        return np.array([obj for _, obj in self.epoch_log])


def init_params(n_items, config):
    """Seeded initialization shared by every method."""
    return VaeParams.initialize(n_items, config.model_config('pretrain'),
                                derive_rng(config.seed, 'init'))


def _run_phase(params, samples, head, config, phase, verbose):
    epochs = config.epochs_pretrain if phase == 'pretrain' \
        else config.epochs_refine
    run = TrainRun(config, phase)
    n_samples = samples.shape[0]
    if epochs and not n_samples:
        raise ValueError("No {} samples to train on".format(phase))

    model_config = config.model_config(phase)
    opt = make_optimizer(config.optimizer, config.learning_rate)
    eps_rng = derive_rng(config.seed, 'eps', PHASES[phase])
    level = logging.INFO if verbose else logging.DEBUG
    logger.log(level, "%s: %d samples, %d epochs, alpha=%g, beta=%g", phase,
               n_samples, epochs, model_config.alpha, model_config.beta)

    for epoch in range(1, epochs + 1):
        order = derive_rng(config.seed, 'shuffle', PHASES[phase],
                           epoch).permutation(n_samples)
        total = 0.0
        try:
            for start in range(0, n_samples, config.batch_size):
                idx = order[start:start + config.batch_size]
                batch = samples[idx].toarray()
                value, grads = elbo_batch(params, batch, head, model_config,
                                          eps_rng)
                for g in grads.parameters():
                    g /= len(idx)
                optimizer_step(opt, params, grads)
                total += value
        except NumericalError as exc:
            raise NumericalError("{} diverged at epoch {}: {}"
                                 .format(phase, epoch, exc)) from exc

        mean = total / n_samples
        if not np.isfinite(mean):
            raise NumericalError("{} diverged at epoch {}".format(phase,
                                                                  epoch))
        run.epoch_log.append((epoch, mean))
        logger.log(level, "%s epoch %d: mean ELBO %.6f", phase, epoch, mean)
    return params, run


def pretrain(X, config, verbose=False):
    """Fit fresh networks to the side-information columns of ``X``.

    Parameters
    ----------
    X : sparse matrix, shape (n_items, n_dims)
        Binary item features.

    config : TrainConfig
        Uses ``epochs_pretrain`` and ``beta_pretrain``.

    Returns
    -------
    params : VaeParams
        The fVAE model.

    run : TrainRun
    """
    X = binarize(X)
    params = init_params(X.shape[0], config)
    # one sample per feature: rows of X^T
    return _run_phase(params, X.T.tocsr(), 'gaussian', config, 'pretrain',
                      verbose)


def refine(params, Y_train, config, verbose=False):
    """Continue training on the users' rating rows.

    ``params=None`` starts from the seeded initialization, which yields the
    rVAE baseline. The given ``params`` are not modified.
    """
    Y_train = binarize(Y_train)
    if params is None:
        params = init_params(Y_train.shape[1], config)
    elif params.n_items != Y_train.shape[1]:
        raise ShapeError("Model has {} items, ratings have {}"
                         .format(params.n_items, Y_train.shape[1]))
    else:
        params = params.copy()
    return _run_phase(params, Y_train, 'bernoulli', config, 'refine',
                      verbose)


def fit_method(method, X, Y_train, config, verbose=False):
    """Train ``method`` ("cvae", "fvae" or "rvae").

    Returns
    -------
    params : VaeParams

    runs : list of TrainRun
        Phases actually run, in order.
    """
    if method not in METHODS:
        raise ValueError("Unknown method {!r}; expected one of {}"
                         .format(method, METHODS))
    runs = []
    params = None
    if method in ('cvae', 'fvae'):
        if X is None:
            raise ValueError("Method {} needs side information".format(method))
        if Y_train is not None and X.shape[0] != Y_train.shape[1]:
            raise ShapeError("X has {} item rows, Y has {} item columns"
                             .format(X.shape[0], Y_train.shape[1]))
        params, run = pretrain(X, config, verbose=verbose)
        runs.append(run)
    if method in ('cvae', 'rvae'):
        if Y_train is None:
            raise ValueError("Method {} needs ratings".format(method))
        params, run = refine(params, Y_train, config, verbose=verbose)
        runs.append(run)
    return params, runs


def train_cvae(X, Y_train, config, verbose=False):
    """Pretrain on ``X`` then refine on ``Y_train``."""
    params, _ = fit_method('cvae', X, Y_train, config, verbose=verbose)
    return params


def write_epoch_log(path, run):
    """``epoch<TAB>objective`` lines, preceded by a ``#`` line naming the
    phase and its beta."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('# phase={} alpha={!r} beta={!r}\n'.format(
            run.phase, run.config.alpha, run.beta))
        for epoch, objective in run.epoch_log:
            f.write('{}\t{!r}\n'.format(epoch, float(objective)))
