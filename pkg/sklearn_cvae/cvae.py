"""Collective variational autoencoder for top-N recommendation.

Based on
--------
    A single inference / generation network pair trained first on the
    columns of a bag-of-words side-information matrix and then on the rows
    of an implicit-feedback rating matrix.

"""
# License: BSD 3 clause
import numbers
from abc import ABCMeta, abstractmethod

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .data import binarize, column_batches
from .evaluate import evaluate, top_n
from .exceptions import ShapeError
from .trainer import TrainConfig, fit_method
from .vae import latent_means, predict_scores, sample_prior

__all__ = ['BaseVAE', 'CVAE', 'FVAE', 'RVAE']

EMBEDDING_BATCH = 256


class BaseVAE(BaseEstimator, metaclass=ABCMeta):
    """Basic class for the variational autoencoder recommenders."""

    method = None

    @abstractmethod
    def __init__(self, latent_dim, encoder_widths, decoder_widths, alpha,
                 beta_pretrain, beta_refine, n_mc_samples, epochs_pretrain,
                 epochs_refine, batch_size, learning_rate, optimizer,
                 random_state, verbose):

        self.latent_dim = latent_dim
        self.encoder_widths = encoder_widths
        self.decoder_widths = decoder_widths
        self.alpha = alpha
        self.beta_pretrain = beta_pretrain
        self.beta_refine = beta_refine
        self.n_mc_samples = n_mc_samples
        self.epochs_pretrain = epochs_pretrain
        self.epochs_refine = epochs_refine
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.random_state = random_state
        self.verbose = verbose

    def _resolve_seed(self):
        if isinstance(self.random_state, numbers.Integral):
            return int(self.random_state)
        rng = check_random_state(self.random_state)
        return int(rng.randint(np.iinfo(np.int32).max))

    def _get_config(self, seed):
        """Validated :class:`TrainConfig` of the current parameters."""
        return TrainConfig(
            latent_dim=self.latent_dim,
            encoder_widths=tuple(self.encoder_widths),
            decoder_widths=tuple(self.decoder_widths),
            alpha=self.alpha, beta_pretrain=self.beta_pretrain,
            beta_refine=self.beta_refine, n_mc_samples=self.n_mc_samples,
            epochs_pretrain=self.epochs_pretrain,
            epochs_refine=self.epochs_refine, batch_size=self.batch_size,
            learning_rate=self.learning_rate, optimizer=self.optimizer,
            seed=seed)

    @staticmethod
    def _check_matrix(M, name):
        if M is None:
            return None
        M = check_array(M, accept_sparse='csr', dtype=np.float64)
        values = M.data if sp.issparse(M) else M
        if np.min(values, initial=0.0) < 0:
            raise ValueError("{} must be non-negative".format(name))
        return binarize(M)

    def _fit(self, Y, X):
        Y = self._check_matrix(Y, 'Y')
        X = self._check_matrix(X, 'X')
        self.seed_ = self._resolve_seed()
        self.params_, runs = fit_method(self.method, X, Y,
                                        self._get_config(self.seed_),
                                        verbose=self.verbose)
        self.runs_ = {run.phase: run for run in runs}
        self.n_items_ = self.params_.n_items
        if X is not None:
            self.feature_embedding_ = np.vstack([
                latent_means(self.params_, block)
                for block in column_batches(X, EMBEDDING_BATCH)])
        return self

    @abstractmethod
    def fit(self, Y, X=None):
        """Fit the model."""

    def _check_rows(self, Y):
        check_is_fitted(self, ['params_'])
        Y = check_array(Y, accept_sparse='csr', dtype=np.float64,
                        ensure_2d=True)
        if Y.shape[1] != self.n_items_:
            raise ShapeError("Model was fitted on {} items, got {}"
                             .format(self.n_items_, Y.shape[1]))
        return Y.toarray() if sp.issparse(Y) else Y

    def predict_scores(self, Y):
        """Item scores of users given their training ratings.

        Parameters
        ----------
        Y : array-like or sparse matrix, shape (n_users, n_items)
            Binary training ratings.

        Returns
        -------
        scores : ndarray, shape (n_users, n_items)
            Logits of the generation network at the posterior mean.
        """
        return predict_scores(self.params_, self._check_rows(Y))

    def transform(self, Y):
        """Latent user representations (posterior means), shape (n, k)."""
        return latent_means(self.params_, self._check_rows(Y))

    def recommend(self, Y, n_items=10):
        """Top ``n_items`` unrated items for every row of ``Y``.

        Returns
        -------
        items : list of ndarray
            Item indices, best first.
        """
        Y = self._check_rows(Y)
        scores = predict_scores(self.params_, Y)
        return [top_n(s, y > 0, n_items, user=u).items
                for u, (s, y) in enumerate(zip(scores, Y))]

    def sample(self, n_users, random_state=0):
        """Draw synthetic rating rows from the generative model."""
        check_is_fitted(self, ['params_'])
        return sample_prior(self.params_, n_users, random_state)

    def score(self, split, n_items=10):
        """Mean Rec@``n_items`` on the test positives of a split."""
        check_is_fitted(self, ['params_'])
        report = evaluate(self, split, [n_items], method=self.method)
        return report['rec', n_items]


class CVAE(BaseVAE):
    """Collective variational autoencoder.

    Pretrains the shared networks on the side-information columns with a
    Gaussian likelihood, then refines them on the users' rating rows with a
    Bernoulli likelihood.

    Parameters
    ----------
    latent_dim : int, optional (default=100)
        Dimension of the latent space.

    encoder_widths : tuple of int, optional (default=(1000,))
        Hidden layer widths of the inference network.

    decoder_widths : tuple of int, optional (default=(1000,))
        Hidden layer widths of the generation network.

    alpha : float, optional (default=2.0)
        Weight (>= 1) of the positive entries in both likelihoods.

    beta_pretrain : float, optional (default=0.1)
        Weight of the KL term while training on side information.

    beta_refine : float, optional (default=2.0)
        Weight of the KL term while training on ratings. A larger value keeps
        the rating posterior close to what side information taught.

    n_mc_samples : int, optional (default=1)
        Latent samples per datapoint in the ELBO estimate.

    epochs_pretrain, epochs_refine : int, optional (default=100)
        Passes over the feature columns and the rating rows.

    batch_size : int, optional (default=100)
        Datapoints per gradient step.

    learning_rate : float, optional (default=1e-3)
        Step size of the optimizer.

    optimizer : {"adam", "sgd"}, optional (default="adam")
        Gradient ascent rule.

    random_state : int, RandomState instance or None, optional (default=None)
        Seed of initialization, shuffling and latent noise. An int is used
        as the run seed; otherwise a seed is drawn from
        ``check_random_state(random_state)`` and stored in ``seed_``.

    verbose : boolean, optional (default=False)
        Log the objective of every epoch at INFO level.

    Attributes
    ----------
    params_ : VaeParams
        Trained networks.

    runs_ : dict
        ``phase -> TrainRun`` with the per-epoch objective.

    n_items_ : int
        Number of items seen during fit.

    seed_ : int
        Run seed actually used.

    feature_embedding_ : ndarray, shape (n_dims, latent_dim)
        Posterior means of the side-information columns.

    See Also
    --------
    FVAE
        The pretraining phase alone.
    RVAE
        The refinement phase alone.
    """

    method = 'cvae'

    def __init__(self, latent_dim=100, encoder_widths=(1000,),
                 decoder_widths=(1000,), alpha=2.0, beta_pretrain=0.1,
                 beta_refine=2.0, n_mc_samples=1, epochs_pretrain=100,
                 epochs_refine=100, batch_size=100, learning_rate=1e-3,
                 optimizer='adam', random_state=None, verbose=False):

        super().__init__(
            latent_dim=latent_dim, encoder_widths=encoder_widths,
            decoder_widths=decoder_widths, alpha=alpha,
            beta_pretrain=beta_pretrain, beta_refine=beta_refine,
            n_mc_samples=n_mc_samples, epochs_pretrain=epochs_pretrain,
            epochs_refine=epochs_refine, batch_size=batch_size,
            learning_rate=learning_rate, optimizer=optimizer,
            random_state=random_state, verbose=verbose)

    def fit(self, Y, X=None):
        """Fit the cVAE to ratings and side information.

        Parameters
        ----------
        Y : array-like or sparse matrix, shape (n_users, n_items)
            Binary training ratings.

        X : array-like or sparse matrix, shape (n_items, n_dims)
            Binary item features.

        Returns
        -------
        self : object
        """
        if X is None:
            raise ValueError("CVAE needs side information X")
        return self._fit(Y, X)


class FVAE(BaseVAE):
    """Variational autoencoder trained on side-information columns only.

    Same parameters as :class:`CVAE`; ``beta_refine`` and ``epochs_refine``
    are unused. Users are scored by encoding their rating rows with the
    network learnt from features.

    See Also
    --------
    CVAE
    """

    method = 'fvae'

    def __init__(self, latent_dim=100, encoder_widths=(1000,),
                 decoder_widths=(1000,), alpha=6.0, beta_pretrain=0.1,
                 beta_refine=0.0, n_mc_samples=1, epochs_pretrain=100,
                 epochs_refine=0, batch_size=100, learning_rate=1e-3,
                 optimizer='adam', random_state=None, verbose=False):

        super().__init__(
            latent_dim=latent_dim, encoder_widths=encoder_widths,
            decoder_widths=decoder_widths, alpha=alpha,
            beta_pretrain=beta_pretrain, beta_refine=beta_refine,
            n_mc_samples=n_mc_samples, epochs_pretrain=epochs_pretrain,
            epochs_refine=epochs_refine, batch_size=batch_size,
            learning_rate=learning_rate, optimizer=optimizer,
            random_state=random_state, verbose=verbose)

    def fit(self, Y, X=None):
        """Fit on the columns of ``X``; ``Y`` (or None) only fixes n_items."""
        if X is None:
            raise ValueError("FVAE needs side information X")
        if Y is not None and np.shape(Y)[1] != np.shape(X)[0]:
            raise ShapeError("Y has {} items, X has {}"
                             .format(np.shape(Y)[1], np.shape(X)[0]))
        return self._fit(None, X)


class RVAE(BaseVAE):
    """Variational autoencoder trained on rating rows only.

    Same parameters as :class:`CVAE` with a narrower default network
    (200 hidden units) that overfits less on sparse ratings;
    ``beta_pretrain`` and ``epochs_pretrain`` are unused.

    See Also
    --------
    CVAE
    """

    method = 'rvae'

    def __init__(self, latent_dim=100, encoder_widths=(200,),
                 decoder_widths=(200,), alpha=4.0, beta_pretrain=0.0,
                 beta_refine=0.1, n_mc_samples=1, epochs_pretrain=0,
                 epochs_refine=100, batch_size=100, learning_rate=1e-3,
                 optimizer='adam', random_state=None, verbose=False):

        super().__init__(
            latent_dim=latent_dim, encoder_widths=encoder_widths,
            decoder_widths=decoder_widths, alpha=alpha,
            beta_pretrain=beta_pretrain, beta_refine=beta_refine,
            n_mc_samples=n_mc_samples, epochs_pretrain=epochs_pretrain,
            epochs_refine=epochs_refine, batch_size=batch_size,
            learning_rate=learning_rate, optimizer=optimizer,
            random_state=random_state, verbose=verbose)

    def fit(self, Y, X=None):
        """Fit on the rating rows of ``Y``; ``X`` is ignored."""
        return self._fit(Y, None)
