"""Synthetic cluster-structured ratings and side information.

Users, items and feature dimensions are assigned round-robin to ``c``
clusters. A user rates an item of its own cluster with probability ``rho``
and any other item with probability ``noise * rho``; an item carries a
feature of its own cluster with probability ``feature_density`` and any other
with ``noise * feature_density``. Side information is therefore predictive of
preferences.
"""
# License: BSD 3 clause
import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .data import SplitDataset, binarize, split_per_user, subsample_train
from .evaluate import evaluate
from .exceptions import EmptyDatasetError
from .trainer import fit_method
from .utils import derive_rng

__all__ = ['SynthSpec', 'SyntheticData', 'generate', 'oracle_recall',
           'make_split', 'benchmark']

logger = logging.getLogger(__name__)

MAX_ROW_RETRIES = 10


@dataclass(frozen=True)
class SynthSpec:
    """Shape and noise of a synthetic dataset."""

    n_users: int = 300
    n_items: int = 200
    n_dims: int = 400
    n_clusters: int = 4
    density: float = 0.3
    feature_density: float = 0.2
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.n_users, self.n_items, self.n_dims) < self.n_clusters or \
                self.n_clusters < 1:
            raise ValueError("Need 1 <= n_clusters <= min(n_users, n_items, "
                             "n_dims)")
        if not 0 < self.density < 1 or not 0 < self.feature_density < 1:
            raise ValueError("Densities must lie in (0, 1)")
        if not 0 <= self.noise < 0.5:
            raise ValueError("noise must lie in [0, 0.5), got {}"
                             .format(self.noise))

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class SyntheticData:
    X: object
    Y: object
    user_clusters: np.ndarray
    item_clusters: np.ndarray
    dim_clusters: np.ndarray
    spec: SynthSpec


def _block_probabilities(row_clusters, col_clusters, p, noise):
    same = row_clusters[:, None] == col_clusters[None, :]
    return np.where(same, p, noise * p)


def generate(spec):
    """Draw ``(X, Y)`` with their cluster assignments.

    Raises
    ------
    EmptyDatasetError
        If some user has no positive after 10 redraws of its row.
    """
    rng = derive_rng(spec.seed, 'synth')
    c = spec.n_clusters
    user_clusters = np.arange(spec.n_users) % c
    item_clusters = np.arange(spec.n_items) % c
    dim_clusters = np.arange(spec.n_dims) % c

    p_y = _block_probabilities(user_clusters, item_clusters, spec.density,
                               spec.noise)
    Y = rng.uniform(size=p_y.shape) < p_y
    redrawn = 0
    for u in np.flatnonzero(~Y.any(axis=1)):
        for _ in range(MAX_ROW_RETRIES):
            Y[u] = rng.uniform(size=spec.n_items) < p_y[u]
            redrawn += 1
            if Y[u].any():
                break
        else:
            raise EmptyDatasetError("User {} has no positive after {} draws; "
                                    "increase density".format(
                                        u, MAX_ROW_RETRIES))
    if redrawn:
        warnings.warn("Redrew {} empty user rows".format(redrawn))

    p_x = _block_probabilities(item_clusters, dim_clusters,
                               spec.feature_density, spec.noise)
    X = rng.uniform(size=p_x.shape) < p_x
    return SyntheticData(binarize(X), binarize(Y), user_clusters,
                         item_clusters, dim_clusters, spec)


def oracle_recall(data, split, n):
    """Expected Rec@``n`` on the test part of a cluster-aware oracle.

    The oracle ranks the unrated items of the user's cluster first and the
    remaining ones after, in random order within each group. With
    ``noise = 0`` no recommender can beat it.
    """
    train, test = split.train, split.test
    recalls = []
    for u in range(train.shape[0]):
        relevant = test.indices[test.indptr[u]:test.indptr[u + 1]]
        if relevant.size == 0:
            continue
        candidate = np.ones(train.shape[1], dtype=bool)
        candidate[train.indices[train.indptr[u]:train.indptr[u + 1]]] = False
        in_cluster = data.item_clusters == data.user_clusters[u]
        p = np.count_nonzero(candidate & in_cluster)
        q = np.count_nonzero(candidate & ~in_cluster)
        hit_in = min(n, p) / p if p else 0.0
        hit_out = max(0, n - p) / q if q else 0.0
        hit_out = min(hit_out, 1.0)
        inside = np.count_nonzero(in_cluster[relevant])
        recalls.append((inside * hit_in + (relevant.size - inside) * hit_out)
                       / relevant.size)
    if not recalls:
        raise EmptyDatasetError("No user has a test positive")
    return float(np.mean(recalls))


def make_split(data, seed, train_per_user=None):
    """Per-user split, optionally keeping ``train_per_user`` positives."""
    split = split_per_user(data.Y, derive_rng(seed, 'split'))
    if train_per_user:
        train = subsample_train(split.train, train_per_user,
                                derive_rng(seed, 'subsample'))
        split = SplitDataset(train, split.valid, split.test, seed=seed)
    return split


def _benchmark_seed(spec, configs, seed, train_per_user, cutoff):
    data = generate(spec.replace(seed=seed))
    split = make_split(data, seed, train_per_user)
    row = {'seed': seed, 'oracle': oracle_recall(data, split, cutoff)}
    for method, config in configs.items():
        params, _ = fit_method(method, data.X, split.train,
                               config.replace(seed=seed))
        row[method] = evaluate(params, split, [cutoff],
                               method=method)['rec', cutoff]
        logger.info("seed %d %s: Rec@%d=%.4f (oracle %.4f)", seed, method,
                    cutoff, row[method], row['oracle'])
    return row


def benchmark(spec, configs, seeds, train_per_user=3, cutoff=10, n_jobs=1):
    """Test Rec@``cutoff`` of every method over several synthetic draws.

    Parameters
    ----------
    spec : SynthSpec
        Dataset shape; its seed is replaced by each of ``seeds``.

    configs : dict
        ``method -> TrainConfig``.

    seeds : iterable of int
        One dataset, split and training seed per run.

    train_per_user : int or None, optional (default=3)
        Sparsify training ratings to this many positives per user.

    n_jobs : int, optional (default=1)
        Seeds run in parallel with joblib; results do not depend on it.

    Returns
    -------
    rows : list of dict
        One dict per seed with the oracle ceiling and each method's recall.
    """
    return Parallel(n_jobs=n_jobs)(
        delayed(_benchmark_seed)(spec, configs, seed, train_per_user, cutoff)
        for seed in seeds)
