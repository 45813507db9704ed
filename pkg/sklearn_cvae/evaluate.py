"""Top-N recommendation lists and ranking metrics.

For every user the items rated in training are masked out, the remaining
items are ranked by decreasing score (ties by increasing item index) and the
first ``N`` are recommended. Lists are evaluated against the held-out
positives with precision, recall and average precision at ``N``; MAP@N is
the mean AP@N over users that have at least one held-out positive.
"""
# License: BSD 3 clause
import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import EmptyReportError, ShapeError
from .trainer import fit_method
from .vae import VaeParams, predict_scores

__all__ = ['RankedList', 'EvalReport', 'METRICS', 'top_n',
           'precision_recall_at_n', 'ap_at_n', 'evaluate', 'recall_curve',
           'select_parameters', 'write_report', 'write_detail']

logger = logging.getLogger(__name__)

METRICS = ('rec', 'pre', 'map')
DEFAULT_CUTOFFS = (5, 10, 15, 20)
SELECTION_CUTOFF = 10


@dataclass
class RankedList:
    """Top-N items of one user, best first, with their scores."""

    user: object
    items: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.items)


def top_n(scores, train_mask, n, user=None):
    """Rank the items a user has not rated in training.

    Parameters
    ----------
    scores : array-like, shape (n_items,)
        Predicted scores.

    train_mask : array-like of bool, shape (n_items,), or iterable of int
        Training positives of the user, as a mask or as item indices.

    n : int
        Cutoff ``N``.

    Returns
    -------
    ranked : RankedList
        ``min(n, n_items - n_train)`` items.

    Examples
    --------
    >>> top_n([0.9, 0.1, 0.5], {0}, 2).items.tolist()
    [2, 1]
    """
    if n < 1:
        raise ValueError("N must be >= 1, got {}".format(n))
    scores = np.asarray(scores, dtype=np.float64).ravel()
    n_items = scores.shape[0]
    mask = np.asarray(train_mask)
    if mask.dtype != bool or mask.shape != (n_items,):
        mask = np.zeros(n_items, dtype=bool)
        mask[np.fromiter(train_mask, dtype=np.int64)] = True

    candidates = np.flatnonzero(~mask)
    # lexsort: last key is primary
    order = np.lexsort((candidates, -scores[candidates]))[:n]
    items = candidates[order]
    return RankedList(user, items, scores[items])


def _ranked_metrics(items, relevant, cutoffs):
    """``{N: (pre, rec, ap)}`` for one ranked list, or None if no relevant."""
    relevant = np.fromiter(relevant, dtype=np.int64)
    if relevant.size == 0:
        return None
    items = np.asarray(items, dtype=np.int64)
    rel = np.isin(items, relevant).astype(np.float64)
    hits = np.cumsum(rel)
    precision_at_k = hits / np.arange(1, len(items) + 1)
    ap_sum = np.cumsum(precision_at_k * rel)

    out = {}
    for n in cutoffs:
        m = min(n, len(items))
        h = hits[m - 1] if m else 0.0
        ap = ap_sum[m - 1] if m else 0.0
        out[n] = (h / n, h / relevant.size, ap / min(n, relevant.size))
    return out


def precision_recall_at_n(ranked, relevant, n=None):
    """Precision and recall of a top-N list.

    ``pre = hits / N`` and ``rec = hits / |relevant|``; ``N`` defaults to the
    list length. Returns None when ``relevant`` is empty, since recall is
    undefined for that user.
    """
    items = ranked.items if isinstance(ranked, RankedList) else ranked
    n = len(items) if n is None else n
    metrics = _ranked_metrics(items, relevant, [n])
    if metrics is None:
        return None
    pre, rec, _ = metrics[n]
    return pre, rec


def ap_at_n(ranked, relevant, n):
    """Average precision at ``N``.

    ``sum_{k <= N} Pre@k * rel(k) / min(N, |relevant|)``; None when
    ``relevant`` is empty.

    Examples
    --------
    >>> round(ap_at_n([4, 7, 2], {4, 2}, 3), 6)
    0.833333
    """
    items = ranked.items if isinstance(ranked, RankedList) else ranked
    metrics = _ranked_metrics(items, relevant, [n])
    return None if metrics is None else metrics[n][2]


@dataclass
class EvalReport:
    """Metrics averaged over the evaluated users.

    Attributes
    ----------
    values : dict
        ``values[N][metric]`` for metric in ``("rec", "pre", "map")``.
    """

    method: str
    cutoffs: tuple
    values: dict
    n_users: int
    details: list = field(default_factory=list)

    def __getitem__(self, key):
        metric, n = key
        return self.values[n][metric]

    def rows(self):
        """``(method, metric, N, value)`` tuples, metric-major."""
        return [(self.method, metric, n, self.values[n][metric])
                for metric in METRICS for n in self.cutoffs]


def _scorer(model):
    if isinstance(model, VaeParams):
        return lambda rows: predict_scores(model, rows)
    if hasattr(model, 'predict_scores'):
        return model.predict_scores
    if callable(model):
        return model
    raise TypeError("Cannot score users with {!r}".format(model))


def evaluate(model, split, cutoffs=DEFAULT_CUTOFFS, target='test',
             method='cvae', detail=False, batch_size=256):
    """Average Pre@N, Rec@N and MAP@N over users with held-out positives.

    Parameters
    ----------
    model : VaeParams, fitted estimator or callable
        Anything mapping training rating rows to item scores.

    split : SplitDataset
        Training rows are fed to the model and masked from the lists.

    cutoffs : sequence of int, optional
        Values of ``N``.

    target : {"test", "valid"}, optional (default="test")
        Which held-out part counts as relevant.

    method : str, optional
        Label written in the report.

    detail : bool, optional (default=False)
        Keep per-user ``(user, N, pre, rec, ap)`` rows in ``report.details``.

    Returns
    -------
    report : EvalReport

    Raises
    ------
    EmptyReportError
        When no user has a held-out positive.
    """
    cutoffs = tuple(sorted(set(int(n) for n in cutoffs)))
    if not cutoffs or cutoffs[0] < 1:
        raise ValueError("Cutoffs must be positive integers")
    if target not in ('test', 'valid'):
        raise ValueError("target must be 'test' or 'valid'")
    train = sp.csr_matrix(split.train)
    heldout = sp.csr_matrix(getattr(split, target))
    if train.shape != heldout.shape:
        raise ShapeError("Train {} and {} {} shapes differ"
                         .format(train.shape, target, heldout.shape))

    users = np.flatnonzero(np.diff(heldout.indptr))
    skipped = train.shape[0] - users.size
    if users.size == 0:
        raise EmptyReportError("No user has a {} positive".format(target))
    if skipped:
        warnings.warn("{} users without {} positives are not evaluated"
                      .format(skipped, target))

    score = _scorer(model)
    max_n = cutoffs[-1]
    sums = {n: np.zeros(3) for n in cutoffs}
    details = []
    for start in range(0, users.size, batch_size):
        block = users[start:start + batch_size]
        scores = np.atleast_2d(score(train[block].toarray()))
        for row, u in enumerate(block):
            ranked = top_n(scores[row], train.indices[
                train.indptr[u]:train.indptr[u + 1]], max_n, user=u)
            relevant = heldout.indices[heldout.indptr[u]:heldout.indptr[u + 1]]
            metrics = _ranked_metrics(ranked.items, relevant, cutoffs)
            for n in cutoffs:
                sums[n] += metrics[n]
                if detail:
                    details.append((int(u), n) + tuple(metrics[n]))

    values = {n: {'pre': sums[n][0] / users.size,
                  'rec': sums[n][1] / users.size,
                  'map': sums[n][2] / users.size} for n in cutoffs}
    logger.info("%s: evaluated %d users on %s, Rec@%d=%.4f", method,
                users.size, target, cutoffs[0], values[cutoffs[0]]['rec'])
    return EvalReport(method, cutoffs, values, int(users.size), details)


def recall_curve(model, split, max_n, method='cvae'):
    """Report for every ``N`` in ``1..max_n`` (recall / MAP curves)."""
    return evaluate(model, split, range(1, max_n + 1), method=method)


def select_parameters(method, config, X, split, alphas, betas,
                      cutoff=SELECTION_CUTOFF):
    """Grid search of ``alpha`` and ``beta`` on the validation positives.

    ``beta`` is the refinement weight for "cvae" and "rvae" and the
    pretraining weight for "fvae". Every grid point trains from the same
    seed; the first point with the best validation Rec@``cutoff`` wins.

    Returns
    -------
    best : TrainConfig

    table : list of (alpha, beta, recall)
    """
    beta_field = 'beta_pretrain' if method == 'fvae' else 'beta_refine'
    table = []
    best, best_rec = None, -np.inf
    for alpha, beta in itertools.product(alphas, betas):
        candidate = config.replace(alpha=float(alpha),
                                   **{beta_field: float(beta)})
        params, _ = fit_method(method, X, split.train, candidate)
        rec = evaluate(params, split, [cutoff], target='valid',
                       method=method)['rec', cutoff]
        logger.info("%s alpha=%g beta=%g: valid Rec@%d=%.4f", method, alpha,
                    beta, cutoff, rec)
        table.append((float(alpha), float(beta), rec))
        if rec > best_rec:
            best, best_rec = candidate, rec
    return best, table


def write_report(path, reports):
    """TSV of ``method<TAB>metric<TAB>N<TAB>value`` rows after a header."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('method\tmetric\tN\tvalue\n')
        for report in reports:
            for method, metric, n, value in report.rows():
                f.write('{}\t{}\t{}\t{!r}\n'.format(method, metric, n,
                                                    float(value)))


def write_detail(path, report):
    """Per-user TSV ``user<TAB>N<TAB>pre<TAB>rec<TAB>ap``."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('user\tN\tpre\trec\tap\n')
        for user, n, pre, rec, ap in report.details:
            f.write('{}\t{}\t{!r}\t{!r}\t{!r}\n'.format(
                user, n, float(pre), float(rec), float(ap)))
