"""Ingestion of implicit-feedback ratings and item review text.

Produces the binary rating matrix ``Y`` (users x items), the binary
bag-of-words matrix ``X`` (items x terms), the per-user train / validation /
test split, and the column view of ``X`` fed to the shared network.

Binary matrices are :class:`scipy.sparse.csr_matrix` of ``float64`` ones
with sorted, duplicate-free column indices.
"""
# License: BSD 3 clause
import logging
import warnings
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.feature_extraction.text import CountVectorizer

from .exceptions import (EmptyDatasetError, EmptyVocabularyError, ParseError,
                         ShapeError)
from .utils import check_rng

__all__ = ['ParsedRatings', 'Vocabulary', 'SplitDataset', 'binarize',
           'parse_ratings', 'parse_reviews', 'read_stopwords',
           'build_vocabulary', 'vectorize_items', 'split_per_user',
           'subsample_train', 'column_samples', 'column_batches', 'save_sbm',
           'load_sbm', 'dataset_stats']

logger = logging.getLogger(__name__)

# Maximal runs of letters; digits and underscores split tokens.
TOKEN_PATTERN = r"(?u)[^\W\d_]+"
HOLDOUT_FRACTION = 0.1
MIN_SPLIT_DEGREE = 3
SBM_MAGIC = 'SBM1'

ParsedRatings = namedtuple('ParsedRatings', ['user_ids', 'item_ids', 'pairs'])
ParsedRatings.__doc__ = """\
Interactions with users and items re-indexed densely.

user_ids, item_ids : list of str
    Original tokens, position = dense index (first-appearance order).
pairs : ndarray of int64, shape (n_lines, 2)
    (user index, item index) per interaction line, duplicates kept.
"""


def binarize(Y, shape=None):
    """Canonical binary CSR matrix from a matrix or (row, col) pairs.

    Any stored non-zero becomes 1 and duplicates collapse, so
    ``binarize(binarize(Y))`` equals ``binarize(Y)``.

    Parameters
    ----------
    Y : sparse matrix, array-like, or ndarray of shape (nnz, 2) with ``shape``
        Matrix to binarize, or coordinate pairs when ``shape`` is given.

    shape : tuple of int, optional
        Matrix shape when ``Y`` holds coordinate pairs.

    Returns
    -------
    Y : csr_matrix of float64
    """
    if shape is not None:
        pairs = np.asarray(Y, dtype=np.int64).reshape(-1, 2)
        M = sp.csr_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                          shape=shape)
    else:
        M = sp.csr_matrix(Y, dtype=np.float64)
    M.sum_duplicates()
    M.eliminate_zeros()
    M.data[:] = 1.0
    M.sort_indices()
    return M


def _decoded_lines(path):
    with open(path, 'rb') as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as exc:
                raise ParseError(path, lineno,
                                 "invalid UTF-8 ({})".format(exc.reason)) \
                    from None
            yield lineno, line.rstrip('\r\n')


def _data_lines(path):
    for lineno, line in _decoded_lines(path):
        if not line.strip() or line.startswith('#'):
            continue
        yield lineno, line


def parse_ratings(path):
    """Read a ``user<TAB>item[<TAB>...]`` interaction file.

    Returns
    -------
    ratings : ParsedRatings
        Use ``binarize(ratings.pairs, shape=(m, n))`` for ``Y``.

    Raises
    ------
    ParseError
        On a line with fewer than two fields or an empty token.

    EmptyDatasetError
        When the file holds no interaction.
    """
    users, items = {}, {}
    pairs = []
    for lineno, line in _data_lines(path):
        fields = line.split('\t')
        if len(fields) < 2:
            raise ParseError(path, lineno, "expected 'user<TAB>item', got "
                                           "{!r}".format(line))
        user, item = fields[0].strip(), fields[1].strip()
        if not user or not item:
            raise ParseError(path, lineno, "empty user or item token")
        u = users.setdefault(user, len(users))
        i = items.setdefault(item, len(items))
        pairs.append((u, i))

    if not pairs:
        raise EmptyDatasetError("No interaction found in {}".format(path))
    logger.debug("Read %d interactions, %d users, %d items from %s",
                 len(pairs), len(users), len(items), path)
    return ParsedRatings(list(users), list(items),
                         np.asarray(pairs, dtype=np.int64))


def parse_reviews(path, item_ids=None):
    """Read an ``item<TAB>text`` review file into ``{item: text}``.

    Several lines of the same item are joined with a space. When ``item_ids``
    is given, reviews of unknown items are dropped.
    """
    known = None if item_ids is None else set(item_ids)
    corpus = {}
    dropped = 0
    for lineno, line in _data_lines(path):
        item, sep, text = line.partition('\t')
        item = item.strip()
        if not sep or not item:
            raise ParseError(path, lineno, "expected 'item<TAB>text'")
        if known is not None and item not in known:
            dropped += 1
            continue
        if item in corpus:
            corpus[item] = corpus[item] + ' ' + text
        else:
            corpus[item] = text
    if dropped:
        logger.info("Dropped %d review lines of items without ratings",
                    dropped)
    return corpus


def read_stopwords(path):
    """One stopword per line, lowercased."""
    return frozenset(w.strip().lower() for _, w in _decoded_lines(path)
                     if w.strip())


@dataclass(frozen=True)
class Vocabulary:
    """Term list of the bag-of-words features.

    Attributes
    ----------
    terms : tuple of str
        Terms in lexicographic order; position is the feature index.

    index : dict
        ``term -> feature index``.

    stopwords : frozenset of str
        Stopwords removed while building.
    """

    terms: tuple
    index: dict
    stopwords: frozenset

    def __len__(self):
        return len(self.terms)


def _vectorizer(**kwargs):
    return CountVectorizer(lowercase=True, token_pattern=TOKEN_PATTERN,
                           binary=True, dtype=np.float64, **kwargs)


def build_vocabulary(corpus, stopwords=(), min_df=5):
    """Unigram vocabulary of a review corpus.

    Parameters
    ----------
    corpus : dict
        ``item id -> review text``.

    stopwords : iterable of str, optional
        Terms to drop (compared lowercased).

    min_df : int, optional (default=5)
        Terms occurring in fewer than ``min_df`` items are dropped.

    Returns
    -------
    vocab : Vocabulary

    Raises
    ------
    EmptyVocabularyError
        Empty corpus, or no term survives the filters.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1, got {}".format(min_df))
    stopwords = frozenset(w.lower() for w in stopwords)
    texts = [t for t in corpus.values() if t.strip()]
    if not texts:
        raise EmptyVocabularyError("Review corpus is empty")

    vectorizer = _vectorizer(stop_words=sorted(stopwords) or None,
                             min_df=min_df)
    try:
        vectorizer.fit(texts)
    except ValueError as exc:
        raise EmptyVocabularyError(
            "No term left after stopword removal and min_df={}: {}"
            .format(min_df, exc)) from exc

    terms = tuple(sorted(vectorizer.vocabulary_))
    return Vocabulary(terms, {t: j for j, t in enumerate(terms)}, stopwords)


def vectorize_items(corpus, vocab, item_ids):
    """Binary bag-of-words matrix ``X`` (items x terms).

    Row ``i`` belongs to ``item_ids[i]``; items absent from ``corpus`` get an
    all-zero row.
    """
    missing = sum(1 for item in item_ids if not corpus.get(item, '').strip())
    if missing:
        warnings.warn("{} of {} items have no review text; their feature "
                      "rows are empty".format(missing, len(item_ids)))
    vectorizer = _vectorizer(vocabulary=vocab.index)
    X = vectorizer.transform([corpus.get(item, '') for item in item_ids])
    return binarize(X)


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint per-user train / validation / test partition of ``Y``."""

    train: sp.csr_matrix
    valid: sp.csr_matrix
    test: sp.csr_matrix
    seed: object = None

    @property
    def shape(self):
        return self.train.shape


def split_per_user(Y, random_state=0):
    """Hold out 10% of every user's positives for validation and 10% for test.

    Each user with ``deg >= 3`` positives gets ``floor(0.1 * deg)`` of them,
    drawn uniformly without replacement, in validation and as many in test.
    Users with fewer positives keep everything in train.

    Parameters
    ----------
    Y : sparse matrix, shape (n_users, n_items)
        Binary ratings.

    random_state : int or numpy.random.Generator
        Seed of the ``split`` stream, or a generator.

    Returns
    -------
    split : SplitDataset
    """
    Y = binarize(Y)
    rng = check_rng(random_state, 'split')
    parts = {'train': ([], []), 'valid': ([], []), 'test': ([], [])}

    for u in range(Y.shape[0]):
        items = Y.indices[Y.indptr[u]:Y.indptr[u + 1]]
        n_hold = 0
        if len(items) >= MIN_SPLIT_DEGREE:
            n_hold = int(np.floor(HOLDOUT_FRACTION * len(items)))
        if n_hold:
            held = rng.choice(items, size=2 * n_hold, replace=False)
            valid, test = held[:n_hold], held[n_hold:]
            train = np.setdiff1d(items, held, assume_unique=True)
        else:
            valid = test = items[:0]
            train = items
        for name, cols in (('train', train), ('valid', valid),
                           ('test', test)):
            parts[name][0].append(np.full(len(cols), u))
            parts[name][1].append(cols)

    def _assemble(rows, cols):
        pairs = np.column_stack([np.concatenate(rows), np.concatenate(cols)])
        return binarize(pairs, shape=Y.shape)

    seed = random_state if not isinstance(random_state,
                                          np.random.Generator) else None
    return SplitDataset(_assemble(*parts['train']), _assemble(*parts['valid']),
                        _assemble(*parts['test']), seed=seed)


def subsample_train(Y_train, per_user, random_state=0):
    """Keep at most ``per_user`` uniformly drawn positives of every user."""
    if per_user < 1:
        raise ValueError("per_user must be >= 1, got {}".format(per_user))
    Y_train = binarize(Y_train)
    rng = check_rng(random_state, 'subsample')
    rows, cols = [], []
    for u in range(Y_train.shape[0]):
        items = Y_train.indices[Y_train.indptr[u]:Y_train.indptr[u + 1]]
        if len(items) > per_user:
            items = rng.choice(items, size=per_user, replace=False)
        rows.append(np.full(len(items), u))
        cols.append(items)
    pairs = np.column_stack([np.concatenate(rows), np.concatenate(cols)])
    return binarize(pairs, shape=Y_train.shape)


def column_samples(X):
    """Yield the ``d`` columns of ``X`` (items x terms) as dense vectors.

    Column ``j`` is the ``j``-th side-information sample: the presence of
    term ``j`` over all ``n`` items.
    """
    Xt = sp.csr_matrix(X).T.tocsr()
    for j in range(Xt.shape[0]):
        yield Xt[j].toarray().ravel()


def column_batches(X, batch_size=256):
    """Yield the columns of ``X`` as dense blocks of ``batch_size`` rows.

    Stacking the blocks gives ``X.T``; only one block is dense at a time.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1, got {}".format(batch_size))
    Xt = sp.csr_matrix(X).T.tocsr()
    for start in range(0, Xt.shape[0], batch_size):
        yield Xt[start:start + batch_size].toarray()


def save_sbm(path, M):
    """Write a binary matrix in the ``SBM1`` text format.

    The header line ``SBM1 rows cols nnz`` is followed by one ``row col``
    pair per line in row-major order.
    """
    M = binarize(M)
    rows = np.repeat(np.arange(M.shape[0]), np.diff(M.indptr))
    with open(path, 'w', encoding='ascii', newline='\n') as f:
        f.write('{} {} {} {}\n'.format(SBM_MAGIC, M.shape[0], M.shape[1],
                                       M.nnz))
        f.writelines('{} {}\n'.format(r, c) for r, c in zip(rows, M.indices))


def load_sbm(path):
    """Read a matrix written by :func:`save_sbm`."""
    with open(path, encoding='ascii') as f:
        header = f.readline().split()
        if len(header) != 4 or header[0] != SBM_MAGIC:
            raise ParseError(path, 1, "not an {} file".format(SBM_MAGIC))
        try:
            n_rows, n_cols, nnz = (int(v) for v in header[1:])
        except ValueError:
            raise ParseError(path, 1, "malformed header") from None
        with warnings.catch_warnings():
            # an empty matrix has no data line
            warnings.simplefilter('ignore', UserWarning)
            pairs = np.loadtxt(f, dtype=np.int64, ndmin=2).reshape(-1, 2)

    if len(pairs) != nnz:
        raise ParseError(path, 1, "header announces {} entries, found {}"
                         .format(nnz, len(pairs)))
    if nnz and (pairs.min() < 0 or pairs[:, 0].max() >= n_rows or
                pairs[:, 1].max() >= n_cols):
        raise ShapeError("{}: index out of range for a {}x{} matrix"
                         .format(path, n_rows, n_cols))
    keys = pairs[:, 0] * n_cols + pairs[:, 1]
    if nnz > 1 and not np.all(np.diff(keys) > 0):
        raise ParseError(path, 2, "entries are not sorted and unique")
    return binarize(pairs, shape=(n_rows, n_cols))


def dataset_stats(Y, X=None):
    """#users, #items, #ratings, #dimensions and #features of a dataset."""
    stats = {'users': Y.shape[0], 'items': Y.shape[1], 'ratings': Y.nnz,
             'dimensions': 0, 'features': 0}
    if X is not None:
        if X.shape[0] != Y.shape[1]:
            raise ShapeError("X has {} item rows, Y has {} item columns"
                             .format(X.shape[0], Y.shape[1]))
        stats['dimensions'] = X.shape[1]
        stats['features'] = X.nnz
    return stats
