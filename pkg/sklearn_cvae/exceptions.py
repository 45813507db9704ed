"""Exceptions raised by sklearn_cvae.

All of them derive from :class:`ValueError`, like the scikit-learn
exception classes, so callers catching ``ValueError`` keep working.
"""
# License: BSD 3 clause

__all__ = ['ShapeError', 'NumericalError', 'ParseError', 'EmptyDatasetError',
           'EmptyVocabularyError', 'EmptyReportError', 'CheckpointError',
           'ConfigError']


class ShapeError(ValueError):
    """Array dimensions do not chain or do not match the network."""


class NumericalError(ValueError):
    """A NaN or infinite value appeared in a loss, activation or gradient."""


class ParseError(ValueError):
    """A line of an input file could not be parsed.

    Parameters
    ----------
    path : str
        File being read.

    lineno : int
        1-based line number of the offending line.

    msg : str
        Description of the problem.
    """

    def __init__(self, path, lineno, msg):
        self.path = path
        self.lineno = lineno
        super().__init__("{}:{}: {}".format(path, lineno, msg))


class EmptyDatasetError(ValueError):
    """An input file holds no interaction."""


class EmptyVocabularyError(ValueError):
    """No term survived tokenization, stopword removal and min_df."""


class EmptyReportError(ValueError):
    """No user has a held-out positive to evaluate against."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed or truncated."""


class ConfigError(ValueError):
    """Unknown key or invalid value in a run configuration."""
