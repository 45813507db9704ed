"""Seeded random streams.

Every random draw of a run derives from a single integer seed through a
named stream, so that changing e.g. the number of epochs never alters the
data split.
"""
# License: BSD 3 clause
import numbers

import numpy as np

STREAMS = {
    'split': 0,
    'init': 1,
    'shuffle': 2,
    'eps': 3,
    'synth': 4,
    'subsample': 5,
    'gradcheck': 6,
}

PHASES = {'pretrain': 0, 'refine': 1}


def derive_rng(seed, stream, *keys):
    """Generator for ``stream`` of the run seeded with ``seed``.

    Parameters
    ----------
    seed : int
        Non-negative run seed.

    stream : str
        One of :data:`STREAMS`.

    *keys : int
        Extra non-negative integers (phase, epoch, ...) for sub-streams.
    """
    if not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError("seed must be a non-negative integer, got {!r}"
                         .format(seed))
    if stream not in STREAMS:
        raise ValueError("Unknown random stream {!r}".format(stream))
    return np.random.default_rng([int(seed), STREAMS[stream]] +
                                 [int(k) for k in keys])


def check_rng(random_state, stream):
    """Accept a seed or a ready :class:`numpy.random.Generator`."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return derive_rng(random_state, stream)
