import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _legacy_scalar_repr(request):
    # Doctests were written against the NumPy 1.x scalar repr
    # (``0.5`` rather than ``np.float64(0.5)``).
    if not isinstance(request.node, pytest.DoctestItem):
        yield
        return
    old = np.get_printoptions()
    try:
        np.set_printoptions(legacy='1.25')
    except (TypeError, ValueError):
        pass
    yield
    np.set_printoptions(**old)
