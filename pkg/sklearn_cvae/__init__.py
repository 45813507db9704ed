from .cvae import CVAE, FVAE, RVAE

from ._version import __version__

__all__ = ['CVAE', 'FVAE', 'RVAE', '__version__']
