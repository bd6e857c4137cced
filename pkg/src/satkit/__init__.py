"""satkit: desk-scale experiments with random saturating convex-body constructions."""

__version__ = "0.1.0"

from . import bodies, constants, decouple, errors, meanwidth, randcore, satglobal, satlocal

__all__ = [
    "bodies",
    "constants",
    "decouple",
    "errors",
    "meanwidth",
    "randcore",
    "satglobal",
    "satlocal",
    "__version__",
]
