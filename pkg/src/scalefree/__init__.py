"""Scale-free, comparator-adaptive online learners with regret bounds and lower-bound adversaries."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: F401
