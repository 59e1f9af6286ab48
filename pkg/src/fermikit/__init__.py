"""fermikit: finite-dimensional graded operator algebras and fermionic detailed balance."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
