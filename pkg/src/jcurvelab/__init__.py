"""Numerical laboratory for pseudo-holomorphic curves in almost Hermitian spaces."""

__version__ = "0.1.0"

from .errors import JCurveLabError  # noqa: F401
