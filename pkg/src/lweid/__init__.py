"""LWE-based zero-knowledge identification: a 3-pass scheme with soundness
error 2/3 and a 5-pass scheme with soundness error (q+1)/2q."""

from .fqcore import Params

__version__ = "0.1.0"
__all__ = ["Params"]
