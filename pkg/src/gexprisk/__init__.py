"""Dynamic g-expectation risk minimization for derivatives on non-tradable indices."""
from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION

__version__ = "0.1.0"
__all__ = ["KERNEL_IMPLEMENTATION", "__version__"]
