"""Scale-localized ensemble averages and enstrophy-cascade diagnostics on gridded fields."""

__version__ = "0.1.0"

from . import cascade, covers, cutoffs, ensemble, fields  # noqa: E402
from ._kernels import BACKEND  # noqa: E402

__all__ = ["cascade", "covers", "cutoffs", "ensemble", "fields", "BACKEND", "__version__"]
