"""vidagg: local video feature aggregation, kernel SVM classification and
late score fusion, with a synthetic dataset generator for desk-scale
experiments.

The numeric hot kernels run on a compiled Cython core when built; a numpy
fallback is selected automatically at import (see ``vidagg.BACKEND``).
"""

from vidagg._core import BACKEND

__all__ = ["BACKEND", "__version__"]
__version__ = "0.1.0"
