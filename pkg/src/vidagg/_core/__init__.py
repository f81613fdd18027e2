"""Numeric kernel backend selection.

The compiled Cython kernels are preferred when built; otherwise the numpy
fallback is used. ``VIDAGG_BACKEND=python`` forces the fallback and
``VIDAGG_BACKEND=cython`` makes a missing extension a hard error.
``BACKEND`` records which implementation is active.
"""

import os

_requested = os.environ.get("VIDAGG_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "cython", "python", ""):
    raise ValueError(
        f"VIDAGG_BACKEND={_requested!r} not understood (use 'cython' or 'python')"
    )

if _requested == "python":
    from vidagg._core.fallback import (  # noqa: F401
        chi2_distance_matrix,
        fv_sums,
        gmm_log_joint,
        sqdist_matrix,
    )

    BACKEND = "python"
else:
    try:
        from vidagg._core._kernels import (  # noqa: F401
            chi2_distance_matrix,
            fv_sums,
            gmm_log_joint,
            sqdist_matrix,
        )

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "VIDAGG_BACKEND=cython but the compiled extension is not built; "
                "reinstall the package or unset VIDAGG_BACKEND"
            ) from None
        from vidagg._core.fallback import (  # noqa: F401
            chi2_distance_matrix,
            fv_sums,
            gmm_log_joint,
            sqdist_matrix,
        )

        BACKEND = "python"

__all__ = [
    "BACKEND",
    "chi2_distance_matrix",
    "fv_sums",
    "gmm_log_joint",
    "sqdist_matrix",
]
