"""Cross-checks between the compiled kernels and the numpy fallback."""

import os

import numpy as np
import pytest

import vidagg
from vidagg._core import fallback

try:
    from vidagg._core import _kernels
except ImportError:
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")


def test_backend_reported():
    assert vidagg.BACKEND in ("cython", "python")
    forced = os.environ.get("VIDAGG_BACKEND", "auto")
    if forced == "python":
        assert vidagg.BACKEND == "python"
    elif _kernels is not None:
        assert vidagg.BACKEND == "cython"


@needs_ext
def test_sqdist_matches(rng):
    a, b = rng.standard_normal((40, 7)), rng.standard_normal((9, 7))
    got = _kernels.sqdist_matrix(a, b)
    want = fallback.sqdist_matrix(a, b)
    assert np.max(np.abs(got - want)) < 1e-10


@needs_ext
def test_chi2_matches(rng):
    a, b = rng.random((30, 5)), rng.random((8, 5))
    got = _kernels.chi2_distance_matrix(a, b, 1e-10)
    want = fallback.chi2_distance_matrix(a, b, 1e-10)
    assert np.max(np.abs(got - want)) < 1e-12


@needs_ext
def test_gmm_log_joint_matches(rng):
    x = rng.standard_normal((25, 4))
    means = rng.standard_normal((6, 4))
    variances = rng.random((6, 4)) + 0.1
    lw = np.log(np.full(6, 1.0 / 6.0))
    got = _kernels.gmm_log_joint(x, means, variances, lw)
    want = fallback.gmm_log_joint(x, means, variances, lw)
    assert np.max(np.abs(got - want)) < 1e-9


@needs_ext
def test_fv_sums_match(rng):
    x = rng.standard_normal((20, 3))
    gamma = rng.random((20, 4))
    gamma /= gamma.sum(axis=1, keepdims=True)
    means = rng.standard_normal((4, 3))
    stds = rng.random((4, 3)) + 0.5
    g_mu, g_sig = _kernels.fv_sums(x, gamma, means, stds)
    f_mu, f_sig = fallback.fv_sums(x, gamma, means, stds)
    assert np.max(np.abs(g_mu - f_mu)) < 1e-10
    assert np.max(np.abs(g_sig - f_sig)) < 1e-10


@needs_ext
def test_dimension_mismatch_raises(rng):
    with pytest.raises(ValueError):
        _kernels.sqdist_matrix(rng.random((3, 2)), rng.random((3, 3)))
    with pytest.raises(ValueError):
        _kernels.gmm_log_joint(
            rng.random((3, 2)), rng.random((2, 2)), rng.random((2, 2)), np.zeros(3)
        )
