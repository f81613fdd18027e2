"""Numpy implementations of the numeric hot kernels.

Active when the compiled extension is not built (or when
``VIDAGG_BACKEND=python`` forces it). Signatures and semantics match
``vidagg._core._kernels``; small floating-point differences between the
two backends are expected and stay far below the tolerances used anywhere
in the package.
"""

import numpy as np

# Rows per broadcast chunk; bounds temporary arrays to a few MB.
_CHUNK = 512


def _as_c64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def sqdist_matrix(a, b):
    """Pairwise squared Euclidean distances, shape (len(a), len(b)).

    Uses the |a|^2 + |b|^2 - 2ab expansion; cancellation can produce tiny
    negatives, clamped to 0.
    """
    a = _as_c64(a)
    b = _as_c64(b)
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    out = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(out, 0.0, out=out)
    return out


def chi2_distance_matrix(a, b, eps):
    """Pairwise chi-square distances sum_j (a-b)^2 / (a+b+eps).

    Inputs must be elementwise non-negative.
    """
    a = _as_c64(a)
    b = _as_c64(b)
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for start in range(0, a.shape[0], _CHUNK):
        blk = a[start : start + _CHUNK]
        diff = blk[:, None, :] - b[None, :, :]
        denom = blk[:, None, :] + b[None, :, :] + eps
        out[start : start + _CHUNK] = (diff * diff / denom).sum(axis=2)
    return out


def gmm_log_joint(x, means, variances, log_weights):
    """log(w_c) + log N(x_i; mu_c, diag sigma_c^2), shape (n, k).

    Diagonal covariances; ``variances`` must be strictly positive.
    """
    x = _as_c64(x)
    means = _as_c64(means)
    variances = _as_c64(variances)
    log_weights = _as_c64(log_weights)
    p = x.shape[1]
    inv_var = 1.0 / variances
    # sum_j (x-mu)^2/var expanded into three matmul-able terms
    maha = (
        (x * x) @ inv_var.T
        - 2.0 * (x @ (means * inv_var).T)
        + np.einsum("cj,cj->c", means * means, inv_var)[None, :]
    )
    log_norm = -0.5 * (p * np.log(2.0 * np.pi) + np.log(variances).sum(axis=1))
    return log_weights[None, :] + log_norm[None, :] - 0.5 * maha


def fv_sums(x, gamma, means, stds):
    """Unnormalized Fisher statistics.

    Returns (s_mu, s_sig), each (k, p):
      s_mu[c]  = sum_i gamma[i, c] * (x[i] - mu_c) / sigma_c
      s_sig[c] = sum_i gamma[i, c] * (((x[i] - mu_c) / sigma_c)^2 - 1)
    """
    x = _as_c64(x)
    gamma = _as_c64(gamma)
    means = _as_c64(means)
    stds = _as_c64(stds)
    k = means.shape[0]
    s_mu = np.empty_like(means)
    s_sig = np.empty_like(means)
    for c in range(k):
        z = (x - means[c]) / stds[c]
        g = gamma[:, c][:, None]
        s_mu[c] = (g * z).sum(axis=0)
        s_sig[c] = (g * (z * z - 1.0)).sum(axis=0)
    return s_mu, s_sig
