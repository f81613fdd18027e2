"""BoW, VLAD and Fisher Vector encodings of local feature sequences.

Each encoder optionally projects the sequence through a PCA model, then
summarizes it against a trained codebook:

  bow   histogram of hard assignments to k-means centroids, L1-normalized
  vlad  per-centroid sums of residuals to the nearest centroid, flattened
  fv    per-Gaussian first and second moments of soft-assigned residuals

VLAD and FV apply signed square root followed by global L2 normalization
(the all-zero vector is left as is). Hard-assignment ties go to the lowest
centroid index. Normalization pipelines are configurable per spec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vidagg._core import fv_sums, sqdist_matrix
from vidagg.codebook import GmmModel, KmeansModel, PcaModel, gmm_posteriors, pca_project

_DEFAULT_NORMALIZATION = {"bow": "l1", "vlad": "ssr_l2", "fv": "ssr_l2"}


def signed_sqrt(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.sqrt(np.abs(v))


def l2_normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def l1_normalize(v: np.ndarray) -> np.ndarray:
    total = np.abs(v).sum()
    return v / total if total > 0 else v


def _normalize(v: np.ndarray, pipeline: str) -> np.ndarray:
    if pipeline == "none":
        return v
    if pipeline == "l1":
        return l1_normalize(v)
    if pipeline == "l2":
        return l2_normalize(v)
    if pipeline == "ssr_l2":
        return l2_normalize(signed_sqrt(v))
    raise ValueError(f"unknown normalization pipeline {pipeline!r}")


@dataclass(frozen=True)
class EncoderSpec:
    kind: str  # bow | vlad | fv
    codebook: KmeansModel | GmmModel
    pca: PcaModel | None = None  # None: features used as-is
    normalization: str | None = None  # None: per-kind default

    def __post_init__(self):
        if self.kind not in ("bow", "vlad", "fv"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        wanted = GmmModel if self.kind == "fv" else KmeansModel
        if not isinstance(self.codebook, wanted):
            raise ValueError(
                f"{self.kind} encoder needs a {wanted.__name__}, "
                f"got {type(self.codebook).__name__}"
            )
        if self.pca is not None and self.pca.output_dim != self.codebook.dim:
            raise ValueError(
                f"PCA output dim {self.pca.output_dim} != codebook dim {self.codebook.dim}"
            )

    @property
    def pipeline(self) -> str:
        return self.normalization or _DEFAULT_NORMALIZATION[self.kind]

    @property
    def output_dim(self) -> int:
        k, p = self.codebook.k, self.codebook.dim
        if self.kind == "bow":
            return k
        if self.kind == "vlad":
            return k * p
        return 2 * k * p


def _projected(spec: EncoderSpec, seq: np.ndarray) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, d) sequence, got shape {seq.shape}")
    if spec.pca is not None:
        return pca_project(spec.pca, seq)
    if seq.shape[1] != spec.codebook.dim:
        raise ValueError(
            f"feature dim {seq.shape[1]} != codebook dim {spec.codebook.dim}"
        )
    return seq


def _hard_assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin returns the lowest index on ties
    return np.argmin(sqdist_matrix(x, centroids), axis=1)


def encode_bow(spec: EncoderSpec, seq: np.ndarray) -> np.ndarray:
    """Histogram of nearest-centroid assignments, shape (k,)."""
    x = _projected(spec, seq)
    assign = _hard_assign(x, spec.codebook.centroids)
    hist = np.bincount(assign, minlength=spec.codebook.k).astype(np.float64)
    return _normalize(hist, spec.pipeline)


def encode_vlad(spec: EncoderSpec, seq: np.ndarray) -> np.ndarray:
    """Concatenated per-centroid residual sums, shape (k*p,)."""
    x = _projected(spec, seq)
    centroids = spec.codebook.centroids
    assign = _hard_assign(x, centroids)
    residuals = np.zeros_like(centroids)
    np.add.at(residuals, assign, x - centroids[assign])
    return _normalize(residuals.ravel(), spec.pipeline)


def encode_fv(spec: EncoderSpec, seq: np.ndarray) -> np.ndarray:
    """Fisher vector under the GMM codebook, shape (2*k*p,).

    With responsibilities gamma_i(c) and n rows:
      mean part   (1 / (n sqrt(w_c)))   sum_i gamma_i(c) (x_i - mu_c) / sigma_c
      spread part (1 / (n sqrt(2 w_c))) sum_i gamma_i(c) (((x_i - mu_c) / sigma_c)^2 - 1)
    concatenated as all mean parts then all spread parts.
    """
    x = _projected(spec, seq)
    gmm: GmmModel = spec.codebook
    n = x.shape[0]
    gamma = gmm_posteriors(gmm, x)
    s_mu, s_sig = fv_sums(x, gamma, gmm.means, np.sqrt(gmm.variances))
    g_mu = s_mu / (n * np.sqrt(gmm.weights))[:, None]
    g_sig = s_sig / (n * np.sqrt(2.0 * gmm.weights))[:, None]
    return _normalize(np.concatenate([g_mu.ravel(), g_sig.ravel()]), spec.pipeline)


ENCODERS = {"bow": encode_bow, "vlad": encode_vlad, "fv": encode_fv}


def encode(spec: EncoderSpec, seq: np.ndarray) -> np.ndarray:
    return ENCODERS[spec.kind](spec, seq)
