"""Latent-space interpretability: traces, PCA projection, cosine profiles.

Used to compare how different deconstruction priors steer the posterior:
capture posterior means for a fixed input set under each prior, project
the pooled set with PCA, and compare per-sample directions with cosine
similarity plus a permutation test on centroid separation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .rng import stream
from .vae import GenerativeModel, encode


@dataclass(frozen=True)
class LatentTrace:
    run_id: str
    prior_kind: str
    epoch: int
    mu_vectors: np.ndarray  # (n_samples, latent_dim)

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu_vectors, dtype=float)
        if mu.ndim != 2:
            raise InputError("mu_vectors must be a (n_samples, latent_dim) matrix")
        if not np.all(np.isfinite(mu)):
            raise InputError("mu_vectors must be finite")
        object.__setattr__(self, "mu_vectors", mu)


def capture_latents(
    m: GenerativeModel,
    inputs: np.ndarray,
    epoch: int,
    run_id: str = "",
    prior_kind: str = "",
) -> LatentTrace:
    """Posterior means for every input row, recorded without sampling noise."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    mu, _ = encode(m, inputs)
    return LatentTrace(run_id, prior_kind, epoch, mu)


def pca_project(
    data: np.ndarray, n_components: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """PCA via eigen-decomposition of the covariance matrix.

    Rows are observations. Components are ordered by descending
    eigenvalue with a fixed sign convention (the largest-magnitude loading
    of each component is positive), so projections are reproducible.
    Returns (projections, explained_variance_ratios); rank-deficient
    directions get ratio 0.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise InputError("pca needs a matrix with at least 2 rows")
    if n_components > min(data.shape[0] - 1, data.shape[1]):
        raise InputError(
            f"n_components={n_components} exceeds min(rows-1, cols)="
            f"{min(data.shape[0] - 1, data.shape[1])}"
        )
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (data.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]
    for j in range(eigenvectors.shape[1]):
        pivot = np.argmax(np.abs(eigenvectors[:, j]))
        if eigenvectors[pivot, j] < 0:
            eigenvectors[:, j] = -eigenvectors[:, j]
    total = eigenvalues.sum()
    ratios = eigenvalues / total if total > 0 else np.zeros_like(eigenvalues)
    projections = centered @ eigenvectors[:, :n_components]
    return projections, ratios[:n_components]


def cosine_similarity_profile(trace_a: LatentTrace, trace_b: LatentTrace) -> np.ndarray:
    """Per-sample cosine similarity between corresponding posterior means.

    Entries where either row is a zero vector are NaN (undefined
    direction) rather than an arbitrary number.
    """
    a, b = trace_a.mu_vectors, trace_b.mu_vectors
    if a.shape != b.shape:
        raise InputError(f"trace shapes differ: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a, axis=1)
    norm_b = np.linalg.norm(b, axis=1)
    out = np.full(a.shape[0], np.nan)
    ok = (norm_a > 0) & (norm_b > 0)
    out[ok] = np.sum(a[ok] * b[ok], axis=1) / (norm_a[ok] * norm_b[ok])
    return out


def centroid_separation_test(
    group_a: np.ndarray,
    group_b: np.ndarray,
    n_shuffles: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Permutation test for 'these two point clouds share a center'.

    The statistic is the Euclidean distance between group centroids;
    labels are reshuffled `n_shuffles` times. Returns (observed distance,
    p-value) with add-one smoothing so p is never exactly 0.
    """
    a = np.atleast_2d(np.asarray(group_a, dtype=float))
    b = np.atleast_2d(np.asarray(group_b, dtype=float))
    observed = float(np.linalg.norm(a.mean(axis=0) - b.mean(axis=0)))
    pooled = np.vstack([a, b])
    n_a = a.shape[0]
    rng = stream(seed, "centroid-permutation")
    exceed = 0
    for _ in range(n_shuffles):
        perm = rng.permutation(pooled.shape[0])
        pa = pooled[perm[:n_a]]
        pb = pooled[perm[n_a:]]
        if np.linalg.norm(pa.mean(axis=0) - pb.mean(axis=0)) >= observed:
            exceed += 1
    p_value = (exceed + 1) / (n_shuffles + 1)
    return observed, p_value


def save_trace(trace: LatentTrace, path) -> None:
    doc = {
        "run_id": trace.run_id,
        "prior_kind": trace.prior_kind,
        "epoch": trace.epoch,
        "mu_vectors": trace.mu_vectors.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trace(path) -> LatentTrace:
    with open(path) as fh:
        doc = json.load(fh)
    return LatentTrace(
        doc["run_id"], doc["prior_kind"], doc["epoch"], np.asarray(doc["mu_vectors"])
    )
