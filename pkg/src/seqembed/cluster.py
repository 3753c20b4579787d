"""KMeans (Lloyd + k-means++ restarts) and cluster-quality indices.

Silhouette and Davies-Bouldin are implemented directly from their defining
formulas; all metric arithmetic is 64-bit regardless of storage precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ClusterError(ValueError):
    pass


class UndefinedIndexError(ClusterError):
    """Fewer than 2 distinct labels; the index is undefined."""


class DegenerateCentroidError(ClusterError):
    """Two cluster centroids coincide; DBI divides by their distance."""


@dataclass(frozen=True)
class KMeansParams:
    k: int = 6
    restarts: int = 10
    max_iterations: int = 300
    tolerance: float = 1e-6
    seed: int = 0


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    restart_index: int
    inertia_history: list[float] = field(default_factory=list)


@dataclass
class ClusteringReport:
    silhouette_true: float
    dbi_true: float
    silhouette_kmeans: float
    dbi_kmeans: float
    kmeans_labels: np.ndarray
    agreement: float


def _as64(X) -> np.ndarray:
    A = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected an n x d matrix")
    return A


def pairwise_distances(X) -> np.ndarray:
    """Symmetric Euclidean distance matrix with an exact zero diagonal."""
    A = _as64(X)
    sq = np.sum(A * A, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (A @ A.T)
    np.maximum(D2, 0.0, out=D2)
    D = np.sqrt(D2)
    np.fill_diagonal(D, 0.0)
    return 0.5 * (D + D.T)


def _normalize_labels(labels, n: int) -> tuple[np.ndarray, int]:
    lab = np.asarray(labels)
    if lab.shape != (n,):
        raise ValueError(f"labels length {lab.shape} does not match n={n}")
    _, dense = np.unique(lab, return_inverse=True)
    return dense, int(dense.max()) + 1


def silhouette_score(X, labels) -> float:
    """Mean silhouette (b - a) / max(a, b); singletons and zero-spread score 0."""
    A = _as64(X)
    n = A.shape[0]
    lab, k = _normalize_labels(labels, n)
    if k < 2:
        raise UndefinedIndexError("silhouette needs at least 2 distinct labels")
    D = pairwise_distances(A)
    masks = [lab == c for c in range(k)]
    sizes = np.array([m.sum() for m in masks])
    # mean distance from every point to each cluster (including own)
    cluster_sums = np.stack([D[:, m].sum(axis=1) for m in masks], axis=1)
    scores = np.zeros(n)
    for i in range(n):
        c = lab[i]
        if sizes[c] == 1:
            continue
        a = cluster_sums[i, c] / (sizes[c] - 1)
        b = np.min(
            [cluster_sums[i, j] / sizes[j] for j in range(k) if j != c]
        )
        m = max(a, b)
        scores[i] = 0.0 if m == 0.0 else (b - a) / m
    return float(np.mean(scores))


def davies_bouldin(X, labels) -> float:
    """Mean over clusters of the worst (sigma_i + sigma_j) / d(c_i, c_j) ratio."""
    A = _as64(X)
    n = A.shape[0]
    lab, k = _normalize_labels(labels, n)
    if k < 2:
        raise UndefinedIndexError("Davies-Bouldin needs at least 2 distinct labels")
    centroids = np.stack([A[lab == c].mean(axis=0) for c in range(k)])
    sigma = np.array(
        [np.mean(np.linalg.norm(A[lab == c] - centroids[c], axis=1)) for c in range(k)]
    )
    gaps = pairwise_distances(centroids)
    off_diag = gaps[~np.eye(k, dtype=bool)]
    if np.any(off_diag == 0.0):
        raise DegenerateCentroidError("coincident cluster centroids")
    ratios = (sigma[:, None] + sigma[None, :]) / np.where(gaps == 0.0, np.inf, gaps)
    np.fill_diagonal(ratios, -np.inf)
    return float(np.mean(np.max(ratios, axis=1)))


def _inertia(A: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(np.sum((A - centroids[labels]) ** 2))


def _assign(A: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(A * A, axis=1)[:, None]
        - 2.0 * A @ centroids.T
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.argmin(d2, axis=1)


def kmeans_pp_init(A: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centroid drawn with prob proportional to D^2."""
    n = A.shape[0]
    centroids = np.empty((k, A.shape[1]))
    centroids[0] = A[rng.integers(n)]
    closest = np.sum((A - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[c] = A[idx]
        np.minimum(closest, np.sum((A - centroids[c]) ** 2, axis=1), out=closest)
    return centroids


def _repair_empty(A, labels, centroids) -> np.ndarray:
    """Reseed each empty cluster with the point farthest from its own centroid."""
    k = centroids.shape[0]
    for c in range(k):
        if not np.any(labels == c):
            dists = np.sum((A - centroids[labels]) ** 2, axis=1)
            far = int(np.argmax(dists))
            centroids[c] = A[far]
            labels[far] = c
    return labels


def lloyd(
    A: np.ndarray,
    centroids: np.ndarray,
    max_iterations: int = 300,
    tolerance: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    """Lloyd iterations from given centroids; returns labels, centroids, inertia, history."""
    centroids = centroids.copy()
    labels = _assign(A, centroids)
    labels = _repair_empty(A, labels, centroids)
    history: list[float] = []
    prev = None
    for _ in range(max_iterations):
        for c in range(centroids.shape[0]):
            members = A[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
        labels = _assign(A, centroids)
        labels = _repair_empty(A, labels, centroids)
        cur = _inertia(A, labels, centroids)
        history.append(cur)
        if prev is not None and abs(prev - cur) <= tolerance * max(prev, 1e-300):
            break
        prev = cur
    # recompute centroids as exact means of the final assignment
    for c in range(centroids.shape[0]):
        members = A[labels == c]
        if len(members):
            centroids[c] = members.mean(axis=0)
    history.append(_inertia(A, labels, centroids))
    return labels, centroids, history[-1], history


def _hartigan_polish(
    A: np.ndarray, labels: np.ndarray, centroids: np.ndarray, max_passes: int = 100
) -> tuple[np.ndarray, np.ndarray, float]:
    """First-improvement single-point moves until no move lowers inertia.

    Move gain uses the exact size-weighted formula, so the final labeling is
    1-stable; clusters are never emptied.
    """
    k = centroids.shape[0]
    n = A.shape[0]
    sizes = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros_like(centroids)
    for c in range(k):
        sums[c] = A[labels == c].sum(axis=0)
    for _ in range(max_passes):
        improved = False
        for i in range(n):
            b = labels[i]
            if sizes[b] <= 1:
                continue
            mu = sums / sizes[:, None]
            d2 = np.sum((A[i] - mu) ** 2, axis=1)
            loss = sizes[b] / (sizes[b] - 1) * d2[b]
            gains = sizes / (sizes + 1) * d2
            gains[b] = np.inf
            c = int(np.argmin(gains))
            if gains[c] - loss < -1e-12:
                labels[i] = c
                sums[b] -= A[i]
                sums[c] += A[i]
                sizes[b] -= 1
                sizes[c] += 1
                improved = True
        if not improved:
            break
    for c in range(k):
        members = A[labels == c]
        if len(members):
            centroids[c] = members.mean(axis=0)
    return labels, centroids, _inertia(A, labels, centroids)


def kmeans(X, params: KMeansParams) -> KMeansResult:
    """Best-inertia result over seeded k-means++ restarts (ties: lowest restart)."""
    A = _as64(X)
    n = A.shape[0]
    if params.k < 1 or params.k > n:
        raise ClusterError(f"k={params.k} must satisfy 1 <= k <= n={n}")
    best: KMeansResult | None = None
    for r in range(params.restarts):
        rng = np.random.default_rng([params.seed, r])
        init = kmeans_pp_init(A, params.k, rng)
        labels, centroids, inertia, history = lloyd(
            A, init, params.max_iterations, params.tolerance
        )
        labels, centroids, inertia = _hartigan_polish(A, labels, centroids)
        history.append(inertia)
        if best is None or inertia < best.inertia:
            best = KMeansResult(
                labels=labels,
                centroids=centroids,
                inertia=inertia,
                restart_index=r,
                inertia_history=history,
            )
    assert best is not None
    return best


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected partition agreement; 1.0 means identical up to relabeling."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def evaluate(X, true_labels, params: KMeansParams | None = None, normalize: bool = False) -> ClusteringReport:
    """Table-row evaluation: both indices under true labels and KMeans labels."""
    A = _as64(X)
    n = A.shape[0]
    lab = np.asarray(true_labels)
    if lab.shape != (n,):
        raise ClusterError(f"true_labels length {lab.size} does not match n={n}")
    if normalize:
        norms = np.linalg.norm(A, axis=1, keepdims=True)
        A = A / np.where(norms == 0.0, 1.0, norms)
    params = params or KMeansParams(k=len(np.unique(lab)))
    result = kmeans(A, params)
    return ClusteringReport(
        silhouette_true=silhouette_score(A, lab),
        dbi_true=davies_bouldin(A, lab),
        silhouette_kmeans=silhouette_score(A, result.labels),
        dbi_kmeans=davies_bouldin(A, result.labels),
        kmeans_labels=result.labels,
        agreement=adjusted_rand_index(lab, result.labels),
    )
