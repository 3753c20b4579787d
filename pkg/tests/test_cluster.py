import itertools
import math

import numpy as np
import pytest

from seqembed.cluster import (
    DegenerateCentroidError,
    KMeansParams,
    UndefinedIndexError,
    adjusted_rand_index,
    davies_bouldin,
    evaluate,
    kmeans,
    lloyd,
    pairwise_distances,
    silhouette_score,
)


# --- naive double-loop oracles --------------------------------------------

def naive_distances(X):
    n = len(X)
    D = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            D[i][j] = math.sqrt(sum((X[i][t] - X[j][t]) ** 2 for t in range(len(X[i]))))
    return D


def naive_silhouette(X, labels):
    D = naive_distances(X)
    n = len(X)
    classes = sorted(set(labels))
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(D[i][j] for j in own) / len(own)
        b = math.inf
        for c in classes:
            if c == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(D[i][j] for j in members) / len(members))
        m = max(a, b)
        scores.append(0.0 if m == 0.0 else (b - a) / m)
    return sum(scores) / n


def naive_dbi(X, labels):
    classes = sorted(set(labels))
    centroids, sigmas = {}, {}
    d = len(X[0])
    for c in classes:
        members = [X[i] for i in range(len(X)) if labels[i] == c]
        centroid = [sum(p[t] for p in members) / len(members) for t in range(d)]
        centroids[c] = centroid
        sigmas[c] = sum(
            math.sqrt(sum((p[t] - centroid[t]) ** 2 for t in range(d))) for p in members
        ) / len(members)
    total = 0.0
    for ci in classes:
        worst = -math.inf
        for cj in classes:
            if cj == ci:
                continue
            gap = math.sqrt(
                sum((centroids[ci][t] - centroids[cj][t]) ** 2 for t in range(d))
            )
            worst = max(worst, (sigmas[ci] + sigmas[cj]) / gap)
        total += worst
    return total / len(classes)


def exhaustive_min_inertia(X, k):
    """Minimum inertia over all assignments using exactly k non-empty clusters.

    Uses the identity inertia = sum ||x_i||^2 - sum_c ||sum_{i in c} x_i||^2 / n_c,
    vectorized over every one of the k^n assignments.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    assignments = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int8)
    total_sq = float(np.sum(X * X))
    explained = np.zeros(len(assignments))
    valid = np.ones(len(assignments), dtype=bool)
    for c in range(k):
        mask = assignments == c
        counts = mask.sum(axis=1)
        valid &= counts > 0
        sums = mask.astype(np.float64) @ X
        with np.errstate(divide="ignore", invalid="ignore"):
            explained += np.where(counts > 0, np.sum(sums * sums, axis=1) / counts, 0.0)
    return float(total_sq - explained[valid].max())


FIXTURE_X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
FIXTURE_LABELS = [0, 0, 1, 1]


class TestPairwiseDistances:
    def test_one_dim(self):
        assert np.allclose(pairwise_distances(np.array([[0.0], [3.0]])), [[0, 3], [3, 0]])

    def test_three_four_five(self):
        D = pairwise_distances(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert D[0, 1] == pytest.approx(5.0)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((10, 4))
        D = pairwise_distances(X)
        assert np.allclose(D, naive_distances(X.tolist()), atol=1e-12)
        assert np.array_equal(D, D.T)
        assert np.all(np.diag(D) == 0.0)


class TestSilhouette:
    def test_hand_fixture(self):
        # a = 1, b = mean(10, sqrt(101)) for every point
        assert silhouette_score(FIXTURE_X, FIXTURE_LABELS) == pytest.approx(0.9002, abs=1e-3)

    def test_identical_points_two_clusters(self):
        X = np.zeros((4, 2))
        assert silhouette_score(X, [0, 0, 1, 1]) == 0.0

    def test_two_singletons(self):
        assert silhouette_score(np.array([[0.0], [5.0]]), [0, 1]) == 0.0

    def test_single_label_rejected(self):
        with pytest.raises(UndefinedIndexError):
            silhouette_score(FIXTURE_X, [0, 0, 0, 0])

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(4, 51))
            d = int(rng.integers(1, 9))
            k = int(rng.integers(2, 6))
            X = rng.standard_normal((n, d))
            labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
            got = silhouette_score(X, labels)
            want = naive_silhouette(X.tolist(), labels.tolist())
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
            assert -1.0 <= got <= 1.0

    def test_invariances(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((20, 3))
        labels = rng.integers(0, 3, 20)
        labels[:3] = [0, 1, 2]
        base = silhouette_score(X, labels)
        relabeled = [(v + 1) % 3 for v in labels]
        assert silhouette_score(X, relabeled) == pytest.approx(base, rel=1e-12)
        assert silhouette_score(X + 7.5, labels) == pytest.approx(base, rel=1e-9)
        assert silhouette_score(3.0 * X, labels) == pytest.approx(base, rel=1e-9)


class TestDaviesBouldin:
    def test_hand_fixture(self):
        assert davies_bouldin(FIXTURE_X, FIXTURE_LABELS) == pytest.approx(0.1, abs=1e-9)

    def test_two_singletons_zero(self):
        assert davies_bouldin(np.array([[0.0], [5.0]]), [0, 1]) == 0.0

    def test_coincident_centroids_rejected(self):
        X = np.zeros((4, 2))
        with pytest.raises(DegenerateCentroidError):
            davies_bouldin(X, [0, 0, 1, 1])

    def test_single_label_rejected(self):
        with pytest.raises(UndefinedIndexError):
            davies_bouldin(FIXTURE_X, [1, 1, 1, 1])

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            n = int(rng.integers(4, 51))
            d = int(rng.integers(1, 9))
            k = int(rng.integers(2, 6))
            X = rng.standard_normal((n, d))
            labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
            got = davies_bouldin(X, labels)
            want = naive_dbi(X.tolist(), labels.tolist())
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
            assert got >= 0.0

    def test_translation_and_relabel_invariance(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((18, 4))
        labels = rng.integers(0, 3, 18)
        labels[:3] = [0, 1, 2]
        base = davies_bouldin(X, labels)
        assert davies_bouldin(X - 2.5, labels) == pytest.approx(base, rel=1e-9)
        assert davies_bouldin(X, [(v + 2) % 3 for v in labels]) == pytest.approx(base, rel=1e-12)


class TestKMeans:
    def test_two_blobs_1d(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        result = kmeans(X, KMeansParams(k=2, seed=1))
        assert result.inertia == pytest.approx(1.0, abs=1e-12)
        assert result.labels[0] == result.labels[1] != result.labels[2] == result.labels[3]

    def test_k_equals_n(self):
        X = np.arange(10.0).reshape(5, 2)
        result = kmeans(X, KMeansParams(k=5, seed=0))
        assert result.inertia == pytest.approx(0.0, abs=1e-12)
        assert sorted(result.labels) == [0, 1, 2, 3, 4]

    def test_k_one(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((8, 3))
        result = kmeans(X, KMeansParams(k=1, seed=0))
        assert np.all(result.labels == 0)
        assert np.allclose(result.centroids[0], X.mean(axis=0))

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(Exception):
            kmeans(np.zeros((2, 2)), KMeansParams(k=3))

    def test_inertia_consistency_and_nonempty(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((30, 4))
        result = kmeans(X, KMeansParams(k=4, seed=3))
        recomputed = float(np.sum((X - result.centroids[result.labels]) ** 2))
        assert result.inertia == pytest.approx(recomputed, rel=1e-9)
        assert set(result.labels.tolist()) == {0, 1, 2, 3}

    def test_inertia_history_non_increasing(self):
        rng = np.random.default_rng(10)
        for seed in range(20):
            X = rng.standard_normal((25, 3))
            init = X[rng.choice(25, 3, replace=False)].copy()
            _, _, _, history = lloyd(X, init)
            assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_determinism(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((20, 3))
        r1 = kmeans(X, KMeansParams(k=3, seed=42))
        r2 = kmeans(X, KMeansParams(k=3, seed=42))
        assert np.array_equal(r1.labels, r2.labels)
        assert r1.inertia == r2.inertia and r1.restart_index == r2.restart_index

    def test_one_stability(self):
        # no single-point move lowers inertia at convergence
        rng = np.random.default_rng(12)
        for _ in range(20):
            n, k = int(rng.integers(8, 20)), int(rng.integers(2, 4))
            X = rng.standard_normal((n, 2))
            result = kmeans(X, KMeansParams(k=k, seed=int(rng.integers(1000))))
            labels = result.labels.copy()
            sizes = np.bincount(labels, minlength=k)
            base = result.inertia
            for i in range(n):
                b = labels[i]
                if sizes[b] <= 1:
                    continue
                for c in range(k):
                    if c == b:
                        continue
                    trial = labels.copy()
                    trial[i] = c
                    inertia = 0.0
                    for cc in range(k):
                        members = X[trial == cc]
                        if len(members):
                            inertia += float(np.sum((members - members.mean(axis=0)) ** 2))
                    assert inertia >= base - 1e-9

    def test_attains_exhaustive_optimum(self):
        rng = np.random.default_rng(13)
        hits = 0
        for trial in range(100):
            n = int(rng.integers(6, 11))
            k = int(rng.integers(2, 4))
            X = rng.standard_normal((n, 2))
            result = kmeans(X, KMeansParams(k=k, restarts=10, seed=trial))
            best = exhaustive_min_inertia(X, k)
            if result.inertia <= best * (1 + 1e-9) + 1e-12:
                hits += 1
        assert hits >= 95


class TestAdjustedRandIndex:
    def test_identical_up_to_relabel(self):
        a = [0, 0, 1, 1, 2, 2]
        b = [2, 2, 0, 0, 1, 1]
        assert adjusted_rand_index(a, b) == pytest.approx(1.0)

    def test_independent_labelings_near_zero(self):
        rng = np.random.default_rng(14)
        vals = [adjusted_rand_index(rng.integers(0, 3, 60), rng.integers(0, 3, 60))
                for _ in range(50)]
        assert abs(float(np.mean(vals))) < 0.05

    def test_bounds(self):
        assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) <= 1.0


def make_blobs(k=6, per=4, d=8, gap=10.0, noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, d))
    centers *= gap / np.linalg.norm(centers[0] - centers[1])
    # spread centers far apart deterministically
    centers = np.eye(k, d) * gap if d >= k else centers
    X = np.concatenate([centers[c] + noise * rng.standard_normal((per, d)) for c in range(k)])
    labels = np.repeat(np.arange(k), per)
    return X, labels


class TestEvaluate:
    def test_planted_blobs_recovered(self):
        X, labels = make_blobs()
        report = evaluate(X, labels, KMeansParams(k=6, restarts=10, seed=0))
        assert report.agreement == pytest.approx(1.0)
        assert report.silhouette_true >= 0.8
        assert report.silhouette_true == report.silhouette_kmeans
        assert report.dbi_true == report.dbi_kmeans

    def test_permuted_kmeans_labels_equal_metrics(self):
        X, labels = make_blobs(seed=3)
        report = evaluate(X, labels, KMeansParams(k=6, restarts=10, seed=5))
        perm_sil = silhouette_score(X, [(v + 3) % 6 for v in report.kmeans_labels])
        assert perm_sil == pytest.approx(report.silhouette_kmeans, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(Exception):
            evaluate(np.zeros((4, 2)), [0, 1])

    def test_normalize_flag(self):
        rng = np.random.default_rng(20)
        X = rng.standard_normal((12, 3)) + 2.0
        labels = np.repeat([0, 1, 2], 4)
        plain = evaluate(X, labels, KMeansParams(k=3, seed=1))
        normalized = evaluate(X, labels, KMeansParams(k=3, seed=1), normalize=True)
        assert normalized.silhouette_true != plain.silhouette_true
