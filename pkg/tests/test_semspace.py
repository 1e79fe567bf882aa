import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import (
    best_two_partition,
    calinski_brute,
    inertia_brute,
    silhouette_brute,
)
from topicspan.errors import DataError
from topicspan.semspace import (
    calinski_harabasz,
    community_centroid,
    cosine_sim,
    inertia,
    kmeans,
    select_cluster_count,
    semantic_span,
    silhouette,
)

TWO_PAIRS = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
TWO_PAIRS_ASSIGN = np.array([0, 0, 1, 1])


def test_cosine_hand_values():
    assert cosine_sim(np.array([2.0, 3.0]), np.array([2.0, 3.0])) == pytest.approx(1.0, abs=1e-12)
    assert cosine_sim(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0, abs=1e-12)
    assert cosine_sim(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(
        1 / math.sqrt(2), abs=1e-12
    )


def test_cosine_zero_vector_errors():
    with pytest.raises(DataError, match="zero vector"):
        cosine_sim(np.zeros(3), np.ones(3))


def test_cosine_length_mismatch_errors():
    with pytest.raises(DataError):
        cosine_sim(np.ones(2), np.ones(3))


@given(
    st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=6),
    st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=6),
    st.floats(min_value=0.01, max_value=100),
)
def test_cosine_symmetry_and_positive_scale_invariance(a, b, scale):
    size = min(len(a), len(b))
    x = np.array(a[:size])
    y = np.array(b[:size])
    if np.linalg.norm(x) == 0 or np.linalg.norm(y) == 0:
        return
    assert cosine_sim(x, y) == pytest.approx(cosine_sim(y, x), abs=1e-12)
    assert cosine_sim(scale * x, y) == pytest.approx(cosine_sim(x, y), abs=1e-9)
    assert abs(cosine_sim(x, y)) <= 1 + 1e-12


def test_cosine_nonnegative_on_simplex_rows():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.dirichlet(np.ones(5))
        y = rng.dirichlet(np.ones(5))
        assert cosine_sim(x, y) >= 0.0


def test_centroid_single_row():
    c = community_centroid(np.array([[0.2, 0.8]]), community="A")
    assert np.array_equal(c.vector, [0.2, 0.8])
    assert c.support == 1
    assert c.label == "A"


def test_centroid_symmetry():
    c = community_centroid(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(c.vector, [0.5, 0.5], atol=1e-15)


def test_centroid_matches_brute_sum():
    rng = np.random.default_rng(2)
    rows = rng.dirichlet(np.ones(4), size=3)
    c = community_centroid(rows)
    brute = [sum(rows[i][d] for i in range(3)) / 3 for d in range(4)]
    assert np.allclose(c.vector, brute, atol=1e-12)
    assert c.vector.sum() == pytest.approx(1.0, abs=1e-9)


def test_centroid_empty_errors():
    with pytest.raises(DataError):
        community_centroid(np.zeros((0, 3)))


def test_kmeans_saturated_c_equals_n():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
    centers, assign = kmeans(points, c=3, seed=0)
    assert inertia(points, centers, assign) == 0.0
    assert sorted(map(tuple, centers.tolist())) == sorted(map(tuple, points.tolist()))


def test_kmeans_two_pairs_matches_exhaustive_partition():
    best_inertia, best_centers = best_two_partition(TWO_PAIRS.tolist())
    centers, assign = kmeans(TWO_PAIRS, c=2, seed=3, restarts=4)
    assert inertia(TWO_PAIRS, centers, assign) == pytest.approx(best_inertia, abs=1e-12)
    assert sorted(map(tuple, centers.tolist())) == sorted(map(tuple, best_centers))
    assert inertia(TWO_PAIRS, centers, assign) == pytest.approx(1.0, abs=1e-12)


def test_kmeans_c1_is_global_mean():
    rng = np.random.default_rng(4)
    points = rng.random((20, 3))
    centers, assign = kmeans(points, c=1, seed=0)
    assert np.allclose(centers[0], points.mean(axis=0), atol=1e-12)
    assert np.all(assign == 0)


def test_kmeans_rejects_bad_c():
    points = np.zeros((3, 2))
    with pytest.raises(DataError):
        kmeans(points, c=4, seed=0)
    with pytest.raises(DataError):
        kmeans(points, c=0, seed=0)


def test_kmeans_nearest_centroid_consistency_and_nonempty():
    rng = np.random.default_rng(5)
    for trial in range(10):
        points = rng.random((30, 4))
        c = 2 + trial % 5
        centers, assign = kmeans(points, c=c, seed=trial, restarts=2)
        assert len(np.unique(assign)) == c
        d = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        own = d[np.arange(len(points)), assign]
        assert np.all(own <= d.min(axis=1) + 1e-9)


def test_kmeans_deterministic_given_seed():
    rng = np.random.default_rng(6)
    points = rng.random((25, 3))
    a = kmeans(points, c=4, seed=11, restarts=3)
    b = kmeans(points, c=4, seed=11, restarts=3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_kmeans_identical_points_keeps_clusters_nonempty():
    points = np.zeros((6, 2))
    centers, assign = kmeans(points, c=3, seed=0)
    assert len(np.unique(assign)) == 3


def test_lloyd_inertia_never_increases_across_iterations():
    from topicspan.semspace import _kmeans_pp, _sq_dists

    rng = np.random.default_rng(14)
    points = rng.random((40, 3))
    centers = _kmeans_pp(points, 4, np.random.default_rng(2))
    previous = None
    for _ in range(20):
        dists = _sq_dists(points, centers)
        assign = dists.argmin(axis=1)
        value = float(dists[np.arange(len(points)), assign].sum())
        if previous is not None:
            assert value <= previous + 1e-9
        previous = value
        centers = np.stack(
            [
                points[assign == j].mean(axis=0) if np.any(assign == j) else centers[j]
                for j in range(4)
            ]
        )


def test_select_cluster_count_invariant_to_point_order_on_tiny_instance():
    # Enough restarts that every distinct seeding of the 4-point instance is
    # reachable; the selected count and centroid set must not depend on row
    # order.
    base = select_cluster_count(TWO_PAIRS, c_min=2, c_max=3, seed=5, restarts=16)
    perm = [2, 0, 3, 1]
    permuted = select_cluster_count(TWO_PAIRS[perm], c_min=2, c_max=3, seed=6, restarts=16)
    assert base.chosen == permuted.chosen == 2
    a, _ = kmeans(TWO_PAIRS, base.chosen, seed=[5, base.chosen], restarts=16)
    b, _ = kmeans(TWO_PAIRS[perm], permuted.chosen, seed=[6, permuted.chosen], restarts=16)
    assert sorted(map(tuple, a.tolist())) == sorted(map(tuple, b.tolist()))


def test_inertia_hand_values():
    assert inertia(TWO_PAIRS, np.array([[0.0, 0.5], [10.0, 0.5]]), TWO_PAIRS_ASSIGN) == pytest.approx(1.0, abs=1e-12)
    pts = np.array([[1.0, 1.0], [2.0, 2.0]])
    assert inertia(pts, pts, np.array([0, 1])) == 0.0


def test_calinski_two_pairs_is_200():
    assert calinski_harabasz(TWO_PAIRS, TWO_PAIRS_ASSIGN) == pytest.approx(200.0, abs=1e-12)


def test_calinski_zero_when_cluster_means_coincide():
    points = np.array([[0.0, 0.0], [2.0, 2.0], [0.0, 2.0], [2.0, 0.0]])
    assign = np.array([0, 0, 1, 1])  # both cluster means equal the global mean
    assert calinski_harabasz(points, assign) == 0.0


def test_calinski_rejects_degenerate_partitions():
    points = np.array([[0.0], [1.0], [2.0]])
    with pytest.raises(DataError):
        calinski_harabasz(points, np.array([0, 0, 0]))
    with pytest.raises(DataError):
        calinski_harabasz(points, np.array([0, 1, 2]))  # C == N


def test_silhouette_two_pairs_value():
    value = silhouette(TWO_PAIRS, TWO_PAIRS_ASSIGN)
    a = 1.0
    b = (10.0 + math.sqrt(101.0)) / 2.0
    expected = (b - a) / b
    assert value == pytest.approx(expected, abs=1e-12)
    assert value == pytest.approx(0.900, abs=1e-3)


def test_silhouette_tight_cluster_far_apart_tends_to_one():
    points = np.array([[0.0, 0.0]] * 5 + [[100.0, 0.0]] * 2)
    assign = np.array([0] * 5 + [1] * 2)
    value = silhouette(points, assign)
    scores_first_cluster = 1.0  # a = 0, b = 100
    assert value == pytest.approx((5 * scores_first_cluster + 2 * 1.0) / 7, abs=1e-9)


def test_silhouette_random_labels_near_zero():
    rng = np.random.default_rng(8)
    values = []
    for _ in range(50):
        points = rng.random((12, 2))
        assign = rng.integers(0, 3, size=12)
        if len(np.unique(assign)) < 2:
            continue
        values.append(silhouette(points, assign))
    assert abs(np.mean(values)) < 0.2


def test_silhouette_single_cluster_errors():
    with pytest.raises(DataError):
        silhouette(TWO_PAIRS, np.zeros(4, dtype=int))


def test_metrics_match_brute_force_on_random_instances():
    rng = np.random.default_rng(9)
    for _ in range(25):
        n = int(rng.integers(4, 13))
        points = rng.random((n, int(rng.integers(1, 4))))
        c = int(rng.integers(2, min(n, 5)))
        assign = rng.integers(0, c, size=n)
        if len(np.unique(assign)) < 2 or len(np.unique(assign)) >= n:
            continue
        plist = points.tolist()
        alist = assign.tolist()
        assert calinski_harabasz(points, assign) == pytest.approx(
            calinski_brute(plist, alist), abs=1e-9, rel=1e-9
        )
        assert silhouette(points, assign) == pytest.approx(
            silhouette_brute(plist, alist), abs=1e-9
        )
        centers = np.stack([points[assign == lab].mean(axis=0) for lab in np.unique(assign)])
        relabel = {lab: i for i, lab in enumerate(np.unique(assign))}
        dense = np.array([relabel[a] for a in alist])
        assert inertia(points, centers, dense) == pytest.approx(
            inertia_brute(plist, centers.tolist(), dense.tolist()), abs=1e-9
        )


def blobs(rng, centers, n_each, sigma):
    pts = []
    for cx in centers:
        pts.append(rng.normal(loc=cx, scale=sigma, size=(n_each, len(cx))))
    return np.vstack(pts)


def test_select_cluster_count_finds_planted_blobs():
    rng = np.random.default_rng(10)
    points = blobs(rng, [(0, 0), (0, 1), (1, 0), (1, 1)], n_each=25, sigma=0.03)
    selection = select_cluster_count(points, c_min=2, c_max=8, seed=1, restarts=4)
    assert selection.chosen == 4
    assert len(selection.table) == 7
    assert all(m.inertia >= 0 for m in selection.table)


def test_select_cluster_count_coincident_distributions():
    rng = np.random.default_rng(11)
    points = np.vstack(
        [
            rng.normal(loc=(0, 0), scale=0.01, size=(20, 2)),  # two "planted" groups
            rng.normal(loc=(0, 0), scale=0.01, size=(20, 2)),  # at the same location
            rng.normal(loc=(5, 5), scale=0.01, size=(20, 2)),
        ]
    )
    selection = select_cluster_count(points, c_min=2, c_max=4, seed=2, restarts=4)
    assert selection.chosen == 2


def test_select_cluster_count_invalid_range():
    points = np.random.default_rng(0).random((5, 2))
    with pytest.raises(DataError):
        select_cluster_count(points, c_min=2, c_max=5, seed=0)
    with pytest.raises(DataError):
        select_cluster_count(points, c_min=1, c_max=3, seed=0)


def test_semantic_span_identical_documents_falls_back():
    rows = np.tile([0.25, 0.25, 0.5], (8, 1))
    span = semantic_span(rows, "A", [f"d{i}" for i in range(8)], seed=0)
    assert span.n_clusters == 1
    assert np.allclose(span.centroids[0], [0.25, 0.25, 0.5])
    assert span.selection.chosen == 1
    assert "fallback" in span.selection.rule
    assert set(span.assignments.values()) == {0}


def test_semantic_span_small_community_falls_back():
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    span = semantic_span(rows, "tiny", ["a", "b"], c_min=2, c_max=10, seed=0)
    assert span.n_clusters == 1
    assert np.allclose(span.centroids[0], [0.5, 0.5])


def test_semantic_span_two_planted_qualities():
    rng = np.random.default_rng(12)
    k = 5
    q0 = np.array([0.9, 0.025, 0.025, 0.025, 0.025])
    q1 = np.array([0.025, 0.9, 0.025, 0.025, 0.025])
    rows = []
    for base in (q0, q1):
        noisy = base + rng.normal(scale=0.01, size=(30, k))
        noisy = np.abs(noisy)
        rows.append(noisy / noisy.sum(axis=1, keepdims=True))
    rows = np.vstack(rows)
    ids = [f"d{i}" for i in range(60)]
    span = semantic_span(rows, "A", ids, c_min=2, c_max=6, seed=3, restarts=4)
    assert span.centroids.shape == (2, k)
    tv0 = 0.5 * np.abs(span.centroids - q0).sum(axis=1).min()
    tv1 = 0.5 * np.abs(span.centroids - q1).sum(axis=1).min()
    assert tv0 < 0.1 and tv1 < 0.1
    sizes = span.cluster_sizes()
    assert sorted(sizes) == [30, 30]


def test_semantic_span_labels_and_shape():
    rng = np.random.default_rng(13)
    rows = rng.dirichlet(np.ones(4), size=40)
    span = semantic_span(rows, "B", [f"x{i}" for i in range(40)], c_min=2, c_max=5, seed=4)
    assert span.centroids.shape[1] == 4
    labels = [c.label for c in span.as_centroids()]
    assert labels == [f"B#{j}" for j in range(span.n_clusters)]
    assert all(s >= 1 for s in span.cluster_sizes())
