"""Geometry of the topic space: centroids, cosine similarity, K-Means spans.

K-Means uses Euclidean distance (Lloyd's algorithm with k-means++ seeding);
cosine similarity is reserved for comparing centroids, mirroring the way the
two metrics are used downstream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """(a . b) / (||a|| ||b||); symmetric and invariant to positive scaling."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"vectors must share one dimension, got {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DataError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


@dataclass
class Centroid:
    """A labeled point in the topic space with its supporting document count."""

    vector: np.ndarray
    community: str
    cluster: int | None = None  # ordinal within the community's span
    support: int = 1

    @property
    def label(self) -> str:
        if self.cluster is None:
            return self.community
        return f"{self.community}#{self.cluster}"


def community_centroid(rows: np.ndarray, community: str = "") -> Centroid:
    """Coordinate-wise mean of one community's document vectors."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DataError("community_centroid needs at least one row")
    return Centroid(vector=rows.mean(axis=0), community=community, support=rows.shape[0])


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (
        np.sum(points * points, axis=1)[:, None]
        + np.sum(centers * centers, axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(d, 0.0)


def _pairwise_dists(points: np.ndarray) -> np.ndarray:
    # Exact difference form: the expanded x^2 + y^2 - 2xy loses digits we
    # need when matching brute-force evaluations.
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _kmeans_pp(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((c, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = _sq_dists(points, centers[:1]).ravel()
    for j in range(1, c):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # duplicates everywhere: any point works
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, _sq_dists(points, centers[j : j + 1]).ravel())
    return centers


def _repair_empty(points, centers, assign, dists):
    """Re-seed each empty cluster to the farthest point of a cluster that can
    spare one, and pin that point there. Returns True if anything changed."""
    c = centers.shape[0]
    sizes = np.bincount(assign, minlength=c)
    changed = False
    for j in range(c):
        if sizes[j] > 0:
            continue
        own = dists[np.arange(len(assign)), assign]
        eligible = sizes[assign] >= 2
        if not np.any(eligible):
            continue  # unreachable for c <= N, kept defensive
        own = np.where(eligible, own, -1.0)
        pick = int(np.argmax(own))
        sizes[assign[pick]] -= 1
        assign[pick] = j
        sizes[j] += 1
        centers[j] = points[pick]
        changed = True
    return changed


def _lloyd(points: np.ndarray, c: int, rng: np.random.Generator, max_iter: int = 300):
    centers = _kmeans_pp(points, c, rng)
    assign = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        dists = _sq_dists(points, centers)
        assign = np.argmin(dists, axis=1)
        repaired = _repair_empty(points, centers, assign, dists)
        new_centers = np.empty_like(centers)
        for j in range(c):
            new_centers[j] = points[assign == j].mean(axis=0)
        if not repaired and np.array_equal(new_centers, centers):
            break
        centers = new_centers
    final = _sq_dists(points, centers)
    inert = float(final[np.arange(len(assign)), assign].sum())
    return centers, assign, inert


def kmeans(
    points: np.ndarray,
    c: int,
    seed,
    restarts: int = 1,
    max_iter: int = 300,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm, best of `restarts` k-means++ runs by final inertia.

    Ties keep the earliest restart. Every point ends assigned to its nearest
    returned centroid and no cluster is empty.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DataError("kmeans needs a non-empty 2-D point matrix")
    n = points.shape[0]
    if not 1 <= c <= n:
        raise DataError(f"cluster count {c} outside [1, {n}]")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers, assign, inert = _lloyd(points, c, rng, max_iter)
        if best is None or inert < best[2]:
            best = (centers, assign, inert)
    return best[0], best[1]


def inertia(points: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of squared distances of points to their assigned centroids."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    assignments = np.asarray(assignments)
    if points.shape[0] != assignments.shape[0]:
        raise DataError("points and assignments disagree")
    diff = points - centroids[assignments]
    return float(np.sum(diff * diff))


def _cluster_members(assignments: np.ndarray) -> list[np.ndarray]:
    labels = np.unique(assignments)
    return [np.nonzero(assignments == lab)[0] for lab in labels]


def calinski_harabasz(points: np.ndarray, assignments: np.ndarray) -> float:
    """(BGSS / (C-1)) / (WGSS / (N-C)).

    Degenerate conventions: 0.0 when all cluster means coincide with the
    global mean (BGSS = 0); +inf when clusters are internally exact
    (WGSS = 0) yet separated.
    """
    points = np.asarray(points, dtype=np.float64)
    assignments = np.asarray(assignments)
    members = _cluster_members(assignments)
    n, c = points.shape[0], len(members)
    if c < 2:
        raise DataError("calinski_harabasz needs at least 2 clusters")
    if n <= c:
        raise DataError("calinski_harabasz needs more points than clusters")
    mu = points.mean(axis=0)
    bgss = 0.0
    wgss = 0.0
    for idx in members:
        center = points[idx].mean(axis=0)
        bgss += len(idx) * float(np.sum((center - mu) ** 2))
        wgss += float(np.sum((points[idx] - center) ** 2))
    if bgss == 0.0:
        return 0.0
    if wgss == 0.0:
        return float("inf")
    return (bgss / (c - 1)) / (wgss / (n - c))


def silhouette(
    points: np.ndarray,
    assignments: np.ndarray,
    dists: np.ndarray | None = None,
) -> float:
    """Mean over points of (b - a) / max(a, b).

    a is the mean intra-cluster distance excluding self; b the smallest mean
    distance to another cluster. Points in singleton clusters, and points
    with a = b = 0, score 0 by convention.
    """
    points = np.asarray(points, dtype=np.float64)
    assignments = np.asarray(assignments)
    members = _cluster_members(assignments)
    if len(members) < 2:
        raise DataError("silhouette needs at least 2 clusters")
    n = points.shape[0]
    if dists is None:
        dists = _pairwise_dists(points)
    labels = np.unique(assignments)
    label_pos = {lab: i for i, lab in enumerate(labels)}
    sums = np.stack([dists[:, idx].sum(axis=1) for idx in members], axis=1)
    sizes = np.array([len(idx) for idx in members], dtype=float)
    own = np.array([label_pos[lab] for lab in assignments])

    scores = np.zeros(n)
    for i in range(n):
        j = own[i]
        if sizes[j] < 2:
            continue  # singleton convention
        a = sums[i, j] / (sizes[j] - 1)
        other = [sums[i, m] / sizes[m] for m in range(len(members)) if m != j]
        b = min(other)
        denom = max(a, b)
        if denom > 0:
            scores[i] = (b - a) / denom
    return float(scores.mean())


@dataclass
class CandidateMetrics:
    c: int
    inertia: float
    calinski: float
    silhouette: float


@dataclass
class ClusterSelection:
    """Metric table over candidate cluster counts plus the applied rule."""

    c_min: int
    c_max: int
    chosen: int
    rule: str
    table: list[CandidateMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "c_min": self.c_min,
            "c_max": self.c_max,
            "chosen": self.chosen,
            "rule": self.rule,
            "table": [
                {
                    "c": m.c,
                    "inertia": m.inertia,
                    "calinski": m.calinski,
                    "silhouette": m.silhouette,
                }
                for m in self.table
            ],
        }


SELECTION_RULE = "argmax silhouette; ties: higher calinski, then smaller c"


def select_cluster_count(
    points: np.ndarray,
    c_min: int,
    c_max: int,
    seed: int,
    restarts: int = 1,
) -> ClusterSelection:
    """Run kmeans per candidate count and pick by the silhouette rule.

    The inertia column is recorded as an elbow diagnostic only; it does not
    participate in the choice.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not (2 <= c_min <= c_max < n):
        raise DataError(f"candidate range [{c_min}, {c_max}] invalid for {n} points")
    dists = _pairwise_dists(points)
    table: list[CandidateMetrics] = []
    for c in range(c_min, c_max + 1):
        centers, assign = kmeans(points, c, seed=[seed, c], restarts=restarts)
        table.append(
            CandidateMetrics(
                c=c,
                inertia=inertia(points, centers, assign),
                calinski=calinski_harabasz(points, assign),
                silhouette=silhouette(points, assign, dists=dists),
            )
        )
    ranked = sorted(table, key=lambda m: (-m.silhouette, -m.calinski, m.c))
    return ClusterSelection(
        c_min=c_min, c_max=c_max, chosen=ranked[0].c, rule=SELECTION_RULE, table=table
    )


@dataclass
class SemanticSpan:
    """One community's c x k matrix of cluster centroids and its assignments."""

    community: str
    centroids: np.ndarray  # c x k
    assignments: dict[str, int]  # document id -> cluster ordinal
    selection: ClusterSelection

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def cluster_sizes(self) -> list[int]:
        sizes = [0] * self.n_clusters
        for ordinal in self.assignments.values():
            sizes[ordinal] += 1
        return sizes

    def as_centroids(self) -> list[Centroid]:
        sizes = self.cluster_sizes()
        return [
            Centroid(vector=self.centroids[j], community=self.community, cluster=j, support=sizes[j])
            for j in range(self.n_clusters)
        ]

    def to_dict(self) -> dict:
        return {
            "community": self.community,
            "clusters": self.n_clusters,
            "centroids": [[float(x) for x in row] for row in self.centroids],
            "assignments": dict(sorted(self.assignments.items())),
            "selection": self.selection.to_dict(),
        }


def semantic_span(
    theta_rows: np.ndarray,
    community: str,
    doc_ids: Sequence[str],
    c_min: int = 2,
    c_max: int = 10,
    seed: int = 0,
    restarts: int = 1,
) -> SemanticSpan:
    """Cluster one community's document vectors into its semantic span.

    Communities too small for the candidate range, or whose best silhouette
    shows no structure (<= 0), fall back to a single-centroid span.
    """
    points = np.asarray(theta_rows, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DataError(f"community {community!r} has no documents")
    if points.shape[0] != len(doc_ids):
        raise DataError("theta rows and doc ids disagree")
    n = points.shape[0]

    eff_max = min(c_max, n - 1)
    if eff_max < c_min:
        logger.warning(
            "community %r: %d document(s) cannot support %d clusters; using a single centroid",
            community, n, c_min,
        )
        selection = ClusterSelection(
            c_min=c_min, c_max=c_max, chosen=1,
            rule="fallback: community smaller than candidate range",
        )
        return SemanticSpan(
            community=community,
            centroids=points.mean(axis=0, keepdims=True),
            assignments={d: 0 for d in doc_ids},
            selection=selection,
        )

    selection = select_cluster_count(points, c_min, eff_max, seed=seed, restarts=restarts)
    best = max(m.silhouette for m in selection.table)
    if best <= 0.0:
        logger.warning(
            "community %r: degenerate clustering (best silhouette %.3f); using a single centroid",
            community, best,
        )
        selection = ClusterSelection(
            c_min=selection.c_min, c_max=selection.c_max, chosen=1,
            rule="fallback: no silhouette structure", table=selection.table,
        )
        return SemanticSpan(
            community=community,
            centroids=points.mean(axis=0, keepdims=True),
            assignments={d: 0 for d in doc_ids},
            selection=selection,
        )

    centers, assign = kmeans(
        points, selection.chosen, seed=[seed, selection.chosen], restarts=restarts
    )
    return SemanticSpan(
        community=community,
        centroids=centers,
        assignments={d: int(a) for d, a in zip(doc_ids, assign)},
        selection=selection,
    )
