"""Thresholded cosine-similarity graphs over labeled centroids.

Connected components are the unit of analysis; clique/partial/singleton is a
classification of each component, not a mining step. The edge rule is
inclusive: (i, j) is an edge iff sim(i, j) >= tau and i != j.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .semspace import Centroid, SemanticSpan

logger = logging.getLogger(__name__)

# Fixed palette for DOT rendering; communities are colored in sorted order.
_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
]


@dataclass
class GraphNode:
    label: str
    community: str
    cluster: int | None = None


@dataclass
class SimilarityGraph:
    """Labeled nodes, their full cosine matrix, and the tau-thresholded edges."""

    nodes: list[GraphNode]
    sim: np.ndarray  # n x n symmetric, unit diagonal
    tau: float
    edges: list[tuple[int, int]] = field(default_factory=list)  # i < j

    def __post_init__(self) -> None:
        n = len(self.nodes)
        if self.sim.shape != (n, n):
            raise DataError("similarity matrix shape does not match node count")

    @property
    def labels(self) -> list[str]:
        return [node.label for node in self.nodes]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges)


@dataclass
class SubGraph:
    """A connected component with its classification and pooled documents."""

    members: list[int]  # node indices, sorted by label
    kind: str  # "clique" | "partial" | "singleton"
    communities: list[str]
    doc_ids: list[str] = field(default_factory=list)


def build_graph(centroids: Sequence[Centroid], tau: float) -> SimilarityGraph:
    """Pairwise cosine similarities between centroids, edges at sim >= tau."""
    if not centroids:
        return SimilarityGraph(nodes=[], sim=np.zeros((0, 0)), tau=tau, edges=[])
    labels = [c.label for c in centroids]
    if len(set(labels)) != len(labels):
        raise DataError("duplicate centroid labels")
    dims = {c.vector.shape for c in centroids}
    if len(dims) != 1:
        raise DataError(f"centroid dimensions disagree: {sorted(dims)}")
    mat = np.stack([np.asarray(c.vector, dtype=np.float64) for c in centroids])
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise DataError("zero centroid vector")
    unit = mat / norms[:, None]
    sim = unit @ unit.T
    sim = (sim + sim.T) / 2.0
    np.fill_diagonal(sim, 1.0)
    edges = [
        (i, j)
        for i in range(len(centroids))
        for j in range(i + 1, len(centroids))
        if sim[i, j] >= tau
    ]
    nodes = [GraphNode(label=c.label, community=c.community, cluster=c.cluster) for c in centroids]
    return SimilarityGraph(nodes=nodes, sim=sim, tau=tau, edges=edges)


def connected_components(graph: SimilarityGraph) -> list[SubGraph]:
    """Undirected components, each classified clique / partial / singleton.

    Output is ordered by smallest member label; members are label-sorted.
    """
    n = len(graph.nodes)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in graph.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    edge_set = graph.edge_set()
    subs: list[SubGraph] = []
    for members in groups.values():
        members = sorted(members, key=lambda i: graph.nodes[i].label)
        m = len(members)
        if m == 1:
            kind = "singleton"
        else:
            inside = sum(
                1
                for a in range(m)
                for b in range(a + 1, m)
                if (min(members[a], members[b]), max(members[a], members[b])) in edge_set
            )
            kind = "clique" if inside == m * (m - 1) // 2 else "partial"
        communities = sorted({graph.nodes[i].community for i in members})
        subs.append(SubGraph(members=members, kind=kind, communities=communities))
    subs.sort(key=lambda s: graph.nodes[s.members[0]].label)
    return subs


def assign_documents(sub: SubGraph, graph: SimilarityGraph, spans: Mapping[str, SemanticSpan]) -> list[str]:
    """Union of the documents assigned to each member cluster.

    Nodes without a cluster ordinal pool their whole community. Disjointness
    across sub-graphs follows from the component partition.
    """
    docs: list[str] = []
    for i in sub.members:
        node = graph.nodes[i]
        span = spans.get(node.community)
        if span is None:
            raise DataError(f"unknown node label {node.label!r}: no span for its community")
        if node.cluster is None:
            docs.extend(span.assignments.keys())
        else:
            if node.cluster >= span.n_clusters:
                raise DataError(f"unknown node label {node.label!r}: no such cluster")
            docs.extend(d for d, o in span.assignments.items() if o == node.cluster)
    return sorted(docs)


def graph_to_json(graph: SimilarityGraph, subs: Sequence[SubGraph] | None = None) -> dict:
    if subs is None:
        subs = connected_components(graph)
    return {
        "nodes": [{"label": nd.label, "community": nd.community} for nd in graph.nodes],
        "tau": float(graph.tau),
        "sim": [[float(x) for x in row] for row in graph.sim],
        "edges": [[i, j] for i, j in graph.edges],
        "components": [{"members": s.members, "kind": s.kind} for s in subs],
    }


def _cluster_from_label(label: str, community: str) -> int | None:
    if label == community:
        return None
    tail = label[len(community) + 1 :]
    return int(tail) if label.startswith(community + "#") and tail.isdigit() else None


def graph_from_json(obj: dict) -> SimilarityGraph:
    nodes = [
        GraphNode(
            label=str(nd["label"]),
            community=str(nd["community"]),
            cluster=_cluster_from_label(str(nd["label"]), str(nd["community"])),
        )
        for nd in obj["nodes"]
    ]
    return SimilarityGraph(
        nodes=nodes,
        sim=np.asarray(obj["sim"], dtype=np.float64) if nodes else np.zeros((0, 0)),
        tau=float(obj["tau"]),
        edges=[(int(i), int(j)) for i, j in obj["edges"]],
    )


def graph_to_dot(graph: SimilarityGraph, subs: Sequence[SubGraph] | None = None) -> str:
    """Graphviz rendering: nodes colored by community, grouped by component."""
    if subs is None:
        subs = connected_components(graph)
    communities = sorted({nd.community for nd in graph.nodes})
    color = {c: _PALETTE[i % len(_PALETTE)] for i, c in enumerate(communities)}
    lines = ["graph similarity {", '  node [style=filled, fontname="Helvetica"];']
    lines.append(f"  // tau = {graph.tau}")
    for ci, sub in enumerate(subs):
        lines.append(f"  subgraph cluster_{ci} {{")
        lines.append(f'    label="component {ci} ({sub.kind})";')
        for i in sub.members:
            nd = graph.nodes[i]
            lines.append(
                f'    "{nd.label}" [fillcolor="{color[nd.community]}", '
                f'tooltip="{nd.community}"];'
            )
        lines.append("  }")
    for i, j in graph.edges:
        a, b = graph.nodes[i].label, graph.nodes[j].label
        lines.append(f'  "{a}" -- "{b}" [label="{graph.sim[i, j]:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(
    graph: SimilarityGraph,
    subs: Sequence[SubGraph] | None,
    path: str | Path,
    format: str = "dot",
) -> None:
    """Write the graph as DOT or as the documented JSON schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "dot":
        path.write_text(graph_to_dot(graph, subs), encoding="utf-8")
    elif format == "json":
        payload = json.dumps(graph_to_json(graph, subs), indent=2, sort_keys=True) + "\n"
        path.write_text(payload, encoding="utf-8")
    else:
        raise DataError(f"unknown graph format {format!r}")


def tau_sweep(centroids: Sequence[Centroid], taus: Sequence[float]) -> list[dict]:
    """Component/edge counts per threshold; a neutral diagnostic for tau."""
    base = build_graph(centroids, tau=-1.0)  # full matrix, thresholds applied below
    rows = []
    n = len(base.nodes)
    for tau in taus:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if base.sim[i, j] >= tau]
        graph = SimilarityGraph(nodes=base.nodes, sim=base.sim, tau=float(tau), edges=edges)
        subs = connected_components(graph)
        rows.append(
            {
                "tau": float(tau),
                "edges": len(edges),
                "components": len(subs),
                "cliques": sum(1 for s in subs if s.kind == "clique"),
                "partials": sum(1 for s in subs if s.kind == "partial"),
                "singletons": sum(1 for s in subs if s.kind == "singleton"),
            }
        )
    return rows
