"""End-to-end experiment pipelines and their on-disk reports.

Every report body is a pure function of (input file, config): no timestamps,
sorted JSON keys, floats serialized by repr. Rerunning a command with the
same inputs and seed reproduces each artifact byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .config import PipelineConfig, stable_seed
from .corpus import Corpus, load_jsonl, summarize
from .errors import DataError
from .semspace import Centroid, SemanticSpan, community_centroid, semantic_span
from .simgraph import (
    SimilarityGraph,
    assign_documents,
    build_graph,
    connected_components,
    export_graph,
    tau_sweep,
)
from .text import (
    DocTermMatrix,
    TfidfMatrix,
    Vocabulary,
    build_vocabulary,
    tfidf,
    tokenize,
    top_terms,
    vectorize_counts,
)
from .topics import DocTopicMatrix, LdaModel, fit_lda, infer_theta, perplexity

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "community",
    "posts_per_year_mean",
    "posts_per_year_std",
    "total_posts",
    "tokens_per_post_mean",
    "tokens_per_post_std",
    "total_tokens",
]


@dataclass
class SemanticSpace:
    """Everything derived from the corpus up to the document-topic matrix."""

    corpus: Corpus
    vocab: Vocabulary
    counts: DocTermMatrix
    weights: TfidfMatrix
    model: LdaModel
    theta: DocTopicMatrix


def _json_bytes(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_json_bytes(obj), encoding="utf-8")


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def format_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def provenance(cfg: PipelineConfig, corpus: Corpus) -> dict:
    return {
        "artifact": f"topicspan {__version__}",
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "input": cfg.input,
        "corpus_fingerprint": corpus.fingerprint(),
        "documents": len(corpus),
        "communities": list(corpus.communities),
    }


def load_corpus(cfg: PipelineConfig, strict: bool = False) -> Corpus:
    if not cfg.input:
        raise DataError("no input corpus configured")
    corpus = load_jsonl(cfg.input, strict=strict)
    if len(corpus) == 0:
        raise DataError(f"{cfg.input}: no valid submissions")
    return corpus


def build_space(cfg: PipelineConfig, corpus: Corpus) -> SemanticSpace:
    """tokenize -> vocabulary -> counts -> LDA -> document-topic matrix.

    The fitted model is cached under <output_dir>/cache and reused when the
    vocabulary hash and sampler parameters match.
    """
    tok = cfg.tokenizer()
    docs = [tokenize(sub.body, tok) for sub in corpus]
    vocab = build_vocabulary(docs, cfg.min_df, cfg.max_df_ratio, config_hash=tok.config_hash())
    doc_ids = [sub.id for sub in corpus]
    counts = vectorize_counts(docs, vocab, doc_ids=doc_ids)
    weights = tfidf(counts)
    model = _fit_or_load_model(cfg, vocab, counts)
    theta = infer_theta(
        model,
        counts,
        iterations=cfg.infer_iterations,
        seed=stable_seed(cfg.seed, "infer"),
        communities=[sub.community for sub in corpus],
        average_over=cfg.average_over,
    )
    return SemanticSpace(corpus=corpus, vocab=vocab, counts=counts, weights=weights, model=model, theta=theta)


def _fit_or_load_model(cfg: PipelineConfig, vocab: Vocabulary, counts: DocTermMatrix) -> LdaModel:
    cache = Path(cfg.output_dir) / "cache" / "model.json"
    vhash = vocab.vocab_hash()
    if cache.exists():
        try:
            model = LdaModel.load(cache, expect_vocab_hash=vhash)
        except DataError as exc:
            logger.warning("ignoring cached model: %s", exc)
        else:
            if (
                model.k == cfg.k
                and model.alpha == cfg.effective_alpha()
                and model.beta == cfg.beta
                and model.iterations == cfg.fit_iterations
                and model.seed == cfg.seed
                and model.chains == cfg.chains
            ):
                logger.info("reusing cached topic model %s", cache)
                return model
            logger.warning("cached model parameters differ; refitting")
    model = fit_lda(
        counts,
        k=cfg.k,
        alpha=cfg.effective_alpha(),
        beta=cfg.beta,
        iterations=cfg.fit_iterations,
        seed=cfg.seed,
        average_over=cfg.average_over,
        chains=cfg.chains,
        vocab_hash=vhash,
    )
    model.save(cache)
    vocab.save(Path(cfg.output_dir) / "cache" / "vocabulary.json")
    return model


def community_centroids(theta: DocTopicMatrix, communities: list[str]) -> list[Centroid]:
    return [community_centroid(theta.rows_for(c), community=c) for c in communities]


def build_spans(cfg: PipelineConfig, theta: DocTopicMatrix, communities: list[str]) -> dict[str, SemanticSpan]:
    spans: dict[str, SemanticSpan] = {}
    for community in communities:
        spans[community] = semantic_span(
            theta.rows_for(community),
            community=community,
            doc_ids=theta.ids_for(community),
            c_min=cfg.c_min,
            c_max=cfg.c_max,
            seed=stable_seed(cfg.seed, "span", community),
            restarts=cfg.restarts,
        )
    return spans


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def run_summarize(cfg: PipelineConfig) -> dict:
    corpus = load_corpus(cfg)
    rows = summarize(corpus, cfg.tokenizer())
    out = Path(cfg.output_dir)
    payload = {
        "provenance": provenance(cfg, corpus),
        "columns": SUMMARY_COLUMNS,
        "summaries": [
            {
                "community": r.community,
                "posts_per_year_mean": r.posts_per_year_mean,
                "posts_per_year_std": r.posts_per_year_std,
                "total_posts": r.total_posts,
                "tokens_per_post_mean": r.tokens_per_post_mean,
                "tokens_per_post_std": r.tokens_per_post_std,
                "total_tokens": r.total_tokens,
            }
            for r in rows
        ],
    }
    write_json(out / "summary.json", payload)
    header = [
        "Community", "Mean posts per year", "Total posts",
        "Mean tokens per post", "Total tokens",
    ]
    table_rows = [
        [
            r.community,
            f"{r.posts_per_year_mean:.1f} ({r.posts_per_year_std:.1f})",
            str(r.total_posts),
            f"{r.tokens_per_post_mean:.1f} ({r.tokens_per_post_std:.1f})",
            str(r.total_tokens),
        ]
        for r in rows
    ]
    write_text(out / "summary.txt", format_table(header, table_rows))
    return payload


def run_exp1(cfg: PipelineConfig) -> dict:
    """Community centroids compared in the shared topic space."""
    corpus = load_corpus(cfg)
    if len(corpus.communities) < 2:
        raise DataError("experiment 1 needs at least 2 communities")
    space = build_space(cfg, corpus)
    centroids = community_centroids(space.theta, corpus.communities)
    graph = build_graph(centroids, tau=cfg.tau_exp1)
    subs = connected_components(graph)

    out = Path(cfg.output_dir) / "exp1"
    export_graph(graph, subs, out / "graph.json", format="json")
    export_graph(graph, subs, out / "graph.dot", format="dot")
    report = {
        "report": "exp1",
        "provenance": provenance(cfg, corpus),
        "tau": cfg.tau_exp1,
        "nodes": [
            {"label": c.label, "community": c.community, "support": c.support}
            for c in centroids
        ],
        "similarity": [[float(x) for x in row] for row in graph.sim],
        "components": [
            {
                "members": [graph.nodes[i].label for i in s.members],
                "kind": s.kind,
                "communities": s.communities,
            }
            for s in subs
        ],
    }
    write_json(out / "report.json", report)
    write_text(out / "report.txt", _render_exp1_text(report))
    return report


def _render_exp1_text(report: dict) -> str:
    lines = ["experiment 1: community centroid similarity", ""]
    prov = report["provenance"]
    lines.append(f"config hash : {prov['config_hash']}")
    lines.append(f"seed        : {prov['seed']}")
    lines.append(f"corpus      : {prov['corpus_fingerprint']} ({prov['documents']} documents)")
    lines.append(f"tau         : {report['tau']}")
    lines.append("")
    labels = [n["label"] for n in report["nodes"]]
    header = ["community"] + labels
    rows = [
        [labels[i]] + [f"{report['similarity'][i][j]:.4f}" for j in range(len(labels))]
        for i in range(len(labels))
    ]
    lines.append(format_table(header, rows))
    lines.append("components:")
    for s in report["components"]:
        lines.append(f"  [{s['kind']}] " + ", ".join(s["members"]))
    return "\n".join(lines) + "\n"


def run_exp2(cfg: PipelineConfig) -> dict:
    """Per-community semantic spans, pooled similarity graph, labeled sub-graphs."""
    corpus = load_corpus(cfg)
    space = build_space(cfg, corpus)
    spans = build_spans(cfg, space.theta, corpus.communities)

    out = Path(cfg.output_dir) / "exp2"
    for community, span in spans.items():
        write_json(out / "spans" / f"{community}.json", span.to_dict())
        _write_metrics_csv(out / "metrics" / f"{community}.csv", span)

    pooled: list[Centroid] = []
    for community in corpus.communities:
        pooled.extend(spans[community].as_centroids())
    graph = build_graph(pooled, tau=cfg.tau_all)
    subs = connected_components(graph)
    for sub in subs:
        sub.doc_ids = assign_documents(sub, graph, spans)
    export_graph(graph, subs, out / "graph.json", format="json")
    export_graph(graph, subs, out / "graph.dot", format="dot")

    components = []
    for sub in subs:
        terms = top_terms(sub.doc_ids, space.weights, space.vocab, n=cfg.top_words)
        components.append(
            {
                "members": [graph.nodes[i].label for i in sub.members],
                "kind": sub.kind,
                "communities": sub.communities,
                "documents": len(sub.doc_ids),
                "top_terms": [[t, s] for t, s in terms],
            }
        )

    pairs = _pairwise_overlaps(cfg, corpus.communities, spans, out)
    report = {
        "report": "exp2",
        "provenance": provenance(cfg, corpus),
        "tau_all": cfg.tau_all,
        "tau_span": cfg.tau_span,
        "spans": {
            c: {
                "clusters": spans[c].n_clusters,
                "sizes": spans[c].cluster_sizes(),
                "selection": spans[c].selection.to_dict(),
            }
            for c in corpus.communities
        },
        "nodes": [
            {"label": c.label, "community": c.community, "support": c.support}
            for c in pooled
        ],
        "similarity": [[float(x) for x in row] for row in graph.sim],
        "components": components,
        "pairs": pairs,
    }
    write_json(out / "report.json", report)
    write_text(out / "report.txt", _render_exp2_text(report))
    return report


def _write_metrics_csv(path: Path, span: SemanticSpan) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["c", "inertia", "calinski", "silhouette"])
        for m in span.selection.table:
            writer.writerow([m.c, repr(m.inertia), repr(m.calinski), repr(m.silhouette)])
        writer.writerow(["chosen", span.selection.chosen, "", ""])


def _pairwise_overlaps(cfg, communities, spans, out: Path) -> list[dict]:
    """Two-community overlap graphs at tau_span, one file pair per pair."""
    pairs = []
    for i, a in enumerate(communities):
        for b in communities[i + 1 :]:
            centroids = spans[a].as_centroids() + spans[b].as_centroids()
            graph = build_graph(centroids, tau=cfg.tau_span)
            subs = connected_components(graph)
            stem = out / "pairs" / f"{a}__{b}"
            export_graph(graph, subs, stem.with_suffix(".json"), format="json")
            export_graph(graph, subs, stem.with_suffix(".dot"), format="dot")
            pairs.append(
                {
                    "a": a,
                    "b": b,
                    "edges": len(graph.edges),
                    "components": len(subs),
                    "cross_edges": sum(
                        1
                        for x, y in graph.edges
                        if graph.nodes[x].community != graph.nodes[y].community
                    ),
                }
            )
    return pairs


def _render_exp2_text(report: dict) -> str:
    lines = ["experiment 2: semantic span similarity", ""]
    prov = report["provenance"]
    lines.append(f"config hash : {prov['config_hash']}")
    lines.append(f"seed        : {prov['seed']}")
    lines.append(f"corpus      : {prov['corpus_fingerprint']} ({prov['documents']} documents)")
    lines.append(f"tau (all)   : {report['tau_all']}")
    lines.append(f"tau (pairs) : {report['tau_span']}")
    lines.append("")
    lines.append("spans:")
    for community, info in report["spans"].items():
        lines.append(
            f"  {community}: {info['clusters']} cluster(s), sizes {info['sizes']}"
        )
    lines.append("")
    header = ["sub-graph", "kind", "communities", "docs", "top terms"]
    rows = []
    for i, s in enumerate(report["components"], 1):
        rows.append(
            [
                str(i),
                s["kind"],
                ", ".join(s["communities"]),
                str(s["documents"]),
                ", ".join(t for t, _ in s["top_terms"]),
            ]
        )
    lines.append(format_table(header, rows))
    return "\n".join(lines) + "\n"


def run_fit_topics(cfg: PipelineConfig) -> dict:
    """Fit (or reuse) the topic model and report a perplexity diagnostic."""
    corpus = load_corpus(cfg)
    space = build_space(cfg, corpus)
    report = {
        "report": "fit-topics",
        "provenance": provenance(cfg, corpus),
        "k": space.model.k,
        "alpha": space.model.alpha,
        "beta": space.model.beta,
        "iterations": space.model.iterations,
        "vocabulary_size": len(space.vocab),
        "vocab_hash": space.vocab.vocab_hash(),
        "perplexity": perplexity(space.model, space.theta, space.counts),
    }
    write_json(Path(cfg.output_dir) / "fit_topics.json", report)
    return report


def run_tau_sweep(cfg: PipelineConfig, level: str = "span", taus: list[float] | None = None) -> dict:
    """Component counts against tau, over centroids or pooled span centroids."""
    if taus is None:
        taus = [round(0.05 * i, 2) for i in range(0, 21)]
    corpus = load_corpus(cfg)
    space = build_space(cfg, corpus)
    if level == "community":
        centroids = community_centroids(space.theta, corpus.communities)
    elif level == "span":
        spans = build_spans(cfg, space.theta, corpus.communities)
        centroids = [c for community in corpus.communities for c in spans[community].as_centroids()]
    else:
        raise DataError(f"unknown tau-sweep level {level!r}")
    rows = tau_sweep(centroids, taus)
    out = Path(cfg.output_dir)
    payload = {
        "report": "tau-sweep",
        "provenance": provenance(cfg, corpus),
        "level": level,
        "rows": rows,
    }
    write_json(out / "tau_sweep.json", payload)
    csv_path = out / "metrics" / "tau_sweep.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tau", "edges", "components", "cliques", "partials", "singletons"])
        for r in rows:
            writer.writerow([
                repr(r["tau"]), r["edges"], r["components"],
                r["cliques"], r["partials"], r["singletons"],
            ])
    return payload
