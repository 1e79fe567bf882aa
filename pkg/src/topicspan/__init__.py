"""topicspan: compare communities of a text corpus by their topic-space spans."""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config, stable_seed
from .corpus import (
    CommunitySummary,
    Corpus,
    GroundTruth,
    Submission,
    SyntheticSpec,
    generate_synthetic,
    load_jsonl,
    save_jsonl,
    summarize,
    validate_jsonl,
)
from .errors import ConfigError, DataError, InvariantError
from .semspace import (
    Centroid,
    ClusterSelection,
    SemanticSpan,
    calinski_harabasz,
    community_centroid,
    cosine_sim,
    inertia,
    kmeans,
    select_cluster_count,
    semantic_span,
    silhouette,
)
from .simgraph import (
    SimilarityGraph,
    SubGraph,
    assign_documents,
    build_graph,
    connected_components,
    export_graph,
    graph_from_json,
    graph_to_dot,
    graph_to_json,
    tau_sweep,
)
from .text import (
    DocTermMatrix,
    TfidfMatrix,
    TokenizerConfig,
    Vocabulary,
    build_vocabulary,
    default_stopwords,
    load_stopwords,
    tfidf,
    tokenize,
    top_terms,
    vectorize_counts,
)
from .topics import (
    DocTopicMatrix,
    LdaModel,
    NmfModel,
    fit_lda,
    fit_nmf,
    infer_theta,
    perplexity,
)
