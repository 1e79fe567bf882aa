"""Tokenization, vocabulary construction, sparse counts, TFIDF weighting."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_PATTERN = r"[A-Za-z]+(?:'[A-Za-z]+)*"
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")


def _read_stopword_lines(lines: Iterable[str]) -> frozenset[str]:
    out = set()
    for line in lines:
        term = line.strip()
        if term and not term.startswith("#"):
            out.add(term)
    return frozenset(out)


def default_stopwords() -> frozenset[str]:
    """The English stopword list shipped with the package."""
    text = resources.files("topicspan").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return _read_stopword_lines(text.splitlines())


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Load a stopword file: plain text, one term per line, '#' comments."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such stopword file: {path}")
    with open(path, encoding="utf-8") as fh:
        return _read_stopword_lines(fh)


@dataclass(frozen=True)
class TokenizerConfig:
    """Deterministic tokenizer settings: same text, same config, same tokens."""

    lowercase: bool = True
    min_token_len: int = 2
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    strip_urls: bool = True
    token_pattern: str = DEFAULT_TOKEN_PATTERN

    def config_hash(self) -> str:
        payload = json.dumps(
            {
                "lowercase": self.lowercase,
                "min_token_len": self.min_token_len,
                "stopwords": sorted(self.stopwords),
                "strip_urls": self.strip_urls,
                "token_pattern": self.token_pattern,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def tokenize(text: str, config: TokenizerConfig) -> list[str]:
    """Split text into tokens: URL stripping, case folding, pattern matching,
    then length and stopword filtering, in that order."""
    if not text:
        return []
    if config.strip_urls:
        text = _URL_RE.sub(" ", text)
    if config.lowercase:
        text = text.lower()
    tokens = re.findall(config.token_pattern, text)
    return [
        t for t in tokens
        if len(t) >= config.min_token_len and t not in config.stopwords
    ]


@dataclass
class Vocabulary:
    """Dense term/index bijection with per-term document frequencies."""

    terms: list[str]
    document_frequency: np.ndarray  # int64, aligned with terms
    n_documents: int
    config_hash: str = ""
    index: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise DataError("vocabulary terms are not unique")

    def __len__(self) -> int:
        return len(self.terms)

    def vocab_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.config_hash.encode("utf-8"))
        for t in self.terms:
            h.update(t.encode("utf-8"))
            h.update(b"\x1f")
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "schema": "vocabulary-v1",
            "n_documents": self.n_documents,
            "config_hash": self.config_hash,
            "terms": [
                {"term": t, "index": i, "df": int(self.document_frequency[i])}
                for i, t in enumerate(self.terms)
            ],
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        rows = sorted(obj["terms"], key=lambda r: r["index"])
        return cls(
            terms=[r["term"] for r in rows],
            document_frequency=np.array([r["df"] for r in rows], dtype=np.int64),
            n_documents=int(obj["n_documents"]),
            config_hash=str(obj.get("config_hash", "")),
        )


def build_vocabulary(
    docs: Sequence[Sequence[str]],
    min_df: int = 1,
    max_df_ratio: float = 1.0,
    config_hash: str = "",
) -> Vocabulary:
    """Collect terms with min_df <= df <= max_df_ratio * N.

    Indices follow first-occurrence order over the document stream.
    """
    if min_df < 1:
        raise DataError("min_df must be >= 1")
    if not (0 < max_df_ratio <= 1):
        raise DataError("max_df_ratio must be in (0, 1]")
    n = len(docs)
    order: list[str] = []
    df: dict[str, int] = {}
    for doc in docs:
        for term in dict.fromkeys(doc):  # unique, first-seen order
            if term not in df:
                df[term] = 0
                order.append(term)
            df[term] += 1
    limit = max_df_ratio * n + 1e-9
    kept = [t for t in order if min_df <= df[t] <= limit]
    if not kept:
        raise DataError("no terms survive the document-frequency filters")
    return Vocabulary(
        terms=kept,
        document_frequency=np.array([df[t] for t in kept], dtype=np.int64),
        n_documents=n,
        config_hash=config_hash,
    )


@dataclass
class DocTermMatrix:
    """Sparse N x V matrix of non-negative term counts."""

    matrix: sp.csr_matrix
    doc_ids: list[str]

    def __post_init__(self) -> None:
        if self.matrix.shape[0] != len(self.doc_ids):
            raise DataError("row count does not match doc_ids")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise DataError("doc ids are not unique")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass
class TfidfMatrix:
    """Sparse N x V matrix of TFIDF weights; nonzero rows have unit L2 norm."""

    matrix: sp.csr_matrix
    doc_ids: list[str]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def vectorize_counts(
    docs: Sequence[Sequence[str]],
    vocab: Vocabulary,
    doc_ids: Sequence[str] | None = None,
) -> DocTermMatrix:
    """Count in-vocabulary terms per document; OOV tokens are dropped."""
    n = len(docs)
    if doc_ids is None:
        doc_ids = [str(i) for i in range(n)]
    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []
    n_empty = 0
    for d, doc in enumerate(docs):
        counts: dict[int, int] = {}
        for term in doc:
            j = vocab.index.get(term)
            if j is not None:
                counts[j] = counts.get(j, 0) + 1
        if not counts and doc:
            n_empty += 1
        for j, c in counts.items():
            rows.append(d)
            cols.append(j)
            vals.append(c)
    if n_empty:
        logger.warning("%d document(s) contain only out-of-vocabulary tokens", n_empty)
    mat = sp.coo_matrix(
        (np.array(vals, dtype=np.int64), (rows, cols)),
        shape=(n, len(vocab)),
    ).tocsr()
    mat.sort_indices()
    return DocTermMatrix(matrix=mat, doc_ids=list(doc_ids))


def tfidf(counts: DocTermMatrix) -> TfidfMatrix:
    """Smoothed-idf TFIDF with L2 row normalization.

    weight(d, t) = count(d, t) * (ln((1 + N) / (1 + df(t))) + 1), then each
    nonzero row is scaled to unit L2 norm; all-zero rows stay zero.
    """
    n, _ = counts.shape
    if n < 1:
        raise DataError("tfidf needs at least one document")
    mat = counts.matrix.astype(np.float64).tocsr()
    mat.sort_indices()
    df = (counts.matrix > 0).sum(axis=0).A.ravel().astype(np.float64)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    mat.data *= idf[mat.indices]
    row_of = np.repeat(np.arange(n), np.diff(mat.indptr))
    norms = np.sqrt(mat.multiply(mat).sum(axis=1)).A.ravel()
    nz = norms > 0
    scale = np.ones(n)
    scale[nz] = 1.0 / norms[nz]
    mat.data *= scale[row_of]
    return TfidfMatrix(matrix=mat, doc_ids=list(counts.doc_ids))


def top_terms(
    doc_subset: Iterable[str],
    weights: TfidfMatrix,
    vocab: Vocabulary,
    n: int = 10,
) -> list[tuple[str, float]]:
    """Rank terms by the sum of TFIDF weights over the subset rows.

    Ties break by lexicographic term order; zero-weight terms are omitted,
    so the result has length min(n, number of nonzero terms).
    """
    index = {doc_id: i for i, doc_id in enumerate(weights.doc_ids)}
    try:
        row_ids = [index[d] for d in doc_subset]
    except KeyError as exc:
        raise DataError(f"unknown document id {exc.args[0]!r}") from exc
    if not row_ids:
        raise DataError("document subset is empty")
    totals = np.asarray(weights.matrix[row_ids].sum(axis=0)).ravel()
    scored = [
        (vocab.terms[j], float(totals[j]))
        for j in np.nonzero(totals)[0]
    ]
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored[:n]


# ---------------------------------------------------------------------------
# Matrix persistence: documented sparse triplet format
# ---------------------------------------------------------------------------

def save_matrix(mat: DocTermMatrix | TfidfMatrix, path: str | Path, config_hash: str = "") -> None:
    """Write a sparse matrix as header lines plus `row col value` triplets."""
    kind = "counts" if isinstance(mat, DocTermMatrix) else "tfidf"
    coo = mat.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# topicspan sparse matrix v1\n")
        fh.write(
            f"# kind={kind} rows={mat.shape[0]} cols={mat.shape[1]} "
            f"nnz={coo.nnz} config={config_hash}\n"
        )
        fh.write("# docs=" + json.dumps(mat.doc_ids) + "\n")
        for i in order:
            value = coo.data[i]
            text = str(int(value)) if kind == "counts" else repr(float(value))
            fh.write(f"{coo.row[i]} {coo.col[i]} {text}\n")


def load_matrix(path: str | Path) -> tuple[DocTermMatrix | TfidfMatrix, str]:
    """Read a triplet file back; returns (matrix, config_hash)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if magic != "# topicspan sparse matrix v1":
            raise DataError(f"{path}: not a topicspan matrix file")
        header = dict(
            item.split("=", 1) for item in fh.readline().strip("#\n ").split()
        )
        docs_line = fh.readline().strip()
        if not docs_line.startswith("# docs="):
            raise DataError(f"{path}: missing docs header")
        doc_ids = json.loads(docs_line[len("# docs="):])
        rows, cols, vals = [], [], []
        for line in fh:
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    shape = (int(header["rows"]), int(header["cols"]))
    kind = header["kind"]
    dtype = np.int64 if kind == "counts" else np.float64
    mat = sp.coo_matrix((np.array(vals, dtype=dtype), (rows, cols)), shape=shape).tocsr()
    mat.sort_indices()
    if kind == "counts":
        return DocTermMatrix(matrix=mat, doc_ids=doc_ids), header.get("config", "")
    return TfidfMatrix(matrix=mat, doc_ids=doc_ids), header.get("config", "")
