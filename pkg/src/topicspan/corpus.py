"""Community-partitioned corpora: loading, validation, summaries, synthesis.

A corpus is an ordered list of submissions, each carrying a community label
(the source forum). All operations here are pure given their inputs and the
seed; ``Corpus`` is treated as immutable after construction.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

# JSONL keys accepted on input. "subreddit" maps to the community label.
REQUIRED_KEYS = ("id", "body", "subreddit")
OPTIONAL_KEYS = ("title", "score", "num_comments", "created_utc", "year", "url")


def year_of_utc(ts: float) -> int:
    """UTC calendar year of a unix timestamp."""
    return datetime.fromtimestamp(ts, tz=timezone.utc).year


@dataclass
class Submission:
    """One forum post with its community label.

    ``body`` must be non-empty after trimming. ``year`` is derived from
    ``created_utc`` when not given explicitly.
    """

    id: str
    body: str
    community: str
    title: str = ""
    score: int = 0
    num_comments: int = 0
    created_utc: int | None = None
    year: int | None = None
    url: str | None = None

    def __post_init__(self) -> None:
        if not self.body or not self.body.strip():
            raise DataError(f"submission {self.id!r}: empty body")
        if self.num_comments < 0:
            raise DataError(f"submission {self.id!r}: negative num_comments")
        if self.year is None and self.created_utc is not None:
            self.year = year_of_utc(self.created_utc)


@dataclass
class Corpus:
    """Ordered collection of submissions, partitioned by community label.

    Iteration order is the insertion order of ``submissions``; the community
    list preserves first-occurrence order. Immutable after construction.
    """

    submissions: list[Submission]
    communities: list[str] = field(init=False)
    community_index: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        self.communities = []
        self.community_index = {}
        for sub in self.submissions:
            if sub.community not in self.community_index:
                self.community_index[sub.community] = len(self.communities)
                self.communities.append(sub.community)

    def __len__(self) -> int:
        return len(self.submissions)

    def __iter__(self):
        return iter(self.submissions)

    def by_community(self) -> dict[str, list[Submission]]:
        groups: dict[str, list[Submission]] = {c: [] for c in self.communities}
        for sub in self.submissions:
            groups[sub.community].append(sub)
        return groups

    def fingerprint(self) -> str:
        """Stable content digest over (id, community, body) in order."""
        h = hashlib.sha256()
        for sub in self.submissions:
            h.update(sub.id.encode("utf-8"))
            h.update(b"\x1f")
            h.update(sub.community.encode("utf-8"))
            h.update(b"\x1f")
            h.update(sub.body.encode("utf-8"))
            h.update(b"\x1e")
        return h.hexdigest()


def _parse_record(obj: dict, lineno: int, strict: bool) -> Submission:
    if not isinstance(obj, dict):
        raise DataError(f"line {lineno}: not a JSON object")
    for key in REQUIRED_KEYS:
        if key not in obj or obj[key] is None:
            raise DataError(f"line {lineno}: missing required field {key!r}")
    year = obj.get("year")
    created = obj.get("created_utc")
    if strict and year is not None and created is not None:
        if int(year) != year_of_utc(float(created)):
            raise DataError(
                f"line {lineno}: year {year} conflicts with created_utc {created}"
            )
    try:
        return Submission(
            id=str(obj["id"]),
            body=str(obj["body"]),
            community=str(obj["subreddit"]),
            title=str(obj.get("title", "")),
            score=int(obj.get("score", 0)),
            num_comments=int(obj.get("num_comments", 0)),
            created_utc=int(created) if created is not None else None,
            year=int(year) if year is not None else None,
            url=str(obj["url"]) if obj.get("url") is not None else None,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"line {lineno}: {exc}") from exc


def _iter_jsonl(path: str | Path):
    """Yield (lineno, object-or-DataError) for each non-blank line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, DataError(f"line {lineno}: malformed JSON ({exc.msg})")


def load_jsonl(path: str | Path, strict: bool = False) -> Corpus:
    """Load a corpus from a JSONL file, one submission object per line.

    In strict mode any malformed line aborts the load. In lenient mode
    malformed lines are skipped; the skip count is logged (use
    :func:`validate_jsonl` for a per-line report).
    """
    submissions: list[Submission] = []
    skipped = 0
    for lineno, item in _iter_jsonl(path):
        if isinstance(item, DataError):
            if strict:
                raise item
            skipped += 1
            continue
        try:
            submissions.append(_parse_record(item, lineno, strict))
        except DataError:
            if strict:
                raise
            skipped += 1
    if skipped:
        logger.warning("%s: skipped %d malformed line(s)", path, skipped)
    return Corpus(submissions)


@dataclass
class ValidationReport:
    """Per-line diagnostics for a JSONL corpus file."""

    path: str
    n_lines: int
    n_valid: int
    n_skipped: int
    community_counts: dict[str, int]
    problems: list[str]

    @property
    def ok(self) -> bool:
        return self.n_valid > 0 and self.n_skipped == 0


def validate_jsonl(path: str | Path) -> ValidationReport:
    """Check a JSONL file against the submission schema without aborting."""
    n_lines = n_valid = n_skipped = 0
    counts: dict[str, int] = {}
    problems: list[str] = []
    for lineno, item in _iter_jsonl(path):
        n_lines += 1
        if isinstance(item, DataError):
            n_skipped += 1
            problems.append(str(item))
            continue
        try:
            sub = _parse_record(item, lineno, strict=False)
        except DataError as exc:
            n_skipped += 1
            problems.append(str(exc))
            continue
        n_valid += 1
        counts[sub.community] = counts.get(sub.community, 0) + 1
    return ValidationReport(str(path), n_lines, n_valid, n_skipped, counts, problems)


def save_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the same JSONL schema accepted by :func:`load_jsonl`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for sub in corpus:
            rec = {
                "id": sub.id,
                "title": sub.title,
                "body": sub.body,
                "score": sub.score,
                "num_comments": sub.num_comments,
                "created_utc": sub.created_utc,
                "subreddit": sub.community,
                "year": sub.year,
            }
            if sub.url is not None:
                rec["url"] = sub.url
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass
class CommunitySummary:
    """Per-community activity and token statistics."""

    community: str
    posts_per_year_mean: float
    posts_per_year_std: float
    total_posts: int
    tokens_per_post_mean: float
    tokens_per_post_std: float
    total_tokens: int


def summarize(corpus: Corpus, tokenizer) -> list[CommunitySummary]:
    """One summary row per community, sorted by total posts descending.

    Yearly statistics run over the years present in each community
    (population std, so a single year yields 0.0). Token counts use the
    same tokenizer as the rest of the pipeline, keeping the table
    internally consistent with vectorization.
    """
    from .text import tokenize

    if len(corpus) == 0:
        raise DataError("cannot summarize an empty corpus")
    rows: list[CommunitySummary] = []
    for community, subs in corpus.by_community().items():
        per_year: dict[int, int] = {}
        for sub in subs:
            if sub.year is not None:
                per_year[sub.year] = per_year.get(sub.year, 0) + 1
        if per_year:
            counts = np.array(sorted(per_year.values()), dtype=float)
            py_mean = float(counts.mean())
            py_std = float(counts.std())
        else:
            py_mean = py_std = 0.0
        tokens = np.array([len(tokenize(sub.body, tokenizer)) for sub in subs], dtype=float)
        rows.append(
            CommunitySummary(
                community=community,
                posts_per_year_mean=py_mean,
                posts_per_year_std=py_std,
                total_posts=len(subs),
                tokens_per_post_mean=float(tokens.mean()),
                tokens_per_post_std=float(tokens.std()),
                total_tokens=int(tokens.sum()),
            )
        )
    rows.sort(key=lambda r: (-r.total_posts, r.community))
    return rows


# ---------------------------------------------------------------------------
# Synthetic corpora with planted ground truth
# ---------------------------------------------------------------------------

@dataclass
class QualitySpec:
    """A named mixture over the planted topics."""

    label: str
    mixture: list[float]


@dataclass
class CommunitySpec:
    """A community built from fixed per-quality document counts."""

    label: str
    counts: dict[str, int]


@dataclass
class SyntheticSpec:
    """Recipe for a corpus drawn from planted topic-term distributions.

    Documents follow the standard topic-model generative process: each
    token picks a topic from its quality's mixture, then a term from that
    topic's planted distribution. The planted distributions are uniform
    over disjoint, equal-as-possible blocks of the vocabulary, which makes
    recovery checkable against ground truth.
    """

    k_true: int
    vocabulary_size: int
    qualities: list[QualitySpec]
    communities: list[CommunitySpec]
    doc_length_mean: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.k_true < 1:
            raise DataError("k_true must be >= 1")
        if self.vocabulary_size < self.k_true:
            raise DataError("vocabulary_size must be >= k_true")
        if self.doc_length_mean < 1:
            raise DataError("doc_length_mean must be >= 1")
        labels = set()
        for q in self.qualities:
            if q.label in labels:
                raise DataError(f"duplicate quality label {q.label!r}")
            labels.add(q.label)
            mix = np.asarray(q.mixture, dtype=float)
            if mix.shape != (self.k_true,):
                raise DataError(f"quality {q.label!r}: mixture length != k_true")
            if np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-9:
                raise DataError(f"quality {q.label!r}: mixture is not a probability vector")
        for c in self.communities:
            for q_label, n in c.counts.items():
                if q_label not in labels:
                    raise DataError(f"community {c.label!r}: unknown quality {q_label!r}")
                if n < 0:
                    raise DataError(f"community {c.label!r}: negative document count")

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        try:
            spec = cls(
                k_true=int(obj["k_true"]),
                vocabulary_size=int(obj["vocabulary_size"]),
                qualities=[
                    QualitySpec(str(q["label"]), [float(x) for x in q["mixture"]])
                    for q in obj["qualities"]
                ],
                communities=[
                    CommunitySpec(str(c["label"]), {str(k): int(v) for k, v in c["counts"].items()})
                    for c in obj["communities"]
                ],
                doc_length_mean=int(obj.get("doc_length_mean", 100)),
                seed=int(obj.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad synthetic spec: {exc}") from exc
        spec.validate()
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticSpec":
        path = Path(path)
        if not path.exists():
            raise DataError(f"no such file: {path}")
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class GroundTruth:
    """What the generator planted: per-document quality and topic-term rows."""

    terms: list[str]
    topic_term: np.ndarray  # k_true x V
    quality_mixtures: dict[str, list[float]]
    doc_quality: dict[str, str]
    seed: int

    def to_json(self) -> dict:
        return {
            "schema": "ground-truth-v1",
            "seed": self.seed,
            "terms": self.terms,
            "topic_term": [[float(x) for x in row] for row in self.topic_term],
            "quality_mixtures": self.quality_mixtures,
            "doc_quality": self.doc_quality,
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            terms=list(obj["terms"]),
            topic_term=np.asarray(obj["topic_term"], dtype=float),
            quality_mixtures={k: list(v) for k, v in obj["quality_mixtures"].items()},
            doc_quality=dict(obj["doc_quality"]),
            seed=int(obj["seed"]),
        )

    def exclusive_terms(self, quality: str) -> set[str]:
        """Terms whose support is reachable only through `quality`'s topics."""
        mix = np.asarray(self.quality_mixtures[quality], dtype=float)
        others = np.zeros_like(mix)
        for label, other in self.quality_mixtures.items():
            if label != quality:
                others += np.asarray(other, dtype=float)
        own = (self.topic_term[mix > 0].sum(axis=0) > 0) if mix.any() else np.zeros(len(self.terms), bool)
        shared = (self.topic_term[others > 0].sum(axis=0) > 0) if others.any() else np.zeros(len(self.terms), bool)
        return {t for t, o, s in zip(self.terms, own, shared) if o and not s}


def _index_word(i: int, width: int) -> str:
    letters = []
    for _ in range(width):
        letters.append(chr(ord("a") + i % 26))
        i //= 26
    return "".join(reversed(letters))


def _synthetic_terms(v: int) -> list[str]:
    """V distinct lowercase words that survive the default tokenizer."""
    from .text import default_stopwords

    stop = default_stopwords()
    width = 3
    while 26 ** width < v + len(stop):
        width += 1
    terms: list[str] = []
    i = 0
    while len(terms) < v:
        word = _index_word(i, width)
        i += 1
        if word in stop:
            continue
        terms.append(word)
    return terms


def _block_topics(k: int, v: int) -> np.ndarray:
    """Planted topic-term rows: uniform over disjoint vocabulary blocks."""
    phi = np.zeros((k, v))
    bounds = np.linspace(0, v, k + 1).astype(int)
    for t in range(k):
        lo, hi = bounds[t], bounds[t + 1]
        phi[t, lo:hi] = 1.0 / (hi - lo)
    return phi


def generate_synthetic(spec: SyntheticSpec) -> tuple[Corpus, GroundTruth]:
    """Draw a corpus from the spec; identical seed gives identical output."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    terms = _synthetic_terms(spec.vocabulary_size)
    topic_term = _block_topics(spec.k_true, spec.vocabulary_size)
    mixtures = {q.label: np.asarray(q.mixture, dtype=float) for q in spec.qualities}

    base_utc = 1577836800  # 2020-01-01T00:00:00Z
    submissions: list[Submission] = []
    doc_quality: dict[str, str] = {}
    serial = 0
    for comm in spec.communities:
        n_total = sum(comm.counts.values())
        if n_total == 0:
            logger.warning("community %r has zero documents", comm.label)
            continue
        for q_label, n_docs in comm.counts.items():
            mix = mixtures[q_label]
            for _ in range(n_docs):
                length = max(1, int(rng.poisson(spec.doc_length_mean)))
                z = rng.choice(spec.k_true, size=length, p=mix)
                words = np.empty(length, dtype=int)
                for t in np.unique(z):
                    sel = z == t
                    words[sel] = rng.choice(
                        spec.vocabulary_size, size=int(sel.sum()), p=topic_term[t]
                    )
                doc_id = f"{comm.label}-{serial:06d}"
                body = " ".join(terms[w] for w in words)
                submissions.append(
                    Submission(
                        id=doc_id,
                        body=body,
                        community=comm.label,
                        title=f"synthetic {comm.label} {serial}",
                        created_utc=base_utc + serial * 60,
                    )
                )
                doc_quality[doc_id] = q_label
                serial += 1
    truth = GroundTruth(
        terms=terms,
        topic_term=topic_term,
        quality_mixtures={k: [float(x) for x in v] for k, v in mixtures.items()},
        doc_quality=doc_quality,
        seed=spec.seed,
    )
    return Corpus(submissions), truth
