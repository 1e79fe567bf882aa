"""Latent topic models: collapsed-Gibbs LDA and multiplicative-update NMF.

The sampler sweeps the token stream in a fixed order (documents ascending,
terms ascending within a document), drawing every random number from a
seeded generator, so a (matrix, params, seed) triple fully determines the
fitted model.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import DataError, InvariantError
from .text import DocTermMatrix, TfidfMatrix

logger = logging.getLogger(__name__)


@dataclass
class LdaModel:
    """Fitted topic model: k topic-term rows on the simplex plus its priors."""

    k: int
    phi: np.ndarray  # k x V
    alpha: float
    beta: float
    iterations: int
    seed: int
    chains: int = 1
    vocab_hash: str = ""

    def __post_init__(self) -> None:
        if self.k < 1 or self.phi.shape[0] != self.k:
            raise InvariantError("phi row count does not match k")
        if np.any(self.phi < 0) or np.any(np.abs(self.phi.sum(axis=1) - 1.0) > 1e-9):
            raise InvariantError("phi rows must lie on the simplex")

    @property
    def vocabulary_size(self) -> int:
        return self.phi.shape[1]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "schema": "lda-model-v1",
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "seed": self.seed,
            "chains": self.chains,
            "vocab_hash": self.vocab_hash,
            "phi": [[float(x) for x in row] for row in self.phi],
        }
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path, expect_vocab_hash: str | None = None) -> "LdaModel":
        path = Path(path)
        if not path.exists():
            raise DataError(f"no such model file: {path}")
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if obj.get("schema") != "lda-model-v1":
            raise DataError(f"{path}: not an lda-model-v1 file")
        model = cls(
            k=int(obj["k"]),
            phi=np.asarray(obj["phi"], dtype=np.float64),
            alpha=float(obj["alpha"]),
            beta=float(obj["beta"]),
            iterations=int(obj["iterations"]),
            seed=int(obj["seed"]),
            chains=int(obj.get("chains", 1)),
            vocab_hash=str(obj.get("vocab_hash", "")),
        )
        if expect_vocab_hash is not None and model.vocab_hash != expect_vocab_hash:
            raise DataError(
                f"{path}: vocabulary hash mismatch "
                f"(model {model.vocab_hash!r}, expected {expect_vocab_hash!r})"
            )
        return model


@dataclass
class DocTopicMatrix:
    """Per-document points on the k-simplex with their community labels."""

    theta: np.ndarray  # N x k
    doc_ids: list[str]
    communities: list[str]

    def __post_init__(self) -> None:
        n = self.theta.shape[0]
        if len(self.doc_ids) != n or len(self.communities) != n:
            raise InvariantError("theta rows, doc ids and communities disagree")
        if n and (np.any(self.theta < 0) or np.any(np.abs(self.theta.sum(axis=1) - 1.0) > 1e-9)):
            raise InvariantError("theta rows must lie on the simplex")

    def rows_for(self, community: str) -> np.ndarray:
        mask = np.array([c == community for c in self.communities])
        return self.theta[mask]

    def ids_for(self, community: str) -> list[str]:
        return [d for d, c in zip(self.doc_ids, self.communities) if c == community]


@dataclass
class NmfModel:
    """Non-negative factors W, H with the squared-Frobenius objective trace."""

    W: np.ndarray
    H: np.ndarray
    objective_trace: list[float] = field(default_factory=list)


def _token_stream(matrix: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Expand a counts matrix into parallel (doc, word) arrays, one entry per
    token, in fixed document-major / term-ascending order."""
    m = matrix.tocsr()
    m.sort_indices()
    reps = m.data.astype(np.int64)
    if np.any(reps < 0):
        raise DataError("counts matrix has negative entries")
    entry_doc = np.repeat(np.arange(m.shape[0], dtype=np.int32), np.diff(m.indptr))
    doc_of = np.repeat(entry_doc, reps)
    word_of = np.repeat(m.indices.astype(np.int32), reps)
    return doc_of, word_of


@njit(cache=True)
def _sweep_init(doc_of, word_of, z, n_dz, n_zw, n_z, alpha, beta, uniforms):
    # Progressive initialization: tokens enter one at a time, each drawn from
    # the conditional given everything placed so far. Far less prone to the
    # merged-topic local optima a uniform-random start can freeze into.
    k, v = n_zw.shape
    vbeta = v * beta
    cum = np.empty(k)
    for i in range(doc_of.shape[0]):
        d = doc_of[i]
        w = word_of[i]
        total = 0.0
        for t in range(k):
            total += (n_dz[d, t] + alpha) * (n_zw[t, w] + beta) / (n_z[t] + vbeta)
            cum[t] = total
        u = uniforms[i] * total
        tnew = 0
        while tnew < k - 1 and cum[tnew] < u:
            tnew += 1
        z[i] = tnew
        n_dz[d, tnew] += 1
        n_zw[tnew, w] += 1
        n_z[tnew] += 1


@njit(cache=True)
def _sweep_fit(doc_of, word_of, z, n_dz, n_zw, n_z, alpha, beta, uniforms):
    k, v = n_zw.shape
    vbeta = v * beta
    cum = np.empty(k)
    for i in range(doc_of.shape[0]):
        d = doc_of[i]
        w = word_of[i]
        told = z[i]
        n_dz[d, told] -= 1
        n_zw[told, w] -= 1
        n_z[told] -= 1
        total = 0.0
        for t in range(k):
            total += (n_dz[d, t] + alpha) * (n_zw[t, w] + beta) / (n_z[t] + vbeta)
            cum[t] = total
        u = uniforms[i] * total
        tnew = 0
        while tnew < k - 1 and cum[tnew] < u:
            tnew += 1
        z[i] = tnew
        n_dz[d, tnew] += 1
        n_zw[tnew, w] += 1
        n_z[tnew] += 1


@njit(cache=True)
def _sweep_infer(doc_of, word_of, z, n_dz, phi, alpha, uniforms):
    k = phi.shape[0]
    cum = np.empty(k)
    for i in range(doc_of.shape[0]):
        d = doc_of[i]
        w = word_of[i]
        told = z[i]
        n_dz[d, told] -= 1
        total = 0.0
        for t in range(k):
            total += phi[t, w] * (n_dz[d, t] + alpha)
            cum[t] = total
        u = uniforms[i] * total
        tnew = 0
        while tnew < k - 1 and cum[tnew] < u:
            tnew += 1
        z[i] = tnew
        n_dz[d, tnew] += 1


def _run_chain(counts, doc_of, word_of, k, alpha, beta, iterations, average_over, rng):
    n, v = counts.shape
    total_tokens = doc_of.shape[0]
    z = np.zeros(total_tokens, dtype=np.int32)
    n_dz = np.zeros((n, k), dtype=np.int64)
    n_zw = np.zeros((k, v), dtype=np.int64)
    n_z = np.zeros(k, dtype=np.int64)
    _sweep_init(doc_of, word_of, z, n_dz, n_zw, n_z, alpha, beta, rng.random(total_tokens))
    phi_acc = np.zeros((k, v))
    for sweep in range(iterations):
        _sweep_fit(doc_of, word_of, z, n_dz, n_zw, n_z, alpha, beta, rng.random(total_tokens))
        if sweep >= iterations - average_over:
            phi_acc += (n_zw + beta) / (n_z + v * beta)[:, None]
    phi = phi_acc / average_over
    # point log-likelihood of the final state, used to rank chains
    theta = (n_dz + alpha) / (n_dz.sum(axis=1, keepdims=True) + k * alpha)
    coo = counts.matrix.tocoo()
    log_lik = float(np.sum(coo.data * np.log((theta @ phi)[coo.row, coo.col])))
    return phi, log_lik


def fit_lda(
    counts: DocTermMatrix,
    k: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 1000,
    seed: int = 0,
    average_over: int = 1,
    chains: int = 1,
    vocab_hash: str = "",
) -> LdaModel:
    """Fit topic-term distributions by collapsed Gibbs sampling.

    Runs `iterations` full sweeps; phi is read off the final assignment
    counts as (n_zw + beta) / (n_z + V*beta). Set `average_over` > 1 to
    average the estimate over that many final sweeps instead of using the
    last sample alone, and `chains` > 1 to run independent chains and keep
    the one with the highest joint log-likelihood (earliest chain wins
    ties). Everything is deterministic in (counts, params, seed).
    `alpha` defaults to 50/k.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    if alpha is None:
        alpha = 50.0 / k
    if alpha <= 0 or beta <= 0:
        raise DataError("alpha and beta must be positive")
    if iterations < 1:
        raise DataError("iterations must be >= 1")
    if chains < 1:
        raise DataError("chains must be >= 1")
    doc_of, word_of = _token_stream(counts.matrix)
    total_tokens = doc_of.shape[0]
    if total_tokens == 0:
        raise DataError("counts matrix has no tokens")
    if k > total_tokens:
        logger.warning("k=%d exceeds the total token count %d", k, total_tokens)
    average_over = max(1, min(average_over, iterations))

    best: tuple[np.ndarray, float] | None = None
    for chain in range(chains):
        rng = np.random.default_rng(seed if chains == 1 else [seed, chain])
        phi, log_lik = _run_chain(
            counts, doc_of, word_of, k, float(alpha), float(beta),
            iterations, average_over, rng,
        )
        if best is None or log_lik > best[1]:
            best = (phi, log_lik)
    return LdaModel(
        k=k, phi=best[0], alpha=float(alpha), beta=float(beta),
        iterations=iterations, seed=seed, chains=chains, vocab_hash=vocab_hash,
    )


def infer_theta(
    model: LdaModel,
    counts: DocTermMatrix,
    iterations: int = 100,
    seed: int = 0,
    communities: list[str] | None = None,
    average_over: int = 1,
) -> DocTopicMatrix:
    """Project documents onto the model's topic simplex.

    Per-document Gibbs with phi held fixed; theta rows are
    (n_dz + alpha) / (len_d + k*alpha) from the final assignments.
    Documents without in-vocabulary tokens get the uniform row.
    """
    n, v = counts.shape
    if v != model.vocabulary_size:
        raise DataError(
            f"vocabulary size mismatch: matrix has {v}, model has {model.vocabulary_size}"
        )
    if iterations < 1:
        raise DataError("iterations must be >= 1")
    if communities is None:
        communities = [""] * n
    average_over = max(1, min(average_over, iterations))

    k, alpha = model.k, model.alpha
    doc_of, word_of = _token_stream(counts.matrix)
    total_tokens = doc_of.shape[0]
    rng = np.random.default_rng(seed)
    n_dz = np.zeros((n, k), dtype=np.int64)
    if total_tokens:
        z = rng.integers(0, k, size=total_tokens).astype(np.int32)
        np.add.at(n_dz, (doc_of, z), 1)
        theta_acc = np.zeros((n, k))
        lengths = n_dz.sum(axis=1, keepdims=True)
        for sweep in range(iterations):
            _sweep_infer(doc_of, word_of, z, n_dz, model.phi, float(alpha), rng.random(total_tokens))
            if sweep >= iterations - average_over:
                theta_acc += (n_dz + alpha) / (lengths + k * alpha)
        theta = theta_acc / average_over
    else:
        theta = np.full((n, k), 1.0 / k)
    return DocTopicMatrix(theta=theta, doc_ids=list(counts.doc_ids), communities=list(communities))


def perplexity(model: LdaModel, theta: DocTopicMatrix, counts: DocTermMatrix) -> float:
    """exp(-sum_d sum_w n_dw * ln(sum_z theta[d,z] phi[z,w]) / total tokens)."""
    n, v = counts.shape
    if theta.theta.shape != (n, model.k) or v != model.vocabulary_size:
        raise DataError("model, theta and counts shapes disagree")
    coo = counts.matrix.tocoo()
    total = float(coo.data.sum())
    if total == 0:
        return 1.0
    mix = theta.theta @ model.phi
    probs = mix[coo.row, coo.col]
    if np.any(probs <= 0):
        raise InvariantError("zero mixture probability despite positive priors")
    log_lik = float(np.sum(coo.data * np.log(probs)))
    return float(np.exp(-log_lik / total))


def fit_nmf(
    weights: TfidfMatrix | DocTermMatrix,
    k: int,
    iterations: int = 200,
    seed: int = 0,
) -> NmfModel:
    """Lee-Seung multiplicative updates minimizing ||X - WH||_F^2.

    W and H start uniform-random non-negative from the seed; the objective
    is recorded after every (H, W) update pair and never increases.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    x = np.asarray(weights.matrix.todense(), dtype=np.float64)
    if np.any(x < 0):
        raise DataError("input matrix must be non-negative")
    n, v = x.shape
    if x.size == 0 or not np.any(x):
        logger.warning("zero input matrix; returning zero factors")
        return NmfModel(W=np.zeros((n, k)), H=np.zeros((k, v)), objective_trace=[0.0])

    eps = 1e-12
    rng = np.random.default_rng(seed)
    w = rng.random((n, k))
    h = rng.random((k, v))
    trace: list[float] = []
    for _ in range(iterations):
        h *= (w.T @ x) / (w.T @ w @ h + eps)
        w *= (x @ h.T) / (w @ (h @ h.T) + eps)
        resid = x - w @ h
        trace.append(float(np.sum(resid * resid)))
    return NmfModel(W=w, H=h, objective_trace=trace)
