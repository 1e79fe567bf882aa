import numpy as np
import pytest
import scipy.sparse as sp

from oracles import greedy_match_tv
from topicspan.corpus import CommunitySpec, QualitySpec, SyntheticSpec, generate_synthetic
from topicspan.errors import DataError
from topicspan.text import (
    DocTermMatrix,
    TfidfMatrix,
    TokenizerConfig,
    build_vocabulary,
    tokenize,
    vectorize_counts,
)
from topicspan.topics import (
    DocTopicMatrix,
    LdaModel,
    fit_lda,
    fit_nmf,
    infer_theta,
    perplexity,
)


def counts_from_rows(rows, doc_ids=None):
    mat = sp.csr_matrix(np.asarray(rows, dtype=np.int64))
    ids = doc_ids or [str(i) for i in range(mat.shape[0])]
    return DocTermMatrix(matrix=mat, doc_ids=ids)


def fitted_synthetic(seed=5, n_per=50, length=100):
    spec = SyntheticSpec(
        k_true=3,
        vocabulary_size=90,
        qualities=[
            QualitySpec(f"q{i}", [1.0 if j == i else 0.0 for j in range(3)])
            for i in range(3)
        ],
        communities=[CommunitySpec("C", {"q0": n_per, "q1": n_per, "q2": n_per})],
        doc_length_mean=length,
        seed=seed,
    )
    corpus, truth = generate_synthetic(spec)
    tok = TokenizerConfig()
    docs = [tokenize(s.body, tok) for s in corpus]
    vocab = build_vocabulary(docs, min_df=1, max_df_ratio=1.0)
    counts = vectorize_counts(docs, vocab, doc_ids=[s.id for s in corpus])
    # planted topic-term rows re-ordered to the fitted vocabulary
    planted = np.zeros((3, len(vocab)))
    tidx = {t: i for i, t in enumerate(truth.terms)}
    for j, term in enumerate(vocab.terms):
        planted[:, j] = truth.topic_term[:, tidx[term]]
    return corpus, truth, vocab, counts, planted


def test_k1_closed_form():
    counts = counts_from_rows([[2, 1, 0], [0, 3, 1]])
    model = fit_lda(counts, k=1, alpha=0.5, beta=0.02, iterations=3, seed=0)
    totals = np.array([2.0, 4.0, 1.0])
    expected = (totals + 0.02) / (7.0 + 3 * 0.02)
    assert np.allclose(model.phi[0], expected, atol=1e-12)


def test_fit_is_deterministic():
    counts = counts_from_rows([[3, 1, 0, 2], [0, 2, 2, 1], [1, 0, 4, 0]])
    a = fit_lda(counts, k=2, alpha=1.0, beta=0.1, iterations=30, seed=9)
    b = fit_lda(counts, k=2, alpha=1.0, beta=0.1, iterations=30, seed=9)
    assert np.array_equal(a.phi, b.phi)
    c = fit_lda(counts, k=2, alpha=1.0, beta=0.1, iterations=30, seed=10)
    assert not np.array_equal(a.phi, c.phi)


def test_fit_rejects_bad_inputs():
    counts = counts_from_rows([[0, 0]])
    with pytest.raises(DataError, match="no tokens"):
        fit_lda(counts, k=2, alpha=1.0, beta=0.1, iterations=1, seed=0)
    with pytest.raises(DataError):
        fit_lda(counts_from_rows([[1]]), k=0, alpha=1.0, beta=0.1, iterations=1, seed=0)
    with pytest.raises(DataError):
        fit_lda(counts_from_rows([[1]]), k=1, alpha=-1.0, beta=0.1, iterations=1, seed=0)


def test_fit_warns_when_k_exceeds_tokens(caplog):
    with caplog.at_level("WARNING"):
        fit_lda(counts_from_rows([[1, 1]]), k=5, alpha=0.5, beta=0.1, iterations=2, seed=0)
    assert "exceeds the total token count" in caplog.text


def test_phi_rows_on_simplex():
    counts = counts_from_rows([[3, 1, 0, 2], [0, 2, 2, 1], [1, 0, 4, 0]])
    model = fit_lda(counts, k=3, alpha=0.7, beta=0.05, iterations=25, seed=4)
    assert np.all(model.phi >= 0)
    assert np.allclose(model.phi.sum(axis=1), 1.0, atol=1e-9)


def test_planted_topic_recovery():
    _, _, _, counts, planted = fitted_synthetic(seed=5)
    model = fit_lda(counts, k=3, alpha=50 / 3, beta=0.01, iterations=200, seed=7)
    tvs = greedy_match_tv(planted.tolist(), model.phi.tolist())
    assert len(tvs) == 3
    assert max(tvs) < 0.1


def test_infer_k1_is_exactly_one():
    counts = counts_from_rows([[2, 1], [1, 0]])
    model = fit_lda(counts, k=1, alpha=0.5, beta=0.1, iterations=2, seed=0)
    theta = infer_theta(model, counts, iterations=5, seed=1)
    assert np.array_equal(theta.theta, np.ones((2, 1)))


def test_infer_empty_document_is_uniform():
    counts = counts_from_rows([[2, 1], [0, 0]])
    model = fit_lda(counts_from_rows([[2, 1], [1, 2]]), k=4, alpha=0.5, beta=0.1, iterations=10, seed=0)
    theta = infer_theta(model, counts, iterations=10, seed=3)
    assert np.allclose(theta.theta[1], 0.25, atol=1e-12)


def test_infer_exclusive_terms_map_to_their_topic():
    # Disjoint-support model built directly: 3 topics over 9 terms.
    phi = np.full((3, 9), 1e-9)
    for t in range(3):
        phi[t, 3 * t : 3 * t + 3] = 1.0 / 3
    phi /= phi.sum(axis=1, keepdims=True)
    model = LdaModel(k=3, phi=phi, alpha=0.1, beta=0.01, iterations=1, seed=0)
    doc = np.zeros((1, 9), dtype=np.int64)
    doc[0, 6:9] = [5, 4, 6]  # only topic-2 terms
    theta = infer_theta(model, counts_from_rows(doc), iterations=30, seed=2)
    assert int(np.argmax(theta.theta[0])) == 2


def test_infer_checks_vocabulary_size():
    model = fit_lda(counts_from_rows([[1, 1]]), k=2, alpha=0.5, beta=0.1, iterations=2, seed=0)
    with pytest.raises(DataError, match="vocabulary size mismatch"):
        infer_theta(model, counts_from_rows([[1, 1, 1]]), iterations=2, seed=0)


def test_theta_rows_on_simplex_and_deterministic():
    counts = counts_from_rows([[3, 1, 0], [0, 2, 2], [1, 0, 4], [2, 2, 2]])
    model = fit_lda(counts, k=3, alpha=0.5, beta=0.05, iterations=20, seed=1)
    a = infer_theta(model, counts, iterations=20, seed=6)
    b = infer_theta(model, counts, iterations=20, seed=6)
    assert np.array_equal(a.theta, b.theta)
    assert np.all(a.theta >= 0)
    assert np.allclose(a.theta.sum(axis=1), 1.0, atol=1e-9)


def test_label_swap_leaves_perplexity_unchanged():
    counts = counts_from_rows([[3, 1, 0], [0, 2, 2], [1, 0, 4]])
    model = fit_lda(counts, k=3, alpha=0.5, beta=0.05, iterations=20, seed=1)
    theta = infer_theta(model, counts, iterations=20, seed=2)
    base = perplexity(model, theta, counts)
    perm = np.array([2, 0, 1])
    swapped_model = LdaModel(
        k=3, phi=model.phi[perm], alpha=model.alpha, beta=model.beta,
        iterations=model.iterations, seed=model.seed,
    )
    swapped_theta = DocTopicMatrix(
        theta=theta.theta[:, perm], doc_ids=theta.doc_ids, communities=theta.communities
    )
    assert perplexity(swapped_model, swapped_theta, counts) == pytest.approx(base, rel=1e-12)


def test_perplexity_single_term_vocabulary_is_one():
    counts = counts_from_rows([[4], [2]])
    model = fit_lda(counts, k=2, alpha=0.5, beta=0.1, iterations=5, seed=0)
    theta = infer_theta(model, counts, iterations=5, seed=0)
    assert perplexity(model, theta, counts) == pytest.approx(1.0, abs=1e-12)


def test_perplexity_uniform_model_equals_vocabulary_size():
    v, k, n = 7, 3, 4
    phi = np.full((k, v), 1.0 / v)
    theta = np.full((n, k), 1.0 / k)
    counts = counts_from_rows(np.ones((n, v), dtype=int))
    model = LdaModel(k=k, phi=phi, alpha=1.0, beta=1.0, iterations=1, seed=0)
    dt = DocTopicMatrix(theta=theta, doc_ids=counts.doc_ids, communities=[""] * n)
    assert perplexity(model, dt, counts) == pytest.approx(v, rel=1e-12)


def test_perplexity_at_least_one_on_training_data():
    _, _, _, counts, _ = fitted_synthetic(seed=3, n_per=10, length=30)
    model = fit_lda(counts, k=3, alpha=1.0, beta=0.05, iterations=40, seed=2)
    theta = infer_theta(model, counts, iterations=20, seed=2)
    assert perplexity(model, theta, counts) >= 1.0


def test_nmf_rank_one_recovery():
    rng = np.random.default_rng(0)
    u = rng.random(12) + 0.1
    v = rng.random(8) + 0.1
    x = np.outer(u, v)
    weights = TfidfMatrix(matrix=sp.csr_matrix(x), doc_ids=[str(i) for i in range(12)])
    model = fit_nmf(weights, k=1, iterations=200, seed=1)
    rel = np.sqrt(model.objective_trace[-1]) / np.linalg.norm(x)
    assert rel < 1e-3
    assert np.all(model.W >= 0) and np.all(model.H >= 0)


def test_nmf_trace_non_increasing():
    rng = np.random.default_rng(7)
    for trial in range(5):
        x = rng.random((9, 6))
        weights = TfidfMatrix(matrix=sp.csr_matrix(x), doc_ids=[str(i) for i in range(9)])
        model = fit_nmf(weights, k=3, iterations=60, seed=trial)
        trace = np.array(model.objective_trace)
        assert np.all(np.diff(trace) <= 1e-10)


def test_nmf_zero_matrix_returns_zero_factors(caplog):
    weights = TfidfMatrix(matrix=sp.csr_matrix((3, 4)), doc_ids=["a", "b", "c"])
    with caplog.at_level("WARNING"):
        model = fit_nmf(weights, k=2, iterations=10, seed=0)
    assert np.all(model.W == 0) and np.all(model.H == 0)
    assert "zero input matrix" in caplog.text


def test_model_save_load_roundtrip_and_hash_guard(tmp_path):
    counts = counts_from_rows([[2, 1], [1, 3]])
    model = fit_lda(counts, k=2, alpha=0.5, beta=0.1, iterations=10, seed=0, vocab_hash="cafe")
    path = tmp_path / "model.json"
    model.save(path)
    loaded = LdaModel.load(path, expect_vocab_hash="cafe")
    assert loaded.k == model.k
    assert np.array_equal(loaded.phi, model.phi)
    assert loaded.seed == model.seed
    with pytest.raises(DataError, match="vocabulary hash mismatch"):
        LdaModel.load(path, expect_vocab_hash="beef")
