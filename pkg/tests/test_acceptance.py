"""End-to-end checks of the embedding against the closed-form block-model results."""
import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from models.schemas import BlockSpec
from services.eigensolve import RegularizedOperator, bipartite_degrees
from services.embedding import bipartite_spectral_embedding, spectral_embedding
from services.experiments import load_config, run_alpha_sweep, run_noise_sweep
from services.generators import bipartite_block_model, block_labels, clique_block_model, clique_block_model_eps
from services.graphs import BipartiteGraph, SparseGraph
from services.metrics import modularity
from services.theory import (aggregate_eigen_check, bipartite_thresholds, clique_thresholds, secular_eigenvalues,
                             sign_recovery, verify_interleaving)

from conftest import d_gram
import oracles


def _random_sizes(rng, max_blocks=8, max_total=300):
    K = int(rng.integers(2, max_blocks + 1))
    sizes = sorted(rng.choice(np.arange(1, max_total // K + 1), size=K, replace=False).tolist(), reverse=True)
    return [int(s) for s in sizes]


def test_clique_sign_recovery():
    sizes = [40, 30, 20, 10]
    g, labels = clique_block_model(sizes)
    emb = spectral_embedding(g, 3, alpha=1.0, alpha_mode="absolute")
    d = RegularizedOperator(g, 1.0).regularized_degrees
    np.testing.assert_allclose(d_gram(emb.coordinates, d), np.eye(3), atol=1e-8)
    for k in (2, 3, 4):
        split = sign_recovery(emb, k, labels)
        assert split.purity == 1.0
        assert split.leading_blocks == list(range(k - 1))
        assert split.matches


def test_interleaving_and_secular_roots():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        sizes = _random_sizes(rng)
        g, _ = clique_block_model(sizes)
        for alpha in (0.1, 1.0, 10.0):
            emb = spectral_embedding(g, len(sizes), alpha=alpha, alpha_mode="absolute", skip_first=False)
            np.testing.assert_allclose(emb.eigenvalues[1:], secular_eigenvalues(sizes, alpha), atol=1e-8)
            report = verify_interleaving(emb.eigenvalues, clique_thresholds(sizes, alpha))
            assert report.passed, (sizes, alpha, report.failures())
            d = RegularizedOperator(g, alpha).regularized_degrees
            np.testing.assert_allclose(d_gram(emb.coordinates, d), np.eye(len(sizes)), atol=1e-8)


def test_aggregate_spectrum_equality():
    rng = np.random.default_rng(7)
    for _ in range(10):
        K = int(rng.integers(2, 6))
        labels = block_labels(rng.integers(1, 40, K).tolist())
        c = rng.uniform(0.1, 1.0, (K, K))
        z = labels.membership()
        g = SparseGraph(sp.csr_matrix(z @ sp.csr_matrix((c + c.T) / 2) @ z.T))
        assert aggregate_eigen_check(g, labels, alpha=float(rng.choice([0.0, 0.5, 2.0]))).passed

        K2 = int(rng.integers(2, 5))
        left = block_labels(rng.integers(1, 30, K2).tolist())
        right = block_labels(rng.integers(1, 30, K2).tolist())
        w = sp.csr_matrix(rng.uniform(0.1, 1.0, (K2, K2)))
        b = BipartiteGraph(sp.csr_matrix(left.membership() @ w @ right.membership().T))
        check = aggregate_eigen_check(b, (left, right), alpha=float(rng.choice([0.0, 0.5, 2.0])))
        assert check.passed and check.padding_value == 0.0


def test_toy_block_values():
    g, labels = clique_block_model([5, 3, 2])
    emb = spectral_embedding(g, 1, alpha=1.0, alpha_mode="absolute")
    col = emb.column(2)
    means = np.bincount(labels.assignments, weights=col) / labels.sizes()
    means = means * np.sign(means[1])
    np.testing.assert_allclose(means, [-0.08, 0.11, 0.05], atol=0.01)
    assert sign_recovery(emb, 2, labels).leading_blocks == [0]


def test_bipartite_recovery_and_interleaving():
    n_sizes, m_sizes = [30, 20, 10], [25, 15, 5]
    b, left, right = bipartite_block_model(n_sizes, m_sizes)
    emb = bipartite_spectral_embedding(b, 3, alpha=1.0, alpha_mode="absolute", skip_first=False)
    _, s, _ = oracles.normalized_svd(b.biadjacency, 1.0)
    np.testing.assert_allclose(emb.eigenvalues, 1 - s[:3], atol=1e-8)

    thr = bipartite_thresholds(n_sizes, m_sizes, 1.0)
    assert verify_interleaving(1 - s[:3], thr).passed
    assert verify_interleaving(emb.eigenvalues, thr).passed

    d1, d2 = bipartite_degrees(b, 1.0)
    np.testing.assert_allclose(d_gram(emb.coordinates, np.concatenate([d1, d2])), np.eye(3), atol=1e-8)

    order = thr.isolation_order()
    for k in (2, 3):
        rows, cols = sign_recovery(emb, k, (left, right), order=order)
        assert rows.matches and cols.matches
        assert rows.leading_blocks == cols.leading_blocks == sorted(order[:k - 1])


def test_bipartite_spectrum_pairs():
    b, _, _ = bipartite_block_model([20, 12, 8], [25, 15, 10])
    alpha = 0.3
    b_alpha = b.biadjacency.toarray() + alpha
    n, m = b_alpha.shape
    joint = np.block([[np.zeros((n, n)), b_alpha], [b_alpha.T, np.zeros((m, m))]])
    d = joint.sum(axis=1)
    lam = la.eigh(np.diag(d) - joint, np.diag(d), eigvals_only=True)
    _, s, _ = oracles.normalized_svd(b.biadjacency, alpha)
    expected = np.sort(np.concatenate([1 - s, 1 + s, np.ones(abs(n - m))]))
    np.testing.assert_allclose(lam, expected, atol=1e-8)

    emb = bipartite_spectral_embedding(b, 2, alpha=alpha, alpha_mode="absolute")
    np.testing.assert_allclose(emb.eigenvalues, 1 - s[1:3], atol=1e-8)


def test_modularity_of_two_cliques():
    g, labels = clique_block_model([4, 4])
    assert modularity(g, labels) == 0.5


def test_eps_equivalence():
    eps = 0.25
    a, _ = clique_block_model_eps(BlockSpec(sizes=[40, 25, 15, 10], eps=eps))
    z, _ = clique_block_model([40, 25, 15, 10])
    for alpha in (0.0, 0.5):
        left = spectral_embedding(a, 4, alpha=alpha, alpha_mode="absolute")
        right = spectral_embedding(z, 4, alpha=alpha + eps, alpha_mode="absolute")
        np.testing.assert_allclose(left.eigenvalues, right.eigenvalues, atol=1e-8)


SBM = {"sizes": "20*100", "p_in": "0.5*50,0.05*50", "p_out": 0.001, "dim": 20,
       "seeds": ",".join(str(s) for s in range(10))}


@pytest.mark.slow
def test_sbm_regularization_helps():
    table = run_alpha_sweep(load_config({**SBM, "alpha_rel": "0,1"})).set_index("alpha_rel")
    assert table.loc[1.0, "V"] - table.loc[0.0, "V"] >= 0.05


@pytest.mark.slow
def test_sbm_noise_robustness():
    table = run_noise_sweep(load_config({**SBM, "alpha_rel": "0,1", "noise": "0,0.1"}))
    v = table.set_index(["noise", "alpha_rel"])["V"]
    assert v[(0.1, 0.0)] <= 0.5 * v[(0.0, 0.0)]
    assert v[(0.1, 1.0)] >= 0.8 * v[(0.0, 1.0)]
