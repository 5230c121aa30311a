import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings as hsettings, strategies as st

from services.eigensolve import (RegularizedOperator, lanczos_extreme, matvec_regularized, normalized_operator,
                                 regularized_gsvd, smallest_generalized_eigenpairs)
from services.errors import ConvergenceError, SingularDegreeError
from services.generators import bipartite_block_model, clique_block_model
from services.graphs import BipartiteGraph, SparseGraph, degrees

from conftest import d_gram
import oracles


def _dense_op(matrix):
    return sp.csr_matrix(matrix)


def test_matvec_edgeless_ones():
    g = SparseGraph(sp.csr_matrix((3, 3)))
    op = RegularizedOperator(g, alpha=2.0)
    np.testing.assert_array_equal(matvec_regularized(op, np.ones(3)), [6.0, 6.0, 6.0])


def test_matvec_without_alpha_is_plain_product(toy, rng):
    g, _ = toy
    v = rng.standard_normal(g.n)
    np.testing.assert_allclose(matvec_regularized(RegularizedOperator(g), v), g.adjacency @ v)


def test_regularized_degrees_on_toy(toy):
    g, _ = toy
    op = RegularizedOperator(g, alpha=1.0)
    np.testing.assert_allclose(op.regularized_degrees, degrees(g) + 10)
    np.testing.assert_allclose(matvec_regularized(op, np.ones(g.n)), op.regularized_degrees)


def test_matvec_dimension_mismatch(toy):
    g, _ = toy
    with pytest.raises(ValueError):
        matvec_regularized(RegularizedOperator(g, 1.0), np.ones(3))
    with pytest.raises(ValueError):
        RegularizedOperator(g, alpha=-1.0)


def test_singular_flag():
    g = SparseGraph.from_edges(3, [0], [1])
    assert RegularizedOperator(g).singular
    assert not RegularizedOperator(g, alpha=0.1).singular


@hsettings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.lists(st.floats(-10, 10), min_size=10, max_size=10))
def test_rank_one_correction(alpha, values):
    g, _ = clique_block_model([5, 3, 2])
    v = np.array(values)
    diff = matvec_regularized(RegularizedOperator(g, alpha), v) - g.adjacency @ v
    np.testing.assert_allclose(diff, np.full(10, alpha * v.sum()), atol=1e-9)


def test_theta_correction_is_proportional_to_theta(toy, rng):
    g, _ = toy
    theta = rng.uniform(0.5, 2.0, g.n)
    v = rng.standard_normal(g.n)
    op = RegularizedOperator(g, 0.7, theta)
    np.testing.assert_allclose(op.matvec(v) - g.adjacency @ v, 0.7 * theta * (theta @ v))
    np.testing.assert_allclose(op.regularized_degrees, degrees(g) + 0.7 * theta * theta.sum())


def test_normalized_operator_symmetry(rng):
    g, _ = clique_block_model([6, 4, 3])
    n_op = normalized_operator(RegularizedOperator(g, 0.3))
    for _ in range(5):
        u, v = rng.standard_normal(g.n), rng.standard_normal(g.n)
        assert abs(u @ n_op.matvec(v) - v @ n_op.matvec(u)) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(v)


def test_lanczos_diagonal():
    pairs = lanczos_extreme(_dense_op(np.diag([1.0, 2.0, 3.0])), 1, "largest")
    assert pairs.values[0] == pytest.approx(3.0)
    np.testing.assert_allclose(np.abs(pairs.vectors[:, 0]), [0, 0, 1], atol=1e-10)


def test_lanczos_top_of_normalized_toy(toy):
    g, _ = toy
    op = RegularizedOperator(g, 1.0)
    pairs = lanczos_extreme(normalized_operator(op), 1, "largest")
    assert pairs.values[0] == pytest.approx(1.0)
    expected = np.sqrt(op.regularized_degrees)
    expected /= np.linalg.norm(expected)
    np.testing.assert_allclose(np.abs(pairs.vectors[:, 0]), expected, atol=1e-8)


@pytest.mark.parametrize("which", ["largest", "smallest"])
def test_lanczos_random_symmetric_matches_dense(rng, which):
    m = rng.standard_normal((50, 50))
    m = (m + m.T) / 2
    pairs = lanczos_extreme(m, 5, which, seed=3)
    dense = np.linalg.eigvalsh(m)
    expected = dense[::-1][:5] if which == "largest" else dense[:5]
    np.testing.assert_allclose(pairs.values, expected, atol=1e-8)
    np.testing.assert_allclose(pairs.vectors.T @ pairs.vectors, np.eye(5), atol=1e-8)


def test_lanczos_recovers_multiplicity_by_restarting():
    pairs = lanczos_extreme(_dense_op(np.diag([3.0, 3.0, 3.0, 2.0, 1.0, 0.5])), 3, "largest")
    np.testing.assert_allclose(pairs.values, [3.0, 3.0, 3.0], atol=1e-10)
    assert pairs.restarts >= 2


def test_lanczos_restarts_until_multiplicity_is_complete():
    m = _dense_op(np.diag([3.0] * 8 + [1.0, 0.5]))
    for budget in (1, 5):
        pairs = lanczos_extreme(m, 8, "largest", max_restarts=budget)
        np.testing.assert_allclose(pairs.values, np.full(8, 3.0), atol=1e-10)
        assert pairs.restarts >= 6


def test_lanczos_refuses_unresolved_multiplicity():
    # four steps see 3 twice; a third copy is still outside the Krylov space
    with pytest.raises(ConvergenceError, match="repeated"):
        lanczos_extreme(_dense_op(np.diag([3.0] * 8 + [1.0, 0.5])), 3, "largest", max_iter=4)


def test_many_equal_cliques_keep_full_multiplicity():
    g, _ = clique_block_model([2] * 10)
    res = smallest_generalized_eigenpairs(RegularizedOperator(g, 1.0), 9)
    dense, _ = oracles.generalized_eigh(g.adjacency, 1.0)
    np.testing.assert_allclose(res.eigenvalues, dense[:9], atol=1e-8)


def test_lanczos_reports_non_convergence(rng):
    m = rng.standard_normal((60, 60))
    with pytest.raises(ConvergenceError) as exc:
        lanczos_extreme((m + m.T) / 2, 3, max_iter=4)
    assert exc.value.iterations == 4
    assert len(exc.value.residuals) == 3


def test_lanczos_argument_checks():
    with pytest.raises(ValueError):
        lanczos_extreme(np.eye(3), 4)
    with pytest.raises(ValueError):
        lanczos_extreme(np.eye(3), 1, which="middle")


def test_connected_graph_first_pair_is_trivial():
    g, _ = clique_block_model([4])
    res = smallest_generalized_eigenpairs(RegularizedOperator(g, 0.0), 1)
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
    x = res.vectors[:, 0]
    np.testing.assert_allclose(x, np.full(4, x[0]))
    assert d_gram(res.vectors, degrees(g))[0, 0] == pytest.approx(1.0)


def test_toy_interior_eigenvalues_match_dense(toy):
    g, _ = toy
    op = RegularizedOperator(g, 1.0)
    res = smallest_generalized_eigenpairs(op, 3)
    dense, _ = oracles.generalized_eigh(g.adjacency, 1.0)
    np.testing.assert_allclose(res.eigenvalues, dense[:3], atol=1e-8)
    assert 10 / 15 < res.eigenvalues[1] < 10 / 13 < res.eigenvalues[2] < 10 / 12
    np.testing.assert_allclose(d_gram(res.vectors, op.regularized_degrees), np.eye(3), atol=1e-8)
    assert np.all(res.residuals <= 1e-8)


def test_equal_blocks_give_multiplicity():
    g, _ = clique_block_model([3, 3, 3])
    op = RegularizedOperator(g, 1.0)
    res = smallest_generalized_eigenpairs(op, 3)
    dense, _ = oracles.generalized_eigh(g.adjacency, 1.0)
    np.testing.assert_allclose(res.eigenvalues, dense[:3], atol=1e-8)
    assert res.eigenvalues[1] == pytest.approx(res.eigenvalues[2], abs=1e-8)
    np.testing.assert_allclose(d_gram(res.vectors, op.regularized_degrees), np.eye(3), atol=1e-8)


def test_theta_variant_matches_dense(rng):
    g, _ = clique_block_model([6, 4, 2])
    theta = rng.uniform(0.5, 2.0, g.n)
    op = RegularizedOperator(g, 0.4, theta)
    res = smallest_generalized_eigenpairs(op, 4)
    dense, _ = oracles.generalized_eigh(g.adjacency, 0.4, theta)
    np.testing.assert_allclose(res.eigenvalues, dense[:4], atol=1e-8)


def test_disconnected_unregularized_nullspace_by_volume(toy):
    g, labels = toy
    res = smallest_generalized_eigenpairs(RegularizedOperator(g, 0.0), 3)
    np.testing.assert_allclose(res.eigenvalues, 0.0, atol=1e-12)
    # smallest component first: the 2-clique, then the 3-clique
    assert np.flatnonzero(res.vectors[:, 0]).tolist() == [8, 9]
    assert np.flatnonzero(res.vectors[:, 1]).tolist() == [5, 6, 7]


def test_isolated_nodes_refused_unless_allowed():
    g = SparseGraph.from_edges(4, [0, 1], [1, 2])
    with pytest.raises(SingularDegreeError) as exc:
        smallest_generalized_eigenpairs(RegularizedOperator(g, 0.0), 2)
    assert exc.value.zero_nodes == [3]
    res = smallest_generalized_eigenpairs(RegularizedOperator(g, 0.0), 2, allow_isolated=True)
    np.testing.assert_allclose(res.vectors[3], 0.0)
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)


def test_spectrum_bounds(rng):
    g, _ = clique_block_model([5, 4, 3, 2])
    res = smallest_generalized_eigenpairs(RegularizedOperator(g, 0.2), 5)
    assert np.all((res.eigenvalues >= 0) & (res.eigenvalues <= 2))


def test_k_bounds(toy):
    g, _ = toy
    with pytest.raises(ValueError):
        smallest_generalized_eigenpairs(RegularizedOperator(g, 1.0), g.n)


def test_gsvd_single_entry():
    res = regularized_gsvd(BipartiteGraph(sp.csr_matrix([[1.0]])), 0.0, 1)
    assert res.sigmas[0] == pytest.approx(1.0)


def test_gsvd_single_block_has_zero_second_value():
    b, _, _ = bipartite_block_model([2], [2])
    res = regularized_gsvd(b, 0.0, 2)
    np.testing.assert_allclose(res.sigmas, [1.0, 0.0], atol=1e-10)


def test_gsvd_matches_dense_and_normalizes():
    b, _, _ = bipartite_block_model([3, 2], [3, 2])
    res = regularized_gsvd(b, 1.0, 3)
    _, s, _ = oracles.normalized_svd(b.biadjacency, 1.0)
    np.testing.assert_allclose(res.sigmas, s[:3], atol=1e-8)
    d1, d2 = b.row_degrees() + 5.0, b.col_degrees() + 5.0
    np.testing.assert_allclose(d_gram(res.left, d1), np.eye(3), atol=1e-8)
    np.testing.assert_allclose(d_gram(res.right, d2), np.eye(3), atol=1e-8)
    assert np.all(res.residuals <= 1e-8)


def test_gsvd_singular_degree():
    with pytest.raises(SingularDegreeError):
        regularized_gsvd(BipartiteGraph(sp.csr_matrix([[1.0, 0.0], [0.0, 0.0]])), 0.0, 1)
