import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hmmequiv.errors import InconsistentSystemError
from hmmequiv.model import canonical_m2, random_model
from hmmequiv.numerics import (
    Subspace,
    equal,
    intersect,
    is_irreducible,
    kernel,
    numerical_rank,
    perron,
    solve_on_complement,
    span_sum,
)


def test_kernel_of_identity_is_zero():
    assert kernel(np.eye(3)).dim == 0


def test_kernel_of_rank_one_symmetric_matrix():
    K = kernel(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert K.dim == 1
    v = K.basis[:, 0] * np.sign(K.basis[0, 0])
    np.testing.assert_allclose(v, np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-12)


def test_first_observation_map_of_m2_has_trivial_kernel():
    V = np.array([[0.9, 0.2], [0.1, 0.8]])
    assert kernel(V).dim == 0


def test_sum_with_zero_space_is_unchanged():
    S = Subspace.span(np.array([[1.0], [2.0], [0.0]]))
    assert equal(span_sum(S, Subspace.zero(3)), S)


def test_intersection_of_coordinate_planes():
    e = np.eye(3)
    A = Subspace.span(e[:, [0, 1]])
    B = Subspace.span(e[:, [1, 2]])
    I = intersect(A, B)
    assert I.dim == 1
    assert I.contains(e[:, 1])


def test_containment_of_scaled_vector():
    S = Subspace.span(np.array([[1.0], [1.0]]) / np.sqrt(2))
    assert S.contains(np.array([2.0, 2.0]))
    assert not S.contains(np.array([1.0, 0.0]))


def test_perron_of_stochastic_matrix():
    A = canonical_m2().total
    pd = perron(A)
    assert abs(pd.lam - 1.0) <= 1e-12
    left = pd.left / pd.left[0]
    np.testing.assert_allclose(left, np.ones(2), atol=1e-12)


def test_perron_of_symmetric_circulant():
    pd = perron(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert abs(pd.lam - 3.0) <= 1e-12
    np.testing.assert_allclose(pd.right / pd.right[0], [1.0, 1.0], atol=1e-12)
    assert abs(pd.left @ pd.right - 1.0) <= 1e-12


def test_perron_agrees_with_dense_eigensolver_on_tilted_matrix():
    m = canonical_m2()
    g = np.zeros_like(m.W)
    g[0, 0, 0] = 1.0
    tilted = (np.exp(0.1 * g) * m.W).sum(axis=0)
    dense = max(np.linalg.eigvals(tilted).real)
    assert abs(perron(tilted).lam - dense) <= 1e-10


def test_solve_on_complement_homogeneous():
    M = np.eye(2) - canonical_m2().total
    np.testing.assert_allclose(solve_on_complement(M, np.zeros(2), np.ones(2)), 0.0, atol=1e-14)


def test_solve_on_complement_unique_solution():
    M = np.eye(2) - canonical_m2().total
    b = np.array([0.1, -0.1])
    x = solve_on_complement(M, b, np.ones(2))
    np.testing.assert_allclose(M @ x, b, atol=1e-12)
    assert abs(x.sum()) <= 1e-12


def test_solve_on_complement_rejects_inconsistent_right_hand_side():
    M = np.eye(2) - canonical_m2().total
    with pytest.raises(InconsistentSystemError):
        solve_on_complement(M, np.array([1.0, 1.0]), np.ones(2))


def test_irreducibility():
    assert is_irreducible(canonical_m2().total)
    assert not is_irreducible(np.eye(2))


def test_perron_on_many_random_stochastic_matrices():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        A = rng.dirichlet(np.ones(d), size=d).T
        assert abs(perron(A).lam - 1.0) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 2**31))
def test_rank_is_stable_under_tiny_perturbations(n, r, seed):
    rng = np.random.default_rng(seed)
    r = min(r, n)
    M = rng.standard_normal((n, r)) @ rng.standard_normal((r, n))
    E = rng.standard_normal((n, n))
    E *= 1e-14 / np.abs(E).max()
    assert kernel(M).dim == kernel(M + E).dim == n - r


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_dimension_formula_for_sum_and_intersection(n, seed):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((n, int(rng.integers(0, n))))
    A = Subspace.span(np.hstack([shared, rng.standard_normal((n, int(rng.integers(0, 2))))]), ambient_dim=n)
    B = Subspace.span(np.hstack([shared, rng.standard_normal((n, int(rng.integers(0, 2))))]), ambient_dim=n)
    assert A.dim + B.dim == span_sum(A, B).dim + intersect(A, B).dim


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-5, 5)))
def test_rank_plus_nullity(M):
    assert numerical_rank(M) + kernel(M).dim == M.shape[1]


def test_random_models_have_irreducible_totals():
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert is_irreducible(random_model(3, 2, rng).total)


def test_perron_on_badly_balanced_matrix():
    # power iteration stalls just above the residual limit here; the dense fallback recovers
    A = np.array([[5.8460624131380901e-01, 9.3358221151209814e-02],
                  [2.2789222179353466e+04, 1.6750017861601385e+00]])
    pd = perron(A)
    expected = max(np.linalg.eigvals(A).real)
    assert abs(pd.lam - expected) <= 1e-10 * abs(expected)
    assert np.all(pd.right > 0) and np.all(pd.left > 0)
