import numpy as np
import pytest

from hmmequiv.equivalence import (
    are_equivalent,
    are_equivalent_stationary,
    duplicate_state,
    equivalence_window,
    intertwiner,
    inverse_permutation,
    permute_distribution,
    permuted,
    total_variation,
)
from hmmequiv.errors import CrossCheckError, ValidationError
from hmmequiv.model import YTransitionModel, canonical_s2, random_model, stationary
from hmmequiv.observables import exact_output_law, pk_map, reachability_profile


def test_reflexive(m2):
    cert = are_equivalent(m2, stationary(m2), m2, stationary(m2))
    assert cert.equivalent and cert.tv_distance == 0.0
    np.testing.assert_allclose(cert.intertwiner.matrix, np.eye(2), atol=1e-12)


def test_permuted_pair_is_equivalent_with_permutation_certificate(m2):
    P = np.array([0.3, 0.7])
    swap = [1, 0]
    cert = are_equivalent(m2, P, permuted(m2, swap), permute_distribution(P, swap))
    assert cert.equivalent
    T = cert.intertwiner.matrix
    # zero kernels on both sides: quotient bases are the identity, so T is the swap matrix
    np.testing.assert_allclose(T, np.eye(2)[swap], atol=1e-10)


def test_perturbed_pair_is_distinguishable(m2):
    W = m2.W.copy()
    W[0, 0, 0] += 0.05
    W[1, 0, 0] -= 0.05
    P = stationary(m2)
    cert = are_equivalent(m2, P, YTransitionModel(W), P)
    assert not cert.equivalent
    assert cert.tv_distance > 1e-3
    assert cert.intertwiner is None


def test_permutation_preserves_laws(m2):
    P = np.array([0.25, 0.75])
    swap = [1, 0]
    np.testing.assert_allclose(
        exact_output_law(permuted(m2, swap), permute_distribution(P, swap), 3), exact_output_law(m2, P, 3), atol=1e-12
    )


def test_identity_and_inverse_permutations(rng):
    m = random_model(4, 2, rng)
    assert permuted(m, np.arange(4)) == m
    perm = rng.permutation(4)
    np.testing.assert_array_equal(permuted(permuted(m, perm), inverse_permutation(perm)).W, m.W)


def test_non_bijection_rejected(m2):
    with pytest.raises(ValidationError):
        permuted(m2, [0, 0])


def test_duplicate_state_preserves_law_and_equivalence(m2):
    P = stationary(m2)
    big, Pbig = duplicate_state(m2, P, 0, 0.5)
    assert big.d == 3
    np.testing.assert_allclose(exact_output_law(big, Pbig, 3), exact_output_law(m2, P, 3), atol=1e-14)
    cert = are_equivalent(m2, P, big, Pbig)
    assert cert.equivalent
    T = cert.intertwiner
    assert T.action_residual <= 1e-8 and T.initial_residual <= 1e-8


def test_double_duplication(m2):
    P = stationary(m2)
    big, Pbig = duplicate_state(m2, P, 0, 0.5)
    bigger, Pbigger = duplicate_state(big, Pbig, 1, 0.3)
    assert bigger.d == 4
    assert are_equivalent(m2, P, bigger, Pbigger).equivalent


def test_duplicate_single_state_model():
    m = YTransitionModel(np.array([[[0.4]], [[0.6]]]))
    big, Pbig = duplicate_state(m, [1.0], 0, 0.5)
    assert big.d == 2
    assert are_equivalent(m, [1.0], big, Pbig).equivalent


def test_duplicate_rejects_bad_split(m2):
    with pytest.raises(ValidationError):
        duplicate_state(m2, [0.5, 0.5], 0, 1.0)


def test_different_output_alphabets_rejected(m2):
    with pytest.raises(ValidationError):
        are_equivalent(m2, [0.5, 0.5], YTransitionModel(m2.total[None]), [0.5, 0.5])


def test_intertwiner_rank_mismatch_raises(m2):
    # equal laws are impossible here; the reachable dimensions 2 and 1 differ
    s2 = canonical_s2()
    with pytest.raises(CrossCheckError):
        intertwiner(m2, stationary(m2), s2, stationary(s2))


def test_no_certificate_for_degenerate_initial_law(m2):
    cert = are_equivalent(m2, [1.0, 0.0], m2, [1.0, 0.0])
    assert cert.equivalent and cert.intertwiner is None


def test_stationary_convenience(m2):
    assert are_equivalent_stationary(m2, permuted(m2, [1, 0])).equivalent


def test_window_agreement_persists_and_distinguishability_is_monotone():
    rng = np.random.default_rng(12)
    for _ in range(30):
        m = random_model(2, 2, rng)
        P = stationary(m)
        big, Pbig = duplicate_state(m, P, int(rng.integers(2)), float(rng.uniform(0.1, 0.9)))
        k = equivalence_window(m, P, big, Pbig)
        for extra in (1, 2):
            assert total_variation(exact_output_law(m, P, k + extra), exact_output_law(big, Pbig, k + extra)) <= 1e-12
        other = random_model(2, 2, rng)
        Po = stationary(other)
        tv = [total_variation(exact_output_law(m, P, j), exact_output_law(other, Po, j)) for j in range(1, 6)]
        first = next((j for j, t in enumerate(tv) if t > 1e-9), None)
        if first is not None:
            assert all(t > 1e-9 for t in tv[first:])
            assert all(b >= a - 1e-15 for a, b in zip(tv, tv[1:]))


def test_certificate_on_random_permutations(rng):
    for _ in range(20):
        d = int(rng.integers(2, 4))
        m = random_model(d, 2, rng)
        P = rng.dirichlet(np.ones(d))
        perm = rng.permutation(d)
        cert = are_equivalent(m, P, permuted(m, perm), permute_distribution(P, perm))
        assert cert.equivalent
        assert cert.intertwiner.action_residual <= 1e-8 and cert.intertwiner.initial_residual <= 1e-8
        assert len(cert.intertwiner.labels) == reachability_profile(m, P).d_PW


def test_pk_map_shared_by_equivalent_pair(m2):
    big, _ = duplicate_state(m2, stationary(m2), 1, 0.4)
    # the copy emits exactly as the original state
    np.testing.assert_allclose(pk_map(big, 2)[:, 2], pk_map(m2, 2)[:, 1], atol=1e-15)
