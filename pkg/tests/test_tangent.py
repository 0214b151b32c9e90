import itertools

import numpy as np
import pytest

from hmmequiv.errors import ConditionError, CrossCheckError
from hmmequiv.expfam import e_rep, law_derivative, law_derivative_from_tangent
from hmmequiv.model import YTransitionModel, random_model, stationary
from hmmequiv.numerics import equal, intersect, kernel, numerical_rank, span_sum
from hmmequiv.observables import reachability_profile
from hmmequiv.tangent import (
    alpha_stack,
    domain_basis,
    build_generators,
    check_E3,
    check_E3_sufficient,
    classify_direction,
    l1_space,
    l2_space,
    l2_space_relaxed,
    l2P_space,
    local_equiv_asymptotic,
    local_equiv_fixed,
    lP_space,
    tangent_report,
    tangent_spaces,
    two_state_singular_generators,
    verify_generators,
)


def singular_two_state(dY, rng):
    """d = 2 model where every W_y has equal column sums (the non-memory stratum)."""
    q = rng.dirichlet(np.ones(dY))
    W = np.stack([q[y] * rng.dirichlet(np.ones(2), size=2).T for y in range(dY)])
    return YTransitionModel(W)


def domain_dim(d, P):
    """dim {A : A^T 1 = 0, A P = 0} by a direct rank computation."""
    rows = []
    for xp in range(d):  # column sums
        r = np.zeros((d, d))
        r[:, xp] = 1.0
        rows.append(r.reshape(-1))
    for x in range(d):  # (A P)_x
        r = np.zeros((d, d))
        r[x, :] = P
        rows.append(r.reshape(-1))
    return kernel(np.array(rows)).dim


def test_l1_dimensions(m2):
    L1 = l1_space(m2)
    assert L1.dim == 6
    B = L1.basis.T.reshape(-1, 2, 2, 2)
    assert np.abs(B.sum(axis=(1, 2))).max() <= 1e-12
    single = YTransitionModel(m2.total[None])
    assert l1_space(single).dim == 2


def test_l2_dimensions(m2, s2):
    assert l2_space(m2).dim == 2
    assert l2_space(s2).dim == 1


def test_l2_relaxed_domain_gives_same_image(m2, s2, rng):
    for m in (m2, s2, random_model(3, 2, rng), singular_two_state(3, rng)):
        assert equal(l2_space(m), l2_space_relaxed(m))


def test_commutators_with_diagonal_model():
    W = np.stack([np.diag([0.2, 0.5]), np.diag([0.8, 0.5])])
    m = YTransitionModel(W)
    # A = [[a, b], [-a, -b]]; [D, A] keeps only b and -a, scaled by D_00 - D_11 = -0.3 and 0.3
    image = alpha_stack(m) @ domain_basis(2)
    assert numerical_rank(image) == 2
    assert np.abs(image.reshape(2, 2, 2, -1)[:, [0, 1], [0, 1]]).max() <= 1e-15
    # every commutator leaves the diagonal support, so the supported image is trivial
    assert l2_space(m).dim == 0


def test_l2p_and_lp_at_m2(m2):
    P = stationary(m2)
    assert lP_space(m2, P).dim == 0
    # alpha is injective at m2 (dim L2 equals its domain dimension d^2 - d), so L2P
    # has the dimension of {A : A^T 1 = 0, A P = 0}
    assert l2_space(m2).dim == 2
    assert l2P_space(m2, P).dim == domain_dim(2, P) == 1


def test_s2_lp_contains_l2(s2):
    P = stationary(s2)
    LP = lP_space(s2, P)
    assert LP.dim == 4
    assert LP.contains_space(l2_space(s2))


def test_subspaces_sit_inside_l1(rng):
    for _ in range(20):
        m = random_model(3, 2, rng)
        sp = tangent_spaces(m, rng.dirichlet(np.ones(3)))
        assert sp.L1.contains_space(sp.fixed_sum) and sp.L1.contains_space(sp.asymptotic_sum)


def test_reports(m2, s2):
    r = tangent_report(m2)
    assert (r.dim_L1, r.dim_L2, r.local_dim_asymptotic, r.singular) == (6, 2, 4, False)
    r = tangent_report(s2)
    assert (r.local_dim_asymptotic, r.singular) == (2, True)


def test_two_state_three_outputs(rng):
    assert tangent_report(random_model(2, 3, rng)).local_dim_asymptotic == 8
    assert tangent_report(singular_two_state(3, rng)).local_dim_asymptotic == 4


def test_zero_direction_is_invisible(m2):
    g = np.zeros((1,) + m2.W.shape)
    g[0, 0, 0, 0] = 1.0
    assert local_equiv_fixed(m2, stationary(m2), g, [0.0])
    assert local_equiv_asymptotic(m2, g, [0.0])


def test_constructed_commutator_direction_is_invisible(m2):
    P = np.array([0.3, 0.7])
    A = np.array([[0.7, -0.3], [-0.7, 0.3]])  # A^T 1 = 0 and A P = 0
    assert np.abs(A.sum(axis=0)).max() == 0 and np.abs(A @ P).max() <= 1e-15
    B = np.stack([Wy @ A - A @ Wy for Wy in m2.W])
    g = e_rep(m2, B)
    cls = classify_direction(m2, [g], [1.0], P, "fixed")
    assert cls.invisible
    k = cls.k
    assert np.abs(law_derivative(m2, [g], [1.0], P, k)).max() <= 1e-9


def test_coordinate_direction_is_visible(m2):
    g = np.zeros((1,) + m2.W.shape)
    g[0, 0, 0, 0] = 1.0
    P = stationary(m2)
    assert not local_equiv_fixed(m2, P, g, [1.0])
    reach = reachability_profile(m2, P)
    k = reach.observability.k_W + reach.k_PW + 1
    assert np.abs(law_derivative(m2, g, [1.0], P, k)).max() > 1e-3


def test_e3_at_m2(m2):
    assert check_E3(m2, 0, 1) and check_E3_sufficient(m2, 0, 1)


def test_e3_fails_for_scalar_block():
    W1 = 0.7 * np.array([[0.6, 0.1], [0.4, 0.9]])
    m = YTransitionModel(np.stack([0.3 * np.eye(2), W1]))
    assert not check_E3(m, 0, 1)
    assert not check_E3_sufficient(m, 0, 1)


def test_e3_sufficient_implies_e3():
    rng = np.random.default_rng(21)
    for _ in range(200):
        m = random_model(int(rng.integers(2, 4)), 2, rng)
        if check_E3_sufficient(m, 0, 1):
            assert check_E3(m, 0, 1)


def test_build_generators_two_outputs(m2):
    gens = build_generators(m2)
    assert len(gens) == 4
    check = verify_generators(m2, gens)
    assert check.intersection_dim == 0 and check.local_dim == 4


def test_build_generators_three_outputs(rng):
    m = random_model(2, 3, rng)
    gens = build_generators(m)
    assert len(gens) == 8
    assert verify_generators(m, gens).intersection_dim == 0


def test_build_generators_observable_first(rng):
    m = random_model(2, 3, rng)
    gens = build_generators(m, observable_first=True).gens
    for j in range(2):
        # a function of the output alone
        assert all(np.ptp(gens[j][y]) == 0 for y in range(3))


def test_build_generators_rejects_singular(s2):
    with pytest.raises(ConditionError):
        build_generators(s2)


def test_singular_generators(s2, rng):
    assert len(two_state_singular_generators(s2)) == 2
    m = singular_two_state(3, rng)
    gens = two_state_singular_generators(m)
    assert len(gens) == 4
    assert verify_generators(m, gens).local_dim == 4


def test_singular_generators_reject_regular_model(m2):
    with pytest.raises(ConditionError):
        two_state_singular_generators(m2)


def test_generator_check_on_random_models():
    rng = np.random.default_rng(22)
    for d, dY in itertools.product((2, 3), (2, 3)):
        for _ in range(5):
            m = random_model(d, dY, rng)
            gens = build_generators(m)
            sp = tangent_spaces(m)
            assert verify_generators(m, gens).intersection_dim == 0
            assert len(gens) == sp.L1.dim - sp.asymptotic_sum.dim


def test_sum_of_lp_and_l2_matches_direct_span(s2):
    sp = tangent_spaces(s2)
    assert equal(sp.asymptotic_sum, span_sum(sp.L2, sp.LP_stationary))
    assert intersect(sp.L2, sp.LP_stationary).dim == sp.L2.dim


def test_iid_point_has_invisible_direction_outside_the_subspaces(s2):
    """At S2 with stationary P the law derivative only sees output marginals.

    The direction with 1^T B_0 = -1^T B_1 = r and r orthogonal to P_W leaves
    every window law unchanged to first order, yet it is not in L_2 + L_P
    because L_P asks B_y to send the whole plane (reachable class plus kernel)
    into the kernel. The two criteria therefore disagree and the classifier
    refuses to choose.
    """
    P = stationary(s2)
    r = np.array([P[1], -P[0]])
    B = np.zeros(s2.W.shape)
    B[0, 0] = r
    B[1, 0] = -r
    sp = tangent_spaces(s2)
    assert sp.L1.contains(B.reshape(-1))
    assert sp.asymptotic_sum.residual(B.reshape(-1) / np.linalg.norm(B)) > 1e-3
    for k in range(1, 6):
        assert np.abs(law_derivative_from_tangent(s2, B, P, k, "stationary")).max() <= 1e-15
    with pytest.raises(CrossCheckError):
        classify_direction(s2, [e_rep(s2, B)], [1.0], None, "stationary")
