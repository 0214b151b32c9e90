"""Global equivalence of (model, initial law) pairs.

Two pairs are equivalent when they produce the same output law for every
window length. It suffices to compare a single window whose length is fixed
by the minimum lengths of both pairs. When both initial laws have full
support, an explicit intertwining map between the reachable spaces is
extracted as a certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CrossCheckError, ValidationError
from .model import YTransitionModel, as_distribution, require_valid, stationary
from .numerics import numerical_rank
from .observables import (
    exact_output_law,
    pk_map,
    quotient_actions,
    reachability_profile,
)
from .settings import NumericSettings, resolve


@dataclass(frozen=True)
class Intertwiner:
    """Linear map between quotient spaces carrying one pair onto the other.

    ``matrix`` maps quotient coordinates of A (length q_A) to those of B.
    ``reduced`` is the restriction to the reachable spaces, expressed in their
    orthonormal bases; it is square and invertible.
    """

    matrix: np.ndarray
    reduced: np.ndarray
    labels: tuple
    action_residual: float
    initial_residual: float


@dataclass(frozen=True)
class EquivalenceCertificate:
    equivalent: bool
    k_used: int
    tv_distance: float
    intertwiner: Intertwiner | None = None

    @property
    def verdict(self) -> str:
        return "equivalent" if self.equivalent else "distinguishable"


def equivalence_window(A: YTransitionModel, PA, B: YTransitionModel, PB, settings=None) -> int:
    st = resolve(settings)
    ra = reachability_profile(A, PA, st)
    rb = reachability_profile(B, PB, st)
    return max(ra.observability.k_W, rb.observability.k_W) + max(ra.k_PW, rb.k_PW) + 1


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def are_equivalent(
    A: YTransitionModel,
    PA,
    B: YTransitionModel,
    PB,
    tol: float | None = None,
    settings: NumericSettings | None = None,
    certificate: bool = True,
) -> EquivalenceCertificate:
    """Compare output laws at the window length that decides equivalence."""
    st = resolve(settings)
    tol = st.equiv_tol if tol is None else tol
    require_valid(A, st)
    require_valid(B, st)
    if A.dY != B.dY:
        raise ValidationError(f"output alphabets differ: {A.dY} vs {B.dY}")
    PA = as_distribution(PA, A.d, st)
    PB = as_distribution(PB, B.d, st)
    k = equivalence_window(A, PA, B, PB, st)
    tv = total_variation(exact_output_law(A, PA, k, st), exact_output_law(B, PB, k, st))
    equivalent = tv <= tol
    T = None
    if equivalent and certificate and np.all(PA > st.support_tol) and np.all(PB > st.support_tol):
        T = intertwiner(A, PA, B, PB, st)
    return EquivalenceCertificate(equivalent, k, tv, T)


def are_equivalent_stationary(A, B, tol=None, settings=None, certificate=True) -> EquivalenceCertificate:
    """Equivalence of the stationary output processes."""
    return are_equivalent(A, stationary(A, settings), B, stationary(B, settings), tol, settings, certificate)


def _label_vectors(model, P, labels):
    """Columns W_{label} P for every label word (y_j, ..., y_1)."""
    out = []
    for w in labels:
        v = P.copy()
        for y in reversed(w):
            v = model.W[y] @ v
        out.append(v)
    return np.array(out).T


def intertwiner(A, PA, B, PB, settings: NumericSettings | None = None) -> Intertwiner:
    """Extract T with T[W_y] = [W'_y]T on the reachable space and T[PA] = [PB]."""
    st = resolve(settings)
    PA = np.asarray(PA, dtype=float)
    PB = np.asarray(PB, dtype=float)
    ra = reachability_profile(A, PA, st)
    rb = reachability_profile(B, PB, st)
    if ra.d_PW != rb.d_PW:
        raise CrossCheckError(f"reachable dimensions differ: {ra.d_PW} vs {rb.d_PW}")
    k1 = max(ra.k_PW, rb.k_PW)
    k2 = max(ra.observability.k_W, rb.observability.k_W)
    labels = [w for j in range(k1 + 1) for w in itertools.product(range(A.dY), repeat=j)]
    XA = _label_vectors(A, PA, labels)
    XB = _label_vectors(B, PB, labels)
    MA = pk_map(A, k2, st) @ XA
    MB = pk_map(B, k2, st) @ XB
    r = numerical_rank(MA, st.rank_tol)
    rB = numerical_rank(MB, st.rank_tol)
    if r != ra.d_PW or rB != rb.d_PW:
        raise CrossCheckError(
            f"rank of the observation matrix ({r}, {rB}) differs from the reachable dimension {ra.d_PW}"
        )
    _, _, piv = scipy.linalg.qr(MA, pivoting=True, mode="economic")
    chosen = sorted(piv[:r].tolist())
    QA = ra.observability.quotient_basis
    QB = rb.observability.quotient_basis
    RA = QA.T @ XA[:, chosen]
    RB = QB.T @ XB[:, chosen]
    T = RB @ np.linalg.pinv(RA)
    actA = quotient_actions(A, ra.observability, st)
    actB = quotient_actions(B, rb.observability, st)
    scale = max(1.0, float(np.abs(T).max()))
    act_res = max(float(np.abs(T @ actA[y] @ RA - actB[y] @ RB).max()) for y in range(A.dY)) / scale
    init_res = float(np.abs(T @ (QA.T @ PA) - QB.T @ PB).max()) / scale
    OA = ra.space.basis
    OB = rb.space.basis
    reduced = OB.T @ T @ OA
    if numerical_rank(reduced, st.rank_tol) != r:
        raise CrossCheckError("extracted map is not invertible on the reachable space")
    return Intertwiner(T, reduced, tuple(tuple(labels[i]) for i in chosen), act_res, init_res)


# ---------------------------------------------------------------------------
# Equivalent-model generators


def _check_perm(perm, d):
    perm = np.asarray(perm)
    if perm.shape != (d,) or sorted(perm.tolist()) != list(range(d)):
        raise ValidationError(f"{perm.tolist()} is not a permutation of 0..{d - 1}")
    return perm


def permuted(model: YTransitionModel, perm) -> YTransitionModel:
    """Relabel hidden states: new state i is old state ``perm[i]``."""
    perm = _check_perm(perm, model.d)
    return YTransitionModel(model.W[:, perm][:, :, perm])


def permute_distribution(P, perm) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    perm = _check_perm(perm, P.shape[0])
    return P[perm].copy()


def inverse_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def duplicate_state(model: YTransitionModel, P, x_star: int, split: float):
    """Split hidden state ``x_star`` into two copies with incoming mass (split, 1 - split).

    The copy is appended as the last state. Both copies transition and emit
    exactly as ``x_star`` did, so the output process is unchanged.
    """
    if not 0.0 < split < 1.0:
        raise ValidationError(f"split must lie in (0, 1), got {split}")
    d = model.d
    if not 0 <= x_star < d:
        raise ValidationError(f"state {x_star} out of range")
    P = np.asarray(P, dtype=float)
    S = np.zeros((d + 1, d))
    S[:d, :d] = np.eye(d)
    S[x_star, x_star] = split
    S[d, x_star] = 1.0 - split
    Phi = np.zeros((d, d + 1))
    Phi[:, :d] = np.eye(d)
    Phi[x_star, d] = 1.0
    W = np.einsum("ij,yjk,kl->yil", S, model.W, Phi)
    return YTransitionModel(W), S @ P
