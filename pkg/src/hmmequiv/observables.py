"""Observed laws, kernel chains and reachable spaces.

Words of length k are written (y_k, ..., y_1) and enumerated
lexicographically with y_k most significant. The word index therefore equals
the base-dY number with digits y_k ... y_1, and the corresponding row of the
P^k map is ``1^T W_{y_k} ... W_{y_1}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CrossCheckError, EnumerationCapError
from .model import YTransitionModel, as_distribution, require_valid
from .numerics import Subspace, kernel, numerical_rank, span_sum
from .settings import NumericSettings, resolve


def _check_cap(dY: int, k: int, st: NumericSettings) -> None:
    if k < 1:
        raise ValueError("window length k must be >= 1")
    if dY**k > st.enum_cap:
        raise EnumerationCapError(
            f"dY^k = {dY}^{k} exceeds the enumeration cap {st.enum_cap}; lower k"
        )


def words(dY: int, k: int) -> list[tuple[int, ...]]:
    """All words (y_k, ..., y_1) in the row order used by :func:`pk_map`."""
    return list(itertools.product(range(dY), repeat=k))


def pk_map(model: YTransitionModel, k: int, settings: NumericSettings | None = None) -> np.ndarray:
    """Matrix with rows ``1^T W_{y_k} ... W_{y_1}`` of shape (dY^k, d)."""
    st = resolve(settings)
    _check_cap(model.dY, k, st)
    R = np.ones((1, model.d))
    for _ in range(k):
        # append y_1 as the least significant digit
        R = np.einsum("wi,yij->wyj", R, model.W).reshape(-1, model.d)
    return R


def exact_output_law(model: YTransitionModel, P, k: int, settings: NumericSettings | None = None) -> np.ndarray:
    """Probabilities of all output words of length k started from ``P``."""
    st = resolve(settings)
    _check_cap(model.dY, k, st)
    P = as_distribution(P, model.d, st)
    # forward recursion: states W_{y_j}...W_{y_1} P, new symbol most significant
    S = P[None, :]
    for _ in range(k):
        S = np.einsum("yij,wj->ywi", model.W, S).reshape(-1, model.d)
    return S.sum(axis=1)


def window_law(model: YTransitionModel, P, k: int, settings: NumericSettings | None = None) -> np.ndarray:
    """Alias of :func:`exact_output_law` returning a dY^k tensor instead of a flat vector."""
    return exact_output_law(model, P, k, settings).reshape((model.dY,) * k)


# ---------------------------------------------------------------------------
# Kernel chain


@dataclass(frozen=True)
class ObservabilityProfile:
    k_W: int
    d_W: int
    kernels: tuple  # Ker P^1 ⊇ ... ⊇ Ker P^{k_W}
    quotient_basis: np.ndarray  # d x d_W orthonormal complement of the final kernel

    @property
    def kernel(self) -> Subspace:
        return self.kernels[-1]


def _refine_kernel(model, K: Subspace, tol) -> Subspace:
    """{v : W_y v in K for every y}."""
    d = model.d
    if K.dim == d:
        return Subspace.full(d, tol)
    C = K.complement().basis  # d x q
    stacked = np.vstack([C.T @ model.W[y] for y in range(model.dY)])
    return kernel(stacked, tol)


def observability_profile(model: YTransitionModel, settings: NumericSettings | None = None) -> ObservabilityProfile:
    st = resolve(settings)
    require_valid(model, st)
    d, dY = model.d, model.dY
    kernels = []
    k = 1
    K = kernel(pk_map(model, 1, st), st.rank_tol)
    kernels.append(K)
    while True:
        if dY ** (k + 1) <= st.enum_cap:
            K_next = kernel(pk_map(model, k + 1, st), st.rank_tol)
        else:
            K_next = _refine_kernel(model, K, st.rank_tol)
        if K_next.dim == K.dim:
            break
        if K_next.dim > K.dim:
            raise CrossCheckError("kernel chain is not nested")
        kernels.append(K_next)
        K = K_next
        k += 1
        if k > d + 1:
            raise CrossCheckError("kernel chain failed to stabilise within d steps")
    Q = K.complement().basis
    if K.dim == 0:
        Q = np.eye(d)
    return ObservabilityProfile(k_W=k, d_W=d - K.dim, kernels=tuple(kernels), quotient_basis=Q)


def quotient_action(
    model: YTransitionModel,
    y: int,
    profile: ObservabilityProfile | None = None,
    settings: NumericSettings | None = None,
) -> np.ndarray:
    """Matrix of [W_y] on the quotient by the final kernel, in the stored basis."""
    st = resolve(settings)
    prof = observability_profile(model, st) if profile is None else profile
    Q = prof.quotient_basis
    K = prof.kernel.basis
    Wy = model.W[y]
    if K.shape[1]:
        leak = np.linalg.norm(Q.T @ Wy @ K)
        if leak > 1e-8 * max(1.0, np.linalg.norm(Wy)):
            raise CrossCheckError(f"W_{y} does not preserve the kernel (leak {leak:.2e})")
    return Q.T @ Wy @ Q


def quotient_actions(model, profile=None, settings=None) -> np.ndarray:
    prof = observability_profile(model, settings) if profile is None else profile
    return np.stack([quotient_action(model, y, prof, settings) for y in range(model.dY)])


# ---------------------------------------------------------------------------
# Reachable spaces


@dataclass(frozen=True)
class ReachabilityProfile:
    k_PW: int
    d_PW: int
    spaces: tuple  # V^1(P) ⊆ ... ⊆ V^{k_PW}(P), in quotient coordinates
    observability: ObservabilityProfile
    preimage: Subspace  # preimage of V^{k_PW}(P) in R^d (contains the kernel)

    @property
    def space(self) -> Subspace:
        return self.spaces[-1]


def reachability_profile(
    model: YTransitionModel,
    P,
    settings: NumericSettings | None = None,
    observability: ObservabilityProfile | None = None,
) -> ReachabilityProfile:
    st = resolve(settings)
    P = as_distribution(P, model.d, st)
    obs = observability_profile(model, st) if observability is None else observability
    Q = obs.quotient_basis
    acts = quotient_actions(model, obs, st)
    V = Subspace.span((Q.T @ P)[:, None], ambient_dim=Q.shape[1], tol=st.rank_tol)
    spaces = [V]
    k = 0
    while True:
        images = [Subspace(acts[y] @ V.basis, st.rank_tol) for y in range(model.dY)]
        V_next = Subspace.span(np.hstack([V.basis] + [im.basis for im in images]), Q.shape[1], st.rank_tol)
        k += 1
        if V_next.dim == V.dim:
            break
        spaces.append(V_next)
        V = V_next
        if k > model.d + 1:
            raise CrossCheckError("reachable chain failed to stabilise")
    # the minimal length is at least 1 by definition; keep V^1 ... V^{k_PW}
    chain = spaces[1:] if len(spaces) > 1 else [V]
    k_PW = len(chain)
    pre = span_sum(Subspace(Q @ V.basis, st.rank_tol), obs.kernel)
    return ReachabilityProfile(k_PW=k_PW, d_PW=V.dim, spaces=tuple(chain), observability=obs, preimage=pre)


# ---------------------------------------------------------------------------
# Genericity


@dataclass(frozen=True)
class Genericity:
    E1: bool
    E2: bool
    kernel_dim: int
    reachable_dim: int
    quotient_dim: int

    def as_dict(self) -> dict:
        return {"E1": self.E1, "E2": self.E2}


def check_genericity(model: YTransitionModel, P, settings: NumericSettings | None = None) -> Genericity:
    """E1: trivial kernel and full reachable space. E2: every W_y entry is positive."""
    st = resolve(settings)
    reach = reachability_profile(model, P, st)
    obs = reach.observability
    E1 = obs.kernel.dim == 0 and reach.d_PW == obs.d_W
    E2 = bool(np.all(model.W > st.support_tol))
    return Genericity(E1, E2, obs.kernel.dim, reach.d_PW, obs.d_W)


def rank_of_reshaped_law(model: YTransitionModel, P, k1: int, k2: int, settings=None) -> int:
    """Rank of the law at length k1+k2 viewed as a (dY^k2 x dY^k1) matrix.

    The row index is the leading (most recent) k2 symbols.
    """
    st = resolve(settings)
    law = exact_output_law(model, P, k1 + k2, st)
    return numerical_rank(law.reshape(model.dY**k2, model.dY**k1), st.rank_tol)
