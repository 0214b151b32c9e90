"""Indistinguishable tangent subspaces, local equivalence and generator construction.

Tangent vectors at a model are families (B_y) of d x d matrices. They are
flattened to R^{dY d^2} in (y, x, x') row-major order, which is the order of
``B.reshape(-1)`` for an array of shape (dY, d, d). The m-representation of a
function g on the support is ``g * W``.

Subspaces (all inside L1, the tangent space of the model manifold):

* L1   -- supported families with sum_y 1^T B_y = 0;
* L2   -- commutators ([W_y, A])_y with A^T 1 = 0 (moves of the hidden basis);
* L2P  -- the same with the extra condition A P = 0;
* LP   -- families that send the reachable space plus the kernel into the kernel.

A direction is locally invisible with the initial law fixed iff its
m-representation lies in LP + L2P, and invisible for the stationary process
iff it lies in L2 + LP(stationary law).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConditionError, CrossCheckError, IndeterminateError
from .expfam import GeneratorSet, _as_gens, e_rep, g1_project, law_derivative_from_tangent, m_rep, nullity_basis
from .model import YTransitionModel, require_valid, stationary
from .numerics import Subspace, kernel, numerical_rank, span_sum
from .observables import check_genericity, reachability_profile
from .settings import NumericSettings, resolve


# ---------------------------------------------------------------------------
# Linear maps on d x d matrices (row-major vectorisation)


def alpha_matrix(Wy: np.ndarray) -> np.ndarray:
    """Matrix of A -> Wy A - A Wy acting on row-major vec(A)."""
    d = Wy.shape[0]
    eye = np.eye(d)
    return np.kron(Wy, eye) - np.kron(eye, Wy.T)


def alpha_stack(model: YTransitionModel) -> np.ndarray:
    """Stacked map A -> ([W_y, A])_y of shape (dY d^2, d^2)."""
    return np.vstack([alpha_matrix(model.W[y]) for y in range(model.dY)])


def _colsum_rows(d: int) -> np.ndarray:
    """Rows computing the column sums of A (i.e. A^T 1)."""
    return np.kron(np.ones((1, d)), np.eye(d))


def domain_basis(d: int, P=None, tol: float | None = None) -> np.ndarray:
    """Basis of {A : A^T 1 = 0} or, when P is given, of {A : A^T 1 = 0, A P = 0}."""
    rows = [_colsum_rows(d)]
    if P is not None:
        rows.append(np.kron(np.eye(d), np.asarray(P, dtype=float)[None, :]))
    return kernel(np.vstack(rows), tol).basis


def relaxed_domain_basis(d: int, tol: float | None = None) -> np.ndarray:
    """Basis of {A : A^T 1 = c 1 for some real c}."""
    C = _colsum_rows(d)
    return kernel(C[1:] - C[:1], tol).basis if d > 1 else np.eye(1)


def _supported_image(model, M, st) -> Subspace:
    """Image of M (orthonormal domain columns) intersected with the supported coordinates."""
    mask = model.support(st).reshape(-1)
    if M.shape[1] == 0:
        return Subspace.zero(M.shape[0], st.rank_tol)
    # ranks are judged against the size of the full commutator map
    scale = max(float(np.linalg.norm(alpha_stack(model), 2)), np.finfo(float).tiny)
    if not mask.all():
        # coefficients whose image vanishes off the support
        coef = kernel(M[~mask], st.rank_tol, scale=scale).basis
        M = M @ coef
    return Subspace.span(M, ambient_dim=mask.size, tol=st.rank_tol, scale=scale)


# ---------------------------------------------------------------------------
# The four subspaces


def l1_space(model: YTransitionModel, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    d, dY = model.d, model.dY
    mask = model.support(st).reshape(-1)
    cols = np.tile(np.kron(np.ones((1, d)), np.eye(d)), (1, dY))  # sum over (y, x) for each x'
    off = np.eye(mask.size)[~mask]
    return kernel(np.vstack([cols, off]), st.rank_tol)


def l2_space(model: YTransitionModel, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    return _supported_image(model, alpha_stack(model) @ domain_basis(model.d, tol=st.rank_tol), st)


def l2_space_relaxed(model: YTransitionModel, settings: NumericSettings | None = None) -> Subspace:
    """Image over the larger domain {A : A^T 1 = c 1}; equals :func:`l2_space`."""
    st = resolve(settings)
    return _supported_image(model, alpha_stack(model) @ relaxed_domain_basis(model.d, st.rank_tol), st)


def l2P_space(model: YTransitionModel, P, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    return _supported_image(model, alpha_stack(model) @ domain_basis(model.d, P, st.rank_tol), st)


def lP_space(model: YTransitionModel, P, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    d, dY = model.d, model.dY
    reach = reachability_profile(model, P, st)
    Q = reach.observability.quotient_basis
    Z = reach.preimage.basis
    mask = model.support(st).reshape(-1)
    blocks = [np.tile(np.kron(np.ones((1, d)), np.eye(d)), (1, dY)), np.eye(mask.size)[~mask]]
    if Q.shape[1] and Z.shape[1]:
        one = np.kron(Q.T, Z.T)  # vec(Q^T B Z) for a single block B
        blocks.append(np.kron(np.eye(dY), one))
    return kernel(np.vstack(blocks), st.rank_tol)


# ---------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class TangentReport:
    d: int
    dY: int
    dim_L1: int
    dim_L2: int
    dim_LP: int
    dim_L2P: int
    dim_L2_plus_LP: int
    dim_LP_plus_L2P: int
    local_dim_fixed: int
    local_dim_asymptotic: int
    observable_count: int
    generic_dim: int
    full_support: bool
    singular: bool | None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class TangentSpaces:
    L1: Subspace
    L2: Subspace
    LP: Subspace
    L2P: Subspace
    LP_stationary: Subspace
    fixed_sum: Subspace  # LP + L2P
    asymptotic_sum: Subspace  # L2 + LP(stationary)


def tangent_spaces(model: YTransitionModel, P=None, settings: NumericSettings | None = None) -> TangentSpaces:
    st = resolve(settings)
    require_valid(model, st)
    Pw = stationary(model, st)
    P = Pw if P is None else np.asarray(P, dtype=float)
    L1 = l1_space(model, st)
    L2 = l2_space(model, st)
    LP = lP_space(model, P, st)
    L2P = l2P_space(model, P, st)
    LPs = LP if P is Pw else lP_space(model, Pw, st)
    for name, S in (("L2", L2), ("LP", LP), ("L2P", L2P), ("LP(stationary)", LPs)):
        if not L1.contains_space(S, 1e-8):
            raise CrossCheckError(f"{name} is not contained in L1")
    return TangentSpaces(L1, L2, LP, L2P, LPs, span_sum(LP, L2P), span_sum(L2, LPs))


def tangent_report(model: YTransitionModel, P=None, settings: NumericSettings | None = None) -> TangentReport:
    """Dimensions of all indistinguishable subspaces and the two local dimensions.

    ``P`` defaults to the stationary law. The asymptotic dimension always uses
    the stationary law.
    """
    st = resolve(settings)
    sp = tangent_spaces(model, P, st)
    d, dY = model.d, model.dY
    generic = d * d * (dY - 1)
    full = model.full_support(st)
    local_asym = sp.L1.dim - sp.asymptotic_sum.dim
    return TangentReport(
        d=d,
        dY=dY,
        dim_L1=sp.L1.dim,
        dim_L2=sp.L2.dim,
        dim_LP=sp.LP.dim,
        dim_L2P=sp.L2P.dim,
        dim_L2_plus_LP=sp.asymptotic_sum.dim,
        dim_LP_plus_L2P=sp.fixed_sum.dim,
        local_dim_fixed=sp.L1.dim - sp.fixed_sum.dim,
        local_dim_asymptotic=local_asym,
        observable_count=dY - 1,
        generic_dim=generic,
        full_support=full,
        singular=(local_asym < generic) if full else None,
    )


# ---------------------------------------------------------------------------
# Local equivalence


@dataclass(frozen=True)
class DirectionClassification:
    """Both sides of the local equivalence criterion for one direction.

    ``residual`` is the relative distance of the normalised tangent vector
    from the indistinguishable subspace and ``derivative_norm`` the sup norm
    of the derivative of the observed law at window ``k`` along it.
    """

    invisible: bool
    residual: float
    derivative_norm: float
    k: int
    mode: str
    tangent_norm: float


def _band(value: float, st, what: str) -> bool:
    """True if value counts as zero, False if clearly nonzero."""
    if value <= st.vanish_tol:
        return True
    if value > st.nonvanish_tol:
        return False
    raise IndeterminateError(
        f"{what} {value:.3e} lies in the indeterminate band ({st.vanish_tol}, {st.nonvanish_tol}]",
        value=value,
        band=(st.vanish_tol, st.nonvanish_tol),
    )


def classify_direction(
    model: YTransitionModel,
    gens,
    a,
    P=None,
    mode: str = "fixed",
    settings: NumericSettings | None = None,
    spaces: TangentSpaces | None = None,
) -> DirectionClassification:
    """Decide local invisibility of a direction by subspace membership and by the law derivative.

    Raises :class:`IndeterminateError` when either quantity falls in the
    indeterminate band and :class:`CrossCheckError` when they disagree.
    """
    st = resolve(settings)
    g = _as_gens(model, gens)
    Pw = stationary(model, st)
    if mode == "fixed":
        P = Pw if P is None else np.asarray(P, dtype=float)
    elif mode == "stationary":
        P = Pw
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sp = tangent_spaces(model, P, st) if spaces is None else spaces
    target = sp.fixed_sum if mode == "fixed" else sp.asymptotic_sum
    B = m_rep(model, g1_project(model, g.combine(a), st))
    norm = float(np.linalg.norm(B))
    reach = reachability_profile(model, P, st)
    k = reach.observability.k_W + reach.k_PW + 1
    if norm <= 1e-13 * max(1.0, float(np.abs(g.gens).max(initial=0.0))):
        return DirectionClassification(True, 0.0, 0.0, k, mode, norm)
    Bn = B / norm
    residual = target.residual(Bn.reshape(-1))
    deriv = law_derivative_from_tangent(model, Bn, P, k, mode, st)
    dnorm = float(np.abs(deriv).max())
    by_space = _band(residual, st, "subspace residual")
    by_law = _band(dnorm, st, "law derivative")
    if by_space != by_law:
        raise CrossCheckError(
            f"membership ({by_space}, residual {residual:.3e}) disagrees with the law derivative "
            f"({by_law}, norm {dnorm:.3e})"
        )
    return DirectionClassification(by_space, residual, dnorm, k, mode, norm)


def local_equiv_fixed(model, P, gens, a, settings=None) -> bool:
    return classify_direction(model, gens, a, P, "fixed", settings).invisible


def local_equiv_asymptotic(model, gens, a, settings=None) -> bool:
    return classify_direction(model, gens, a, None, "stationary", settings).invisible


# ---------------------------------------------------------------------------
# Condition E3


def check_E3(model: YTransitionModel, y0: int, y1: int, settings: NumericSettings | None = None) -> bool:
    """Injectivity of [W_y0, .] on {A^T 1 = 0} and of ([W_y0, .], [W_y1, .]) on {<1, A 1> = 0}."""
    st = resolve(settings)
    if y0 == y1:
        raise ValueError("y0 and y1 must differ")
    d = model.d
    if d == 1:
        return True
    # ranks are judged against the size of W itself so a vanishing commutator counts as zero
    scale = float(np.abs(model.W).max())
    D0 = domain_basis(d, tol=st.rank_tol)
    first = numerical_rank(alpha_matrix(model.W[y0]) @ D0, st.rank_tol, scale) == d * d - d
    Du = kernel(np.ones((1, d * d)), st.rank_tol).basis
    joint = np.vstack([alpha_matrix(model.W[y0]), alpha_matrix(model.W[y1])]) @ Du
    second = numerical_rank(joint, st.rank_tol, scale) == d * d - 1
    return bool(first and second)


def _distinct(vals, st) -> bool:
    scale = max(float(np.abs(vals).max()), np.finfo(float).tiny)
    gaps = [abs(a - b) for a, b in itertools.combinations(vals, 2)]
    return not gaps or min(gaps) > st.gap_tol * scale


def _same_span(F, G, tol=1e-6) -> bool:
    M = np.hstack([F / np.linalg.norm(F, axis=0), G / np.linalg.norm(G, axis=0)])
    s = np.linalg.svd(M, compute_uv=False)
    return s[F.shape[1]] < tol * s[0]


def check_E3_sufficient(model: YTransitionModel, y0: int, y1: int, settings: NumericSettings | None = None) -> bool:
    """Spectral sufficient condition for E3.

    Requires simple spectra of W_y0^T and W_y1^T, all coordinates of 1 in the
    eigenbasis of W_y0^T nonzero, and no proper subset of eigenvectors of
    W_y0^T spanning the same space as an equally sized subset of eigenvectors
    of W_y1^T. The last requirement is what makes the condition imply E3 when
    d > 2; pairwise distinctness of eigenvectors alone is weaker.
    """
    st = resolve(settings)
    d = model.d
    if d == 1:
        return True
    if d > st.max_subset_dim:
        return False
    v0, F0 = np.linalg.eig(model.W[y0].T)
    v1, F1 = np.linalg.eig(model.W[y1].T)
    if not (_distinct(v0, st) and _distinct(v1, st)):
        return False
    coef = np.linalg.solve(F0, np.ones(d))
    if np.any(np.abs(coef) <= 1e-9 * np.abs(coef).max()):
        return False
    for r in range(1, d):
        for S in itertools.combinations(range(d), r):
            for S1 in itertools.combinations(range(d), r):
                if _same_span(F0[:, S], F1[:, S1]):
                    return False
    return True


def find_E3_pair(model: YTransitionModel, settings=None) -> tuple[int, int] | None:
    for y0, y1 in itertools.permutations(range(model.dY), 2):
        if check_E3(model, y0, y1, settings):
            return y0, y1
    return None


# ---------------------------------------------------------------------------
# Generator construction


def _complement_greedy(base_span: np.ndarray, candidates, count, mean_ok, st, need_all_means=True):
    """Pick ``count`` candidates independent of ``base_span`` and of each other.

    ``mean_ok(h)`` reports the nonzero-mean side condition. When
    ``need_all_means`` is False the condition only has to hold for at least
    one chosen function.
    """
    chosen = []
    current = base_span
    rank = numerical_rank(current, st.rank_tol) if current.size else 0
    skipped = []
    for h in candidates:
        if len(chosen) == count:
            break
        trial = np.hstack([current, h.reshape(-1, 1)]) if current.size else h.reshape(-1, 1)
        r = numerical_rank(trial, st.rank_tol)
        if r == rank + 1:
            if need_all_means and not mean_ok(h):
                skipped.append(h)
                continue
            chosen.append(h)
            current, rank = trial, r
    if len(chosen) < count:
        raise ConditionError("could not complete the generator block; the model is too degenerate")
    if not need_all_means and not any(mean_ok(h) for h in chosen):
        # re-pivot: replace the last pick by the first admissible candidate with nonzero mean
        for h in candidates:
            if not mean_ok(h):
                continue
            trial = np.hstack([base_span] + [c.reshape(-1, 1) for c in chosen[:-1]] + [h.reshape(-1, 1)])
            if numerical_rank(trial, st.rank_tol) == rank:
                chosen[-1] = h
                break
        else:
            raise ConditionError("no admissible generator with nonzero mean")
    return chosen


def _two_state_patterns(which: str):
    if which == "first":
        return [np.array([[1.0, 1.0], [-1.0, -1.0]]), np.array([[1.0, 1.0], [1.0, 1.0]])]
    return [np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([[0.0, 1.0], [0.0, -1.0]])]


def quotient_complement_basis(model: YTransitionModel, settings=None) -> np.ndarray:
    """Columns spanning N + N2 + NP(stationary) in the e-representation (flattened)."""
    st = resolve(settings)
    sp = tangent_spaces(model, None, st)
    cols = [nullity_basis(model, st)]
    for S in (sp.L2, sp.LP_stationary):
        if S.dim:
            cols.append(np.stack([e_rep(model, S.basis[:, j].reshape(model.W.shape), st).reshape(-1) for j in range(S.dim)], axis=1))
    return Subspace.span(np.hstack(cols), tol=st.rank_tol).basis


@dataclass(frozen=True)
class GeneratorCheck:
    count: int
    rank: int
    complement_dim: int
    intersection_dim: int
    local_dim: int


def verify_generators(model: YTransitionModel, gens, settings=None) -> GeneratorCheck:
    """Rank of the generators modulo N3 + NP and the dimension of the overlap."""
    st = resolve(settings)
    g = np.asarray(gens.gens if isinstance(gens, GeneratorSet) else gens, dtype=float)
    G = g.reshape(len(g), -1).T
    M = quotient_complement_basis(model, st)
    rG = numerical_rank(G, st.rank_tol)
    total = numerical_rank(np.hstack([G, M]), st.rank_tol)
    return GeneratorCheck(
        count=len(g),
        rank=rG,
        complement_dim=M.shape[1],
        intersection_dim=rG + M.shape[1] - total,
        local_dim=total - M.shape[1],
    )


def build_generators(
    model: YTransitionModel,
    P=None,
    observable_first: bool = False,
    settings: NumericSettings | None = None,
) -> GeneratorSet:
    """Non-redundant generators at a non-singular full-support point.

    Blocks follow the canonical order: d functions living on output y0, then
    d^2 - d on y1, then d^2 coordinate functions for each remaining output.
    With ``observable_first`` the set is recombined so that its first dY - 1
    members are indicators of single outputs.
    """
    st = resolve(settings)
    require_valid(model, st)
    d, dY = model.d, model.dY
    if dY < 2:
        raise ConditionError("generator construction needs at least two outputs")
    Pw = stationary(model, st)
    P = Pw if P is None else np.asarray(P, dtype=float)
    gen = check_genericity(model, P, st)
    if not gen.E2:
        raise ConditionError("E2 fails: some W_y entry vanishes; supply generators manually")
    if not gen.E1:
        raise ConditionError(
            "E1 fails: nontrivial kernel or deficient reachable space; "
            "for two hidden states use two_state_singular_generators"
        )
    pair = find_E3_pair(model, st)
    if pair is None:
        raise ConditionError("E3 fails for every pair of outputs")
    y0, y1 = pair

    def mean_ok(y):
        def ok(h):
            m = h.reshape(d, d) * model.W[y]
            return abs(float(m.sum(axis=0) @ P)) > st.mean_tol * max(float(np.abs(m).sum()), np.finfo(float).tiny)

        return ok

    deltas = [e.reshape(d, d) for e in np.eye(d * d)]
    D0 = domain_basis(d, tol=st.rank_tol)
    S0 = (alpha_matrix(model.W[y0]) @ D0) / model.W[y0].reshape(-1, 1)
    pool0 = ([p / model.W[y0] for p in _two_state_patterns("first")] if d == 2 else []) + deltas
    block0 = _complement_greedy(S0, [h.reshape(-1) for h in pool0], d, mean_ok(y0), st, need_all_means=False)

    comm = kernel(alpha_matrix(model.W[y0]), st.rank_tol).basis
    S1 = np.hstack([(alpha_matrix(model.W[y1]) @ comm) / model.W[y1].reshape(-1, 1), np.ones((d * d, 1))])
    pool1 = ([p / model.W[y1] for p in _two_state_patterns("second")] if d == 2 else []) + deltas
    block1 = _complement_greedy(S1, [h.reshape(-1) for h in pool1], d * d - d, lambda h: True, st)

    gens = []
    for y, block in ((y0, block0), (y1, block1)):
        for h in block:
            g = np.zeros((dY, d, d))
            g[y] = h.reshape(d, d)
            gens.append(g)
    for y in range(dY):
        if y in (y0, y1):
            continue
        for h in deltas:
            g = np.zeros((dY, d, d))
            g[y] = h
            gens.append(g)
    gens = np.array(gens)

    if observable_first:
        gens = _observable_first(model, gens, st)

    check = verify_generators(model, gens, st)
    l = d * d * (dY - 1)
    if check.intersection_dim != 0 or check.local_dim != l or check.count != l:
        raise CrossCheckError(
            f"constructed generators fail the independence check: {check}"
        )
    return GeneratorSet(gens, model)


def _observable_first(model, gens, st) -> np.ndarray:
    d, dY = model.d, model.dY
    M = quotient_complement_basis(model, st)
    obs = []
    for y in range(dY - 1):
        g = np.zeros((dY, d, d))
        g[y] = 1.0
        obs.append(g)
    chosen = []
    current = M
    rank = numerical_rank(current, st.rank_tol)
    for g in list(obs) + list(gens):
        trial = np.hstack([current, g.reshape(-1, 1)])
        r = numerical_rank(trial, st.rank_tol)
        if r == rank + 1:
            chosen.append(g)
            current, rank = trial, r
    return np.array(chosen)


def is_two_state_singular(model: YTransitionModel, tol: float = 1e-10) -> bool:
    """Every W_y has equal column sums (two hidden states)."""
    if model.d != 2:
        return False
    s = model.W.sum(axis=1)
    return bool(np.all(np.abs(s[:, 0] - s[:, 1]) <= tol))


def two_state_singular_generators(model: YTransitionModel, settings: NumericSettings | None = None) -> GeneratorSet:
    """2 dY - 2 generators spanning the tangent quotient at a two-state singular point.

    The first dY - 1 are functions of the output alone (moving along the
    singular set); the others use the pattern [[1, -1], [1, -1]].
    """
    st = resolve(settings)
    require_valid(model, st)
    if model.d != 2:
        raise ConditionError("two_state_singular_generators needs d = 2")
    if not model.full_support(st):
        raise ConditionError("two_state_singular_generators needs full support")
    if not is_two_state_singular(model):
        raise ConditionError("model is not singular: some W_y has unequal column sums")
    dY = model.dY
    E1 = np.ones((2, 2))
    E2 = np.array([[1.0, -1.0], [1.0, -1.0]])
    gens = []
    for E in (E1, E2):
        for j in range(1, dY):
            b = np.zeros(dY)
            b[0], b[j] = 1.0, -1.0
            gens.append(b[:, None, None] * E[None])
    gens = np.array(gens)
    check = verify_generators(model, gens, st)
    rep = tangent_report(model, None, st)
    if check.intersection_dim != 0 or check.local_dim != rep.local_dim_asymptotic or check.count != 2 * dY - 2:
        raise CrossCheckError(f"singular generators do not span the quotient: {check}, expected {rep.local_dim_asymptotic}")
    return GeneratorSet(gens, model)
