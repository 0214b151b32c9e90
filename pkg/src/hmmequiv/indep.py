"""Independent-type models: W_y = W D(V_y).

A tangent vector of the independent family is a pair (B, C) where B is a
d x d matrix (m-representation of the transition part g_a) and C a dY x d
array whose row C[y] is the m-representation of the emission part g_b(y, .).
Pairs are flattened to R^{d^2 + dY d} as ``concat(B.ravel(), C.ravel())``.
The star map sends a pair to the general tangent family

    star(B, C)_y = B D(V_y) + W D(C_y).

Every indistinguishable subspace of the independent family is the star
preimage of the matching general subspace inside L1I. Closed forms for the
commutator spaces (and their specialisations for invertible or rank-one W)
are computed as well and asserted to agree with the preimages.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .equivalence import are_equivalent
from .errors import ConditionError, CrossCheckError, OverflowGuardError, ValidationError
from .expfam import ExpFamilyPoint, GeneratorSet, at, g1_project, m_rep
from .model import (
    IndepModel,
    YTransitionModel,
    as_distribution,
    from_independent,
    require_valid,
    stationary,
)
from .numerics import Subspace, equal, kernel, numerical_rank, perron, span_sum
from .observables import observability_profile, reachability_profile
from .settings import NumericSettings, resolve
from .tangent import _colsum_rows, alpha_matrix, l2_space, l2P_space, lP_space


# ---------------------------------------------------------------------------
# Coordinates and the star map


def pair_dim(m: IndepModel) -> int:
    return m.d * m.d + m.dY * m.d


def pack_pair(B, C) -> np.ndarray:
    return np.concatenate([np.asarray(B, dtype=float).ravel(), np.asarray(C, dtype=float).ravel()])


def unpack_pair(m: IndepModel, z) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    d, dY = m.d, m.dY
    return z[: d * d].reshape(d, d), z[d * d :].reshape(dY, d)


def star_map(m: IndepModel, B, C) -> np.ndarray:
    """Family (B D(V_y) + W D(C_y))_y of shape (dY, d, d)."""
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    return B[None, :, :] * m.V[:, None, :] + m.Wmat[None, :, :] * C[:, None, :]


def star_matrix(m: IndepModel) -> np.ndarray:
    """Matrix of :func:`star_map` from pair coordinates to flattened families."""
    d, dY = m.d, m.dY
    S = np.zeros((dY * d * d, pair_dim(m)))
    for y, x, xp in itertools.product(range(dY), range(d), range(d)):
        row = (y * d + x) * d + xp
        S[row, x * d + xp] = m.V[y, xp]
        S[row, d * d + y * d + xp] = m.Wmat[x, xp]
    return S


def pair_support(m: IndepModel, settings: NumericSettings | None = None) -> np.ndarray:
    st = resolve(settings)
    return np.concatenate([(m.Wmat > st.support_tol).ravel(), (m.V > st.support_tol).ravel()])


def _l1_rows(m: IndepModel, st) -> np.ndarray:
    """Rows of B^T 1 = 0, sum_y C_y = 0 and the off-support constraints."""
    d, dY = m.d, m.dY
    n = pair_dim(m)
    col_B = np.hstack([_colsum_rows(d), np.zeros((d, dY * d))])
    sum_C = np.hstack([np.zeros((d, d * d)), np.tile(np.eye(d), (1, dY))])
    mask = pair_support(m, st)
    return np.vstack([col_B, sum_C, np.eye(n)[~mask]])


# ---------------------------------------------------------------------------
# Subspaces of pairs


def l1I_space(m: IndepModel, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    require_valid(m, st)
    return kernel(_l1_rows(m, st), st.rank_tol)


def _preimage(m: IndepModel, target: Subspace, st) -> Subspace:
    """Pairs in L1I whose star image lies in ``target``."""
    N = l1I_space(m, st).basis
    SN = star_matrix(m) @ N
    if N.shape[1] == 0:
        return Subspace.zero(pair_dim(m), st.rank_tol)
    off = SN - target.basis @ (target.basis.T @ SN)
    scale = max(float(np.linalg.norm(SN, 2)), np.finfo(float).tiny)
    K = kernel(off, st.rank_tol, scale=scale)
    return Subspace(N @ K.basis, st.rank_tol)


def _diag_embed(d: int) -> np.ndarray:
    """Matrix E with E @ c = vec(D(c))."""
    E = np.zeros((d * d, d))
    E[np.arange(d) * (d + 1), np.arange(d)] = 1.0
    return E


def _commutator_image(m: IndepModel, A_basis: np.ndarray, C_of_A, st) -> Subspace:
    """Span of ([W, A], C(A)) over the columns of ``A_basis``."""
    if A_basis.shape[1] == 0:
        return Subspace.zero(pair_dim(m), st.rank_tol)
    top = alpha_matrix(m.Wmat) @ A_basis
    bottom = C_of_A(A_basis)
    M = np.vstack([top, bottom])
    scale = max(float(np.linalg.norm(alpha_matrix(m.Wmat), 2)), float(np.abs(m.V).max()), 1e-300)
    return Subspace.span(M, ambient_dim=pair_dim(m), tol=st.rank_tol, scale=scale)


def commutator_form_space(m: IndepModel, P=None, settings: NumericSettings | None = None) -> Subspace:
    """{([W, A], C) : A^T 1 = 0, (A P = 0), W [D(V_y), A] = W D(C_y) for all y}."""
    st = resolve(settings)
    d, dY = m.d, m.dY
    nA, nC = d * d, dY * d
    rows = [np.hstack([_colsum_rows(d), np.zeros((d, nC))])]
    if P is not None:
        rows.append(np.hstack([np.kron(np.eye(d), np.asarray(P, dtype=float)[None, :]), np.zeros((d, nC))]))
    WI = np.kron(m.Wmat, np.eye(d))
    E = _diag_embed(d)
    eye = np.eye(d)
    for y in range(dY):
        D = np.diag(m.V[y])
        on_A = WI @ (np.kron(D, eye) - np.kron(eye, D))
        on_C = np.zeros((nA, nC))
        on_C[:, y * d : (y + 1) * d] = -WI @ E
        rows.append(np.hstack([on_A, on_C]))
    # the pair must live on the support of (W, V)
    maskB = (m.Wmat > st.support_tol).ravel()
    maskC = (m.V > st.support_tol).ravel()
    rows.append(np.hstack([alpha_matrix(m.Wmat)[~maskB], np.zeros(((~maskB).sum(), nC))]))
    rows.append(np.hstack([np.zeros(((~maskC).sum(), nA)), np.eye(nC)[~maskC]]))
    K = kernel(np.vstack(rows), st.rank_tol).basis
    if K.shape[1] == 0:
        return Subspace.zero(pair_dim(m), st.rank_tol)
    F = np.zeros((pair_dim(m), nA + nC))
    F[:nA, :nA] = alpha_matrix(m.Wmat)
    F[nA:, nA:] = np.eye(nC)
    scale = max(float(np.linalg.norm(F, 2)), 1e-300)
    return Subspace.span(F @ K, ambient_dim=pair_dim(m), tol=st.rank_tol, scale=scale)


def emission_classes(m: IndepModel, tol: float = 1e-10) -> list[list[int]]:
    """Hidden states grouped by identical emission columns V[:, x]."""
    classes: list[list[int]] = []
    for x in range(m.d):
        for cl in classes:
            if np.abs(m.V[:, cl[0]] - m.V[:, x]).max() <= tol:
                cl.append(x)
                break
        else:
            classes.append([x])
    return classes


def invertible_form_space(m: IndepModel, P=None, settings: NumericSettings | None = None) -> Subspace:
    """Form valid for invertible W: C = 0 and A block diagonal over emission classes."""
    st = resolve(settings)
    d = m.d
    label = np.empty(d, dtype=int)
    for i, cl in enumerate(emission_classes(m)):
        label[cl] = i
    rows = [_colsum_rows(d)]
    if P is not None:
        rows.append(np.kron(np.eye(d), np.asarray(P, dtype=float)[None, :]))
    I = np.eye(d * d)
    rows += [I[x * d + xp][None, :] for x in range(d) for xp in range(d) if label[x] != label[xp]]
    A_basis = kernel(np.vstack(rows), st.rank_tol).basis
    return _commutator_image(m, A_basis, lambda A: np.zeros((m.dY * d, A.shape[1])), st)


def rank_one_form_space(m: IndepModel, P=None, settings: NumericSettings | None = None) -> Subspace:
    """Form valid for W with identical columns: C_y = A^T V_y."""
    st = resolve(settings)
    d = m.d
    rows = [_colsum_rows(d)]
    if P is not None:
        rows.append(np.kron(np.eye(d), np.asarray(P, dtype=float)[None, :]))
    A_basis = kernel(np.vstack(rows), st.rank_tol).basis

    def C_of_A(Ab):
        out = []
        for j in range(Ab.shape[1]):
            A = Ab[:, j].reshape(d, d)
            out.append((m.V @ A).ravel())  # row y is (A^T V_y)^T
        return np.array(out).T

    return _commutator_image(m, A_basis, C_of_A, st)


def lPI_constraint_space(m: IndepModel, P, settings: NumericSettings | None = None) -> Subspace:
    """Pairs in L1I with (W D(C_y) + B D(V_y)) sending reachable + kernel into the kernel."""
    st = resolve(settings)
    model = from_independent(m, st)
    reach = reachability_profile(model, P, st)
    Q = reach.observability.quotient_basis
    Z = reach.preimage.basis
    rows = [_l1_rows(m, st)]
    if Q.shape[1] and Z.shape[1]:
        S = star_matrix(m)
        d2 = m.d * m.d
        one = np.kron(Q.T, Z.T)
        rows += [one @ S[y * d2 : (y + 1) * d2] for y in range(m.dY)]
    return kernel(np.vstack(rows), st.rank_tol)


def _is_rank_one_uniformly_supported(m: IndepModel, st) -> bool:
    W = m.Wmat
    return bool(np.all(W > st.support_tol) and np.abs(W - W[:, :1]).max() <= 1e-12)


def _agree(name: str, a: Subspace, b: Subspace) -> None:
    if not equal(a, b, 1e-7):
        raise CrossCheckError(f"{name}: the two constructions differ (dims {a.dim} and {b.dim})")


def l2I_space(m: IndepModel, settings: NumericSettings | None = None, P=None) -> Subspace:
    """Indistinguishable pairs from hidden-basis moves (with A P = 0 when ``P`` is given).

    Computed as the star preimage of the general commutator space and checked
    against the closed commutator form and, when their hypotheses hold, the
    invertible-W and rank-one-W specialisations.
    """
    st = resolve(settings)
    require_valid(m, st)
    model = from_independent(m, st)
    general = l2_space(model, st) if P is None else l2P_space(model, P, st)
    pre = _preimage(m, general, st)
    _agree("commutator form", pre, commutator_form_space(m, P, st))
    if numerical_rank(m.Wmat, st.rank_tol) == m.d:
        _agree("invertible-W form", pre, invertible_form_space(m, P, st))
    if _is_rank_one_uniformly_supported(m, st):
        _agree("rank-one-W form", pre, rank_one_form_space(m, P, st))
    return pre


def l2PI_space(m: IndepModel, P, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    return l2I_space(m, st, P=as_distribution(P, m.d, st))


def lPI_space(m: IndepModel, P, settings: NumericSettings | None = None) -> Subspace:
    st = resolve(settings)
    require_valid(m, st)
    P = as_distribution(P, m.d, st)
    pre = _preimage(m, lP_space(from_independent(m, st), P, st), st)
    _agree("reachable/kernel constraints", pre, lPI_constraint_space(m, P, st))
    return pre


# ---------------------------------------------------------------------------
# Report


def independent_dimension(d: int, dY: int) -> int:
    """Dimension of the full independent family with full support."""
    return d * (d + dY - 2)


@dataclass(frozen=True)
class IndepTangentSpaces:
    L1I: Subspace
    L2I: Subspace
    LPI: Subspace
    L2PI: Subspace
    LPI_stationary: Subspace
    fixed_sum: Subspace
    asymptotic_sum: Subspace


@dataclass(frozen=True)
class IndepTangentReport:
    d: int
    dY: int
    dim_L1I: int
    dim_L2I: int
    dim_LPI: int
    dim_L2PI: int
    dim_LPI_stationary: int
    local_dim_fixed: int
    local_dim_asymptotic: int
    generic_dim: int
    full_support: bool
    singular: bool | None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def indep_tangent_spaces(m: IndepModel, P=None, settings: NumericSettings | None = None) -> IndepTangentSpaces:
    st = resolve(settings)
    Pw = stationary(m, st)
    P = Pw if P is None else as_distribution(P, m.d, st)
    L1 = l1I_space(m, st)
    L2 = l2I_space(m, st)
    LP = lPI_space(m, P, st)
    L2P = l2PI_space(m, P, st)
    LPs = lPI_space(m, Pw, st)
    return IndepTangentSpaces(L1, L2, LP, L2P, LPs, span_sum(LP, L2P), span_sum(L2, LPs))


def indep_tangent_report(m: IndepModel, P=None, settings: NumericSettings | None = None) -> IndepTangentReport:
    st = resolve(settings)
    sp = indep_tangent_spaces(m, P, st)
    full = bool(pair_support(m, st).all())
    generic = independent_dimension(m.d, m.dY)
    asym = sp.L1I.dim - sp.asymptotic_sum.dim
    return IndepTangentReport(
        d=m.d,
        dY=m.dY,
        dim_L1I=sp.L1I.dim,
        dim_L2I=sp.L2I.dim,
        dim_LPI=sp.LPI.dim,
        dim_L2PI=sp.L2PI.dim,
        dim_LPI_stationary=sp.LPI_stationary.dim,
        local_dim_fixed=sp.L1I.dim - sp.fixed_sum.dim,
        local_dim_asymptotic=asym,
        generic_dim=generic,
        full_support=full,
        singular=(asym < generic) if full else None,
    )


# ---------------------------------------------------------------------------
# Factorisation test


@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one factorisation sub-condition: "pass", "fail" or "indeterminate"."""

    status: str
    detail: str
    value: float | None = None

    def as_dict(self) -> dict:
        return {"status": self.status, "detail": self.detail, "value": self.value}


@dataclass(frozen=True)
class Decomposition:
    """Result of :func:`decompose`.

    On success ``indep`` is the recovered pair and ``T`` the change of basis
    with ``T U_y T^-1 = D(V_y)``; ``failed`` names the first failing
    sub-condition otherwise.
    """

    ok: bool
    failed: str | None
    conditions: dict
    indep: IndepModel | None = None
    T: np.ndarray | None = None
    witness: int | None = None
    equivalence_checked: bool = False
    equivalence_tv: float | None = None

    @property
    def indeterminate(self) -> bool:
        return any(c.status == "indeterminate" for c in self.conditions.values())

    def as_dict(self) -> dict:
        out = {
            "ok": self.ok,
            "failed": self.failed,
            "conditions": {k: v.as_dict() for k, v in self.conditions.items()},
            "witness": self.witness,
            "equivalence_checked": self.equivalence_checked,
            "equivalence_tv": self.equivalence_tv,
        }
        if self.indep is not None:
            out["Wmat"] = self.indep.Wmat.tolist()
            out["V"] = self.indep.V.tolist()
            out["T"] = self.T.tolist()
        return out


def _min_gap(vals) -> float:
    v = np.asarray(vals)
    if v.size < 2:
        return math.inf
    return float(min(abs(a - b) for a, b in itertools.combinations(v, 2)))


def _fail(conds, name, detail, value=None, status="fail"):
    conds[name] = ConditionResult(status, detail, value)
    return Decomposition(False, name, conds)


def decompose(model: YTransitionModel, settings: NumericSettings | None = None, verify: bool = True) -> Decomposition:
    """Test whether a model is a change of basis of an independent-type model.

    With U_y = |W|^-1 W_y the conditions are: some U_y has simple spectrum and
    every U_y has a real nonnegative spectrum (G2-1); the eigenvectors of that
    witness diagonalise every U_y (G2-2); the change of basis turns |W| into a
    nonnegative matrix (G2-3). Rows of T are left eigenvectors of the witness,
    scaled so that their sum is the all-ones row.
    """
    st = resolve(settings)
    require_valid(model, st)
    d, dY = model.d, model.dY
    total = model.total
    conds: dict = {}
    if numerical_rank(total, st.rank_tol) < d:
        raise ConditionError("|W| is singular; the factorisation test needs an invertible total matrix")
    if dY == 1:
        for name in ("G2-1", "G2-2", "G2-3"):
            conds[name] = ConditionResult("pass", "single output symbol")
        m = IndepModel(total, np.ones((1, d)))
        return Decomposition(True, None, conds, m, np.eye(d), 0, False, None)

    U = np.stack([np.linalg.solve(total, model.W[y]) for y in range(dY)])
    spectra = [np.linalg.eigvals(U[y]) for y in range(dY)]
    top = max(1.0, max(float(np.abs(s).max()) for s in spectra))
    worst_imag = max(float(np.abs(s.imag).max()) for s in spectra)
    if worst_imag > st.eig_imag_tol * top:
        return _fail(conds, "G2-1", "an U_y has a non-real eigenvalue", worst_imag)
    most_negative = min(float(s.real.min()) for s in spectra)
    if most_negative < -st.eig_neg_tol * top:
        return _fail(conds, "G2-1", "an U_y has a negative eigenvalue", most_negative)
    gaps = [_min_gap(s.real) / max(float(np.abs(s).max()), 1e-300) for s in spectra]
    witness = int(np.argmax(gaps))
    gap = gaps[witness]
    if gap <= st.gap_floor:
        return _fail(conds, "G2-1", "no U_y has a simple spectrum", gap)
    if gap <= st.gap_tol:
        return _fail(conds, "G2-1", "largest relative eigenvalue gap is inside the indeterminate band", gap,
                     status="indeterminate")
    conds["G2-1"] = ConditionResult("pass", f"witness y={witness}", gap)

    vals, left = np.linalg.eig(U[witness].T)  # columns are left eigenvectors of the witness
    order = np.argsort(vals.real)
    Tn = np.real(left[:, order]).T
    Tn = Tn / np.linalg.norm(Tn, axis=1, keepdims=True)
    Tinv = np.linalg.inv(Tn)
    leak = 0.0
    for y in range(dY):
        Dy = Tn @ U[y] @ Tinv
        off = Dy - np.diag(np.diag(Dy))
        leak = max(leak, float(np.abs(off).max()) / max(1.0, float(np.abs(U[y]).max())))
    if leak > st.leak_tol:
        return _fail(conds, "G2-2", "eigenvectors of the witness do not diagonalise every U_y", leak)
    conds["G2-2"] = ConditionResult("pass", "common eigenvector system", leak)

    # scale rows so that 1^T T = 1^T; then T |W| T^-1 has unit column sums
    coef = np.linalg.solve(Tn.T, np.ones(d))
    if np.abs(coef).min() <= st.rank_tol * np.abs(coef).max():
        return _fail(conds, "G2-3", "the all-ones row has a zero coordinate in the eigenbasis",
                     float(np.abs(coef).min()))
    T = coef[:, None] * Tn
    Tinv = np.linalg.inv(T)
    Wnew = T @ total @ Tinv
    V = np.stack([np.diag(T @ U[y] @ Tinv) for y in range(dY)])
    lowest = float(Wnew.min())
    if lowest < -st.eig_neg_tol:
        return _fail(conds, "G2-3", "T |W| T^-1 has a negative entry", lowest)
    conds["G2-3"] = ConditionResult("pass", "nonnegative transition matrix", lowest)
    Wnew = np.clip(Wnew, 0.0, None)
    Wnew = Wnew / Wnew.sum(axis=0, keepdims=True)
    V = np.clip(V, 0.0, None)
    V = V / V.sum(axis=0, keepdims=True)
    m = IndepModel(Wnew, V)
    checked, tv = False, None
    if verify:
        checked, tv = _verify_factorisation(model, m, T, st)
    return Decomposition(True, None, conds, m, T, witness, checked, tv)


def _verify_factorisation(model, m, T, st):
    """Compare stationary output laws of the input and the recovered pair."""
    try:
        P = stationary(model, st)
    except Exception:
        return False, None
    Pn = T @ P
    if Pn.min() < -1e-9:
        return False, None
    Pn = np.clip(Pn, 0.0, None)
    Pn = Pn / Pn.sum()
    cert = are_equivalent(model, P, from_independent(m, st), Pn, tol=1e-8, settings=st, certificate=False)
    if not cert.equivalent:
        raise CrossCheckError(f"recovered factorisation is not equivalent to the input (tv {cert.tv_distance:.2e})")
    return True, cert.tv_distance


def match_permutation(a: IndepModel, b: IndepModel) -> tuple[np.ndarray, float]:
    """Relabelling ``perm`` of b's states closest to a, and the entrywise error.

    The result satisfies b.Wmat[perm][:, perm] ~ a.Wmat and b.V[:, perm] ~ a.V.
    """
    if a.d != b.d or a.dY != b.dY:
        raise ValidationError("models have different sizes")
    cost = np.abs(a.V[:, :, None] - b.V[:, None, :]).sum(axis=0)
    cost = cost + np.abs(np.diag(a.Wmat)[:, None] - np.diag(b.Wmat)[None, :])
    _, perm = linear_sum_assignment(cost)
    err = max(
        float(np.abs(b.Wmat[perm][:, perm] - a.Wmat).max()),
        float(np.abs(b.V[:, perm] - a.V).max()),
    )
    return perm, err


# ---------------------------------------------------------------------------
# Identifiability


@dataclass(frozen=True)
class IdentifiabilityReport:
    columns_independent: bool
    k_W: int
    kernel_dim: int
    full_support_initial: bool
    equivalent: bool | None = None
    matching_permutations: list = field(default_factory=list)
    permutation_claim_holds: bool | None = None
    notice: str | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def permute_indep(m: IndepModel, perm) -> IndepModel:
    perm = np.asarray(perm)
    return IndepModel(m.Wmat[perm][:, perm], m.V[:, perm])


def check_identifiability(
    m: IndepModel,
    P,
    other: IndepModel | None = None,
    P_other=None,
    settings: NumericSettings | None = None,
    max_d: int = 6,
) -> IdentifiabilityReport:
    """Emission-column rank, minimum length and, with a second pair, the permutation sweep.

    When the columns of V are independent the minimum length must be 1 with
    trivial kernel. When additionally both initial laws have full support,
    an equivalent second pair must be a relabelling of the first; the sweep
    lists every relabelling that reproduces it exactly.
    """
    st = resolve(settings)
    require_valid(m, st)
    P = as_distribution(P, m.d, st)
    indep_cols = numerical_rank(m.V, st.rank_tol) == m.d
    obs = observability_profile(from_independent(m, st), st)
    if indep_cols and (obs.k_W != 1 or obs.kernel.dim != 0):
        raise CrossCheckError("independent emission columns but the kernel chain is not trivial at length 1")
    full = bool(np.all(P > st.support_tol))
    if other is None:
        return IdentifiabilityReport(indep_cols, obs.k_W, obs.kernel.dim, full)
    require_valid(other, st)
    P2 = as_distribution(P_other if P_other is not None else P, other.d, st)
    if other.dY != m.dY:
        raise ValidationError("output alphabets differ")
    cert = are_equivalent(from_independent(m, st), P, from_independent(other, st), P2, settings=st, certificate=False)
    if m.d != other.d:
        return IdentifiabilityReport(indep_cols, obs.k_W, obs.kernel.dim, full, cert.equivalent, [],
                                     None, "hidden sizes differ; no relabelling possible")
    if m.d > max_d:
        return IdentifiabilityReport(indep_cols, obs.k_W, obs.kernel.dim, full, cert.equivalent, [],
                                     None, f"permutation sweep skipped for d > {max_d}")
    matches = []
    for perm in itertools.permutations(range(m.d)):
        g = permute_indep(m, perm)
        if (
            np.abs(g.Wmat - other.Wmat).max() <= 1e-9
            and np.abs(g.V - other.V).max() <= 1e-9
            and np.abs(P[list(perm)] - P2).max() <= 1e-9
        ):
            matches.append(list(perm))
    applies = indep_cols and full and bool(np.all(P2 > st.support_tol))
    claim = (not cert.equivalent or bool(matches)) if applies else None
    return IdentifiabilityReport(indep_cols, obs.k_W, obs.kernel.dim, full, cert.equivalent, matches, claim)


# ---------------------------------------------------------------------------
# Generators of the full independent family


@dataclass(frozen=True, eq=False)
class IndepGeneratorSet:
    """Generators in (g_a, g_b) form plus their embedding g_a(x,x') + g_b(y,x')."""

    ga: np.ndarray  # (l, d, d)
    gb: np.ndarray  # (l, dY, d)
    base: IndepModel
    embedded: GeneratorSet
    observable_count: int = 0

    def __len__(self) -> int:
        return self.ga.shape[0]


def embed(ga, gb) -> np.ndarray:
    """Functions on (y, x, x'): g_a(x, x') + g_b(y, x'); shape (l, dY, d, d)."""
    ga = np.asarray(ga, dtype=float)
    gb = np.asarray(gb, dtype=float)
    return ga[:, None, :, :] + gb[:, :, None, :]


def gauge_fix(m: IndepModel, ga, gb) -> tuple[np.ndarray, np.ndarray]:
    """Shift each column so that sum_y V(y|x') g_b(y, x') = 0; the embedding is unchanged."""
    ga = np.array(ga, dtype=float)
    gb = np.array(gb, dtype=float)
    mean = np.einsum("yx,lyx->lx", m.V, gb)
    return ga + mean[:, None, :], gb - mean[:, None, :]


def make_indep_generators(m: IndepModel, ga, gb, settings=None, check_independence: bool = True,
                          observable_count: int = 0) -> IndepGeneratorSet:
    st = resolve(settings)
    ga = np.asarray(ga, dtype=float)
    gb = np.asarray(gb, dtype=float)
    if ga.ndim == 2:
        ga, gb = ga[None], gb[None]
    if ga.shape[1:] != (m.d, m.d) or gb.shape[1:] != (m.dY, m.d) or ga.shape[0] != gb.shape[0]:
        raise ValidationError(f"generators need ga of shape (l, {m.d}, {m.d}) and gb of shape (l, {m.dY}, {m.d})")
    if np.any(np.abs(ga[:, m.Wmat <= st.support_tol]) > 0) or np.any(np.abs(gb[:, m.V <= st.support_tol]) > 0):
        raise ValidationError("a generator is nonzero off the support of (W, V)")
    base = from_independent(m, st)
    emb = GeneratorSet(embed(ga, gb) * base.support(st)[None], base, check_independence)
    return IndepGeneratorSet(ga.copy(), gb.copy(), m, emb, observable_count)


def ert_generators(m: IndepModel, settings: NumericSettings | None = None) -> IndepGeneratorSet:
    """Delta-pattern generators of the full family, d(d + dY - 2) of them.

    Order: output indicators for y < dY-1; output indicators restricted to
    one previous state x' < d-1; transition indicators for x < d-1 and every x'.
    The first dY - 1 depend on the output only.
    """
    st = resolve(settings)
    require_valid(m, st)
    if not bool(pair_support(m, st).all()):
        raise ValidationError("the full family needs W and V with full support")
    d, dY = m.d, m.dY
    ga, gb = [], []

    def add(a=None, b=None):
        ga.append(np.zeros((d, d)) if a is None else a)
        gb.append(np.zeros((dY, d)) if b is None else b)

    for j in range(dY - 1):
        b = np.zeros((dY, d))
        b[j, :] = 1.0
        add(b=b)
    for i in range(d - 1):
        for j in range(dY - 1):
            b = np.zeros((dY, d))
            b[j, i] = 1.0
            add(b=b)
    for i in range(d):
        for j in range(d - 1):
            a = np.zeros((d, d))
            a[j, i] = 1.0
            add(a=a)
    gens = make_indep_generators(m, np.array(ga), np.array(gb), st, True, observable_count=dY - 1)
    if len(gens) != independent_dimension(d, dY):
        raise CrossCheckError("generator count differs from the family dimension")
    return gens


# ---------------------------------------------------------------------------
# Exponential family of independent models


@dataclass(frozen=True)
class IndepFamilyPoint:
    theta: np.ndarray
    indep: IndepModel
    lam: float
    general: ExpFamilyPoint
    product_residual: float


def indep_exp_family(
    m: IndepModel, gens: IndepGeneratorSet, theta, settings: NumericSettings | None = None
) -> IndepFamilyPoint:
    """(W_theta, V_theta) with V_theta a per-column tilt of V and W_theta the Perron-normalised tilt of W.

    The product W_theta(x|x') V_theta(y|x') is compared with the general
    family evaluated on the embedded generators.
    """
    st = resolve(settings)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(gens),) or not np.all(np.isfinite(theta)):
        raise ValidationError(f"theta must be a finite vector of length {len(gens)}")
    ga, gb = gauge_fix(m, gens.ga, gens.gb)
    Sa = np.tensordot(theta, ga, axes=1)
    Sb = np.tensordot(theta, gb, axes=1)
    big = float(max(np.abs(Sa).max(initial=0.0), np.abs(Sb).max(initial=0.0)))
    if big > st.exp_guard:
        raise OverflowGuardError(f"|theta . g| reaches {big:.1f} > {st.exp_guard}; rescale theta")
    tiltV = np.exp(Sb) * m.V
    norm = tiltV.sum(axis=0)
    V_t = tiltV / norm[None, :]
    Wbar = np.exp(Sa) * m.Wmat * norm[None, :]
    if not np.any(theta):
        W_t, lam = m.Wmat.copy(), 1.0
    else:
        pd = perron(Wbar, st)
        pbar = pd.left / pd.left.max()
        lam = pd.lam
        W_t = Wbar * pbar[:, None] / pbar[None, :] / lam
        W_t = W_t / W_t.sum(axis=0, keepdims=True)
    general = at(gens.embedded.base, gens.embedded, theta, st)
    product = W_t[None, :, :] * V_t[:, None, :]
    res = float(np.abs(product - general.model.W).max())
    if res > 1e-10:
        raise CrossCheckError(f"independent and general families disagree by {res:.2e}")
    return IndepFamilyPoint(theta.copy(), IndepModel(W_t, V_t), float(lam), general, res)


# ---------------------------------------------------------------------------
# Two hidden states


@dataclass(frozen=True)
class TwoStateReport:
    case: str
    emissions_equal: bool
    W_invertible: bool
    initial_is_stationary: bool
    dims: IndepTangentReport
    quotient_dim_asymptotic: int
    quotient_dim_fixed: int
    quotient_dim: int
    observable_count: int
    family_dim: int
    in_stratum: list
    transversal: list

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["dims"] = self.dims.as_dict()
        return out


def _generator_pairs_in_L1(gens: IndepGeneratorSet, st) -> np.ndarray:
    """m-representations of the G1 representatives of the embedded generators (columns)."""
    base = gens.embedded.base
    cols = [m_rep(base, g1_project(base, g, st)).ravel() for g in gens.embedded.gens]
    return np.array(cols).T


def _greedy_independent(pool_idx, vecs, base: np.ndarray, count: int, st) -> list:
    chosen = []
    current = base
    r = numerical_rank(current, st.rank_tol) if current.shape[1] else 0
    for i in pool_idx:
        if len(chosen) == count:
            break
        trial = np.hstack([current, vecs[:, [i]]])
        r2 = numerical_rank(trial, st.rank_tol)
        if r2 > r:
            chosen.append(i)
            current, r = trial, r2
    return chosen


def two_hidden_state_report(m: IndepModel, P=None, settings: NumericSettings | None = None) -> TwoStateReport:
    """Classify a two-state independent model and split the family generators.

    Cases: "non-singular" (W invertible, emission columns differ),
    "singular-1" (W with identical columns, emission columns differ),
    "singular-2" (emission columns equal, W invertible) and
    "singular-3" (emission columns equal, W with identical columns).
    ``in_stratum`` lists generators that move along the singular set and
    ``transversal`` a completion to a basis of the quotient.
    """
    st = resolve(settings)
    require_valid(m, st)
    if m.d != 2:
        raise ValidationError(f"the two-state analysis needs d = 2, got d = {m.d}")
    dY = m.dY
    Pw = stationary(m, st)
    P = Pw if P is None else as_distribution(P, 2, st)
    is_stat = bool(np.abs(P - Pw).max() <= 1e-10)
    same_emission = bool(np.abs(m.V[:, 0] - m.V[:, 1]).max() <= 1e-10)
    invertible = numerical_rank(m.Wmat, st.rank_tol) == 2
    if invertible:
        case = "singular-2" if same_emission else "non-singular"
    else:
        case = "singular-3" if same_emission else "singular-1"
    sp = indep_tangent_spaces(m, P, st)
    rep = indep_tangent_report(m, P, st)
    q_asym = rep.local_dim_asymptotic
    q_fixed = rep.local_dim_fixed
    quotient = q_asym if is_stat else q_fixed
    gens = ert_generators(m, st)
    vecs = _generator_pairs_in_L1(gens, st)
    S = star_matrix(m)
    indist = sp.asymptotic_sum if is_stat else sp.fixed_sum
    base = S @ indist.basis
    if case == "non-singular":
        in_stratum: list = []
        transversal = list(range(len(gens)))
    else:
        in_stratum = _greedy_independent(range(dY - 1), vecs, base, dY - 1, st)
        base2 = np.hstack([base, vecs[:, in_stratum]]) if in_stratum else base
        transversal = _greedy_independent(range(dY - 1, len(gens)), vecs, base2, quotient - len(in_stratum), st)
        if len(in_stratum) + len(transversal) != quotient:
            raise CrossCheckError("generator split does not span the quotient")
    return TwoStateReport(
        case=case,
        emissions_equal=same_emission,
        W_invertible=invertible,
        initial_is_stationary=is_stat,
        dims=rep,
        quotient_dim_asymptotic=q_asym,
        quotient_dim_fixed=q_fixed,
        quotient_dim=quotient,
        observable_count=dY - 1,
        family_dim=rep.dim_L1I,
        in_stratum=in_stratum,
        transversal=transversal,
    )


# ---------------------------------------------------------------------------
# Models that fail the factorisation test


def complex_spectrum_model(rng, d: int = 3) -> YTransitionModel:
    """U_0 is circulant with a non-real eigenvalue pair (needs d >= 3)."""
    if d < 3:
        raise ValidationError("a non-real spectrum needs d >= 3")
    a = rng.uniform(0.2, 0.6)
    shift = np.roll(np.eye(d), 1, axis=0)
    W0 = a * shift
    W1 = (1 - a) * np.full((d, d), 1.0 / d)
    return YTransitionModel(np.stack([W0, W1]))


def negative_spectrum_model(rng) -> YTransitionModel:
    """Two states where U_0 has determinant < 0, hence a negative eigenvalue."""
    while True:
        p, q = rng.uniform(0.55, 0.95, size=2)
        total = np.array([[p, 1 - q], [1 - p, q]])
        s = rng.uniform(0.3, 1.0)
        W0 = s * (total - np.diag(np.diag(total)))
        W1 = total - W0
        if abs(np.linalg.det(total)) > 0.05:
            return YTransitionModel(np.stack([W0, W1]))


def noncommuting_model(rng, d: int = 2, dY: int = 3, min_commutator: float = 1e-2) -> YTransitionModel:
    """Random model whose U_y have real nonnegative simple spectra but do not commute."""
    from .model import random_model

    for _ in range(100_000):
        mdl = random_model(d, dY, rng)
        total = mdl.total
        if abs(np.linalg.det(total)) < 0.05:
            continue
        U = [np.linalg.solve(total, mdl.W[y]) for y in range(dY)]
        ev = [np.linalg.eigvals(u) for u in U]
        if any(np.abs(e.imag).max() > 1e-6 or e.real.min() < 1e-6 for e in ev):
            continue
        if max(_min_gap(e.real) for e in ev) < 1e-3:
            continue
        if np.abs(U[0] @ U[1] - U[1] @ U[0]).max() > min_commutator:
            return mdl
    raise RuntimeError("no non-commuting model found")


def signed_factor_model(rng) -> YTransitionModel:
    """Nonnegative model similar to W' D(V_y) where W' has a negative entry."""
    while True:
        e = rng.uniform(0.01, 0.1)
        a = rng.uniform(0.2, 0.8)
        Wp = np.array([[1 + e, a], [-e, 1 - a]])
        V = rng.dirichlet([1.0, 1.0], size=2).T
        if abs(V[0, 0] - V[0, 1]) < 0.05:
            continue
        s = rng.uniform(-0.5, 0.5, size=2)
        S = np.array([[1 - s[0], s[1]], [s[0], 1 - s[1]]])  # unit column sums
        if abs(np.linalg.det(S)) < 0.1:
            continue
        Si = np.linalg.inv(S)
        Wy = np.stack([S @ Wp @ np.diag(V[y]) @ Si for y in range(2)])
        if Wy.min() >= 1e-6:
            Wy = Wy / Wy.sum(axis=(0, 1))[None, None, :]
            return YTransitionModel(Wy)
