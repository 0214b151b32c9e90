"""Exponential families of Y-valued transition matrices.

A family is anchored at a base model and generated by functions
``g_j(y, x, x')`` on the support of the base. The point at parameter theta is
the Perron-normalised tilt

    W_theta,y(x|x') = lam^-1 pbar(x) exp(sum_j theta_j g_j(y,x,x')) W_y(x|x') / pbar(x')

where ``lam`` is the Perron root of the tilted total matrix and ``pbar`` the
Perron vector of its transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OverflowGuardError, ValidationError
from .model import YTransitionModel, as_distribution, require_valid, stationary
from .numerics import Subspace, numerical_rank, perron, solve_on_complement
from .observables import _check_cap
from .settings import NumericSettings, resolve


def nullity_basis(model: YTransitionModel, settings: NumericSettings | None = None) -> np.ndarray:
    """Columns spanning {c + f(x) - f(x')} restricted to the support, flattened."""
    st = resolve(settings)
    d, dY = model.d, model.dY
    mask = model.support(st).reshape(-1).astype(float)
    cols = [np.ones(dY * d * d) * mask]
    for z in range(d):
        f = np.zeros(d)
        f[z] = 1.0
        n = np.broadcast_to(f[:, None] - f[None, :], (dY, d, d)).reshape(-1)
        cols.append(n * mask)
    return Subspace.span(np.array(cols).T, tol=st.rank_tol).basis


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """Generators stored as an array of shape (l, dY, d, d) anchored at ``base``."""

    gens: np.ndarray
    base: YTransitionModel
    check_independence: bool = True

    def __post_init__(self):
        g = np.asarray(self.gens, dtype=float)
        if g.ndim == 3:
            g = g[None]
        if g.ndim != 4 or g.shape[1:] != self.base.W.shape:
            raise ValidationError(f"generators must have shape (l, {self.base.dY}, {self.base.d}, {self.base.d})")
        off = ~self.base.support()
        if np.any(np.abs(g[:, off]) > 0):
            raise ValidationError("a generator is nonzero off the support of the base model")
        if not np.all(np.isfinite(g)):
            raise ValidationError("generators must be finite")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "gens", g)
        if self.check_independence and len(g):
            N = nullity_basis(self.base)
            r = numerical_rank(np.hstack([g.reshape(len(g), -1).T, N]))
            if r != len(g) + N.shape[1]:
                raise ValidationError("generators are linearly dependent modulo the null functions")

    def __len__(self) -> int:
        return self.gens.shape[0]

    def combine(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != (len(self),):
            raise ValidationError(f"direction must have length {len(self)}")
        return np.tensordot(a, self.gens, axes=1)


def _as_gens(base, gens) -> GeneratorSet:
    if isinstance(gens, GeneratorSet):
        return gens
    return GeneratorSet(np.asarray(gens, dtype=float), base, check_independence=False)


@dataclass(frozen=True)
class ExpFamilyPoint:
    theta: np.ndarray
    lam: float
    pbar: np.ndarray
    model: YTransitionModel
    phi: float
    right: np.ndarray


def _exponent(base, gens: GeneratorSet, theta, st) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(gens),) or not np.all(np.isfinite(theta)):
        raise ValidationError(f"theta must be a finite vector of length {len(gens)}")
    S = np.tensordot(theta, gens.gens, axes=1) if len(gens) else np.zeros(base.W.shape)
    big = float(np.abs(S[base.support(st)]).max(initial=0.0))
    if big > st.exp_guard:
        raise OverflowGuardError(f"|theta . g| reaches {big:.1f} > {st.exp_guard}; rescale theta")
    return S


def tilt(base: YTransitionModel, gens, theta, settings: NumericSettings | None = None) -> np.ndarray:
    """Tilted total matrix sum_y exp(theta . g) * W_y."""
    st = resolve(settings)
    g = _as_gens(base, gens)
    return (np.exp(_exponent(base, g, theta, st)) * base.W).sum(axis=0)


def at(base: YTransitionModel, gens, theta, settings: NumericSettings | None = None) -> ExpFamilyPoint:
    """Normalised family member at ``theta``."""
    st = resolve(settings)
    require_valid(base, st)
    g = _as_gens(base, gens)
    theta = np.asarray(theta, dtype=float)
    S = _exponent(base, g, theta, st)
    if not np.any(S):
        # |W| is stochastic, so the Perron root is exactly 1 with left vector 1
        d = base.d
        return ExpFamilyPoint(theta.copy(), 1.0, np.ones(d), base, 0.0, stationary(base, st))
    tilted = np.exp(S) * base.W
    pd = perron(tilted.sum(axis=0), st)
    pbar = pd.left / pd.left.max()
    W = tilted * pbar[None, :, None] / pbar[None, None, :] / pd.lam
    W = W / W.sum(axis=(0, 1))[None, None, :]  # remove last-ulp drift in column sums
    return ExpFamilyPoint(theta.copy(), pd.lam, pbar, YTransitionModel(W), float(np.log(pd.lam)), pd.right)


def potential(base, gens, theta, settings=None) -> float:
    return at(base, gens, theta, settings).phi


def potential_gradient(base, gens, theta, settings: NumericSettings | None = None) -> np.ndarray:
    """First-order Perron perturbation of log lambda."""
    st = resolve(settings)
    g = _as_gens(base, gens)
    S = _exponent(base, g, theta, st)
    tilted = np.exp(S) * base.W
    if not np.any(S):
        left, right, lam = np.ones(base.d), stationary(base, st), 1.0
    else:
        pd = perron(tilted.sum(axis=0), st)
        left, right, lam = pd.left, pd.right, pd.lam
    dW = np.einsum("jyab,yab->jab", g.gens, tilted)
    return np.einsum("a,jab,b->j", left, dW, right) / (lam * float(left @ right))


def divergence(base, gens, theta, theta2, settings=None) -> float:
    """sum_j (theta_j - theta2_j) d_j phi(theta) - phi(theta) + phi(theta2)."""
    theta = np.asarray(theta, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    grad = potential_gradient(base, gens, theta, settings)
    return float((theta - theta2) @ grad - potential(base, gens, theta, settings) + potential(base, gens, theta2, settings))


# ---------------------------------------------------------------------------
# Representations


def m_rep(base: YTransitionModel, g) -> np.ndarray:
    """Entrywise product g * W (zero off the support)."""
    return np.asarray(g, dtype=float) * base.W


def e_rep(base: YTransitionModel, B, settings: NumericSettings | None = None) -> np.ndarray:
    """Inverse of :func:`m_rep` on the support; zero elsewhere."""
    st = resolve(settings)
    sup = base.support(st)
    out = np.zeros(base.W.shape)
    out[sup] = np.asarray(B, dtype=float)[sup] / base.W[sup]
    return out


@dataclass(frozen=True)
class Projection:
    projected: np.ndarray
    c: float
    f: np.ndarray


def g1_decompose(base: YTransitionModel, g, settings: NumericSettings | None = None) -> Projection:
    """Split ``g`` as g_tilde + (c + f(x) - f(x')) with sum_y (W_* g_tilde)^T 1 = 0."""
    st = resolve(settings)
    g = np.asarray(g, dtype=float)
    sup = base.support(st)
    P = stationary(base, st)
    v = m_rep(base, g).sum(axis=(0, 1))  # column sums over (y, x), indexed by x'
    c = float(P @ v)
    d = base.d
    # sum_{y,x} W_y(x|x') (c + f(x) - f(x')) = c + (|W|^T f - f)(x')
    f = solve_on_complement(base.total.T - np.eye(d), v - c, np.ones(d))
    n = c + f[None, :, None] - f[None, None, :]
    gt = np.where(sup, g - n, 0.0)
    return Projection(gt, c, f)


def g1_project(base: YTransitionModel, g, settings: NumericSettings | None = None) -> np.ndarray:
    return g1_decompose(base, g, settings).projected


# ---------------------------------------------------------------------------
# Derivatives of observed laws


def stationary_derivative(base: YTransitionModel, dW: np.ndarray, settings=None) -> np.ndarray:
    """Q with (I - |W|) Q = (sum_y dW_y) P_W and <1, Q> = 0."""
    st = resolve(settings)
    P = stationary(base, st)
    d = base.d
    return solve_on_complement(np.eye(d) - base.total, dW.sum(axis=0) @ P, np.ones(d))


def law_derivative_from_tangent(
    base: YTransitionModel,
    dW: np.ndarray,
    P,
    k: int,
    mode: str = "fixed",
    settings: NumericSettings | None = None,
) -> np.ndarray:
    """Derivative of the length-k output law along the tangent ``dW`` of the model.

    ``dW`` must keep |W| column-stochastic to first order. In ``stationary``
    mode the initial law moves with the model and ``P`` is ignored.
    """
    st = resolve(settings)
    _check_cap(base.dY, k, st)
    d = base.d
    if mode == "stationary":
        P = stationary(base, st)
        dP = stationary_derivative(base, dW, st)
    elif mode == "fixed":
        P = as_distribution(P, d, st)
        dP = np.zeros(d)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    S, dS = P[None, :], dP[None, :]
    for _ in range(k):
        dS = (np.einsum("yij,wj->ywi", dW, S) + np.einsum("yij,wj->ywi", base.W, dS)).reshape(-1, d)
        S = np.einsum("yij,wj->ywi", base.W, S).reshape(-1, d)
    return dS.sum(axis=1)


def law_derivative(
    base: YTransitionModel,
    gens,
    a,
    P,
    k: int,
    mode: str = "fixed",
    settings: NumericSettings | None = None,
) -> np.ndarray:
    """Exact derivative at theta = 0 along direction ``a`` of the length-k law."""
    g = _as_gens(base, gens)
    gt = g1_project(base, g.combine(a), settings)
    return law_derivative_from_tangent(base, m_rep(base, gt), P, k, mode, settings)


def model_derivative_fd(base, gens, a, h: float = 1e-5, settings=None) -> np.ndarray:
    """Central finite difference of W_theta along ``a`` at theta = 0."""
    a = np.asarray(a, dtype=float)
    plus = at(base, gens, h * a, settings).model.W
    minus = at(base, gens, -h * a, settings).model.W
    return (plus - minus) / (2 * h)


def law_derivative_fd(base, gens, a, P, k, mode="fixed", h: float = 1e-5, settings=None) -> np.ndarray:
    """Central finite difference of the observed law along the normalised family."""
    from .observables import exact_output_law

    a = np.asarray(a, dtype=float)
    laws = []
    for s in (h, -h):
        m = at(base, gens, s * a, settings).model
        init = stationary(m, settings) if mode == "stationary" else P
        laws.append(exact_output_law(m, init, k, settings))
    return (laws[0] - laws[1]) / (2 * h)
