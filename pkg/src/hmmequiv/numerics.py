"""Numerical linear algebra shared by all modules.

Subspaces are stored by an orthonormal basis. Rank decisions use a
tolerance relative to the largest singular value of the matrix at hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import InconsistentSystemError, PerronError, ReducibleError
from .settings import NumericSettings, resolve


def _cutoff(s, tol, scale):
    """Singular values above ``tol * scale`` count; ``scale`` defaults to the largest one."""
    ref = s[0] if scale is None else scale
    return int(np.sum(s > tol * ref))


def numerical_rank(M, tol: float | None = None, scale: float | None = None) -> int:
    """Rank with cutoff relative to ``scale`` (default: the largest singular value).

    Pass the norm of the underlying operator as ``scale`` when ``M`` is the
    restriction of that operator, so that a numerically vanishing
    restriction is recognised as zero.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    tol = resolve(None).rank_tol if tol is None else tol
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return _cutoff(s, tol, scale)


def _orthonormal_columns(M, tol, scale=None):
    """Orthonormal basis of the column span of ``M``."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] == 0:
        return np.zeros((n, 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, 0))
    return U[:, : _cutoff(s, tol, scale)].copy()


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^n stored by an orthonormal basis (n x r)."""

    basis: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-d array")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(
        cls, vectors, ambient_dim: int | None = None, tol: float | None = None, scale: float | None = None
    ) -> "Subspace":
        """Span of the columns of ``vectors`` (see :func:`numerical_rank` for ``scale``)."""
        tol = resolve(None).rank_tol if tol is None else tol
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        if V.size == 0:
            if ambient_dim is None:
                ambient_dim = V.shape[0]
            return cls.zero(ambient_dim, tol)
        return cls(_orthonormal_columns(V, tol, scale), tol)

    @classmethod
    def zero(cls, n: int, tol: float | None = None) -> "Subspace":
        tol = resolve(None).rank_tol if tol is None else tol
        return cls(np.zeros((n, 0)), tol)

    @classmethod
    def full(cls, n: int, tol: float | None = None) -> "Subspace":
        tol = resolve(None).rank_tol if tol is None else tol
        return cls(np.eye(n), tol)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, v) -> np.ndarray:
        return self.basis @ (self.basis.T @ np.asarray(v, dtype=float))

    def residual(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.project(v)))

    def contains(self, v, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        v = np.asarray(v, dtype=float)
        _check_dim(self.ambient_dim, v.shape[0])
        return self.residual(v) <= tol * max(np.linalg.norm(v), np.finfo(float).tiny)

    def contains_space(self, other: "Subspace", tol: float | None = None) -> bool:
        _check_dim(self.ambient_dim, other.ambient_dim)
        return all(self.contains(other.basis[:, j], tol) for j in range(other.dim))

    def complement(self) -> "Subspace":
        """Orthogonal complement."""
        n = self.ambient_dim
        if self.dim == 0:
            return Subspace(np.eye(n), self.tol)
        if self.dim == n:
            return Subspace(np.zeros((n, 0)), self.tol)
        U, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(U[:, self.dim:].copy(), self.tol)

    def __repr__(self) -> str:
        return f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim})"


def _check_dim(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"ambient dimension mismatch: {a} != {b}")


def kernel(M, tol: float | None = None, scale: float | None = None) -> Subspace:
    """Right null space of ``M`` with a relative singular value cutoff."""
    tol = resolve(None).rank_tol if tol is None else tol
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if M.shape[0] == 0:
        return Subspace.full(n, tol)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return Subspace.full(n, tol)
    r = _cutoff(s, tol, scale)
    return Subspace(Vt[r:].T.copy(), tol)


def span_sum(*spaces: Subspace, tol: float | None = None) -> Subspace:
    if not spaces:
        raise ValueError("span_sum needs at least one subspace")
    n = spaces[0].ambient_dim
    for s in spaces:
        _check_dim(n, s.ambient_dim)
    tol = spaces[0].tol if tol is None else tol
    return Subspace.span(np.hstack([s.basis for s in spaces]), ambient_dim=n, tol=tol)


def intersect(A: Subspace, B: Subspace, tol: float | None = None) -> Subspace:
    _check_dim(A.ambient_dim, B.ambient_dim)
    tol = A.tol if tol is None else tol
    n = A.ambient_dim
    if A.dim == 0 or B.dim == 0:
        return Subspace.zero(n, tol)
    eye = np.eye(n)
    stacked = np.vstack([eye - A.projector(), eye - B.projector()])
    if np.allclose(stacked, 0.0):
        return Subspace.full(n, tol)
    # singular values of the stack are O(1) off the intersection, so an
    # absolute cutoff equals the relative one here
    return kernel(stacked, tol)


def equal(A: Subspace, B: Subspace, tol: float | None = None) -> bool:
    _check_dim(A.ambient_dim, B.ambient_dim)
    return A.dim == B.dim and A.contains_space(B, tol) and B.contains_space(A, tol)


# ---------------------------------------------------------------------------
# Perron-Frobenius


@dataclass(frozen=True)
class PerronData:
    """Perron root with positive right/left eigenvectors, ``<left, right> = 1``."""

    lam: float
    right: np.ndarray
    left: np.ndarray
    residual: float = field(default=0.0)


def strong_components(support: np.ndarray) -> list[list[int]]:
    """Strongly connected components of the directed graph with adjacency ``support``."""
    n_comp, labels = connected_components(np.asarray(support, dtype=bool), directed=True, connection="strong")
    return [sorted(np.flatnonzero(labels == c).tolist()) for c in range(n_comp)]


def is_irreducible(A, support_tol: float | None = None) -> bool:
    support_tol = resolve(None).support_tol if support_tol is None else support_tol
    A = np.asarray(A, dtype=float)
    return len(strong_components(A > support_tol)) == 1


def _power_iteration(A, shift, max_iter, tol):
    """Power iteration on A + shift*I, run to the rounding floor.

    Returns (vector, converged) where converged means the residual reached
    ``tol`` relative to the largest entry of A.
    """
    n = A.shape[0]
    B = A + shift * np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    floor = 8 * np.finfo(float).eps * scale * np.sqrt(n)
    res = best = np.inf
    stalled = 0
    for _ in range(max_iter):
        y = B @ x
        x = y / np.linalg.norm(y)
        Ax = A @ x
        res = np.linalg.norm(Ax - float(x @ Ax) * x)
        if res <= floor:
            break
        if res < 0.5 * best:
            best, stalled = res, 0
        else:
            stalled += 1
            # stagnation near the rounding floor
            if stalled > 50 and best <= tol * scale:
                break
    return x, min(res, best) <= tol * scale


def _dense_perron(A):
    vals, vecs = np.linalg.eig(A)
    i = int(np.argmax(vals.real))
    v = np.real(vecs[:, i])
    v = v * np.sign(v[np.argmax(np.abs(v))])
    return float(vals[i].real), v / np.linalg.norm(v)


def _rayleigh(A, right, left):
    """Two-sided Rayleigh quotient (error quadratic in the vector errors) and the larger residual."""
    lam = float(left @ A @ right) / float(left @ right)
    res = max(
        np.linalg.norm(A @ right - lam * right) / np.linalg.norm(right),
        np.linalg.norm(A.T @ left - lam * left) / np.linalg.norm(left),
    )
    return lam, float(res)


def perron(A, settings: NumericSettings | None = None) -> PerronData:
    """Perron root and eigenvectors of a nonnegative irreducible matrix."""
    st = resolve(settings)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("perron needs a square matrix")
    if np.any(A < 0):
        raise ValueError("perron needs a nonnegative matrix")
    comps = strong_components(A > st.support_tol)
    if len(comps) != 1:
        raise ReducibleError("matrix support is not strongly connected", components=comps)
    n = A.shape[0]
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if n == 1:
        lam = float(A[0, 0])
        return PerronData(lam, np.ones(1), np.ones(1), 0.0)

    shift = float(np.abs(A).sum(axis=0).max())
    iters = min(st.perron_power_iter, st.perron_max_iter)
    vecs = []
    for M in (A, A.T):
        v, ok = _power_iteration(M, shift, iters, st.perron_tol)
        if not ok:
            _, v = _dense_perron(M)
        vecs.append(np.abs(v))
    right, left = vecs
    lam, res = _rayleigh(A, right, left)
    limit = max(1e-10, st.perron_tol) * scale
    if res > limit:
        # badly balanced matrices can stall power iteration just above the limit
        dense_right = np.abs(_dense_perron(A)[1])
        dense_left = np.abs(_dense_perron(A.T)[1])
        lam_d, res_d = _rayleigh(A, dense_right, dense_left)
        if res_d < res:
            right, left, lam, res = dense_right, dense_left, lam_d, res_d
    if res > limit:
        raise PerronError(f"Perron residual {res:.3e} exceeds tolerance")
    if np.any(right <= 0) or np.any(left <= 0):
        raise PerronError("Perron vector is not strictly positive")
    right = right / right.sum()
    left = left / (left @ right)
    return PerronData(lam, right, left, float(res))


# ---------------------------------------------------------------------------
# Linear solves


def solve_on_complement(M, b, constraint, tol: float = 1e-10) -> np.ndarray:
    """Minimum-norm ``x`` with ``M x = b`` and ``<constraint, x> = 0``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.asarray(b, dtype=float)
    c = np.asarray(constraint, dtype=float)
    A = np.vstack([M, c[None, :]])
    rhs = np.concatenate([b, [0.0]])
    x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    res = float(np.linalg.norm(A @ x - rhs))
    scale = max(1.0, float(np.linalg.norm(b)), float(np.abs(M).max()) * float(np.linalg.norm(x)))
    if res > tol * scale:
        raise InconsistentSystemError(f"system is inconsistent: residual {res:.3e}")
    return x


def nullspace_of_constraints(C, n: int, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (n x r) of ``{x : C x = 0}``; ``C`` may have zero rows."""
    C = np.asarray(C, dtype=float).reshape(-1, n)
    return kernel(C, tol).basis
