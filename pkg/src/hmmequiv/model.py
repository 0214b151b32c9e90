"""Y-valued transition matrices and hidden Markov models of independent type.

A model stores an array ``W`` of shape ``(dY, d, d)`` where ``W[y, x, xp]``
is the probability of emitting ``y`` and moving to ``x`` from ``xp``.
Matrices act on column vectors, so a law ``p`` on hidden states evolves as
``W[y] @ p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .numerics import is_irreducible, kernel, strong_components
from .errors import ReducibleError
from .settings import NumericSettings, resolve


@dataclass(frozen=True)
class Violation:
    kind: str
    location: tuple
    value: float

    def __str__(self) -> str:
        return f"{self.kind} at {self.location}: {self.value!r}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self, what: str = "model") -> None:
        if self.violations:
            msg = "; ".join(str(v) for v in self.violations[:5])
            raise ValidationError(f"invalid {what}: {msg}", self.violations)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class YTransitionModel:
    """Family of nonnegative d x d matrices whose sum over y is column-stochastic."""

    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 3 or W.shape[1] != W.shape[2] or W.shape[0] < 1 or W.shape[1] < 1:
            raise ValidationError(f"W must have shape (dY, d, d), got {W.shape}")
        object.__setattr__(self, "W", _frozen(W))

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def dY(self) -> int:
        return self.W.shape[0]

    @property
    def total(self) -> np.ndarray:
        """The hidden transition matrix |W| = sum over y of W_y."""
        return self.W.sum(axis=0)

    def support(self, settings: NumericSettings | None = None) -> np.ndarray:
        return self.W > resolve(settings).support_tol

    def full_support(self, settings: NumericSettings | None = None) -> bool:
        return bool(self.support(settings).all())

    def __eq__(self, other) -> bool:
        return isinstance(other, YTransitionModel) and np.array_equal(self.W, other.W)

    def __hash__(self) -> int:
        return hash(self.W.tobytes())


@dataclass(frozen=True, eq=False)
class IndepModel:
    """Hidden chain ``Wmat`` (d x d) with emission matrix ``V`` (dY x d).

    ``V[y, xp]`` is the probability of emitting ``y`` from state ``xp``.
    """

    Wmat: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        Wm = np.asarray(self.Wmat, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if Wm.ndim != 2 or Wm.shape[0] != Wm.shape[1]:
            raise ValidationError(f"Wmat must be square, got {Wm.shape}")
        if V.ndim != 2 or V.shape[1] != Wm.shape[0]:
            raise ValidationError(f"V must have shape (dY, d), got {V.shape}")
        object.__setattr__(self, "Wmat", _frozen(Wm))
        object.__setattr__(self, "V", _frozen(V))

    @property
    def d(self) -> int:
        return self.Wmat.shape[0]

    @property
    def dY(self) -> int:
        return self.V.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IndepModel)
            and np.array_equal(self.Wmat, other.Wmat)
            and np.array_equal(self.V, other.V)
        )

    def __hash__(self) -> int:
        return hash((self.Wmat.tobytes(), self.V.tobytes()))


# ---------------------------------------------------------------------------
# Validation


def _column_violations(M, what, tol):
    out = []
    for loc in zip(*np.nonzero(M < 0)):
        out.append(Violation(f"negative entry in {what}", tuple(int(i) for i in loc), float(M[loc])))
    return out


def validate(model, settings: NumericSettings | None = None) -> ValidationReport:
    """List every violated invariant of a model (never raises)."""
    tol = resolve(settings).stoch_tol
    out = []
    if isinstance(model, IndepModel):
        out += _column_violations(model.Wmat, "Wmat", tol)
        out += _column_violations(model.V, "V", tol)
        for name, M in (("Wmat", model.Wmat), ("V", model.V)):
            for xp, s in enumerate(M.sum(axis=0)):
                if not np.isfinite(s) or abs(s - 1.0) > tol:
                    out.append(Violation(f"column sum of {name} != 1", (xp,), float(s)))
        return ValidationReport(tuple(out))
    W = model.W
    if not np.all(np.isfinite(W)):
        for loc in zip(*np.nonzero(~np.isfinite(W))):
            out.append(Violation("non-finite entry", tuple(int(i) for i in loc), float(W[loc])))
    out += _column_violations(W, "W", tol)
    for xp, s in enumerate(W.sum(axis=(0, 1))):
        if not np.isfinite(s) or abs(s - 1.0) > tol:
            out.append(Violation("column sum != 1", (xp,), float(s)))
    return ValidationReport(tuple(out))


def validate_distribution(p, d: int | None = None, settings: NumericSettings | None = None) -> ValidationReport:
    tol = resolve(settings).stoch_tol
    p = np.asarray(p, dtype=float)
    out = []
    if p.ndim != 1 or (d is not None and p.shape[0] != d):
        return ValidationReport((Violation("wrong shape", tuple(p.shape), float("nan")),))
    for i in np.flatnonzero(p < 0):
        out.append(Violation("negative probability", (int(i),), float(p[i])))
    s = float(p.sum())
    if abs(s - 1.0) > tol:
        out.append(Violation("probabilities do not sum to 1", (), s))
    return ValidationReport(tuple(out))


def require_valid(model, settings: NumericSettings | None = None) -> None:
    validate(model, settings).raise_if_invalid()


def as_distribution(p, d: int, settings: NumericSettings | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    validate_distribution(p, d, settings).raise_if_invalid("distribution")
    return p


# ---------------------------------------------------------------------------
# Construction


def from_independent(m: IndepModel, settings: NumericSettings | None = None) -> YTransitionModel:
    """W_y = Wmat @ diag(V[y])."""
    require_valid(m, settings)
    return YTransitionModel(m.Wmat[None, :, :] * m.V[:, None, :])


def from_function(Wmat, f, dY: int | None = None) -> YTransitionModel:
    """Deterministic output: W_y keeps the rows x with f(x) = y."""
    Wmat = np.asarray(Wmat, dtype=float)
    f = np.asarray(f)
    d = Wmat.shape[0]
    if f.shape != (d,) or not np.issubdtype(f.dtype, np.integer):
        raise ValidationError("f must be an integer vector of length d")
    if dY is None:
        dY = int(f.max()) + 1
    if f.min() < 0 or f.max() >= dY:
        raise ValidationError(f"f takes values outside 0..{dY - 1}")
    W = np.zeros((dY, d, d))
    for x in range(d):
        W[f[x], x, :] = Wmat[x, :]
    return YTransitionModel(W)


def lift_joint(model: YTransitionModel) -> np.ndarray:
    """Transition matrix of the joint chain on pairs (x, y), index ``x*dY + y``.

    Entry ((x, y), (x', y')) equals W_y(x|x') for every y'.
    """
    d, dY = model.d, model.dY
    block = np.transpose(model.W, (1, 0, 2)).reshape(d * dY, d)  # row (x, y), column x'
    return np.repeat(block, dY, axis=1)


def stationary(model, settings: NumericSettings | None = None) -> np.ndarray:
    """Stationary law of the hidden chain (eigenvector of |W| for eigenvalue 1)."""
    st = resolve(settings)
    T = model.total if isinstance(model, YTransitionModel) else np.asarray(model.Wmat)
    d = T.shape[0]
    comps = strong_components(T > st.support_tol)
    if len(comps) != 1:
        raise ReducibleError(f"hidden chain is reducible; components {comps}", components=comps)
    if d == 1:
        return np.ones(1)
    K = kernel(np.eye(d) - T, tol=1e-9)
    if K.dim != 1:
        raise ReducibleError("eigenvalue 1 is not simple", components=comps)
    p = K.basis[:, 0]
    p = np.abs(p) / np.abs(p).sum()
    # one refinement step: solve (I - T) p = 0 with sum p = 1 by least squares
    A = np.vstack([np.eye(d) - T, np.ones((1, d))])
    rhs = np.zeros(d + 1)
    rhs[-1] = 1.0
    p2, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.all(p2 >= -1e-15):
        p = np.clip(p2, 0.0, None)
        p = p / p.sum()
    return p


def lifted_stationary(model: YTransitionModel, settings: NumericSettings | None = None) -> np.ndarray:
    """Stationary law of the joint chain, index ``x*dY + y``."""
    p = stationary(model, settings)
    return np.einsum("yij,j->iy", model.W, p).reshape(-1)


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class Trajectory:
    x0: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.x)


def sample(model: YTransitionModel, P0, n: int, seed=None) -> Trajectory:
    """Draw ``x_0 ~ P0`` then ``n`` joint steps ``(x_i, y_i)``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    require_valid(model)
    d, dY = model.d, model.dY
    P0 = as_distribution(P0, d)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    # for each previous state, a cumulative table over pairs (y, x)
    table = np.cumsum(model.W.reshape(dY * d, d), axis=0)
    table /= table[-1]
    x0 = int(np.searchsorted(np.cumsum(P0) / P0.sum(), rng.random(), side="right"))
    xs = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.int64)
    u = rng.random(n)
    prev = min(x0, d - 1)
    for i in range(n):
        k = int(np.searchsorted(table[:, prev], u[i], side="right"))
        k = min(k, dY * d - 1)
        ys[i], xs[i] = divmod(k, d)
        prev = xs[i]
    return Trajectory(min(x0, d - 1), xs, ys)


def sample_windows(model: YTransitionModel, P0, n: int, k: int, seed=None) -> Trajectory:
    """``n`` independent trajectories of length ``k``, each started from ``x_0 ~ P0``.

    Returns a :class:`Trajectory` whose ``x0`` has shape (n,) and whose
    ``x`` and ``y`` have shape (n, k).
    """
    require_valid(model)
    d, dY = model.d, model.dY
    P0 = as_distribution(P0, d)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    table = np.cumsum(model.W.reshape(dY * d, d), axis=0).T  # row: previous state
    table /= table[:, -1:]
    x0 = np.minimum(np.searchsorted(np.cumsum(P0) / P0.sum(), rng.random(n), side="right"), d - 1)
    xs = np.empty((n, k), dtype=np.int64)
    ys = np.empty((n, k), dtype=np.int64)
    prev = x0
    for i in range(k):
        u = rng.random(n)
        idx = np.minimum((table[prev] <= u[:, None]).sum(axis=1), dY * d - 1)
        ys[:, i], xs[:, i] = np.divmod(idx, d)
        prev = xs[:, i]
    return Trajectory(x0, xs, ys)


def empirical_window_law(ys: np.ndarray, dY: int) -> np.ndarray:
    """Frequencies of the words (y_k, ..., y_1) over the rows of ``ys`` (shape (n, k)).

    Column 0 of ``ys`` holds the first emitted symbol y_1.
    """
    ys = np.asarray(ys)
    n, k = ys.shape
    weights = dY ** np.arange(k)  # y_1 is the least significant digit
    idx = ys @ weights
    return np.bincount(idx, minlength=dY**k) / n


# ---------------------------------------------------------------------------
# Canonical and random models


def canonical_m2_independent() -> IndepModel:
    return IndepModel([[0.7, 0.4], [0.3, 0.6]], [[0.9, 0.2], [0.1, 0.8]])


def canonical_m2() -> YTransitionModel:
    """Two hidden states, two outputs, independent type with distinct emissions."""
    return from_independent(canonical_m2_independent())


def iid_model(q, M) -> YTransitionModel:
    """W_y = q_y * M: outputs are iid with law ``q`` and carry no information."""
    q = np.asarray(q, dtype=float)
    M = np.asarray(M, dtype=float)
    return YTransitionModel(q[:, None, None] * M[None, :, :])


def canonical_s2() -> YTransitionModel:
    return iid_model([0.3, 0.7], [[0.7, 0.4], [0.3, 0.6]])


def random_model(d: int, dY: int, rng, alpha: float = 1.0) -> YTransitionModel:
    """Each column of the stacked (y, x) array is Dirichlet(alpha): full support a.s."""
    cols = rng.dirichlet(np.full(dY * d, alpha), size=d).T  # (dY*d, d)
    return YTransitionModel(cols.reshape(dY, d, d))


def random_independent(d: int, dY: int, rng, alpha: float = 1.0) -> IndepModel:
    Wm = rng.dirichlet(np.full(d, alpha), size=d).T
    V = rng.dirichlet(np.full(dY, alpha), size=d).T
    return IndepModel(Wm, V)


def random_distribution(d: int, rng) -> np.ndarray:
    return rng.dirichlet(np.ones(d))


def is_model_irreducible(model: YTransitionModel, settings: NumericSettings | None = None) -> bool:
    return is_irreducible(model.total, resolve(settings).support_tol)
