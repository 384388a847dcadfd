"""Closed sets in R^n with exact distance and projection oracles.

The catalog is deliberately small: half-spaces, hyperplanes, affine
subspaces, balls, polyhedra and finite unions of those convex pieces.
Every convex variant has a closed-form (or exactly enumerated) metric
projection; unions return *all* nearest points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence, Union as _TUnion

import numpy as np

from .errors import DimensionError

UNIT_TOL = 1e-12
TIE_TOL = 1e-10
MAX_ACTIVE_SUBSETS = 250_000


def as_vec(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.size}")
    return v


def _unit(a, b: float = 0.0) -> tuple[np.ndarray, float]:
    a = as_vec(a)
    nrm = np.linalg.norm(a)
    if nrm <= UNIT_TOL:
        raise ValueError("normal vector must be nonzero")
    return a / nrm, float(b) / nrm


# --------------------------------------------------------------------------
# active-set enumeration for projection onto {x : A x <= b}
# --------------------------------------------------------------------------

def active_set_plan(A: np.ndarray) -> list[tuple[tuple[int, ...], np.ndarray, np.ndarray]]:
    """List the row subsets of ``A`` with full row rank, smallest first.

    Each entry is ``(S, A_S, (A_S A_S^T)^{-1})``. Subsets of size larger than
    the ambient dimension can never have full rank and are skipped.
    """
    k, n = A.shape
    plan = []
    count = 0
    for size in range(1, min(k, n) + 1):
        for S in itertools.combinations(range(k), size):
            count += 1
            if count > MAX_ACTIVE_SUBSETS:
                raise ValueError(
                    f"polyhedron with {k} rows in R^{n} is too large for exact "
                    "active-set enumeration")
            AS = A[list(S)]
            gram = AS @ AS.T
            if np.linalg.matrix_rank(gram, tol=1e-10) < size:
                continue
            plan.append((S, AS, np.linalg.inv(gram)))
    return plan


def _kkt_tol(b, y) -> float:
    return 1e-11 * (1.0 + float(np.max(np.abs(b), initial=0.0)) + float(np.linalg.norm(y)))


def project_polyhedron(A: np.ndarray, b: np.ndarray, y: np.ndarray, plan=None) -> np.ndarray | None:
    """Exact Euclidean projection of ``y`` onto ``{x : A x <= b}``.

    Returns ``None`` when the polyhedron is empty. For a nonempty convex QP the
    first subset passing the KKT test (multipliers >= 0, primal feasible) is
    the unique minimizer.
    """
    tol = _kkt_tol(b, y)
    if np.all(A @ y <= b + tol):
        return y.copy()
    if plan is None:
        plan = active_set_plan(A)
    for S, AS, ginv in plan:
        lam = ginv @ (AS @ y - b[list(S)])
        if np.any(lam < -tol):
            continue
        x = y - AS.T @ lam
        if np.all(A @ x <= b + tol):
            return x
    return None


def project_polyhedron_batch(A: np.ndarray, B: np.ndarray, Y: np.ndarray, plan=None):
    """Vectorized :func:`project_polyhedron` for many offsets and points.

    ``A`` is (k, n) and shared; ``B`` is (N, k) and ``Y`` is (N, n).
    Returns ``(X, found)`` where rows with ``found == False`` correspond to
    empty polyhedra (X is NaN there).
    """
    N = Y.shape[0]
    tol = 1e-11 * (1.0 + np.max(np.abs(B), axis=1, initial=0.0) + np.linalg.norm(Y, axis=1))
    X = np.full_like(Y, np.nan)
    found = np.all(Y @ A.T <= B + tol[:, None], axis=1)
    X[found] = Y[found]
    if plan is None:
        plan = active_set_plan(A)
    for S, AS, ginv in plan:
        todo = ~found
        if not todo.any():
            break
        idx = np.nonzero(todo)[0]
        Yt, Bt, tt = Y[idx], B[idx], tol[idx]
        lam = (Yt @ AS.T - Bt[:, list(S)]) @ ginv.T
        ok = np.all(lam >= -tt[:, None], axis=1)
        Xt = Yt - lam @ AS
        ok &= np.all(Xt @ A.T <= Bt + tt[:, None], axis=1)
        X[idx[ok]] = Xt[ok]
        found[idx[ok]] = True
    return X, found


# --------------------------------------------------------------------------
# set descriptors
# --------------------------------------------------------------------------

class _ConvexSet:
    """Shared behaviour of the convex variants."""

    is_convex = True

    @property
    def dim(self) -> int:  # pragma: no cover - overridden
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        return as_vec(x, self.dim)

    def project_point(self, x) -> np.ndarray:
        raise NotImplementedError

    def project(self, x) -> list[np.ndarray]:
        return [self.project_point(x)]

    def distance(self, x) -> float:
        x = self._check(x)
        return float(np.linalg.norm(x - self.project_point(x)))

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.distance(x) <= tol

    def rows(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Inequality representation ``A x <= b``, or None if not polyhedral."""
        return None


@dataclass(frozen=True, eq=False)
class HalfSpace(_ConvexSet):
    """``{x : <a, x> <= b}`` with ``a`` normalized at construction."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a, b = _unit(self.normal, self.offset)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.normal.size

    def project_point(self, x) -> np.ndarray:
        x = self._check(x)
        excess = self.normal @ x - self.offset
        if excess <= 0.0:
            return x.copy()
        return x - excess * self.normal

    def distance(self, x) -> float:
        x = self._check(x)
        return max(0.0, float(self.normal @ x - self.offset))

    def rows(self):
        return self.normal[None, :].copy(), np.array([self.offset])


@dataclass(frozen=True, eq=False)
class Hyperplane(_ConvexSet):
    """``{x : <a, x> = b}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a, b = _unit(self.normal, self.offset)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.normal.size

    def project_point(self, x) -> np.ndarray:
        x = self._check(x)
        return x - (self.normal @ x - self.offset) * self.normal

    def distance(self, x) -> float:
        x = self._check(x)
        return abs(float(self.normal @ x - self.offset))

    def rows(self):
        a = self.normal
        return np.vstack([a, -a]), np.array([self.offset, -self.offset])


@dataclass(frozen=True, eq=False)
class AffineSubspace(_ConvexSet):
    """``point + span(basis)``; the basis is orthonormalized on construction.

    An empty basis describes the single point ``{point}``.
    """

    point: np.ndarray
    basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        p = as_vec(self.point)
        Q = np.asarray(self.basis, dtype=float)
        if Q.size == 0:
            Q = np.zeros((0, p.size))
        Q = np.atleast_2d(Q)
        if Q.shape[1] != p.size:
            raise DimensionError("basis vectors must match the point dimension")
        if Q.shape[0]:
            q, r = np.linalg.qr(Q.T)
            if np.min(np.abs(np.diag(r))) < 1e-10:
                raise ValueError("affine basis is linearly dependent")
            Q = (q * np.sign(np.diag(r))).T
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "basis", Q)

    @property
    def dim(self) -> int:
        return self.point.size

    @cached_property
    def complement(self) -> np.ndarray:
        """Orthonormal basis (rows) of the orthogonal complement of the span."""
        n, d = self.dim, self.basis.shape[0]
        if d == 0:
            return np.eye(n)
        u, _, _ = np.linalg.svd(self.basis.T, full_matrices=True)
        return u[:, d:].T.copy()

    def project_point(self, x) -> np.ndarray:
        x = self._check(x)
        Q = self.basis
        return self.point + Q.T @ (Q @ (x - self.point))

    def rows(self):
        C = self.complement
        c = C @ self.point
        return np.vstack([C, -C]), np.concatenate([c, -c])


@dataclass(frozen=True, eq=False)
class Ball(_ConvexSet):
    center: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def project_point(self, x) -> np.ndarray:
        x = self._check(x)
        d = x - self.center
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return x.copy()
        return self.center + (self.radius / nrm) * d

    def distance(self, x) -> float:
        x = self._check(x)
        return max(0.0, float(np.linalg.norm(x - self.center)) - self.radius)


@dataclass(frozen=True, eq=False)
class Polyhedron(_ConvexSet):
    """``{x : <a_i, x> <= b_i for all i}``, rows normalized, nonempty."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if A.shape[0] != b.size or A.shape[0] == 0:
            raise ValueError("polyhedron needs one offset per (nonempty) row")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polyhedron data must be finite")
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm <= UNIT_TOL):
            raise ValueError("polyhedron rows must be nonzero")
        object.__setattr__(self, "normals", A / nrm[:, None])
        object.__setattr__(self, "offsets", b / nrm)
        if project_polyhedron(self.normals, self.offsets, np.zeros(A.shape[1]), self.plan) is None:
            raise ValueError("polyhedron is empty")

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[Sequence[float], float]]) -> "Polyhedron":
        return cls(np.array([r[0] for r in rows], dtype=float), np.array([r[1] for r in rows], dtype=float))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @cached_property
    def plan(self):
        return active_set_plan(self.normals)

    def project_point(self, x) -> np.ndarray:
        x = self._check(x)
        return project_polyhedron(self.normals, self.offsets, x, self.plan)

    def slacks(self, x) -> np.ndarray:
        return self.offsets - self.normals @ self._check(x)

    def rows(self):
        return self.normals.copy(), self.offsets.copy()


ConvexSet = _TUnion[HalfSpace, Hyperplane, AffineSubspace, Ball, Polyhedron]


@dataclass(frozen=True, eq=False)
class Union:
    """Finite union of convex pieces; generally nonconvex."""

    pieces: tuple

    is_convex = False

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("union needs at least one piece")
        for p in pieces:
            if not isinstance(p, _ConvexSet):
                raise TypeError("union pieces must be convex set descriptors")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise DimensionError("union pieces live in different dimensions")
        object.__setattr__(self, "pieces", pieces)

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    def project(self, x) -> list[np.ndarray]:
        """All nearest points, lexicographically sorted (first = tie-break pick)."""
        x = as_vec(x, self.dim)
        cands = [p.project_point(x) for p in self.pieces]
        dists = np.array([np.linalg.norm(x - c) for c in cands])
        best = dists.min()
        out: list[np.ndarray] = []
        for c, d in zip(cands, dists):
            if d <= best + TIE_TOL and not any(np.linalg.norm(c - o) <= 1e-12 for o in out):
                out.append(c)
        out.sort(key=tuple)
        return out

    def project_point(self, x) -> np.ndarray:
        return self.project(x)[0]

    def distance(self, x) -> float:
        x = as_vec(x, self.dim)
        return min(p.distance(x) for p in self.pieces)

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.distance(x) <= tol

    def rows(self):
        return None

    def containing_pieces(self, x, tol: float = 1e-9) -> list:
        return [p for p in self.pieces if p.contains(x, tol)]


SetDescriptor = _TUnion[HalfSpace, Hyperplane, AffineSubspace, Ball, Polyhedron, Union]


def distance(s: SetDescriptor, x) -> float:
    """Euclidean distance from ``x`` to ``s``."""
    return s.distance(as_vec(x, s.dim))


def project(s: SetDescriptor, x) -> list[np.ndarray]:
    """All nearest points of ``s`` to ``x`` (a single point for convex sets)."""
    return s.project(as_vec(x, s.dim))


def membership(s: SetDescriptor, x, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return distance(s, x) <= tol


def check_same_dimension(sets: Sequence[SetDescriptor]) -> int:
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise DimensionError(f"sets live in different dimensions: {sorted(dims)}")
    return dims.pop()


def iter_pieces(s: SetDescriptor) -> Iterator:
    if isinstance(s, Union):
        yield from s.pieces
    else:
        yield s
