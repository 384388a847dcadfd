"""Closed convex cones: Frechet normal cones, strict delta-normal cones, and
the product / diagonal-complement cones used by the product-space lift.

Every cone exposes the same small surface: ``contains``, ``project``,
``generator_rays`` (unit directions whose nonnegative hull is the cone),
``face_spans`` (orthonormal bases of the linear spans of its faces) and
``negated``. The optimization kernels in :mod:`unireg.constants` and
:mod:`unireg.lift` only talk to cones through this surface.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.linalg import null_space

from .errors import DimensionError, NonRegularPoint, PointNotInSet
from .geometry import (
    AffineSubspace,
    Ball,
    HalfSpace,
    Hyperplane,
    Polyhedron,
    SetDescriptor,
    Union,
    as_vec,
    project_polyhedron,
)

MEMBER_TOL = 1e-9
ACTIVE_TOL = 1e-9
REDUNDANCY_TOL = 1e-10


def _rel_residual(v: np.ndarray, p: np.ndarray) -> float:
    return float(np.linalg.norm(v - p)) / max(1.0, float(np.linalg.norm(v)))


class Cone:
    dim: int

    @property
    def is_trivial(self) -> bool:
        return False

    def project(self, v) -> np.ndarray:
        raise NotImplementedError

    def contains(self, v, tol: float = MEMBER_TOL) -> bool:
        v = as_vec(v, self.dim)
        return _rel_residual(v, self.project(v)) <= tol

    def generator_rays(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def face_spans(self) -> list[np.ndarray]:
        raise NotImplementedError

    def negated(self) -> "Cone":
        raise NotImplementedError

    def best_unit(self, w: np.ndarray) -> np.ndarray:
        """Unit vector of the cone maximizing ``<u, w>``.

        When ``w`` has a nonzero projection the maximizer is the normalized
        projection; otherwise the maximum is <= 0 and, by quasi-concavity of
        ``u -> <u, w>/|u|`` on the region where it is nonpositive, it is
        attained at a generator ray.
        """
        p = self.project(w)
        nrm = np.linalg.norm(p)
        if nrm > 1e-14 * max(1.0, np.linalg.norm(w)):
            return p / nrm
        G = self.generator_rays()
        return G[int(np.argmax(G @ w))].copy()


@dataclass(frozen=True, eq=False)
class Trivial(Cone):
    """The zero cone ``{0}``."""

    dim: int

    @property
    def is_trivial(self) -> bool:
        return True

    def project(self, v) -> np.ndarray:
        return np.zeros(self.dim)

    def contains(self, v, tol: float = MEMBER_TOL) -> bool:
        return float(np.linalg.norm(as_vec(v, self.dim))) <= tol

    def generator_rays(self) -> np.ndarray:
        return np.zeros((0, self.dim))

    @property
    def face_spans(self) -> list[np.ndarray]:
        return []

    def negated(self) -> "Trivial":
        return self

    def best_unit(self, w):
        raise ValueError("trivial cone has no unit vectors")


@dataclass(frozen=True, eq=False)
class Subspace(Cone):
    """Linear subspace with orthonormal basis rows ``basis``."""

    basis: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if Q.shape[0] == 0:
            raise ValueError("use Trivial for the zero subspace")
        gram = Q @ Q.T
        if np.max(np.abs(gram - np.eye(Q.shape[0]))) > 1e-12:
            q, r = np.linalg.qr(Q.T)
            if np.min(np.abs(np.diag(r))) < 1e-10:
                raise ValueError("subspace basis is linearly dependent")
            Q = (q * np.sign(np.diag(r))).T
        object.__setattr__(self, "basis", Q)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v) -> np.ndarray:
        v = as_vec(v, self.dim)
        return self.basis.T @ (self.basis @ v)

    def generator_rays(self) -> np.ndarray:
        return np.vstack([self.basis, -self.basis])

    @property
    def face_spans(self) -> list[np.ndarray]:
        # a subspace has no proper nonzero faces
        return [self.basis.T.copy()]

    def negated(self) -> "Subspace":
        return self


def _minimal_generators(G: np.ndarray) -> np.ndarray:
    keep: list[np.ndarray] = []
    for g in G:
        if not any(np.linalg.norm(g - k) <= 1e-12 for k in keep):
            keep.append(g)
    j = 0
    while j < len(keep) and len(keep) > 1:
        others = np.array([k for i, k in enumerate(keep) if i != j])
        _, res = nnls(others.T, keep[j])
        if res <= REDUNDANCY_TOL:
            keep.pop(j)
        else:
            j += 1
    return np.array(keep)


@dataclass(frozen=True, eq=False)
class FinitelyGenerated(Cone):
    """``{sum t_i g_i : t_i >= 0}`` with unit, non-redundant generators."""

    generators: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if G.shape[0] == 0:
            raise ValueError("use Trivial for a cone without generators")
        nrm = np.linalg.norm(G, axis=1)
        G = G[nrm > 1e-14] / nrm[nrm > 1e-14, None]
        if G.shape[0] == 0:
            raise ValueError("all generators vanish")
        object.__setattr__(self, "generators", _minimal_generators(G))

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def project(self, v) -> np.ndarray:
        v = as_vec(v, self.dim)
        t, _ = nnls(self.generators.T, v)
        return self.generators.T @ t

    def generator_rays(self) -> np.ndarray:
        return self.generators.copy()

    @cached_property
    def _face_spans(self) -> list[np.ndarray]:
        G = self.generators
        k, n = G.shape
        spans: list[np.ndarray] = []
        seen: list[np.ndarray] = []
        for size in range(1, min(k, n) + 1):
            for S in itertools.combinations(range(k), size):
                M = G[list(S)].T
                u, s, _ = np.linalg.svd(M, full_matrices=False)
                if s[-1] < 1e-10 * s[0]:
                    continue
                proj = u @ u.T
                if any(np.max(np.abs(proj - p)) < 1e-9 for p in seen):
                    continue
                seen.append(proj)
                spans.append(u)
        return spans

    @property
    def face_spans(self) -> list[np.ndarray]:
        return self._face_spans

    def negated(self) -> "FinitelyGenerated":
        return FinitelyGenerated(-self.generators)


@dataclass(frozen=True, eq=False)
class ProductCone(Cone):
    """Cartesian product of cones in R^n, living in R^{n m}.

    Kept in factored form so that membership, projection and face
    enumeration stay blockwise.
    """

    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("product of zero cones")
        if len({f.dim for f in factors}) != 1:
            raise DimensionError("product factors must share the ambient dimension")
        object.__setattr__(self, "factors", factors)

    @property
    def block(self) -> int:
        return self.factors[0].dim

    @property
    def dim(self) -> int:
        return self.block * len(self.factors)

    @property
    def is_trivial(self) -> bool:
        return all(f.is_trivial for f in self.factors)

    def _blocks(self, v):
        v = as_vec(v, self.dim)
        return v.reshape(len(self.factors), self.block)

    def project(self, v) -> np.ndarray:
        return np.concatenate([f.project(b) for f, b in zip(self.factors, self._blocks(v))])

    def contains(self, v, tol: float = MEMBER_TOL) -> bool:
        return _rel_residual(as_vec(v, self.dim), self.project(v)) <= tol

    def generator_rays(self) -> np.ndarray:
        return _block_embed([f.generator_rays() for f in self.factors], self.block)

    @cached_property
    def _face_spans(self) -> list[np.ndarray]:
        n, m = self.block, len(self.factors)
        options = [[None] + list(f.face_spans) for f in self.factors]
        spans = []
        for combo in itertools.product(*options):
            cols = []
            for i, Q in enumerate(combo):
                if Q is None:
                    continue
                E = np.zeros((n * m, Q.shape[1]))
                E[i * n:(i + 1) * n] = Q
                cols.append(E)
            if cols:
                spans.append(np.hstack(cols))
        return spans

    @property
    def face_spans(self) -> list[np.ndarray]:
        return self._face_spans

    def negated(self) -> "ProductCone":
        return ProductCone(tuple(f.negated() for f in self.factors))

    def best_unit(self, w: np.ndarray) -> np.ndarray:
        p = self.project(w)
        nrm = np.linalg.norm(p)
        if nrm > 1e-14 * max(1.0, np.linalg.norm(w)):
            return p / nrm
        G = self.generator_rays()
        return G[int(np.argmax(G @ w))].copy()


def _block_embed(blocks: Sequence[np.ndarray], n: int) -> np.ndarray:
    m = len(blocks)
    rows = []
    for i, G in enumerate(blocks):
        for g in G:
            z = np.zeros(n * m)
            z[i * n:(i + 1) * n] = g
            rows.append(z)
    return np.array(rows) if rows else np.zeros((0, n * m))


def cone_from_generators(G, dim: int) -> Cone:
    """Build the smallest-fitting cone type for a generator list."""
    G = np.asarray(G, dtype=float).reshape(-1, dim)
    G = G[np.linalg.norm(G, axis=1) > 1e-14]
    if G.shape[0] == 0:
        return Trivial(dim)
    return FinitelyGenerated(G)


def ray(direction) -> FinitelyGenerated:
    return FinitelyGenerated(as_vec(direction)[None, :])


# --------------------------------------------------------------------------
# normal cones of the set catalog
# --------------------------------------------------------------------------

def normal_cone(s: SetDescriptor, x, tol: float = ACTIVE_TOL) -> Cone:
    """Frechet normal cone of ``s`` at ``x`` (closed form per variant)."""
    x = as_vec(x, s.dim)
    if not s.contains(x, MEMBER_TOL):
        raise PointNotInSet(f"point is at distance {s.distance(x):.3e} from the set")
    n = s.dim
    if isinstance(s, HalfSpace):
        if s.normal @ x - s.offset >= -tol:
            return ray(s.normal)
        return Trivial(n)
    if isinstance(s, Hyperplane):
        return Subspace(s.normal[None, :])
    if isinstance(s, AffineSubspace):
        C = s.complement
        return Subspace(C) if C.shape[0] else Trivial(n)
    if isinstance(s, Ball):
        d = x - s.center
        r = np.linalg.norm(d)
        if r >= s.radius - tol:
            return ray(d / r)
        return Trivial(n)
    if isinstance(s, Polyhedron):
        active = s.slacks(x) <= tol
        return cone_from_generators(s.normals[active], n)
    if isinstance(s, Union):
        cones = [normal_cone(p, x, tol) for p in s.containing_pieces(x, MEMBER_TOL)]
        if any(c.is_trivial for c in cones):
            return Trivial(n)
        if len(cones) > 1:
            raise NonRegularPoint("point lies on several union pieces")
        return cones[0]
    raise TypeError(f"unsupported set type {type(s).__name__}")


def _ball_cap_normals(b: Ball, xbar: np.ndarray, delta: float, budget: int, rng) -> Cone:
    n = b.dim
    d = xbar - b.center
    s = float(np.linalg.norm(d))
    r = b.radius
    if r - s > delta:
        return Trivial(n)
    if s < 1e-14:
        # centre point with r <= delta: every direction is a normal
        return Subspace(np.eye(n))
    u0 = d / s
    cos_max = (r * r + s * s - delta * delta) / (2 * r * s)
    if cos_max <= 0.0:
        return Subspace(np.eye(n))
    phi = float(np.arccos(min(1.0, cos_max)))
    if phi < 1e-15:
        return ray(u0)
    perp = null_space(u0[None, :]).T  # (n-1, n)
    if n == 2:
        dirs = np.vstack([perp, -perp])
    else:
        w = rng.standard_normal((max(budget, 2 * n), n - 1))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        dirs = w @ perp
    normals = np.cos(phi) * u0 + np.sin(phi) * dirs
    return cone_from_generators(np.vstack([u0, normals]), n)


def _polyhedron_reachable_rows(P: Polyhedron, xbar: np.ndarray, delta: float) -> np.ndarray:
    """Rows that are active somewhere in ``P ∩ B_delta(xbar)``."""
    slack = P.slacks(xbar)
    reach = slack <= ACTIVE_TOL
    for i in np.nonzero(~reach)[0]:
        if slack[i] > delta:
            continue
        A = np.vstack([P.normals, -P.normals[i]])
        b = np.concatenate([P.offsets, [-P.offsets[i]]])
        y = project_polyhedron(A, b, xbar)
        reach[i] = y is not None and np.linalg.norm(y - xbar) <= delta
    return reach


def strict_delta_cone(s: SetDescriptor, xbar, delta: float, sample_budget: int = 64,
                      seed: int = 0) -> Cone:
    """Union of normal cones over ``s ∩ B_delta(xbar)``.

    Exact for half-spaces, hyperplanes and affine subspaces, and for
    polyhedra whenever ``delta`` is below the smallest inactive slack. In the
    remaining cases (balls, unions, polyhedra with inactive rows reachable
    within ``delta``) the result is the convex hull of the contributing
    normals, which contains the union.
    """
    xbar = as_vec(xbar, s.dim)
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not s.contains(xbar, MEMBER_TOL):
        raise PointNotInSet(f"point is at distance {s.distance(xbar):.3e} from the set")
    n = s.dim
    rng = np.random.default_rng(seed)
    if isinstance(s, (Hyperplane, AffineSubspace)):
        return normal_cone(s, xbar)
    if isinstance(s, HalfSpace):
        if s.offset - s.normal @ xbar <= delta:
            return ray(s.normal)
        return Trivial(n)
    if isinstance(s, Polyhedron):
        return cone_from_generators(s.normals[_polyhedron_reachable_rows(s, xbar, delta)], n)
    if isinstance(s, Ball):
        return _ball_cap_normals(s, xbar, delta, sample_budget, rng)
    if isinstance(s, Union):
        rays = []
        for k, p in enumerate(s.pieces):
            d = p.distance(xbar)
            if d > delta:
                continue
            c = strict_delta_cone(p, p.project_point(xbar), delta + d, sample_budget, seed + k + 1)
            if d == 0.0 and strict_delta_cone(p, xbar, delta, sample_budget, seed).is_trivial:
                return Trivial(n)
            rays.append(c.generator_rays())
        return cone_from_generators(np.vstack(rays) if rays else np.zeros((0, n)), n)
    raise TypeError(f"unsupported set type {type(s).__name__}")


# --------------------------------------------------------------------------
# product-space cones
# --------------------------------------------------------------------------

def product_cone(cones: Sequence[Cone]) -> Cone:
    """Generator form of ``N_1 x ... x N_m`` in R^{nm}."""
    if not cones:
        raise ValueError("need at least one factor")
    dims = {c.dim for c in cones}
    if len(dims) != 1:
        raise DimensionError("all factor cones must share the ambient dimension")
    n = dims.pop()
    G = _block_embed([c.generator_rays() for c in cones], n)
    return cone_from_generators(G, n * len(cones))


def diagonal_complement(n: int, m: int) -> Subspace:
    """Orthonormal basis of ``{(v_1..v_m) in R^{nm} : sum v_i = 0}``."""
    if n < 1 or m < 2:
        raise ValueError("need n >= 1 and m >= 2")
    W = null_space(np.ones((1, m)))  # (m, m-1), orthonormal columns
    rows = [np.kron(W[:, j], np.eye(n)[k]) for j in range(m - 1) for k in range(n)]
    return Subspace(np.array(rows))
