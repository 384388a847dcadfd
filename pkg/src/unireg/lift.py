"""Product-space reformulation of an m-set feasibility problem.

The collection ``{O_1, ..., O_m}`` in R^n is replaced by the pair
``{O_1 x ... x O_m, L}`` in R^{nm}, where ``L`` is the diagonal
``{(x, ..., x)}`` and the product space carries the 2-norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cones import Cone, ProductCone, diagonal_complement, strict_delta_cone
from .constants import (
    DELTA_SCHEDULE,
    Classification,
    _require_common_point,
    cone_pair_extremal_angle,
    max_cosine,
    regularity_report,
)
from .errors import DimensionError
from .geometry import SetDescriptor, as_vec, check_same_dimension


@dataclass(frozen=True, eq=False)
class LiftedProblem:
    sets: tuple
    n: int
    m: int

    @classmethod
    def from_sets(cls, sets: Sequence[SetDescriptor]) -> "LiftedProblem":
        sets = tuple(sets)
        if len(sets) < 2:
            raise ValueError("need at least two sets")
        return cls(sets, check_same_dimension(sets), len(sets))

    @property
    def dim(self) -> int:
        return self.n * self.m

    def lift(self, x) -> np.ndarray:
        """``A x = (x, ..., x)``."""
        return np.tile(as_vec(x, self.n), self.m)

    def blocks(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.size != self.dim:
            raise DimensionError(f"expected a vector of length {self.dim}")
        return z.reshape(self.m, self.n)

    def project_product(self, z) -> np.ndarray:
        """Blockwise projection onto ``O_1 x ... x O_m``."""
        return np.concatenate([s.project(b)[0] for s, b in zip(self.sets, self.blocks(z))])

    def project_diagonal(self, z) -> np.ndarray:
        """Projection onto ``L``: lift of the blockwise mean."""
        return np.tile(self.blocks(z).mean(axis=0), self.m)

    def in_product(self, z, tol: float = 1e-9) -> bool:
        return all(s.contains(b, tol) for s, b in zip(self.sets, self.blocks(z)))

    def product_normal_cone(self, xbar, delta: float, sample_budget: int = 64, seed: int = 0) -> ProductCone:
        xbar = as_vec(xbar, self.n)
        return ProductCone(tuple(strict_delta_cone(s, xbar, delta, sample_budget, seed + i)
                                 for i, s in enumerate(self.sets)))

    def diagonal_normal_cone(self) -> Cone:
        return diagonal_complement(self.n, self.m)


def min_sum_norm_sq(K: ProductCone, tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """``min |x_1 + ... + x_m|^2`` over ``(x_i) in K`` with ``sum |x_i|^2 = 1``.

    A minimizer in the relative interior of a face with orthonormal span
    ``Q`` is an eigenvector of ``Q^T B^T B Q`` (``B`` sums the blocks), so
    enumerating face spans and their eigenpairs is exhaustive.
    """
    n, m = K.block, len(K.factors)
    vals, vecs = [], []
    for Q in K.face_spans:
        BQ = Q.reshape(m, n, -1).sum(axis=0)
        w, V = np.linalg.eigh(BQ.T @ BQ)
        Z = Q @ V
        for j in range(len(w)):
            vals += [w[j], w[j]]
            vecs += [Z[:, j], -Z[:, j]]
    for j in np.argsort(vals, kind="stable"):
        if K.contains(vecs[j], tol):
            return float(max(vals[j], 0.0)), vecs[j]
    raise RuntimeError("no feasible eigenvector found")  # pragma: no cover


@dataclass
class LiftedConstants:
    eta: float
    nu: float
    c: float
    k_star: float | None

    def as_dict(self) -> dict:
        return {"eta_prime": self.eta, "nu_prime": self.nu, "c_prime": self.c, "k_star": self.k_star}


def _from_k_star(k_star: float, m: int) -> LiftedConstants:
    root = math.sqrt(max(0.0, 1.0 - k_star ** 2 / m))
    return LiftedConstants(
        eta=math.sqrt(max(0.0, 0.5 - 0.5 * root)),
        nu=math.sqrt(0.5 + 0.5 * root),
        c=root,
        k_star=k_star,
    )


_DEGENERATE = LiftedConstants(eta=1.0, nu=0.0, c=-1.0, k_star=None)


def lifted_constants(sets: Sequence[SetDescriptor], xbar, delta_schedule=DELTA_SCHEDULE,
                     sample_budget: int = 64, seed: int = 0) -> LiftedConstants:
    """Constants of ``{O, L}`` at ``A xbar`` from the closed-form reduction.

    ``k*`` is the smallest ``|sum x_i|`` with ``sum |x_i|^2 = 1``; then
    ``c' = sqrt(1 - k*^2/m)``, ``eta' = sqrt((1 - c')/2)``,
    ``nu' = sqrt((1 + c')/2)``. When every factor cone is trivial the
    empty-set conventions give ``(1, 0, -1)``.
    """
    lp = LiftedProblem.from_sets(sets)
    xbar = _require_common_point(sets, xbar)
    K = lp.product_normal_cone(xbar, delta_schedule[-1], sample_budget, seed)
    if K.is_trivial:
        return _DEGENERATE
    k2, _ = min_sum_norm_sq(K)
    return _from_k_star(math.sqrt(k2), lp.m)


def lifted_constants_direct(sets: Sequence[SetDescriptor], xbar, delta_schedule=DELTA_SCHEDULE,
                            sample_budget: int = 64, seed: int = 0) -> LiftedConstants:
    """Same constants from the two-set definition applied in R^{nm}.

    Uses the product normal cone and the diagonal complement directly, with
    no use of the closed-form reduction.
    """
    lp = LiftedProblem.from_sets(sets)
    xbar = _require_common_point(sets, xbar)
    K = lp.product_normal_cone(xbar, delta_schedule[-1], sample_budget, seed)
    if K.is_trivial:
        return _DEGENERATE
    mu, _ = cone_pair_extremal_angle(K, lp.diagonal_normal_cone())
    mu = min(1.0, max(-1.0, mu))
    return LiftedConstants(eta=math.sqrt((1 + mu) / 2), nu=math.sqrt((1 - mu) / 2), c=-mu, k_star=None)


def lifted_constants_two_set_form(sets: Sequence[SetDescriptor], xbar, delta_schedule=DELTA_SCHEDULE,
                                  sample_budget: int = 64, seed: int = 0) -> LiftedConstants:
    """m = 2 only: ``c' = sup |x_1 - x_2|`` over ``|x_1|^2 + |x_2|^2 = 1/2``.

    With ``|x_1| = cos(t)/sqrt 2``, ``|x_2| = sin(t)/sqrt 2`` and unit
    directions at inner product ``mu``, the objective squared is
    ``1/2 - mu sin(2t)/2``; it is maximized at ``t = pi/4`` when the best
    ``mu`` is negative and at ``t = 0`` otherwise.
    """
    if len(sets) != 2:
        raise ValueError("the alternate lifted form is specific to two sets")
    xbar = _require_common_point(sets, xbar)
    delta = delta_schedule[-1]
    K1 = strict_delta_cone(sets[0], xbar, delta, sample_budget, seed)
    K2 = strict_delta_cone(sets[1], xbar, delta, sample_budget, seed + 1)
    if K1.is_trivial and K2.is_trivial:
        return _DEGENERATE
    if K1.is_trivial or K2.is_trivial:
        sq = 0.5
    else:
        mu = -max_cosine(K1, K2.negated())[0]
        t = math.pi / 4 if mu < 0 else 0.0
        sq = 0.5 - mu * math.sin(2 * t) / 2
    c = math.sqrt(sq)
    return LiftedConstants(eta=math.sqrt(max(0.0, (1 - c) / 2)), nu=math.sqrt((1 + c) / 2), c=c, k_star=None)


def value_range_bounds(m: int) -> dict[str, tuple[float, float]]:
    r = math.sqrt(1.0 - 1.0 / m)
    return {
        "eta": (0.0, math.sqrt(0.5 - 0.5 * r)),
        "nu": (math.sqrt(0.5 + 0.5 * r), 1.0),
        "c": (r, 1.0),
    }


def value_range_violations(lc: LiftedConstants, m: int, slack: float = 1e-6) -> list[str]:
    """Names of lifted constants outside their admissible range."""
    if lc.k_star is None and lc.c == -1.0:
        return []
    bad = []
    for name, (lo, hi) in value_range_bounds(m).items():
        v = getattr(lc, name)
        if v < lo - slack or v > hi + slack:
            bad.append(name)
    return bad


def lifted_equivalence_check(sets: Sequence[SetDescriptor], xbar, **kw) -> bool:
    """Regularity of the collection agrees with ``c' < 1`` for the lifted pair."""
    rep = regularity_report(sets, xbar, **kw)
    lc = lifted_constants(sets, xbar, **kw)
    lifted_regular = lc.c < 1.0 - 1e-9
    return (rep.classification is Classification.UNIFORMLY_REGULAR) == lifted_regular
