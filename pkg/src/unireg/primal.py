"""Primal-space constants by exhaustive grid search (verification oracles).

Only polyhedral sets in R^2 or R^3 are supported. Everything reduces to
projecting a point onto intersections ``{x : A x <= b - A_i a_i}`` for many
offsets at once, which :func:`project_polyhedron_batch` does exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import _require_common_point
from .errors import AmbientDimensionTooLarge
from .geometry import SetDescriptor, active_set_plan, as_vec, check_same_dimension, project_polyhedron_batch

GRID_RESOLUTION = 0.01
RHO_SCHEDULE = (1e-1, 1e-2)
R_CAP = 1.5  # theta_rho / rho never exceeds 1 for nonempty sets; 1.5 leaves headroom


def sphere_directions(n: int, count: int | None = None) -> np.ndarray:
    """Unit directions: equally spaced angles in 2D, a Fibonacci lattice in 3D."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        count = count or 72
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        count = count or 40
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        s = np.sqrt(1 - z ** 2)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    raise AmbientDimensionTooLarge(f"grid oracles are limited to dimension <= 3, got {n}")


class _Stack:
    """The rows of all sets stacked, with a block index per row."""

    def __init__(self, sets: Sequence[SetDescriptor]):
        self.n = check_same_dimension(sets)
        if self.n > 3:
            raise AmbientDimensionTooLarge(f"grid oracles are limited to dimension <= 3, got {self.n}")
        As, bs, owner = [], [], []
        for i, s in enumerate(sets):
            r = s.rows() if hasattr(s, "rows") else None
            if r is None:
                raise TypeError(f"set {i} ({type(s).__name__}) is not polyhedral")
            As.append(r[0])
            bs.append(r[1])
            owner += [i] * len(r[1])
        self.A = np.vstack(As)
        self.b = np.concatenate(bs)
        self.owner = np.array(owner)
        self.m = len(sets)
        self.blocks = [(self.A[self.owner == i], self.b[self.owner == i]) for i in range(self.m)]
        self.plan = active_set_plan(self.A)

    def shifted_offsets(self, shifts: np.ndarray) -> np.ndarray:
        """Offsets of ``cap_i (O_i - a_i)``; ``shifts`` is (N, m, n)."""
        per_row = np.einsum("rn,Nrn->Nr", self.A, shifts[:, self.owner, :])
        return self.b[None, :] - per_row

    def dist_to_intersection(self, Y: np.ndarray, shifts: np.ndarray) -> np.ndarray:
        X, found = project_polyhedron_batch(self.A, self.shifted_offsets(shifts), Y, self.plan)
        d = np.full(len(Y), np.inf)
        d[found] = np.linalg.norm(X[found] - Y[found], axis=1)
        return d

    def dist_to_set(self, i: int, Y: np.ndarray) -> np.ndarray:
        A, b = self.blocks[i]
        X, _ = project_polyhedron_batch(A, np.broadcast_to(b, (len(Y), len(b))), Y, active_set_plan(A))
        return np.linalg.norm(X - Y, axis=1)


def default_direction_count(n: int, m: int, budget: int = 20_000) -> int:
    """Directions per set so that all m-tuples fit in ``budget``."""
    floor = 24 if n == 2 else 26
    return max(floor, min(72 if n == 2 else 150, int(budget ** (1.0 / m))))


def _sphere_shift_combos(dirs: np.ndarray, m: int, limit: int = 400_000, seed: int = 0) -> np.ndarray:
    """All m-tuples of directions, (N, m, n); subsampled beyond ``limit``."""
    k = len(dirs)
    if k ** m <= limit:
        idx = np.array(list(itertools.product(range(k), repeat=m)))
    else:
        idx = np.random.default_rng(seed).integers(0, k, size=(limit, m))
    return dirs[idx]


def _theta_rho(stack: _Stack, xbar: np.ndarray, rho: float, res: float, combos: np.ndarray,
               offset_b: np.ndarray | None = None) -> float:
    """Largest ``r = j res rho`` such that every translation keeps a point in ``B_rho``.

    ``a -> d(xbar, cap (O_i - a_i))`` is convex, so its maximum over the
    product of balls of radius r sits on the product of spheres. Feasibility
    in r is monotone, which permits bisection over j.
    """
    b0 = stack.b if offset_b is None else offset_b
    Y = np.broadcast_to(xbar, (len(combos), stack.n)).copy()
    base = np.einsum("rn,Nrn->Nr", stack.A, combos[:, stack.owner, :])

    def ok(j: int) -> bool:
        r = j * res * rho
        B = b0[None, :] - r * base
        X, found = project_polyhedron_batch(stack.A, B, Y, stack.plan)
        if not found.all():
            return False
        return bool(np.all(np.linalg.norm(X - Y, axis=1) <= rho * (1 + 1e-9)))

    lo, hi = 0, int(math.ceil(R_CAP / res))
    if not ok(lo):
        return 0.0
    if ok(hi):
        return hi * res * rho
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo * res * rho


def theta_rho_bruteforce(sets: Sequence[SetDescriptor], xbar, rho: float,
                         grid_resolution: float = GRID_RESOLUTION, n_directions: int | None = None,
                         seed: int = 0) -> float:
    """``theta_rho`` at ``xbar`` on a grid of step ``grid_resolution * rho``.

    Returns the radius ``r`` itself, not the ratio ``r / rho``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    stack = _Stack(sets)
    xbar = as_vec(xbar, stack.n)
    count = n_directions or default_direction_count(stack.n, stack.m)
    combos = _sphere_shift_combos(sphere_directions(stack.n, count), stack.m, seed=seed)
    return _theta_rho(stack, xbar, rho, grid_resolution, combos)


def _omega_offsets(stack: _Stack, sets, xbar: np.ndarray, rho: float) -> list[np.ndarray]:
    """Offsets of ``cap (O_i - w_i)`` for a grid of base points ``w_i in O_i`` near ``xbar``.

    The grid keeps ``w_i = xbar`` for all but at most one set, which is
    moved to the projection of ``xbar +- rho/2 e_k``.
    """
    out = [stack.b.copy()]
    for i, s in enumerate(sets):
        for k in range(stack.n):
            for sgn in (1.0, -1.0):
                e = np.zeros(stack.n)
                e[k] = sgn * 0.5 * rho
                w = s.project(xbar + e)[0]
                if np.linalg.norm(w - xbar) < 1e-15:
                    continue
                b = stack.b.copy()
                rows = stack.owner == i
                b[rows] -= stack.A[rows] @ (w - xbar)
                out.append(b)
    return out


@dataclass
class PrimalReport:
    theta_rho: dict[float, float]
    theta_hat: float
    vartheta_hat: float
    grid_resolution: float
    notes: list[str] = field(default_factory=list)

    def agree(self, factor: float = 3.0) -> bool:
        return abs(self.theta_hat - self.vartheta_hat) <= factor * self.grid_resolution

    def as_dict(self) -> dict:
        return {
            "theta_rho": {str(k): v for k, v in self.theta_rho.items()},
            "theta_hat": self.theta_hat,
            "vartheta_hat": self.vartheta_hat,
            "grid_resolution": self.grid_resolution,
        }


def theta_hat_estimate(sets: Sequence[SetDescriptor], xbar, grid_resolution: float = GRID_RESOLUTION,
                       rho_schedule=RHO_SCHEDULE, n_directions: int | None = None, seed: int = 0,
                       per_rho: dict | None = None) -> float:
    """Grid realization of ``liminf theta_rho[O - w](0) / rho``.

    The infimum runs over ``rho`` in the schedule and the base-point grid of
    :func:`_omega_offsets` (``w`` is measured relative to ``xbar``).
    """
    stack = _Stack(sets)
    xbar = _require_common_point(sets, xbar)
    count = n_directions or default_direction_count(stack.n, stack.m)
    combos = _sphere_shift_combos(sphere_directions(stack.n, count), stack.m, seed=seed)
    best = math.inf
    for rho in rho_schedule:
        vals = [_theta_rho(stack, xbar, rho, grid_resolution, combos, b) / rho
                for b in _omega_offsets(stack, sets, xbar, rho)]
        if per_rho is not None:
            per_rho[rho] = vals[0] * rho
        best = min(best, min(vals))
    return float(best)


def vartheta_hat_estimate(sets: Sequence[SetDescriptor], xbar, grid_resolution: float = GRID_RESOLUTION,
                          rho: float = 1e-2, n_directions: int | None = None,
                          n_shift_directions: int = 8, seed: int = 0) -> float:
    """Grid minimum of ``max_i d(x + x_i, O_i) / d(x, cap (O_i - x_i))``.

    ``x`` ranges over ``xbar + rho t u`` for directions ``u`` and
    ``t in {1/4, 1/2, 1}``; each ``x_i`` is 0 or ``rho/2`` times one of
    ``n_shift_directions`` directions. An empty translated intersection
    makes the denominator infinite and the ratio 0. Grid points inside the
    translated intersection are excluded.
    """
    stack = _Stack(sets)
    xbar = _require_common_point(sets, xbar)
    n, m = stack.n, stack.m
    dirs = sphere_directions(n, n_directions if n_directions else (360 if n == 2 else 200))
    X = np.vstack([xbar + rho * t * dirs for t in (0.25, 0.5, 1.0)])
    shift_dirs = np.vstack([np.zeros(n), 0.5 * rho * sphere_directions(n, n_shift_directions)])
    if len(shift_dirs) ** m > 4096:
        rng = np.random.default_rng(seed)
        tuples = rng.integers(0, len(shift_dirs), size=(4096, m))
        tuples[0] = 0
    else:
        tuples = np.array(list(itertools.product(range(len(shift_dirs)), repeat=m)))
    best = math.inf
    for tup in tuples:
        shifts = shift_dirs[tup]  # (m, n)
        S = np.broadcast_to(shifts, (len(X), m, n))
        den = stack.dist_to_intersection(X, S)
        num = np.max([stack.dist_to_set(i, X + shifts[i]) for i in range(m)], axis=0)
        mask = den > 1e-12 * rho
        if not mask.any():
            continue
        best = min(best, float(np.min(num[mask] / den[mask])))
    return 1.0 if best == math.inf else best


def primal_report(sets: Sequence[SetDescriptor], xbar, grid_resolution: float = GRID_RESOLUTION,
                  seed: int = 0) -> PrimalReport:
    per_rho: dict[float, float] = {}
    th = theta_hat_estimate(sets, xbar, grid_resolution, seed=seed, per_rho=per_rho)
    vt = vartheta_hat_estimate(sets, xbar, grid_resolution, seed=seed)
    return PrimalReport(theta_rho=per_rho, theta_hat=th, vartheta_hat=vt, grid_resolution=grid_resolution)
