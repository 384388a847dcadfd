"""Dual regularity constants of a finite collection of closed sets.

For two sets the three constants are all driven by one number, the smallest
inner product ``mu`` between unit normals taken from the two strict
delta-normal cones:

    eta = sqrt((1 + mu) / 2),   nu = sqrt((1 - mu) / 2),   c = -mu.

For ``m >= 3`` sets ``eta`` is the infimum of ``|x_1 + ... + x_m|`` over
normals with ``|x_1| + ... + |x_m| = 1`` and ``c = 1 - 2 eta^2``; the
two-set constant ``nu`` has no counterpart there.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .cones import Cone, strict_delta_cone
from .errors import PointNotInIntersection, TrivialCone
from .geometry import SetDescriptor, as_vec, check_same_dimension

log = logging.getLogger(__name__)

DELTA_SCHEDULE = (1e-1, 1e-2, 1e-3)
ZERO_THRESHOLD = 1e-9
STABILITY_TOL = 1e-6
FACE_PAIR_LIMIT = 40_000


# --------------------------------------------------------------------------
# cone-pair kernel
# --------------------------------------------------------------------------

def _alternating_max_cosine(K1: Cone, K2: Cone, seed: int = 0, n_random: int = 16,
                            max_iter: int = 500):
    """Multi-start alternating best responses for ``max <u, w>``."""
    rng = np.random.default_rng(seed)
    starts = list(K1.generator_rays())
    starts += [K1.best_unit(g) for g in K2.generator_rays()]
    for _ in range(n_random):
        starts.append(K1.best_unit(rng.standard_normal(K1.dim)))
    best = (-np.inf, None, None)
    for u in starts:
        val = -np.inf
        for _ in range(max_iter):
            w = K2.best_unit(u)
            u = K1.best_unit(w)
            new = float(u @ w)
            if new <= val + 1e-15:
                val = max(val, new)
                break
            val = new
        if val > best[0]:
            best = (val, u, w)
    return best


def _exact_max_cosine(K1: Cone, K2: Cone, tol: float = 1e-9):
    """Maximize ``<u, w>`` over unit ``u in K1``, ``w in K2`` exactly.

    An optimal pair has ``u`` in the relative interior of some face ``F1`` and
    ``w`` in that of some ``F2``; stationarity on the two unit spheres makes
    ``(u, w)`` a singular pair of ``Q1^T Q2`` (orthonormal face bases). We
    enumerate all face pairs, collect every singular pair with both sign
    patterns, and return the best candidate that actually lies in the cones.
    Single-generator faces guarantee a feasible candidate exists.
    """
    vals, us, ws = [], [], []
    for Q1 in K1.face_spans:
        for Q2 in K2.face_spans:
            U, s, Vt = np.linalg.svd(Q1.T @ Q2, full_matrices=False)
            P, R = Q1 @ U, Q2 @ Vt.T
            for i, sig in enumerate(s):
                p, r = P[:, i], R[:, i]
                vals += [sig, sig, -sig, -sig]
                us += [p, -p, p, -p]
                ws += [r, -r, -r, r]
    order = np.argsort(-np.asarray(vals), kind="stable")
    for j in order:
        u, w = us[j], ws[j]
        if K1.contains(u, tol) and K2.contains(w, tol):
            return float(vals[j]), u, w
    raise RuntimeError("no feasible singular pair found")  # pragma: no cover


def max_cosine(K1: Cone, K2: Cone, method: str = "auto", seed: int = 0):
    """``max <u, w>`` over unit ``u in K1``, ``w in K2`` with a maximizer."""
    if K1.is_trivial or K2.is_trivial:
        raise TrivialCone("extremal angles need nontrivial cones")
    if K1.dim != K2.dim:
        raise ValueError("cones live in different dimensions")
    if method == "auto":
        work = len(K1.face_spans) * len(K2.face_spans)
        method = "exact" if work <= FACE_PAIR_LIMIT else "alternating"
    if method == "exact":
        return _exact_max_cosine(K1, K2)
    if method == "alternating":
        return _alternating_max_cosine(K1, K2, seed=seed)
    raise ValueError(f"unknown method {method!r}")


def cone_pair_extremal_angle(K1: Cone, K2: Cone, method: str = "auto") -> tuple[float, float]:
    """Return ``(min <u,v>, max <u,v>)`` over unit ``u in K1``, ``v in K2``."""
    hi, _, _ = max_cosine(K1, K2, method)
    lo, _, _ = max_cosine(K1, K2.negated(), method)
    return -lo, hi


# --------------------------------------------------------------------------
# two-set constants
# --------------------------------------------------------------------------

def _require_common_point(sets: Sequence[SetDescriptor], xbar, tol: float = 1e-9) -> np.ndarray:
    n = check_same_dimension(sets)
    xbar = as_vec(xbar, n)
    for i, s in enumerate(sets):
        if not s.contains(xbar, tol):
            raise PointNotInIntersection(f"reference point is not in set {i}")
    return xbar


def _min_inner_at(sets, xbar, delta, sample_budget=64, seed=0) -> float | None:
    """Smallest normal inner product at one delta; None if a cone is trivial."""
    K1 = strict_delta_cone(sets[0], xbar, delta, sample_budget, seed)
    K2 = strict_delta_cone(sets[1], xbar, delta, sample_budget, seed + 1)
    if K1.is_trivial or K2.is_trivial:
        return None
    lo, _ = cone_pair_extremal_angle(K1, K2)
    return max(-1.0, min(1.0, lo))


def _two_set_values(sets, xbar, delta_schedule=DELTA_SCHEDULE, **kw) -> list[float | None]:
    if len(sets) != 2:
        raise ValueError("this constant is defined for exactly two sets")
    xbar = _require_common_point(sets, xbar)
    return [_min_inner_at(sets, xbar, d, **kw) for d in delta_schedule]


def _eta_from_mu(mu):
    return 1.0 if mu is None else math.sqrt((1.0 + mu) / 2.0)


def _nu_from_mu(mu):
    return 0.0 if mu is None else math.sqrt((1.0 - mu) / 2.0)


def _c_from_mu(mu):
    return -1.0 if mu is None else -mu


def eta_hat_two_sets(sets, xbar, delta_schedule=DELTA_SCHEDULE, **kw) -> float:
    """Two-set ``eta`` using normals of equal length 1/2."""
    return _eta_from_mu(_two_set_values(sets, xbar, delta_schedule, **kw)[-1])


def nu_hat_two_sets(sets, xbar, delta_schedule=DELTA_SCHEDULE, **kw) -> float:
    return _nu_from_mu(_two_set_values(sets, xbar, delta_schedule, **kw)[-1])


def c_hat_two_sets(sets, xbar, delta_schedule=DELTA_SCHEDULE, **kw) -> float:
    return _c_from_mu(_two_set_values(sets, xbar, delta_schedule, **kw)[-1])


# --------------------------------------------------------------------------
# m-set eta
# --------------------------------------------------------------------------

def _min_norm_on_simplex(U: np.ndarray) -> tuple[float, np.ndarray]:
    """Min of ``|U lam|`` over the probability simplex, by support enumeration."""
    m = U.shape[1]
    best_val, best_lam = np.inf, None
    for size in range(1, m + 1):
        for S in itertools.combinations(range(m), size):
            US = U[:, S]
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = US.T @ US
            K[:size, size] = 1.0
            K[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0][:size]
            if np.any(sol < -1e-12) or abs(sol.sum() - 1.0) > 1e-9:
                continue
            sol = np.clip(sol, 0.0, None)
            sol /= sol.sum()
            val = float(np.linalg.norm(US @ sol))
            if val < best_val:
                best_val = val
                best_lam = np.zeros(m)
                best_lam[list(S)] = sol
    return best_val, best_lam


def _sum_can_vanish(cones: Sequence[Cone], tol: float = 1e-7) -> bool:
    """LP test: is there ``x_i in K_i``, not all zero, with ``sum x_i = 0``?"""
    n = cones[0].dim
    blocks = [c.generator_rays() for c in cones]
    G = np.vstack(blocks)  # rows are generators
    k = G.shape[0]
    owner = np.concatenate([[i] * b.shape[0] for i, b in enumerate(blocks)])
    # variables t (k,), constraint sum_j t_j g_j = 0, probe each block coordinate
    A_eq = G.T
    b_eq = np.zeros(n)
    for i in range(len(cones)):
        Gi = G * (owner == i)[:, None]
        A_ub = np.vstack([Gi.T, -Gi.T])
        b_ub = np.ones(2 * n)
        for j in range(n):
            for sign in (1.0, -1.0):
                res = linprog(-sign * Gi[:, j], A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                              bounds=[(0, 1e6)] * k, method="highs")
                if res.status == 0 and -res.fun > tol:
                    return True
    return False


def _eta_kernel(cones: Sequence[Cone], seed: int = 0, n_random: int = 24,
                max_iter: int = 2000) -> tuple[float, list[np.ndarray]]:
    """Multi-start block-coordinate descent for ``min |sum lam_i u_i|``.

    Each sweep replaces every ``u_i`` by its exact best response (unit vector
    of ``K_i`` maximizing ``<u, -r_i>``, ``r_i`` the rest of the sum) and then
    re-optimizes the weights exactly on the simplex.
    """
    m = len(cones)
    rng = np.random.default_rng(seed)
    gens = [c.generator_rays() for c in cones]
    starts: list[list[np.ndarray]] = []
    combos = list(itertools.product(*[range(g.shape[0]) for g in gens]))
    if len(combos) > 64:
        pick = rng.choice(len(combos), 64, replace=False)
        combos = [combos[p] for p in pick]
    for combo in combos:
        starts.append([gens[i][combo[i]] for i in range(m)])
    for _ in range(n_random):
        starts.append([c.best_unit(rng.standard_normal(c.dim)) for c in cones])
    best_val, best_x = np.inf, None
    for us in starts:
        us = [u.copy() for u in us]
        val, lam = _min_norm_on_simplex(np.column_stack(us))
        for _ in range(max_iter):
            for i in range(m):
                rest = sum(lam[j] * us[j] for j in range(m) if j != i)
                if np.linalg.norm(rest) > 0:
                    us[i] = cones[i].best_unit(-rest)
            new, lam = _min_norm_on_simplex(np.column_stack(us))
            done = new >= val - 1e-15
            val = min(val, new)
            if done:
                break
        if val < best_val:
            best_val, best_x = val, [lam[i] * us[i] for i in range(m)]
    return best_val, best_x


def _eta_m_at(sets, xbar, delta, sample_budget=64, seed=0) -> float:
    cones = [strict_delta_cone(s, xbar, delta, sample_budget, seed + i) for i, s in enumerate(sets)]
    live = [c for c in cones if not c.is_trivial]
    if not live:
        return 1.0
    if len(live) == 1:
        return 1.0
    if _sum_can_vanish(live):
        return 0.0
    val, _ = _eta_kernel(live, seed=seed)
    return float(min(1.0, val))


def eta_hat_m_sets(sets, xbar, delta_schedule=DELTA_SCHEDULE, sample_budget: int = 64,
                   seed: int = 0) -> float:
    """``inf |sum x_i|`` over normals with ``sum |x_i| = 1`` (any ``m >= 2``)."""
    if len(sets) < 2:
        raise ValueError("need at least two sets")
    xbar = _require_common_point(sets, xbar)
    return _eta_m_at(sets, xbar, delta_schedule[-1], sample_budget, seed)


# --------------------------------------------------------------------------
# report and classification
# --------------------------------------------------------------------------

class Classification(str, Enum):
    UNIFORMLY_REGULAR = "UniformlyRegular"
    APPROXIMATELY_STATIONARY = "ApproximatelyStationary"


@dataclass
class RegularityReport:
    eta_hat: float
    nu_hat: float | None
    c_hat: float
    c_hat_plus: float
    classification: Classification
    delta_schedule: list[float]
    stabilized: bool
    borderline: bool = False
    eta_by_delta: list[float] = field(default_factory=list)
    m: int = 2

    def identity_residuals(self) -> dict[str, float]:
        out = {"c_vs_eta": abs(self.c_hat - (1.0 - 2.0 * self.eta_hat ** 2))}
        if self.nu_hat is not None:
            out["eta2_plus_nu2"] = abs(self.eta_hat ** 2 + self.nu_hat ** 2 - 1.0)
            out["one_plus_c_vs_2nu2"] = abs(1.0 + self.c_hat - 2.0 * self.nu_hat ** 2)
        return out

    def as_dict(self) -> dict:
        return {
            "eta_hat": self.eta_hat,
            "nu_hat": self.nu_hat,
            "c_hat": self.c_hat,
            "c_hat_plus": self.c_hat_plus,
            "classification": self.classification.value,
            "delta_schedule": list(self.delta_schedule),
            "stabilized": self.stabilized,
            "borderline": self.borderline,
            "eta_by_delta": list(self.eta_by_delta),
        }


def classify(eta_hat: float, nu_hat: float | None = None, c_hat: float | None = None,
             delta_schedule: Sequence[float] = DELTA_SCHEDULE, eta_by_delta: Sequence[float] = (),
             m: int = 2) -> RegularityReport:
    """Assemble a :class:`RegularityReport` from constants at a common point.

    ``eta > 1e-9`` means uniformly regular. Values in ``(0, 1e-9]`` are
    classified approximately stationary and flagged ``borderline``.
    """
    if c_hat is None:
        c_hat = 1.0 - 2.0 * eta_hat ** 2
    borderline = 0.0 < eta_hat <= ZERO_THRESHOLD
    if borderline:
        log.warning("eta_hat=%.3e is within the zero threshold; treated as stationary", eta_hat)
    cls = (Classification.UNIFORMLY_REGULAR if eta_hat > ZERO_THRESHOLD
           else Classification.APPROXIMATELY_STATIONARY)
    etas = list(eta_by_delta) or [eta_hat]
    return RegularityReport(
        eta_hat=eta_hat,
        nu_hat=nu_hat,
        c_hat=c_hat,
        c_hat_plus=max(c_hat, 0.0),
        classification=cls,
        delta_schedule=list(delta_schedule),
        stabilized=(max(etas) - min(etas)) <= STABILITY_TOL,
        borderline=borderline,
        eta_by_delta=etas,
        m=m,
    )


def regularity_report(sets: Sequence[SetDescriptor], xbar, delta_schedule=DELTA_SCHEDULE,
                      sample_budget: int = 64, seed: int = 0) -> RegularityReport:
    """Compute the dual constants over the delta schedule and classify.

    The reported values are those at the smallest delta.
    """
    xbar = _require_common_point(sets, xbar)
    m = len(sets)
    if m < 2:
        raise ValueError("need at least two sets")
    if m == 2:
        mus = _two_set_values(sets, xbar, delta_schedule, sample_budget=sample_budget, seed=seed)
        etas = [_eta_from_mu(mu) for mu in mus]
        mu = mus[-1]
        return classify(etas[-1], _nu_from_mu(mu), _c_from_mu(mu), delta_schedule, etas, m=2)
    etas = [_eta_m_at(sets, xbar, d, sample_budget, seed) for d in delta_schedule]
    return classify(etas[-1], None, None, delta_schedule, etas, m=m)


def c_hat(sets, xbar, **kw) -> float:
    """``c = 1 - 2 eta^2`` for any number of sets."""
    return regularity_report(sets, xbar, **kw).c_hat
