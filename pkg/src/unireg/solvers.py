"""Cyclic, alternating and averaged projections with diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import Classification, RegularityReport, _require_common_point, regularity_report
from .errors import InsufficientData, MethodArityError, PointNotInSet
from .geometry import SetDescriptor, as_vec, check_same_dimension
from .lift import LiftedProblem

log = logging.getLogger(__name__)

NONEXPANSIVE_SLACK = 1e-12
LIMIT_MEMBER_TOL = 1e-8
FIT_FLOOR_FACTOR = 1e3
MIN_FIT_CYCLES = 5


@dataclass
class SolverConfig:
    x0: np.ndarray
    max_iterations: int = 10_000
    stop_displacement: float = 1e-12
    reference_solution: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        self.x0 = as_vec(self.x0)
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("x0 must be finite")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.stop_displacement > 0:
            raise ValueError("stop_displacement must be positive")
        if self.reference_solution is not None:
            self.reference_solution = as_vec(self.reference_solution, self.x0.size)


@dataclass
class Trace:
    iterates: list[np.ndarray]
    displacements: list[float]
    distances_to_limit: list[float]
    limit: np.ndarray | None
    converged: bool
    nonexpansive_ok: bool
    violations: list[int]
    cycle_length: int = 1
    stop_displacement: float = 1e-12
    finite_convergence: bool = False
    distances_to_reference: list[float] | None = None

    @classmethod
    def from_iterates(cls, iterates: Sequence[np.ndarray], converged: bool, cycle_length: int = 1,
                      stop_displacement: float = 1e-12, reference=None, check_cycles: bool = False) -> "Trace":
        its = [np.asarray(x, dtype=float) for x in iterates]
        disp = [float(np.linalg.norm(its[k + 1] - its[k])) for k in range(len(its) - 1)]
        limit = its[-1] if converged else None
        dist = [float(np.linalg.norm(x - limit)) for x in its] if converged else []
        finite = converged and _jumps_to_limit(dist, stop_displacement)
        ok, viol = check_nonexpansive(disp, cycle_length) if check_cycles else (True, [])
        ref = None if reference is None else [float(np.linalg.norm(x - reference)) for x in its]
        return cls(its, disp, dist, limit, converged, ok, viol, cycle_length, stop_displacement, finite, ref)

    def __len__(self) -> int:
        return len(self.iterates)


def _jumps_to_limit(dist: Sequence[float], stop: float) -> bool:
    """True when the distance to the limit falls from the fit regime to round-off in one step.

    Exact arithmetic would give a zero displacement; in floating point the
    projections onto already-satisfied constraints leave ~1e-16 residue.
    """
    if len(dist) <= 1:
        return True
    floor = 1e-14 * max(1.0, dist[0])
    for k in range(1, len(dist)):
        if dist[k] < FIT_FLOOR_FACTOR * stop:
            return dist[k] <= floor and all(d <= floor for d in dist[k:])
    return False  # pragma: no cover - the last entry is 0


def _in_all(sets, x, tol: float) -> bool:
    return all(s.contains(x, tol) for s in sets)


def _finish(sets, iterates, done: bool, cfg: SolverConfig, m: int, check_cycles: bool) -> Trace:
    converged = done and _in_all(sets, iterates[-1], LIMIT_MEMBER_TOL)
    if done and not converged:
        log.warning("iteration stalled at a point outside the intersection")
    if not done:
        log.warning("no convergence within %d iterations", cfg.max_iterations)
    return Trace.from_iterates(iterates, converged, m, cfg.stop_displacement, cfg.reference_solution,
                               check_cycles)


def cyclic_projections(sets: Sequence[SetDescriptor], cfg: SolverConfig) -> Trace:
    """``x_{k+1}`` is the first nearest point of ``O_{(k mod m)+1}`` to ``x_k``.

    Stops once ``m`` consecutive displacements (a full cycle) are at most
    ``cfg.stop_displacement``. Hitting ``max_iterations`` returns a trace with
    ``converged=False`` instead of raising.
    """
    m = len(sets)
    n = check_same_dimension(sets)
    x = as_vec(cfg.x0, n)
    iterates = [x]
    if _in_all(sets, x, 0.0):
        return Trace.from_iterates(iterates, True, m, cfg.stop_displacement, cfg.reference_solution)
    small = 0
    done = False
    for k in range(cfg.max_iterations):
        x_new = sets[k % m].project(x)[0]
        small = small + 1 if np.linalg.norm(x_new - x) <= cfg.stop_displacement else 0
        iterates.append(x_new)
        x = x_new
        if small >= m:
            done = True
            break
    return _finish(sets, iterates, done, cfg, m, check_cycles=True)


def alternating_projections(sets: Sequence[SetDescriptor], cfg: SolverConfig) -> Trace:
    if len(sets) != 2:
        raise MethodArityError(f"alternating projections need exactly 2 sets, got {len(sets)}")
    return cyclic_projections(sets, cfg)


def _average_step(sets, x: np.ndarray) -> np.ndarray:
    return np.mean(np.stack([s.project(x)[0] for s in sets]), axis=0)


def averaged_projections(sets: Sequence[SetDescriptor], cfg: SolverConfig) -> Trace:
    """``x_{k+1}`` is the mean of the selected projections of ``x_k``."""
    n = check_same_dimension(sets)
    x = as_vec(cfg.x0, n)
    iterates = [x]
    if _in_all(sets, x, 0.0):
        return Trace.from_iterates(iterates, True, 1, cfg.stop_displacement, cfg.reference_solution)
    done = False
    for _ in range(cfg.max_iterations):
        x_new = _average_step(sets, x)
        iterates.append(x_new)
        step = np.linalg.norm(x_new - x)
        x = x_new
        if step <= cfg.stop_displacement:
            done = True
            break
    return _finish(sets, iterates, done, cfg, 1, check_cycles=False)


@dataclass
class LiftedRun:
    lifted: Trace
    deflated: Trace
    deflation_residual: float


def averaged_via_lift(sets: Sequence[SetDescriptor], cfg: SolverConfig) -> LiftedRun:
    """Alternating projections between ``O_1 x ... x O_m`` and the diagonal.

    Starts from ``z_0 = A x_0``; the even iterates satisfy ``z_{2k} = A y_k``
    where ``y_k`` is the averaged-projections sequence. ``y_k`` is read off as
    the first block of ``z_{2k}``.
    """
    lp = LiftedProblem.from_sets(sets)
    y = as_vec(cfg.x0, lp.n)
    z = lp.lift(y)
    zs, ys = [z], [y]
    done = _in_all(sets, y, 0.0)
    if not done:
        for _ in range(cfg.max_iterations):
            z_odd = lp.project_product(z)
            z = lp.project_diagonal(z_odd)
            zs += [z_odd, z]
            y_new = z[:lp.n].copy()
            ys.append(y_new)
            step = np.linalg.norm(y_new - y)
            y = y_new
            if step <= cfg.stop_displacement:
                done = True
                break
    resid = max(float(np.linalg.norm(zs[2 * k] - lp.lift(ys[k]))) for k in range(len(ys)))
    deflated = _finish(sets, ys, done, cfg, 1, check_cycles=False) if len(ys) > 1 else \
        Trace.from_iterates(ys, True, 1, cfg.stop_displacement, cfg.reference_solution)
    lifted = Trace.from_iterates(zs, deflated.converged, 2, cfg.stop_displacement)
    return LiftedRun(lifted, deflated, resid)


def check_nonexpansive(trace_or_displacements, m: int, slack: float = NONEXPANSIVE_SLACK):
    """Check ``|x_{km+i+1} - x_{km+i}| <= |x_{km+2} - x_{km+1}|`` for ``i = 2..m``.

    Iterates are numbered from ``x_0``, so with ``d_j = |x_{j+1} - x_j|`` the
    condition reads ``d_{km+i} <= d_{km+1}``. Only complete cycles are checked.
    Returns ``(ok, violations)`` where violations are the offending ``j``.
    """
    d = trace_or_displacements.displacements if isinstance(trace_or_displacements, Trace) \
        else list(trace_or_displacements)
    viol = []
    k = 0
    while k * m + m < len(d):
        ref = d[k * m + 1]
        for i in range(2, m + 1):
            j = k * m + i
            if d[j] > ref + slack:
                viol.append(j)
        k += 1
    return not viol, viol


@dataclass
class RateEstimate:
    per_step_rate: float
    per_cycle_rate: float
    r_squared: float
    finite_convergence: bool = False
    n_points: int = 0


def estimate_rate(trace_or_distances, m: int | None = None, stop_displacement: float | None = None) -> RateEstimate:
    """Log-linear fit of the distance to the limit against the iteration index.

    The window starts after the first cycle and ends before distances drop
    below ``1e3 * stop_displacement``. Finite convergence yields rate 0.
    """
    if isinstance(trace_or_distances, Trace):
        tr = trace_or_distances
        if not tr.converged:
            raise InsufficientData("trace did not converge")
        m = m or tr.cycle_length
        stop = tr.stop_displacement if stop_displacement is None else stop_displacement
        if tr.finite_convergence:
            return RateEstimate(0.0, 0.0, 1.0, True, 0)
        dist = np.asarray(tr.distances_to_limit)
    else:
        dist = np.asarray(trace_or_distances, dtype=float)
        m = m or 1
        stop = 0.0 if stop_displacement is None else stop_displacement
    k = np.arange(len(dist))
    mask = (k >= m) & (dist >= FIT_FLOOR_FACTOR * stop) & (dist > 0)
    if mask.sum() < max(MIN_FIT_CYCLES * m, 3):
        raise InsufficientData(f"only {int(mask.sum())} iterates in the geometric regime")
    kk, ld = k[mask], np.log(dist[mask])
    slope, icpt = np.polyfit(kk, ld, 1)
    pred = slope * kk + icpt
    ss_res = float(np.sum((ld - pred) ** 2))
    ss_tot = float(np.sum((ld - ld.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    rate = float(math.exp(slope))
    return RateEstimate(rate, rate ** m, r2, False, int(mask.sum()))


@dataclass
class TheoryComparison:
    m: int
    c_hat: float
    c_min: float
    c: float
    bound: float
    empirical: float | None
    passed: bool
    hypothesis_ok: bool
    nonexpansive_ok: bool
    alpha: float | None
    delta_required: float | None
    finite_convergence: bool = False
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def rate_vs_theory(sets: Sequence[SetDescriptor], xbar, trace: Trace,
                   report: RegularityReport | None = None, margin: float = 0.01,
                   slack: float = 0.02) -> TheoryComparison:
    """Compare the fitted per-step rate with ``c^(1/m)``, ``c = max((m-1) c_hat, 0) + margin``.

    A failed hypothesis (``c_hat >= 1/(m-1)``, irregularity or a violated
    nonexpansive condition) is reported in ``hypothesis_ok`` and ``notes``;
    the comparison is still carried out.
    """
    m = len(sets)
    xbar = _require_common_point(sets, xbar)
    report = report or regularity_report(sets, xbar)
    ch = report.c_hat
    c_min = (m - 1) * ch
    c = min(max(c_min, 0.0) + margin, 1.0 - 1e-12)
    bound = c ** (1.0 / m)
    notes = []
    hyp = True
    if report.classification is not Classification.UNIFORMLY_REGULAR:
        hyp = False
        notes.append("collection is not uniformly regular")
    if ch >= 1.0 / (m - 1):
        hyp = False
        notes.append(f"c_hat = {ch:.6g} >= 1/(m-1); outside theorem hypotheses")
    nonexp = trace.nonexpansive_ok if trace.cycle_length == m else check_nonexpansive(trace, m)[0]
    if not nonexp:
        hyp = False
        notes.append("nonexpansive condition violated; outside theorem hypotheses")
    alpha = float(np.linalg.norm(trace.iterates[1] - xbar)) if len(trace) > 1 else 0.0
    delta_req = (m + 1) * alpha / (1 - c)
    empirical, finite = None, False
    try:
        est = estimate_rate(trace, m)
        empirical, finite = est.per_step_rate, est.finite_convergence
    except InsufficientData as exc:
        notes.append(f"rate not estimated: {exc}")
    passed = empirical is not None and empirical <= bound + slack
    return TheoryComparison(m, ch, c_min, c, bound, empirical, passed, hyp, nonexp, alpha, delta_req,
                            finite, notes)


def _ball_samples(rng, n: int, k: int) -> np.ndarray:
    g = rng.standard_normal((k, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((k, 1)) ** (1.0 / n)


def super_regularity_probe(s: SetDescriptor, xbar, gamma: float, delta: float, samples: int = 1000,
                           seed: int = 0) -> tuple[bool, float]:
    """Sample ``<u, z - x> <= gamma |u| |z - x|`` near ``xbar``.

    ``x`` is the projection of a random point of ``B_{2 delta}(xbar)`` and
    ``u`` the corresponding proximal normal, so ``u`` is a Frechet normal at
    ``x``; ``z`` ranges over sampled points of the set in ``B_delta(xbar)``.
    Normals shorter than ``1e-3 delta`` and pairs closer than ``1e-2 delta``
    are dropped since rounding dominates their angle. Returns
    ``(pass, worst_ratio)``; worst_ratio is ``-inf`` when no usable pair was
    drawn.
    """
    xbar = as_vec(xbar, s.dim)
    if not s.contains(xbar, 1e-9):
        raise PointNotInSet("xbar is not in the set")
    if gamma <= 0 or delta <= 0:
        raise ValueError("gamma and delta must be positive")
    rng = np.random.default_rng(seed)
    n = s.dim
    Y = xbar + 2 * delta * _ball_samples(rng, n, samples)
    P = np.array([s.project(y)[0] for y in Y])
    U = Y - P
    keep = (np.linalg.norm(U, axis=1) > 1e-3 * delta) & (np.linalg.norm(P - xbar, axis=1) <= delta)
    X, U = P[keep], U[keep]
    Zc = np.vstack([P, xbar + delta * _ball_samples(rng, n, samples)])
    Z = np.array([z for z in Zc if np.linalg.norm(z - xbar) <= delta and s.contains(z, 1e-12)])
    if len(X) == 0 or len(Z) == 0:
        return True, -math.inf
    worst = -math.inf
    for x, u in zip(X, U):
        D = Z - x
        nd = np.linalg.norm(D, axis=1)
        ok = nd > 1e-2 * delta  # closer pairs are dominated by rounding
        if not ok.any():
            continue
        r = (D[ok] @ u) / (np.linalg.norm(u) * nd[ok])
        worst = max(worst, float(r.max()))
    return worst <= gamma, worst
