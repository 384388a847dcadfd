import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unireg.errors import DimensionError
from unireg.geometry import (
    AffineSubspace,
    Ball,
    HalfSpace,
    Hyperplane,
    Polyhedron,
    Union,
    distance,
    membership,
    project,
    project_polyhedron,
)


def grid_min_on_segments(x, segments, n=200_001):
    """Dense-grid distance from x to a union of parametrized lines."""
    t = np.linspace(-5, 5, n)
    best = math.inf
    for p, d in segments:
        pts = np.asarray(p) + t[:, None] * np.asarray(d)
        best = min(best, float(np.min(np.linalg.norm(pts - x, axis=1))))
    return best


def test_distance_examples():
    assert distance(HalfSpace([0, 1], 0), [3, 0]) == 0.0
    assert distance(Ball([0, 0], 1), [2, 0]) == pytest.approx(1.0, abs=1e-15)
    U = Union((Hyperplane([0, 1], 0), Hyperplane([1, -1], 0)))
    oracle = grid_min_on_segments(np.array([0.0, 1.0]), [((0, 0), (1, 0)), ((0, 0), (1, 1))])
    assert distance(U, [0, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert distance(U, [0, 1]) == pytest.approx(oracle, abs=1e-4)


def test_project_examples():
    x = np.array([0.2, -0.5])
    assert np.array_equal(project(HalfSpace([0, 1], 0), x)[0], x)
    assert np.allclose(project(Hyperplane([0, 1], 0), [5, 3])[0], [5, 0])
    U = Union((Hyperplane([0, 1], 0), Hyperplane([1, 0], 0)))
    pts = project(U, [1, 1])
    assert len(pts) == 2
    assert np.allclose(pts[0], [0, 1]) and np.allclose(pts[1], [1, 0])  # lexicographic order
    for p in pts:
        assert np.linalg.norm(p - [1, 1]) == pytest.approx(1.0)


def test_membership_examples():
    P = Polyhedron.from_rows([([1, 0], 0), ([0, 1], 0)])
    assert membership(P, [-1, -1], 0.0)
    assert not membership(Ball([0, 0], 1), [1 + 1e-6, 0], 1e-9)
    assert membership(Ball([0, 0], 1), [1 + 1e-12, 0], 1e-9)


def test_normals_are_normalized():
    h = HalfSpace([0, 2], 4)
    assert np.linalg.norm(h.normal) == pytest.approx(1, abs=1e-12)
    assert h.offset == pytest.approx(2)
    P = Polyhedron.from_rows([([3, 4], 5), ([0, -2], 2)])
    assert np.allclose(np.linalg.norm(P.normals, axis=1), 1)
    assert np.allclose(P.offsets, [1, 1])


def test_empty_polyhedron_rejected():
    with pytest.raises(ValueError):
        Polyhedron.from_rows([([1, 0], -1), ([-1, 0], -1)])


def test_nested_union_rejected():
    with pytest.raises(TypeError):
        Union((Union((HalfSpace([1, 0], 0),)),))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        distance(HalfSpace([0, 1], 0), [1, 2, 3])
    with pytest.raises(DimensionError):
        project(Ball([0, 0, 0], 1), [1, 2])


def test_affine_projection_matches_least_squares(rng):
    p = rng.standard_normal(4)
    B = rng.standard_normal((2, 4))
    A = AffineSubspace(p, B)
    y = rng.standard_normal(4)
    # oracle: minimize |p + B^T t - y| by lstsq
    t, *_ = np.linalg.lstsq(B.T, y - p, rcond=None)
    assert np.allclose(A.project_point(y), p + B.T @ t, atol=1e-12)


def _scipy_qp(A, b, y):
    from scipy.optimize import minimize

    cons = [{"type": "ineq", "fun": lambda x, a=a, bb=bb: bb - a @ x} for a, bb in zip(A, b)]
    r = minimize(lambda x: 0.5 * np.sum((x - y) ** 2), y, jac=lambda x: x - y, constraints=cons,
                 method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    return r.x


def test_polyhedron_projection_matches_generic_qp(rng):
    for _ in range(60):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, 6))
        A = rng.standard_normal((k, n))
        b = rng.random(k)  # origin strictly feasible
        P = Polyhedron(A, b)
        y = 3 * rng.standard_normal(n)
        x = P.project_point(y)
        ref = _scipy_qp(P.normals, P.offsets, y)
        assert np.allclose(x, ref, atol=1e-6)
        assert P.contains(x, 1e-10)


def test_project_polyhedron_detects_empty():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert project_polyhedron(A, np.array([-1.0, -1.0]), np.zeros(2)) is None


def test_2d_projection_against_dense_grid():
    P = Polyhedron.from_rows([([0, 1], 0), ([1, 1], 0.5)])
    g = np.linspace(-3, 3, 1201)
    X, Y = np.meshgrid(g, g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = pts[(pts[:, 1] <= 1e-12) & (pts @ P.normals[1] <= P.offsets[1] + 1e-12)]
    for y in ([1.0, 1.0], [-2.0, 0.7], [2.0, -1.0]):
        oracle = inside[np.argmin(np.linalg.norm(inside - y, axis=1))]
        assert np.linalg.norm(P.project_point(y) - oracle) <= 2 * (g[1] - g[0])


catalog = [
    HalfSpace([1, 2, -1], 0.3),
    Hyperplane([0, 1, 1], -0.2),
    AffineSubspace([1, 0, 0], [[0, 1, 0]]),
    Ball([0, 1, 0], 0.7),
    Polyhedron.from_rows([([1, 0, 0], 0), ([0, 1, 0], 0), ([1, 1, 1], 0.5)]),
]

vec3 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(catalog), vec3, vec3)
def test_idempotence_and_nonexpansive(s, x, y):
    x, y = np.array(x), np.array(y)
    px, py = s.project_point(x), s.project_point(y)
    assert np.allclose(s.project(px)[0], px, atol=1e-12)
    assert s.distance(px) <= 1e-12
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12
    # firm nonexpansiveness
    assert np.dot(px - py, x - y) >= np.linalg.norm(px - py) ** 2 - 1e-10


def test_union_projection_points_attain_distance(rng):
    U = Union((Ball([0, 0], 1), HalfSpace([0, -1], -2), Hyperplane([1, 0], 3)))
    for _ in range(200):
        x = 4 * rng.standard_normal(2)
        d = U.distance(x)
        for p in U.project(x):
            assert abs(np.linalg.norm(p - x) - d) <= 1e-10
            assert U.distance(p) <= 1e-12
