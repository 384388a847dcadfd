import math

import numpy as np
import pytest

from conftest import half_at, random_polyhedral_set
from unireg.constants import nu_hat_two_sets, regularity_report
from unireg.errors import DimensionError
from unireg.geometry import Ball, HalfSpace, Hyperplane
from unireg.lift import (
    LiftedProblem,
    lifted_constants,
    lifted_constants_direct,
    lifted_constants_two_set_form,
    lifted_equivalence_check,
    value_range_bounds,
    value_range_violations,
)

SQ2 = math.sqrt(2)
perp = [HalfSpace([0, 1], 0), HalfSpace([1, 0], 0)]


def test_lift_map(rng):
    lp = LiftedProblem.from_sets([half_at(0), half_at(90), half_at(200)])
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    assert np.linalg.norm(lp.lift(x)) == pytest.approx(math.sqrt(3) * np.linalg.norm(x))
    assert np.allclose(lp.lift(x + y), lp.lift(x) + lp.lift(y))


def test_project_product_examples(rng):
    lp = LiftedProblem.from_sets([HalfSpace([0, 1], 0), HalfSpace([1, 0], 0)])
    assert np.allclose(lp.project_product(lp.lift([1, 1])), [1, 0, 0, 1])
    z = np.array([-1.0, -2.0, -3.0, 4.0])
    assert np.array_equal(lp.project_product(z), z)
    for _ in range(20):
        z = rng.standard_normal(4)
        expect = np.concatenate([s.project(b)[0] for s, b in zip(lp.sets, z.reshape(2, 2))])
        assert np.array_equal(lp.project_product(z), expect)


def test_project_diagonal(rng):
    lp = LiftedProblem.from_sets(perp)
    assert np.allclose(lp.project_diagonal([2, 0, 0, 2]), lp.lift([1, 1]))
    z = lp.lift([0.3, -0.7])
    assert np.allclose(lp.project_diagonal(z), z)
    lp3 = LiftedProblem.from_sets([half_at(0), half_at(90), half_at(200)])
    for _ in range(20):
        z = rng.standard_normal(6)
        p = lp3.project_diagonal(z)
        blocks = z.reshape(3, 2)
        mean = np.array([blocks[:, j].sum() / 3 for j in range(2)])
        assert np.allclose(p, np.tile(mean, 3), atol=1e-15)
        # any other diagonal point is no closer
        other = lp3.lift(mean + 1e-3 * rng.standard_normal(2))
        assert np.linalg.norm(z - p) <= np.linalg.norm(z - other)


def test_dimension_errors():
    lp = LiftedProblem.from_sets(perp)
    with pytest.raises(DimensionError):
        lp.project_product([1, 2, 3])
    with pytest.raises(DimensionError):
        lp.project_diagonal(np.zeros(5))


def k_star_grid_oracle(U, signed=(), step=2e-3):
    """min |sum a_i u_i| over a grid of the unit sphere with a_i >= 0 (any sign where ``signed``)."""
    m = len(U)
    t = np.arange(0, math.pi / 2 + step, step)
    if m == 2:
        A = np.column_stack([np.cos(t), np.sin(t)])
    else:
        T1, T2 = np.meshgrid(t, t, indexing="ij")
        A = np.column_stack([np.cos(T1).ravel(), (np.sin(T1) * np.cos(T2)).ravel(), (np.sin(T1) * np.sin(T2)).ravel()])
    best = math.inf
    for signs in np.array(np.meshgrid(*[[1, -1] if i in signed else [1] for i in range(m)])).reshape(m, -1).T:
        best = min(best, float(np.min(np.linalg.norm((A * signs) @ U, axis=1))))
    return best


@pytest.mark.parametrize("m", [2, 3])
def test_k_star_grid_oracle_rays(m, rng):
    for _ in range(8):
        n = int(rng.integers(2, 4))
        U = rng.standard_normal((m, n))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        sets = [HalfSpace(u, 0) for u in U]
        lc = lifted_constants(sets, np.zeros(n))
        assert lc.k_star == pytest.approx(k_star_grid_oracle(U), abs=2e-3)


def test_k_star_grid_oracle_with_subspace(rng):
    for _ in range(5):
        U = rng.standard_normal((3, 2))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        sets = [HalfSpace(U[0], 0), Hyperplane(U[1], 0), HalfSpace(U[2], 0)]
        lc = lifted_constants(sets, np.zeros(2))
        assert lc.k_star == pytest.approx(k_star_grid_oracle(U, signed=(1,)), abs=2e-3)


def test_value_range_and_identities_random(rng):
    for _ in range(40):
        m = int(rng.integers(2, 5))
        n = int(rng.integers(2, 4))
        sets = [random_polyhedral_set(rng, n, 2) for _ in range(m)]
        lc = lifted_constants(sets, np.zeros(n))
        assert value_range_violations(lc, m) == []
        lo_c = math.sqrt(1 - 1 / m)
        assert lo_c - 1e-9 <= lc.c <= 1 + 1e-9
        assert lc.eta ** 2 + lc.nu ** 2 == pytest.approx(1, abs=1e-9)
        assert 1 + lc.c == pytest.approx(2 * lc.nu ** 2, abs=1e-9)
        direct = lifted_constants_direct(sets, np.zeros(n))
        assert direct.c == pytest.approx(lc.c, abs=1e-6)
        if m == 2:
            alt = lifted_constants_two_set_form(sets, np.zeros(n))
            assert alt.c == pytest.approx(lc.c, abs=1e-6)
            assert alt.eta == pytest.approx(lc.eta, abs=1e-6)
            assert alt.nu == pytest.approx(lc.nu, abs=1e-6)
            assert lc.c >= nu_hat_two_sets(sets, np.zeros(n)) - 1e-9


def test_equality_case():
    sets = [HalfSpace([0, 1], 0), HalfSpace([1, -1], 0)]
    nu = nu_hat_two_sets(sets, [0, 0])
    assert nu == pytest.approx(math.sqrt((1 + 1 / SQ2) / 2), abs=1e-12)
    assert lifted_constants(sets, [0, 0]).c == pytest.approx(nu, abs=1e-9)


def test_case2_gap():
    sets = [HalfSpace([0, 1], 0), HalfSpace([1, 1], 0)]
    nu = nu_hat_two_sets(sets, [0, 0])
    c = lifted_constants(sets, [0, 0]).c
    assert c == pytest.approx(1 / SQ2, abs=1e-12)
    assert c - nu > 0.3


def test_identical_three_sets_hit_lower_bound():
    lc = lifted_constants([half_at(10)] * 3, [0, 0])
    assert lc.c == pytest.approx(math.sqrt(1 - 1 / 3), abs=1e-9)
    lo, hi = value_range_bounds(3)["eta"]
    assert lc.eta == pytest.approx(hi, abs=1e-9)


def test_all_trivial_convention():
    lc = lifted_constants([Ball([0, 0], 1), Ball([0.5, 0], 1)], [0, 0])
    assert (lc.eta, lc.nu, lc.c) == (1.0, 0.0, -1.0)
    assert value_range_violations(lc, 2) == []


def test_equivalence_check():
    assert lifted_equivalence_check(perp, [0, 0])
    opp = [HalfSpace([0, 1], 0), HalfSpace([0, -1], 0)]
    assert lifted_equivalence_check(opp, [0, 0])
    assert lifted_constants(opp, [0, 0]).c == pytest.approx(1, abs=1e-12)
    assert regularity_report(opp, [0, 0]).eta_hat == 0


def test_equivalence_random_triples(rng):
    for _ in range(15):
        sets = [random_polyhedral_set(rng, 2, 2) for _ in range(3)]
        assert lifted_equivalence_check(sets, [0, 0])
