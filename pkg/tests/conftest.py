import math

import numpy as np
import pytest

from unireg.geometry import HalfSpace, Hyperplane, Polyhedron


def half_at(deg: float, offset: float = 0.0) -> HalfSpace:
    """Half-space in R^2 whose outward normal points at angle ``deg``."""
    t = math.radians(deg)
    return HalfSpace([math.cos(t), math.sin(t)], offset)


def line_at(deg: float) -> Hyperplane:
    """Line through the origin at angle ``deg`` to the first axis."""
    t = math.radians(deg)
    return Hyperplane([-math.sin(t), math.cos(t)], 0.0)


def random_polyhedral_set(rng, n: int, max_rows: int = 3):
    """Random half-space or polyhedral cone through the origin."""
    k = int(rng.integers(1, max_rows + 1))
    A = rng.standard_normal((k, n))
    if k == 1:
        return HalfSpace(A[0], 0.0)
    # keep the cone pointed-ish so it is not the whole space
    return Polyhedron(A, np.zeros(k))


def sphere_sample(rng, n: int, k: int) -> np.ndarray:
    g = rng.standard_normal((k, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
