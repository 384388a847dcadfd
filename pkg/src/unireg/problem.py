"""Problem files: a versioned JSON document describing sets, x̄ and solver settings."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union as TUnion

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import geometry as g
from .errors import ParseError, ValidationError

SCHEMA_VERSION = "unireg.problem/1"
MEMBER_TOL = 1e-9

Vec = list[float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class HalfSpaceDef(_Strict):
    kind: Literal["halfspace"]
    normal: Vec
    offset: float = 0.0

    def build(self):
        return g.HalfSpace(self.normal, self.offset)

    def vectors(self):
        return [("normal", self.normal)]


class HyperplaneDef(_Strict):
    kind: Literal["hyperplane"]
    normal: Vec
    offset: float = 0.0

    def build(self):
        return g.Hyperplane(self.normal, self.offset)

    def vectors(self):
        return [("normal", self.normal)]


class AffineDef(_Strict):
    kind: Literal["affine"]
    point: Vec
    basis: list[Vec] = Field(default_factory=list)

    def build(self):
        n = len(self.point)
        return g.AffineSubspace(self.point, np.asarray(self.basis, dtype=float).reshape(-1, n))

    def vectors(self):
        return [("point", self.point)] + [(f"basis[{i}]", b) for i, b in enumerate(self.basis)]


class BallDef(_Strict):
    kind: Literal["ball"]
    center: Vec
    radius: float = Field(gt=0)

    def build(self):
        return g.Ball(self.center, self.radius)

    def vectors(self):
        return [("center", self.center)]


class PolyhedronDef(_Strict):
    kind: Literal["polyhedron"]
    normals: list[Vec]
    offsets: list[float]

    @model_validator(mode="after")
    def _rows(self):
        if len(self.normals) != len(self.offsets) or not self.normals:
            raise ValueError("normals and offsets must be nonempty and of equal length")
        return self

    def build(self):
        return g.Polyhedron(np.asarray(self.normals, dtype=float), np.asarray(self.offsets, dtype=float))

    def vectors(self):
        return [(f"normals[{i}]", a) for i, a in enumerate(self.normals)]


ConvexDef = Annotated[
    TUnion[HalfSpaceDef, HyperplaneDef, AffineDef, BallDef, PolyhedronDef],
    Field(discriminator="kind"),
]


class UnionDef(_Strict):
    kind: Literal["union"]
    pieces: list[ConvexDef] = Field(min_length=1)

    def build(self):
        return g.Union(tuple(p.build() for p in self.pieces))

    def vectors(self):
        return [(f"pieces[{i}].{k}", v) for i, p in enumerate(self.pieces) for k, v in p.vectors()]


SetDef = Annotated[
    TUnion[HalfSpaceDef, HyperplaneDef, AffineDef, BallDef, PolyhedronDef, UnionDef],
    Field(discriminator="kind"),
]


class SolverDef(_Strict):
    max_iterations: int = Field(default=10_000, ge=1)
    stop_displacement: float = Field(default=1e-12, gt=0)
    reference_solution: Vec | None = None
    seed: int = 0


class ProblemFile(_Strict):
    schema_: Literal["unireg.problem/1"] = Field(default=SCHEMA_VERSION, alias="schema")
    dimension: int = Field(ge=1)
    sets: list[SetDef] = Field(min_length=1)
    reference_point: Vec
    start_points: list[Vec] = Field(default_factory=list)
    solver: SolverDef = Field(default_factory=SolverDef)

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _dimensions(self):
        n = self.dimension
        vecs = [("reference_point", self.reference_point)]
        vecs += [(f"start_points[{i}]", p) for i, p in enumerate(self.start_points)]
        if self.solver.reference_solution is not None:
            vecs.append(("solver.reference_solution", self.solver.reference_solution))
        for i, s in enumerate(self.sets):
            vecs += [(f"sets[{i}].{k}", v) for k, v in s.vectors()]
        for where, v in vecs:
            if len(v) != n:
                raise ValueError(f"{where} has length {len(v)}, expected dimension {n}")
        return self

    def build_sets(self) -> list:
        return [s.build() for s in self.sets]

    def dump(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


def _describe(exc: pydantic.ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        parts.append(f"{loc or '<root>'}: {err['msg']}")
    return "; ".join(parts)


def parse_problem(text: str, source: str = "<string>") -> ProblemFile:
    """Parse and validate a problem document, including membership of x̄ in every set."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        pf = ProblemFile.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ValidationError(f"{source}: {_describe(exc)}") from exc
    try:
        sets = pf.build_sets()
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from exc
    xbar = np.asarray(pf.reference_point, dtype=float)
    for i, (sd, s) in enumerate(zip(pf.sets, sets)):
        d = s.distance(xbar)
        if d > MEMBER_TOL:
            raise ValidationError(
                f"{source}: reference_point is not in sets[{i}] ({sd.kind}); distance {d:.3e}")
    return pf


def load_problem(path: str | Path) -> ProblemFile:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"{p}: {exc.strerror}") from exc
    return parse_problem(text, str(p))


def save_problem(pf: ProblemFile, path: str | Path) -> None:
    Path(path).write_text(pf.dump() + "\n")
