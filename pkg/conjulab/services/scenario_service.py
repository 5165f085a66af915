"""
Loading scenario files and turning validated scenarios into operators, perturbation
tuples, certificates and sample sets.
"""

import json
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from conjulab.core.config import settings
from conjulab.core.exceptions import ConfigurationError
from conjulab.model.operators import (
    HyperbolicityCertificate, SplitOperator, certify_constants,
    make_block_operator, make_diagonal_operator, make_weighted_shift
)
from conjulab.model.perturbations import PerturbationTuple, build_lipmap
from conjulab.model.vectorspace import SpaceFamily, Vector, vector_from_json
from conjulab.schemas.scenario import (
    BlockSpec, DiagonalSpec, OperatorSpec, Scenario, ScenarioFile, ShiftSpec
)
from conjulab.utils.helpers import sample_vectors


def load_scenario_file(path: Union[str, Path]) -> ScenarioFile:
    """Read and validate a scenario file; every problem surfaces as ConfigurationError."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"scenario file {path} is not valid JSON: {e}")

    try:
        scenario_file = ScenarioFile.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"scenario file {path} failed validation: {e}")
    logger.info(f"Loaded {len(scenario_file.scenarios)} scenario(s) from {path}")
    return scenario_file


def build_operator(spec: OperatorSpec) -> SplitOperator:
    if isinstance(spec, DiagonalSpec):
        return make_diagonal_operator(spec.weights)
    if isinstance(spec, BlockSpec):
        return make_block_operator(spec.P, spec.A_M, spec.A_N)
    if isinstance(spec, ShiftSpec):
        return make_weighted_shift(spec.lambda_minus, spec.lambda_plus, spec.m0)
    raise ConfigurationError(f"unknown operator descriptor {spec!r}")


def _dimension(op: SplitOperator) -> Optional[int]:
    return getattr(op, "dimension", None)


def build_tuple(op: SplitOperator, descriptors: list, p: int) -> PerturbationTuple:
    """Build (L_0, ..., L_(p-1)); a single descriptor is repeated p times."""
    maps = [build_lipmap(d.model_dump(exclude_none=True), op.family, _dimension(op)) for d in descriptors]
    if len(maps) == 1:
        return PerturbationTuple.repeat(maps[0], p)
    return PerturbationTuple(maps)


class ScenarioContext:
    """A scenario with its operator, certificate and perturbation tuples built."""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scenario = scenario
        self.seed = scenario.samples.seed if seed is None else seed

        logger.info(f"Scenario {scenario.id}: building {scenario.operator.kind} operator...")
        self.op = build_operator(scenario.operator)
        self.cert: HyperbolicityCertificate = certify_constants(self.op, scenario.t)
        self.perturbations = build_tuple(self.op, scenario.perturbations, scenario.p)
        self.alt_perturbations = None
        if scenario.alt_perturbations is not None:
            self.alt_perturbations = build_tuple(self.op, scenario.alt_perturbations, scenario.p)

    @property
    def id(self) -> str:
        return self.scenario.id

    def rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed + offset)

    def samples(self, count: Optional[int] = None) -> List[Vector]:
        """Pseudo-random samples of norm <= radius plus corner cases (0 and +-basis vectors)."""
        spec = self.scenario.samples
        count = spec.count if count is None else count
        center = getattr(self.op, "m0", 0)
        points = sample_vectors(
            self.op.family, count, spec.radius, self.rng(),
            dimension=_dimension(self.op), center=center, window=settings.SPARSE_WINDOW,
        )
        if spec.corners:
            points = [self.op.zero()] + [s * e for e in self.op.basis_vectors() for s in (1.0, -1.0)] + points
        return points

    def points(self) -> List[Vector]:
        """Explicit points of the scenario, parsed in the operator's space family."""
        return [vector_from_json(p, self.op.family, _dimension(self.op)) for p in self.scenario.points]

    def nonuniqueness_seed(self) -> Vector:
        spec = self.scenario.nonuniqueness
        data = spec.y if spec is not None else {"0": 1.0}
        if self.op.family == SpaceFamily.DENSE:
            raise ConfigurationError("the non-uniqueness family needs a non-hyperbolic (shift) operator")
        return vector_from_json(data, self.op.family)


__all__ = [
    'load_scenario_file',
    'build_operator',
    'build_tuple',
    'ScenarioContext'
]
