"""
Bounded Lipschitz perturbations with certified bounds, perturbation tuples,
the tuple distance D and inversion of the perturbed maps S_j = T + L_j.
"""

import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from conjulab.core.config import settings
from conjulab.core.exceptions import (
    AdmissibilityError, BudgetInfeasibleError, ConfigurationError, IncompatibleVectorsError
)
from conjulab.model.operators import SplitOperator
from conjulab.model.vectorspace import (
    DenseVector, SparseVector, SpaceFamily, Vector, vector_from_json
)


class AdmissibilityMode(str, Enum):
    """A: Lipschitz-only smallness. B: Lipschitz and sup smallness."""
    A = "A"
    B = "B"


class LipMap(ABC):
    """A bounded Lipschitz map X -> X with certified sup and Lipschitz bounds."""

    family: SpaceFamily

    @abstractmethod
    def __call__(self, x: Vector) -> Vector:
        ...

    @property
    @abstractmethod
    def sup_bound(self) -> float:
        ...

    @property
    @abstractmethod
    def lip_bound(self) -> float:
        ...

    @abstractmethod
    def descriptor(self) -> Dict[str, Any]:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor()})"


class ConstantMap(LipMap):
    """x -> c."""

    def __init__(self, c: Vector):
        self.c = c
        self.family = c.family

    def __call__(self, x: Vector) -> Vector:
        return self.c

    @property
    def sup_bound(self) -> float:
        return self.c.sup_norm()

    @property
    def lip_bound(self) -> float:
        return 0.0

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": "const", "c": self.c.to_json()}


class SineMap(LipMap):
    """x -> A sin(w x_i) e_target. Reads coordinate i only and writes coordinate target only."""

    def __init__(self, family: SpaceFamily, i: int, amplitude: float, frequency: float,
                 target: Optional[int] = None, dimension: Optional[int] = None):
        if not (math.isfinite(amplitude) and math.isfinite(frequency)):
            raise ConfigurationError("sine parameters must be finite")
        self.family = family
        self.i = int(i)
        self.target = self.i if target is None else int(target)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.dimension = dimension
        if family == SpaceFamily.DENSE and dimension is not None:
            for index in (self.i, self.target):
                if not 0 <= index < dimension:
                    raise ConfigurationError(f"sine coordinate {index} outside dimension {dimension}")

    def __call__(self, x: Vector) -> Vector:
        value = self.amplitude * math.sin(self.frequency * x.coordinate(self.i))
        if isinstance(x, DenseVector):
            values = np.zeros(x.dimension)
            values[self.target] = value
            return DenseVector(values)
        return SparseVector({self.target: value})

    @property
    def sup_bound(self) -> float:
        return abs(self.amplitude)

    @property
    def lip_bound(self) -> float:
        return abs(self.amplitude * self.frequency)

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": "sine", "i": self.i, "A": self.amplitude, "w": self.frequency, "target": self.target}


class ClampLinearMap(LipMap):
    """
    x -> B clamp(x, R), the clamp taken componentwise into [-R, R].

    On sparse sequences B acts on the coordinates listed in `window` (read and write window).
    """

    def __init__(self, family: SpaceFamily, matrix, radius: float,
                 window: Optional[Sequence[int]] = None, dimension: Optional[int] = None):
        B = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if not radius > 0 or not math.isfinite(radius):
            raise ConfigurationError(f"clamp radius must be positive, got {radius}")
        if B.shape[0] != B.shape[1]:
            raise ConfigurationError("clamp_linear matrix must be square")
        if family == SpaceFamily.SPARSE:
            if window is None or len(window) != B.shape[0]:
                raise ConfigurationError("sparse clamp_linear needs a window matching the matrix size")
        elif dimension is not None and B.shape[0] != dimension:
            raise ConfigurationError(f"clamp_linear matrix must be {dimension}x{dimension}")
        self.family = family
        self.B = B
        self.radius = float(radius)
        self.window = [int(w) for w in window] if window is not None else None
        self._norm = float(np.max(np.sum(np.abs(B), axis=1)))

    def __call__(self, x: Vector) -> Vector:
        if isinstance(x, DenseVector):
            return DenseVector(self.B @ np.clip(x.values, -self.radius, self.radius))
        read = np.array([x.coordinate(w) for w in self.window])
        image = self.B @ np.clip(read, -self.radius, self.radius)
        return SparseVector(dict(zip(self.window, image)))

    @property
    def sup_bound(self) -> float:
        return self._norm * self.radius

    @property
    def lip_bound(self) -> float:
        return self._norm

    def descriptor(self) -> Dict[str, Any]:
        data = {"kind": "clamp_linear", "B": self.B.tolist(), "R": self.radius}
        if self.window is not None:
            data["window"] = list(self.window)
        return data


class SumMap(LipMap):

    def __init__(self, args: Sequence[LipMap]):
        if not args:
            raise ConfigurationError("sum needs at least one argument")
        _check_families(args)
        self.args = list(args)
        self.family = args[0].family

    def __call__(self, x: Vector) -> Vector:
        total = self.args[0](x)
        for f in self.args[1:]:
            total = total + f(x)
        return total

    @property
    def sup_bound(self) -> float:
        return sum(f.sup_bound for f in self.args)

    @property
    def lip_bound(self) -> float:
        return sum(f.lip_bound for f in self.args)

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": "sum", "args": [f.descriptor() for f in self.args]}


class ScaleMap(LipMap):

    def __init__(self, alpha: float, arg: LipMap):
        if not math.isfinite(alpha):
            raise ConfigurationError("scale factor must be finite")
        self.alpha = float(alpha)
        self.arg = arg
        self.family = arg.family

    def __call__(self, x: Vector) -> Vector:
        return self.arg(x).scaled(self.alpha)

    @property
    def sup_bound(self) -> float:
        return abs(self.alpha) * self.arg.sup_bound

    @property
    def lip_bound(self) -> float:
        return abs(self.alpha) * self.arg.lip_bound

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": "scale", "alpha": self.alpha, "arg": self.arg.descriptor()}


class ComposeMap(LipMap):
    """x -> f(x + g(x))."""

    def __init__(self, outer: LipMap, inner: LipMap):
        _check_families([outer, inner])
        self.outer = outer
        self.inner = inner
        self.family = outer.family

    def __call__(self, x: Vector) -> Vector:
        return self.outer(x + self.inner(x))

    @property
    def sup_bound(self) -> float:
        return self.outer.sup_bound

    @property
    def lip_bound(self) -> float:
        return self.outer.lip_bound * (1.0 + self.inner.lip_bound)

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": "compose", "args": [self.outer.descriptor(), self.inner.descriptor()]}


def _check_families(maps: Sequence[LipMap]) -> None:
    families = {f.family for f in maps}
    if len(families) > 1:
        raise IncompatibleVectorsError("cannot combine maps on different space families")


def build_primitive(kind: str, family: SpaceFamily, dimension: Optional[int] = None, **params) -> LipMap:
    """
    Build one of the primitive perturbations.

    Args:
        kind: "const", "sine" or "clamp_linear"
        family: Space family the map acts on
        dimension: Dense dimension, used for validation
        **params: c | i, A, w, target | B, R, window

    Returns:
        LipMap with certified bounds
    """
    try:
        if kind == "const":
            return ConstantMap(vector_from_json(params["c"], family, dimension))
        if kind == "sine":
            return SineMap(family, params["i"], params["A"], params["w"], params.get("target"), dimension)
        if kind == "clamp_linear":
            return ClampLinearMap(family, params["B"], params["R"], params.get("window"), dimension)
    except KeyError as e:
        raise ConfigurationError(f"{kind} perturbation is missing parameter {e}")
    raise ConfigurationError(f"unknown perturbation kind {kind!r}")


def combine(op: str, args: Sequence[LipMap], alpha: Optional[float] = None) -> LipMap:
    """Combinators sum | scale | compose; compose([f, g]) is x -> f(x + g(x))."""
    if op == "sum":
        return SumMap(args)
    if op == "scale":
        if alpha is None or len(args) != 1:
            raise ConfigurationError("scale takes a factor and exactly one map")
        return ScaleMap(alpha, args[0])
    if op == "compose":
        if len(args) != 2:
            raise ConfigurationError("compose takes exactly two maps")
        return ComposeMap(args[0], args[1])
    raise ConfigurationError(f"unknown combinator {op!r}")


def build_lipmap(descriptor: Dict[str, Any], family: SpaceFamily, dimension: Optional[int] = None) -> LipMap:
    """Build a LipMap from its nested descriptor tree."""
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise ConfigurationError(f"invalid perturbation descriptor: {descriptor!r}")
    kind = descriptor["kind"]
    if kind in ("sum", "compose"):
        args = [build_lipmap(d, family, dimension) for d in descriptor.get("args", [])]
        return combine(kind, args)
    if kind == "scale":
        return combine("scale", [build_lipmap(descriptor["arg"], family, dimension)], descriptor.get("alpha"))
    params = {k: v for k, v in descriptor.items() if k != "kind"}
    return build_primitive(kind, family, dimension, **params)


def zero_map(family: SpaceFamily, dimension: Optional[int] = None) -> LipMap:
    if family == SpaceFamily.DENSE:
        return ConstantMap(DenseVector.zeros(dimension or 0))
    return ConstantMap(SparseVector.zero_vector())


class PerturbationTuple:
    """The ordered tuple (L_0, ..., L_(p-1)); S_j = T + L_j."""

    def __init__(self, maps: Sequence[LipMap]):
        if not maps:
            raise ConfigurationError("a perturbation tuple needs p >= 1 maps")
        _check_families(maps)
        self.maps: Tuple[LipMap, ...] = tuple(maps)
        self.family = maps[0].family

    @property
    def p(self) -> int:
        return len(self.maps)

    def __getitem__(self, j: int) -> LipMap:
        return self.maps[j % self.p]

    def __len__(self) -> int:
        return self.p

    @property
    def max_lip(self) -> float:
        return max(f.lip_bound for f in self.maps)

    @property
    def max_sup(self) -> float:
        return max(f.sup_bound for f in self.maps)

    def is_zero(self) -> bool:
        return self.max_sup == 0.0

    def admissibility(self, eps: float, margin: Optional[float] = None) -> Optional[AdmissibilityMode]:
        """Strongest mode the tuple satisfies against eps, or None."""
        margin = settings.ADMISSIBILITY_MARGIN if margin is None else margin
        limit = eps * (1.0 - margin)
        if self.is_zero():
            return AdmissibilityMode.B
        if not self.max_lip < limit:
            return None
        if self.max_sup < limit:
            return AdmissibilityMode.B
        return AdmissibilityMode.A

    def check_admissible(self, eps: float, mode: AdmissibilityMode = AdmissibilityMode.A) -> AdmissibilityMode:
        """Raise AdmissibilityError unless the tuple is admissible in `mode` (or stronger)."""
        achieved = self.admissibility(eps)
        if achieved is None or (mode == AdmissibilityMode.B and achieved != AdmissibilityMode.B):
            raise AdmissibilityError(
                f"admissibility: tuple fails mode {mode.value} for eps={eps:.6g} "
                f"(max lip={self.max_lip:.6g}, max sup={self.max_sup:.6g})"
            )
        return achieved

    @classmethod
    def repeat(cls, f: LipMap, p: int) -> "PerturbationTuple":
        if p < 1:
            raise ConfigurationError("p must be positive")
        return cls([f] * p)

    def scaled(self, factor: float) -> "PerturbationTuple":
        return PerturbationTuple([ScaleMap(factor, f) for f in self.maps])

    def descriptor(self) -> List[Dict[str, Any]]:
        return [f.descriptor() for f in self.maps]

    def __repr__(self) -> str:
        return f"PerturbationTuple(p={self.p}, max_lip={self.max_lip:.4g}, max_sup={self.max_sup:.4g})"


class DistanceEstimate(BaseModel):
    """Certified upper bound and sampled lower bound of D(L, L')."""
    upper: float
    lower: float
    sampled: bool = False


def _structural_distance(f: LipMap, g: LipMap) -> Optional[float]:
    """Certified sup distance when both trees share a shape, else None."""
    if f.descriptor() == g.descriptor():
        return 0.0
    if isinstance(f, ConstantMap) and isinstance(g, ConstantMap):
        return (f.c - g.c).sup_norm()
    if isinstance(f, SineMap) and isinstance(g, SineMap):
        if (f.i, f.target, f.frequency) == (g.i, g.target, g.frequency):
            return abs(f.amplitude - g.amplitude)
        return None
    if isinstance(f, ClampLinearMap) and isinstance(g, ClampLinearMap):
        if f.radius == g.radius and f.window == g.window and f.B.shape == g.B.shape:
            return float(np.max(np.sum(np.abs(f.B - g.B), axis=1))) * f.radius
        return None
    if isinstance(f, ScaleMap) and isinstance(g, ScaleMap):
        if f.alpha == g.alpha:
            inner = _structural_distance(f.arg, g.arg)
            return None if inner is None else abs(f.alpha) * inner
        if f.arg.descriptor() == g.arg.descriptor():
            return abs(f.alpha - g.alpha) * f.arg.sup_bound
        return None
    if isinstance(f, SumMap) and isinstance(g, SumMap) and len(f.args) == len(g.args):
        total = 0.0
        for a, b in zip(f.args, g.args):
            d = _structural_distance(a, b)
            if d is None:
                return None
            total += d
        return total
    if isinstance(f, ComposeMap) and isinstance(g, ComposeMap):
        outer = _structural_distance(f.outer, g.outer)
        inner = _structural_distance(f.inner, g.inner)
        if outer is None or inner is None:
            return None
        # |f(x+g(x)) - f'(x+g'(x))| <= Lip(f)|g - g'| + |f - f'|
        return outer + f.outer.lip_bound * inner
    return None


def tuple_distance(
    first: PerturbationTuple,
    second: PerturbationTuple,
    samples: Optional[Sequence[Vector]] = None
) -> DistanceEstimate:
    """
    D(L, L') = max_j ||L_j - L'_j||.

    The upper bound is structural when every pair of trees shares a shape, otherwise the
    triangle bound sup L_j + sup L'_j (flagged as sampled). The lower bound is the largest
    difference seen on `samples`.
    """
    if first.p != second.p:
        raise ConfigurationError(f"tuple lengths differ: {first.p} vs {second.p}")
    _check_families(list(first.maps) + list(second.maps))

    upper = 0.0
    sampled = False
    for f, g in zip(first.maps, second.maps):
        d = _structural_distance(f, g)
        if d is None:
            sampled = True
            d = f.sup_bound + g.sup_bound
        upper = max(upper, d)

    lower = 0.0
    for x in samples or []:
        for f, g in zip(first.maps, second.maps):
            lower = max(lower, (f(x) - g(x)).sup_norm())

    if lower > upper:
        logger.warning(f"Sampled distance {lower:.6g} exceeds certified bound {upper:.6g}")
    return DistanceEstimate(upper=upper, lower=lower, sampled=sampled)


def invert_perturbed(op: SplitOperator, L: LipMap, y: Vector, tol: float) -> Vector:
    """
    Solve (T + L)(x) = y by the contraction x -> T^-1(y - L(x)).

    The iteration count k is fixed a priori: with q = ||T^-1|| Lip(L) and d the first step,
    the k-th iterate is within q^k d / (1 - q) of the solution and has residual at most
    ||T|| q^k d, so k is the least integer making both at most tol.

    Raises:
        AdmissibilityError: q >= 1
        BudgetInfeasibleError: k exceeds INVERSION_MAX_ITER
    """
    q = op.inverse_norm() * L.lip_bound
    if not q < 1.0:
        raise AdmissibilityError("perturbed map not certifiably invertible")
    if not tol > 0:
        raise ConfigurationError(f"inversion tolerance must be positive, got {tol}")

    x = op.apply_inverse(y)
    x_next = op.apply_inverse(y - L(x))
    first_step = (x_next - x).sup_norm()
    factor = max(op.norm(), 1.0 / (1.0 - q))
    if first_step * factor <= tol:
        return x
    if q == 0.0:
        return x_next

    k = max(1, math.ceil(math.log(tol / (first_step * factor)) / math.log(q)))
    if k > settings.INVERSION_MAX_ITER:
        raise BudgetInfeasibleError(f"inversion needs {k} iterations (cap {settings.INVERSION_MAX_ITER})")
    x = x_next
    for _ in range(k - 1):
        x = op.apply_inverse(y - L(x))
    return x


__all__ = [
    'AdmissibilityMode',
    'LipMap',
    'ConstantMap',
    'SineMap',
    'ClampLinearMap',
    'SumMap',
    'ScaleMap',
    'ComposeMap',
    'build_primitive',
    'combine',
    'build_lipmap',
    'zero_map',
    'PerturbationTuple',
    'DistanceEstimate',
    'tuple_distance',
    'invert_perturbed'
]
