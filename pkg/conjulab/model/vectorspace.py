"""
State-space vectors for the two concrete space families and their sup-norm arithmetic.

Dense vectors live in R^n; sparse vectors are finitely supported bilateral sequences
(integer index -> nonzero real). Both are immutable once built.
"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, Mapping, Union

import numpy as np

from conjulab.core.exceptions import IncompatibleVectorsError


class SpaceFamily(str, Enum):
    """Concrete families of state spaces."""
    DENSE = "dense"
    SPARSE = "sparse"


class Vector(ABC):
    """A point of the state space X."""

    family: SpaceFamily

    @abstractmethod
    def sup_norm(self) -> float:
        ...

    @abstractmethod
    def support(self) -> FrozenSet[int]:
        ...

    @property
    @abstractmethod
    def key(self) -> Any:
        """Exact hashable representation, used as a memo key."""

    @abstractmethod
    def to_json(self) -> Any:
        ...

    @abstractmethod
    def zero(self) -> "Vector":
        ...

    @abstractmethod
    def coordinate(self, i: int) -> float:
        ...

    def __add__(self, other: "Vector") -> "Vector":
        return linear_combine(1.0, self, 1.0, other)

    def __sub__(self, other: "Vector") -> "Vector":
        return linear_combine(1.0, self, -1.0, other)

    def __neg__(self) -> "Vector":
        return self.scaled(-1.0)

    def __mul__(self, alpha: float) -> "Vector":
        return self.scaled(alpha)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vector):
            return NotImplemented
        return self.family == other.family and self.key == other.key

    def __hash__(self) -> int:
        return hash((self.family, self.key))

    @abstractmethod
    def scaled(self, alpha: float) -> "Vector":
        ...

    def is_zero(self) -> bool:
        return not self.support()


class DenseVector(Vector):
    """Vector of R^n backed by a read-only float64 array."""

    family = SpaceFamily.DENSE
    __slots__ = ("values", "_key")

    def __init__(self, values: Union[Iterable[float], np.ndarray]):
        array = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        array.setflags(write=False)
        self.values = array
        self._key = None

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def zeros(cls, n: int) -> "DenseVector":
        return cls(np.zeros(n))

    @classmethod
    def basis(cls, n: int, i: int) -> "DenseVector":
        values = np.zeros(n)
        values[i] = 1.0
        return cls(values)

    def sup_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values)))

    def support(self) -> FrozenSet[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.values))

    @property
    def key(self) -> Any:
        if self._key is None:
            self._key = (self.dimension, self.values.tobytes())
        return self._key

    def to_json(self) -> Any:
        return [float(v) for v in self.values]

    def zero(self) -> "DenseVector":
        return DenseVector.zeros(self.dimension)

    def coordinate(self, i: int) -> float:
        return float(self.values[i])

    def scaled(self, alpha: float) -> "DenseVector":
        return DenseVector(alpha * self.values)

    def __repr__(self) -> str:
        return f"Dense{self.to_json()}"


class SparseVector(Vector):
    """Finitely supported bilateral sequence. Explicit zeros are never stored."""

    family = SpaceFamily.SPARSE
    __slots__ = ("entries", "_key")

    def __init__(self, entries: Mapping[int, float] = None):
        cleaned: Dict[int, float] = {}
        for index, value in (entries or {}).items():
            value = float(value)
            if value != 0.0:
                cleaned[int(index)] = value
        self.entries = cleaned
        self._key = None

    @classmethod
    def zero_vector(cls) -> "SparseVector":
        return cls({})

    @classmethod
    def basis(cls, i: int) -> "SparseVector":
        return cls({i: 1.0})

    def sup_norm(self) -> float:
        if not self.entries:
            return 0.0
        return max(abs(v) for v in self.entries.values())

    def support(self) -> FrozenSet[int]:
        return frozenset(self.entries)

    @property
    def key(self) -> Any:
        if self._key is None:
            self._key = tuple(sorted(self.entries.items()))
        return self._key

    def to_json(self) -> Any:
        return {str(i): v for i, v in sorted(self.entries.items())}

    def zero(self) -> "SparseVector":
        return SparseVector.zero_vector()

    def coordinate(self, i: int) -> float:
        return self.entries.get(i, 0.0)

    def scaled(self, alpha: float) -> "SparseVector":
        return SparseVector({i: alpha * v for i, v in self.entries.items()})

    def __repr__(self) -> str:
        return f"Sparse{self.to_json()}"


def _check_compatible(x: Vector, y: Vector) -> None:
    if x.family != y.family:
        raise IncompatibleVectorsError(f"cannot combine {x.family.value} and {y.family.value} vectors")
    if isinstance(x, DenseVector) and x.dimension != y.dimension:
        raise IncompatibleVectorsError(f"dimension mismatch: {x.dimension} vs {y.dimension}")


def linear_combine(alpha: float, x: Vector, beta: float, y: Vector) -> Vector:
    """
    Return alpha*x + beta*y.

    Args:
        alpha: Coefficient of x
        x: First vector
        beta: Coefficient of y
        y: Second vector, same variant and dimension as x

    Returns:
        The combination; sparse results drop exact zeros
    """
    _check_compatible(x, y)
    if isinstance(x, DenseVector):
        return DenseVector(alpha * x.values + beta * y.values)

    entries: Dict[int, float] = {}
    for index, value in x.entries.items():
        entries[index] = alpha * value
    for index, value in y.entries.items():
        entries[index] = entries.get(index, 0.0) + beta * value
    return SparseVector(entries)


def sup_norm(x: Vector) -> float:
    """Max of absolute entries; 0 for the empty sparse vector."""
    return x.sup_norm()


def support(x: Vector) -> FrozenSet[int]:
    """Indices with nonzero entries."""
    return x.support()


def vector_from_json(data: Any, family: SpaceFamily, dimension: int = None) -> Vector:
    """Parse the report/config representation of a vector."""
    if family == SpaceFamily.DENSE:
        if not isinstance(data, (list, tuple)):
            raise IncompatibleVectorsError("dense vectors are given as arrays of numbers")
        vector = DenseVector(data)
        if dimension is not None and vector.dimension != dimension:
            raise IncompatibleVectorsError(f"expected dimension {dimension}, got {vector.dimension}")
        return vector
    if not isinstance(data, Mapping):
        raise IncompatibleVectorsError("sparse vectors are given as index->value objects")
    return SparseVector({int(k): float(v) for k, v in data.items()})


__all__ = [
    'SpaceFamily',
    'Vector',
    'DenseVector',
    'SparseVector',
    'linear_combine',
    'sup_norm',
    'support',
    'vector_from_json'
]
