"""
The mapping torus X~ = X x Z_p, the lifted maps T~ and S, the perturbation lift L-bar
and lazily evaluated elements of the function spaces F (fiber-preserving) and G
(fiber-advancing).

Orbits of T~ and S are indexed canonically by an OrbitAtlas so that recursive evaluations
hit the same TorusPoint objects, and therefore the same memo keys, over and over.
"""

import threading
from enum import Enum
from typing import Any, Callable, Dict, Hashable, Optional, Tuple

from conjulab.model.operators import SplitOperator
from conjulab.model.perturbations import PerturbationTuple, invert_perturbed
from conjulab.model.vectorspace import Vector


class TorusPoint:
    """(x, j) with j reduced mod p."""

    __slots__ = ("x", "j", "p")

    def __init__(self, x: Vector, j: int, p: int):
        self.x = x
        self.p = p
        self.j = j % p

    @property
    def key(self) -> Tuple[Any, int]:
        return self.x.key, self.j

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TorusPoint):
            return NotImplemented
        return self.p == other.p and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"TorusPoint({self.x!r}, j={self.j}, p={self.p})"


def torus_T(op: SplitOperator, pt: TorusPoint) -> TorusPoint:
    """T~(x, j) = (T x, j + 1)."""
    return TorusPoint(op.apply(pt.x), pt.j + 1, pt.p)


def torus_T_inverse(op: SplitOperator, pt: TorusPoint) -> TorusPoint:
    return TorusPoint(op.apply_inverse(pt.x), pt.j - 1, pt.p)


def torus_S(op: SplitOperator, perturbations: PerturbationTuple, pt: TorusPoint) -> TorusPoint:
    """S(x, j) = ((T + L_j)(x), j + 1)."""
    x = pt.x
    return TorusPoint(op.apply(x) + perturbations[pt.j](x), pt.j + 1, pt.p)


def torus_S_inverse(op: SplitOperator, perturbations: PerturbationTuple, pt: TorusPoint, tol: float) -> TorusPoint:
    """(S_(j-1)^-1 (x), j - 1), solved to residual tol."""
    previous = (pt.j - 1) % pt.p
    return TorusPoint(invert_perturbed(op, perturbations[previous], pt.x, tol), previous, pt.p)


class FunctionSpace(str, Enum):
    F = "F"  # F(X x {j}) in Y x {j}
    G = "G"  # F(X x {j}) in X x {j + 1}


class MemoCache:
    """Concurrent memo map; writes at one key always carry equal values, so the last one wins."""

    def __init__(self):
        self._store: Dict[Hashable, Vector] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[Vector]:
        with self._lock:
            value = self._store.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def put(self, key: Hashable, value: Vector) -> None:
        with self._lock:
            self._store[key] = value

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self.hits = 0
            self.misses = 0


class FunElem:
    """
    An element of F or G given by a first-coordinate evaluator (x, j) -> Vector.

    Calling the element returns the TorusPoint value, whose fiber is j for F and j + 1 for G.
    `sup_bound` is a certified bound of |F|_inf.
    """

    def __init__(
        self,
        space: FunctionSpace,
        evaluator: Callable[[TorusPoint], Vector],
        sup_bound: float,
        cache: Optional[MemoCache] = None,
        tag: Hashable = None
    ):
        self.space = space
        self.evaluator = evaluator
        self.sup_bound = sup_bound
        self.cache = cache
        self.tag = tag

    def value(self, pt: TorusPoint) -> Vector:
        if self.cache is None:
            return self.evaluator(pt)
        key = (self.tag, pt.key)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        result = self.evaluator(pt)
        self.cache.put(key, result)
        return result

    def __call__(self, pt: TorusPoint) -> TorusPoint:
        shift = 1 if self.space == FunctionSpace.G else 0
        return TorusPoint(self.value(pt), pt.j + shift, pt.p)


def zero_element(space: FunctionSpace, op: SplitOperator) -> FunElem:
    """O_F(x, j) = (0, j) and O_G(x, j) = (0, j + 1)."""
    zero = op.zero()
    return FunElem(space, lambda pt: zero, 0.0, tag=("zero", space.value))


def lbar_eval(perturbations: PerturbationTuple, pt: TorusPoint) -> TorusPoint:
    """L-bar(x, j) = (L_j(x), j + 1)."""
    return TorusPoint(perturbations[pt.j](pt.x), pt.j + 1, pt.p)


def lbar_element(perturbations: PerturbationTuple) -> FunElem:
    return FunElem(
        FunctionSpace.G,
        lambda pt: perturbations[pt.j](pt.x),
        perturbations.max_sup,
        tag=("lbar", id(perturbations)),
    )


class TorusOrbit:
    """
    The two-sided orbit n -> R^n(base) of one torus point, extended on demand.

    Points are stored by integer index; an extension holds the lock so that concurrent
    readers see one canonical object per index.
    """

    def __init__(self, atlas: "OrbitAtlas", base: TorusPoint):
        self.atlas = atlas
        self._points: Dict[int, TorusPoint] = {0: base}
        self._low = 0
        self._high = 0
        self._lock = threading.Lock()

    def point(self, n: int) -> TorusPoint:
        found = self._points.get(n)
        if found is not None:
            return found
        with self._lock:
            while self._high < n:
                nxt = self.atlas.forward(self._points[self._high])
                self._high += 1
                self._points[self._high] = self.atlas.register(nxt, self, self._high)
            while self._low > n:
                prev = self.atlas.backward(self._points[self._low])
                self._low -= 1
                self._points[self._low] = self.atlas.register(prev, self, self._low)
            return self._points[n]

    def __len__(self) -> int:
        return self._high - self._low + 1


class OrbitAtlas:
    """
    Canonical orbit bookkeeping for one dynamics R (T~ or S).

    A point met for the first time starts a new orbit at index 0; every point produced by an
    orbit extension is registered, so later lookups of that point resolve to the orbit that
    produced it.
    """

    def __init__(self, forward: Callable[[TorusPoint], TorusPoint], backward: Callable[[TorusPoint], TorusPoint]):
        self.forward = forward
        self.backward = backward
        self._index: Dict[Tuple[Any, int], Tuple[TorusOrbit, int]] = {}
        self._lock = threading.Lock()

    @classmethod
    def for_T(cls, op: SplitOperator) -> "OrbitAtlas":
        return cls(lambda pt: torus_T(op, pt), lambda pt: torus_T_inverse(op, pt))

    @classmethod
    def for_S(cls, op: SplitOperator, perturbations: PerturbationTuple, tol: float) -> "OrbitAtlas":
        return cls(
            lambda pt: torus_S(op, perturbations, pt),
            lambda pt: torus_S_inverse(op, perturbations, pt, tol),
        )

    def register(self, pt: TorusPoint, orbit: TorusOrbit, n: int) -> TorusPoint:
        with self._lock:
            self._index.setdefault(pt.key, (orbit, n))
        return pt

    def locate(self, pt: TorusPoint) -> Tuple[TorusOrbit, int]:
        entry = self._index.get(pt.key)
        if entry is not None:
            return entry
        with self._lock:
            entry = self._index.get(pt.key)
            if entry is None:
                entry = (TorusOrbit(self, pt), 0)
                self._index[pt.key] = entry
            return entry

    def shift(self, pt: TorusPoint, k: int) -> TorusPoint:
        """R^k(pt) along the canonical orbit of pt."""
        orbit, n = self.locate(pt)
        return orbit.point(n + k)

    def __len__(self) -> int:
        return len(self._index)


__all__ = [
    'TorusPoint',
    'torus_T',
    'torus_T_inverse',
    'torus_S',
    'torus_S_inverse',
    'FunctionSpace',
    'MemoCache',
    'FunElem',
    'zero_element',
    'lbar_eval',
    'lbar_element',
    'TorusOrbit',
    'OrbitAtlas'
]
