"""
Concrete invertible operators with generalized hyperbolic splittings X = M (+) N,
certified decay constants and the perturbation thresholds derived from them.
"""

import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel
from scipy.linalg import block_diag

from conjulab.core.config import settings
from conjulab.core.exceptions import (
    ConfigurationError, IncompatibleVectorsError, NotHyperbolicError, NotInvertibleError
)
from conjulab.model.vectorspace import DenseVector, SparseVector, SpaceFamily, Vector


class OperatorKind(str, Enum):
    """Model descriptor of a split operator."""
    DIAGONAL = "diagonal"
    BLOCK = "block"
    SHIFT = "shift"


def _row_sum_norm(matrix: np.ndarray) -> float:
    """Operator norm induced by the sup norm: the maximal absolute row sum."""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(matrix), axis=1)))


class SplitOperator(ABC):
    """Invertible operator T together with a splitting X = M (+) N and its projections."""

    kind: OperatorKind
    family: SpaceFamily

    @abstractmethod
    def apply(self, x: Vector) -> Vector:
        ...

    @abstractmethod
    def apply_inverse(self, x: Vector) -> Vector:
        ...

    @abstractmethod
    def proj_M(self, x: Vector) -> Vector:
        ...

    def proj_N(self, x: Vector) -> Vector:
        return x - self.proj_M(x)

    @abstractmethod
    def norm(self) -> float:
        """||T|| in the sup norm (exact)."""

    @abstractmethod
    def inverse_norm(self) -> float:
        """||T^-1|| in the sup norm (exact); inf when T is not invertible."""

    @abstractmethod
    def projection_norms(self) -> Tuple[float, float]:
        """(||P_M||, ||P_N||), exact."""

    @abstractmethod
    def restricted_power_norms(self, n: int) -> Tuple[float, float]:
        """Certified upper bounds for (||T^n restricted to M||, ||T^-n restricted to N||)."""

    @property
    @abstractmethod
    def is_hyperbolic(self) -> bool:
        """True when N is T-invariant as well, i.e. M and T(N) meet only at 0."""

    @property
    def is_invertible(self) -> bool:
        return math.isfinite(self.inverse_norm())

    @abstractmethod
    def zero(self) -> Vector:
        ...

    @abstractmethod
    def basis_vectors(self) -> List[Vector]:
        """Deterministic corner cases used by samplers and checks."""

    @abstractmethod
    def descriptor(self) -> dict:
        ...

    def power(self, x: Vector, n: int) -> Vector:
        """T^n x for any integer n."""
        step = self.apply if n >= 0 else self.apply_inverse
        for _ in range(abs(n)):
            x = step(x)
        return x

    def in_Y(self, v: Vector, tol: float = 0.0) -> bool:
        """Membership in Y = M + T^-1(N): the N-part must be mapped into N."""
        image = self.apply(self.proj_N(v))
        return self.proj_M(image).sup_norm() <= tol

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor()})"


class DiagonalOperator(SplitOperator):
    """T(x)_i = w_i x_i with the coordinate splitting |w_i| < 1 / |w_i| > 1."""

    kind = OperatorKind.DIAGONAL
    family = SpaceFamily.DENSE

    def __init__(self, weights: List[float]):
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.size == 0:
            raise ConfigurationError("diagonal operator needs at least one weight")
        for i, w in enumerate(weights):
            if w == 0.0:
                raise NotInvertibleError(f"zero weight on coordinate {i}")
            if abs(w) == 1.0:
                raise NotHyperbolicError(f"not hyperbolic on coordinate {i}")
        self.weights = weights
        self.stable = np.abs(weights) < 1.0
        self.dimension = int(weights.size)

    def _check(self, x: Vector) -> DenseVector:
        if not isinstance(x, DenseVector) or x.dimension != self.dimension:
            raise IncompatibleVectorsError(f"expected a dense vector of dimension {self.dimension}")
        return x

    def apply(self, x: Vector) -> Vector:
        return DenseVector(self.weights * self._check(x).values)

    def apply_inverse(self, x: Vector) -> Vector:
        return DenseVector(self._check(x).values / self.weights)

    def proj_M(self, x: Vector) -> Vector:
        return DenseVector(np.where(self.stable, self._check(x).values, 0.0))

    def proj_N(self, x: Vector) -> Vector:
        return DenseVector(np.where(self.stable, 0.0, self._check(x).values))

    def norm(self) -> float:
        return float(np.max(np.abs(self.weights)))

    def inverse_norm(self) -> float:
        return float(np.max(1.0 / np.abs(self.weights)))

    def projection_norms(self) -> Tuple[float, float]:
        return (1.0 if self.stable.any() else 0.0, 1.0 if (~self.stable).any() else 0.0)

    def restricted_power_norms(self, n: int) -> Tuple[float, float]:
        stable = np.abs(self.weights[self.stable])
        unstable = 1.0 / np.abs(self.weights[~self.stable])
        mu = float(np.max(stable) ** n) if stable.size else 0.0
        nu = float(np.max(unstable) ** n) if unstable.size else 0.0
        return mu, nu

    @property
    def is_hyperbolic(self) -> bool:
        return True

    def zero(self) -> Vector:
        return DenseVector.zeros(self.dimension)

    def basis_vectors(self) -> List[Vector]:
        return [DenseVector.basis(self.dimension, i) for i in range(self.dimension)]

    def descriptor(self) -> dict:
        return {"kind": self.kind.value, "weights": [float(w) for w in self.weights]}


class BlockOperator(SplitOperator):
    """T = P diag(A_M, A_N) P^-1 with M, N the images under P of the coordinate blocks."""

    kind = OperatorKind.BLOCK
    family = SpaceFamily.DENSE

    def __init__(self, basis_change: np.ndarray, stable_block: np.ndarray, unstable_block: np.ndarray):
        P = np.atleast_2d(np.asarray(basis_change, dtype=np.float64))
        A_M = np.atleast_2d(np.asarray(stable_block, dtype=np.float64))
        A_N = np.atleast_2d(np.asarray(unstable_block, dtype=np.float64))
        k, l = A_M.shape[0], A_N.shape[0]
        n = k + l
        if A_M.shape != (k, k) or A_N.shape != (l, l):
            raise ConfigurationError("stable and unstable blocks must be square")
        if P.shape != (n, n):
            raise ConfigurationError(f"basis change must be {n}x{n}, got {P.shape}")
        if np.linalg.matrix_rank(P) < n:
            raise NotInvertibleError("basis change P is singular")
        if np.linalg.matrix_rank(A_N) < l:
            raise NotHyperbolicError("unstable block is singular")

        self.dimension = n
        self.P = P
        self.P_inv = np.linalg.inv(P)
        self.A_M = A_M
        self.A_N = A_N
        self.A_N_inv = np.linalg.inv(A_N)
        self.matrix = P @ block_diag(A_M, A_N) @ self.P_inv

        if np.linalg.matrix_rank(A_M) == k:
            self.inverse_matrix: Optional[np.ndarray] = P @ block_diag(np.linalg.inv(A_M), self.A_N_inv) @ self.P_inv
        else:
            logger.warning("Stable block is singular; block operator is not invertible")
            self.inverse_matrix = None

        E_M = block_diag(np.eye(k), np.zeros((l, l)))
        self.proj_M_matrix = P @ E_M @ self.P_inv
        self.proj_N_matrix = np.eye(n) - self.proj_M_matrix
        self._k = k
        self._l = l

    def _check(self, x: Vector) -> DenseVector:
        if not isinstance(x, DenseVector) or x.dimension != self.dimension:
            raise IncompatibleVectorsError(f"expected a dense vector of dimension {self.dimension}")
        return x

    def apply(self, x: Vector) -> Vector:
        return DenseVector(self.matrix @ self._check(x).values)

    def apply_inverse(self, x: Vector) -> Vector:
        if self.inverse_matrix is None:
            raise NotInvertibleError("block operator with singular stable block has no inverse")
        return DenseVector(self.inverse_matrix @ self._check(x).values)

    def proj_M(self, x: Vector) -> Vector:
        return DenseVector(self.proj_M_matrix @ self._check(x).values)

    def proj_N(self, x: Vector) -> Vector:
        return DenseVector(self.proj_N_matrix @ self._check(x).values)

    def norm(self) -> float:
        return _row_sum_norm(self.matrix)

    def inverse_norm(self) -> float:
        if self.inverse_matrix is None:
            return math.inf
        return _row_sum_norm(self.inverse_matrix)

    def projection_norms(self) -> Tuple[float, float]:
        return _row_sum_norm(self.proj_M_matrix), _row_sum_norm(self.proj_N_matrix)

    def restricted_power_norms(self, n: int) -> Tuple[float, float]:
        # ||T^n P_M|| bounds the restriction to M and is submultiplicative since P_M commutes with T
        k, l = self._k, self._l
        stable = block_diag(np.linalg.matrix_power(self.A_M, n), np.zeros((l, l)))
        unstable = block_diag(np.zeros((k, k)), np.linalg.matrix_power(self.A_N_inv, n))
        mu = _row_sum_norm(self.P @ stable @ self.P_inv)
        nu = _row_sum_norm(self.P @ unstable @ self.P_inv)
        return mu, nu

    @property
    def is_hyperbolic(self) -> bool:
        return True

    def zero(self) -> Vector:
        return DenseVector.zeros(self.dimension)

    def basis_vectors(self) -> List[Vector]:
        return [DenseVector.basis(self.dimension, i) for i in range(self.dimension)]

    def descriptor(self) -> dict:
        return {
            "kind": self.kind.value,
            "P": self.P.tolist(),
            "A_M": self.A_M.tolist(),
            "A_N": self.A_N.tolist(),
        }


class WeightedShift(SplitOperator):
    """
    Bilateral weighted backward shift T(x)_n = w_n x_(n-1) on finitely supported sequences,
    with w_n = lambda_minus for n <= m0 and lambda_plus for n > m0.

    M = span{e_n : n >= m0}, N = span{e_n : n < m0}. The vector e_m0 lies in M and in T(N),
    so the operator is generalized hyperbolic without being hyperbolic.
    """

    kind = OperatorKind.SHIFT
    family = SpaceFamily.SPARSE

    def __init__(self, lambda_minus: float, lambda_plus: float, m0: int):
        if not abs(lambda_minus) > 1.0:
            raise NotHyperbolicError(f"|lambda_minus| must exceed 1, got {lambda_minus}")
        if not 0.0 < abs(lambda_plus) < 1.0:
            raise NotHyperbolicError(f"0 < |lambda_plus| < 1 required, got {lambda_plus}")
        self.lambda_minus = float(lambda_minus)
        self.lambda_plus = float(lambda_plus)
        self.m0 = int(m0)

    def weight(self, n: int) -> float:
        return self.lambda_minus if n <= self.m0 else self.lambda_plus

    def _check(self, x: Vector) -> SparseVector:
        if not isinstance(x, SparseVector):
            raise IncompatibleVectorsError("weighted shift acts on sparse bilateral sequences")
        return x

    def apply(self, x: Vector) -> Vector:
        entries = self._check(x).entries
        return SparseVector({k + 1: self.weight(k + 1) * v for k, v in entries.items()})

    def apply_inverse(self, x: Vector) -> Vector:
        entries = self._check(x).entries
        return SparseVector({k - 1: v / self.weight(k) for k, v in entries.items()})

    def proj_M(self, x: Vector) -> Vector:
        entries = self._check(x).entries
        return SparseVector({k: v for k, v in entries.items() if k >= self.m0})

    def proj_N(self, x: Vector) -> Vector:
        entries = self._check(x).entries
        return SparseVector({k: v for k, v in entries.items() if k < self.m0})

    def norm(self) -> float:
        return max(abs(self.lambda_minus), abs(self.lambda_plus))

    def inverse_norm(self) -> float:
        return max(1.0 / abs(self.lambda_minus), 1.0 / abs(self.lambda_plus))

    def projection_norms(self) -> Tuple[float, float]:
        return 1.0, 1.0

    def restricted_power_norms(self, n: int) -> Tuple[float, float]:
        return abs(self.lambda_plus) ** n, abs(self.lambda_minus) ** (-n)

    @property
    def is_hyperbolic(self) -> bool:
        return False

    def zero(self) -> Vector:
        return SparseVector.zero_vector()

    def basis_vectors(self) -> List[Vector]:
        return [SparseVector.basis(i) for i in range(self.m0 - 2, self.m0 + 2)]

    def descriptor(self) -> dict:
        return {
            "kind": self.kind.value,
            "lambda_minus": self.lambda_minus,
            "lambda_plus": self.lambda_plus,
            "m0": self.m0,
        }


def make_diagonal_operator(weights: List[float]) -> DiagonalOperator:
    """Diagonal model; raises when a weight has modulus one."""
    return DiagonalOperator(weights)


def make_block_operator(basis_change, stable_block, unstable_block) -> BlockOperator:
    """Block model T = P diag(A_M, A_N) P^-1; hyperbolicity is settled by certify_constants."""
    return BlockOperator(basis_change, stable_block, unstable_block)


def make_weighted_shift(lambda_minus: float, lambda_plus: float, m0: int) -> WeightedShift:
    """Two-level weighted shift: generalized hyperbolic, not hyperbolic."""
    return WeightedShift(lambda_minus, lambda_plus, m0)


class HyperbolicityCertificate(BaseModel):
    """Certified constants: ||T^n y|| <= a t^n ||y|| on M and ||T^-n z|| <= a t^n ||z|| on N."""

    a: float
    t: float
    b: float
    inv_norm: float
    n0: int
    op_norm: float

    class Config:
        frozen = True


def gelfand_estimate(op: SplitOperator, horizon: int) -> float:
    """rho = max(||T^H|M||, ||T^-H|N||)^(1/H), the spectral radius estimate at the horizon."""
    mu, nu = op.restricted_power_norms(horizon)
    return max(mu, nu) ** (1.0 / horizon)


def _find_n0(op: SplitOperator, t: float, horizon: int) -> Optional[int]:
    slack = 1.0 + settings.ADMISSIBILITY_MARGIN
    for n in range(1, horizon + 1):
        mu, nu = op.restricted_power_norms(n)
        if mu <= t ** n * slack and nu <= t ** n * slack:
            return n
    return None


def certify_constants(
    op: SplitOperator,
    t_candidate: Union[float, str] = "auto",
    horizon: Optional[int] = None
) -> HyperbolicityCertificate:
    """
    Certify the decay constants (a, t), the projection bound b and ||T^-1||.

    Finds the least n0 with ||T^n0|M|| <= t^n0 and ||T^-n0|N|| <= t^n0, then takes
    a = max over r < n0 of max(||T^r|M||, ||T^-r|N||) / t^r. Submultiplicativity extends
    the decay estimate from this finite prefix to every n >= 0.

    Args:
        op: Split operator built by one of the factories
        t_candidate: Decay rate in (0, 1), or "auto" to scan a grid above the Gelfand estimate
        horizon: Largest n tried; defaults to CERT_HORIZON

    Returns:
        HyperbolicityCertificate
    """
    horizon = horizon or settings.CERT_HORIZON

    if t_candidate == "auto":
        rho = gelfand_estimate(op, horizon)
        logger.debug(f"Gelfand estimate at horizon {horizon}: {rho:.6g}")
        if rho >= 1.0:
            raise NotHyperbolicError("not certifiably (generalized) hyperbolic")
        candidates = [rho + fraction * (1.0 - rho) for fraction in settings.T_GRID_FRACTIONS]
    else:
        t = float(t_candidate)
        if not 0.0 < t < 1.0:
            raise ConfigurationError(f"t must lie in (0, 1), got {t}")
        candidates = [t]

    for t in candidates:
        n0 = _find_n0(op, t, horizon)
        if n0 is None:
            continue
        a = 1.0
        for r in range(n0):
            mu, nu = op.restricted_power_norms(r)
            a = max(a, mu / t ** r, nu / t ** r)
        pm, pn = op.projection_norms()
        certificate = HyperbolicityCertificate(
            a=a,
            t=t,
            b=max(pm, pn),
            inv_norm=op.inverse_norm(),
            n0=n0,
            op_norm=op.norm(),
        )
        logger.info(f"Certified {op.kind.value} operator: a={a:.6g}, t={t:.6g}, b={certificate.b:.6g}, n0={n0}")
        return certificate

    raise NotHyperbolicError("not certifiably (generalized) hyperbolic")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")


def epsilon_threshold(cert: HyperbolicityCertificate, delta: float) -> float:
    """eps = min{(1 - t) / (a b (1 + t)), 1 / ||T^-1||} * delta."""
    _check_delta(delta)
    t = cert.t
    return min((1.0 - t) / (cert.a * cert.b * (1.0 + t)), 1.0 / cert.inv_norm) * delta


def franks_constant(cert: HyperbolicityCertificate) -> float:
    """C = a b (1 + t) / (1 - t); bounds ||Psi^-1|| and ||h - I|| per unit of perturbation."""
    return cert.a * cert.b * (1.0 + cert.t) / (1.0 - cert.t)


def correspondence_lip_constant(cert: HyperbolicityCertificate, delta: float) -> float:
    """Lipschitz constant of L -> h_L, namely 2 a b (1 + t) / ((1 - delta)(1 - t)); independent of p."""
    _check_delta(delta)
    return 2.0 * franks_constant(cert) / (1.0 - delta)


__all__ = [
    'OperatorKind',
    'SplitOperator',
    'DiagonalOperator',
    'BlockOperator',
    'WeightedShift',
    'make_diagonal_operator',
    'make_block_operator',
    'make_weighted_shift',
    'HyperbolicityCertificate',
    'gelfand_estimate',
    'certify_constants',
    'epsilon_threshold',
    'franks_constant',
    'correspondence_lip_constant'
]
