"""
Conjugacy solver: series inverse of Psi, the Phi maps, the fixed-point iteration for the
forward defect U, the closed-form inverse defect V = -Psi_2^-1(L-bar), and pointwise
evaluation of h = I + u_0 and h^-1 = I + v_0 with certified error budgets.
"""

import math
import threading
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

from loguru import logger
from pydantic import BaseModel

from conjulab.core.config import settings
from conjulab.core.exceptions import (
    AdmissibilityError, BudgetInfeasibleError, ConfigurationError, IncompatibleVectorsError
)
from conjulab.model.mapping_torus import (
    FunctionSpace, FunElem, MemoCache, OrbitAtlas, TorusPoint, lbar_element, zero_element
)
from conjulab.model.operators import (
    HyperbolicityCertificate, SplitOperator, epsilon_threshold, franks_constant
)
from conjulab.model.perturbations import AdmissibilityMode, PerturbationTuple
from conjulab.model.vectorspace import Vector


class DefectMode(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


class PhiKind(str, Enum):
    PHI1 = "phi1"
    PHI2 = "phi2"


# Orbit inversion errors are held at this fraction of the series tail
ORBIT_TOLERANCE_SHARE = 0.1


class ErrorBudget(BaseModel):
    """
    Truncation depth K and iteration count m for a target tau.

    Forward: certified_error = C sigma (delta^m + t^K) / (1 - delta), where sigma bounds
    |L-bar|, delta = C max Lip(L_j) is the contraction factor of Psi_1^-1 o Phi_1 and C the
    Franks constant. Inverse: one series application, certified_error = C sigma t^K plus the
    orbit inversion share.
    """

    kind: DefectMode
    tau: float
    K: int
    m: int
    certified_error: float
    franks: float
    t: float
    sigma: float
    contraction: float

    class Config:
        frozen = True

    def error_for(self, K: int, m: int) -> float:
        if self.sigma == 0.0:
            return 0.0
        series_tail = self.franks * self.sigma * self.t ** K
        if self.kind == DefectMode.INVERSE:
            share = ORBIT_TOLERANCE_SHARE if self.contraction > 0.0 else 0.0
            return series_tail * (1.0 + share)
        fixed_point_tail = self.franks * self.sigma * self.contraction ** m
        return (fixed_point_tail + series_tail) / (1.0 - self.contraction)

    def doubled(self) -> "ErrorBudget":
        """(2K, 2m) with its own certified error; the inverse mode keeps m = 1."""
        K = 2 * self.K
        m = self.m if self.kind == DefectMode.INVERSE else 2 * self.m
        return self.model_copy(update={"K": K, "m": m, "certified_error": self.error_for(K, m)})


def _least_power(base: float, ratio: float) -> int:
    """Least n >= 1 with base^n <= ratio, for 0 < base < 1 and ratio > 0."""
    if base == 0.0 or ratio >= base:
        return 1
    n = max(1, math.ceil(math.log(ratio) / math.log(base)))
    while base ** n > ratio:
        n += 1
    return n


def orbit_reach(K: int, m: int, kind: DefectMode) -> Tuple[int, int]:
    """
    Forward and backward orbit steps touched by one evaluation.

    A series evaluation at orbit index n reads indices n-K .. n+K-1; the forward defect nests
    m of them, the inverse defect one.
    """
    depth = m if kind == DefectMode.FORWARD else 1
    return depth * (K - 1), depth * K


def check_orbit_reach(
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    K: int,
    m: int,
    kind: DefectMode = DefectMode.FORWARD
) -> float:
    """
    log10 of the growth ||T||^forward or ||T^-1||^backward an evaluation under (K, m) can see.

    Raises:
        BudgetInfeasibleError: the growth exceeds 10^MAX_ORBIT_LOG10
    """
    if perturbations.max_sup == 0.0 or (kind == DefectMode.FORWARD and m == 0):
        return 0.0
    forward, backward = orbit_reach(K, m, kind)
    growth = forward * math.log10(max(cert.op_norm, 1.0))
    # a non-invertible T fails on its first backward step instead
    if math.isfinite(cert.inv_norm):
        growth = max(growth, backward * math.log10(max(cert.inv_norm, 1.0)))
    if growth > settings.MAX_ORBIT_LOG10:
        raise BudgetInfeasibleError(
            f"budget infeasible: K={K}, m={m} reach {forward} steps forward and {backward} backward along "
            f"the orbit, growth up to 1e{growth:.0f} exceeds 1e{settings.MAX_ORBIT_LOG10:g}"
        )
    return growth


def plan_budget(
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    tau: float,
    kind: DefectMode = DefectMode.FORWARD,
    max_K: Optional[int] = None,
    max_m: Optional[int] = None
) -> ErrorBudget:
    """
    Choose (K, m) so the certified error is at most tau.

    Forward: m makes the fixed-point tail at most tau/2 and K makes the accumulated series
    tails at most tau/2. Inverse: K makes the series tail at most tau/2.

    Raises:
        AdmissibilityError: the contraction factor is not below 1
        BudgetInfeasibleError: K or m exceed the caps, or the orbits they reach overflow
    """
    if not tau > 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    max_K = max_K or settings.MAX_K
    max_m = max_m or settings.MAX_M

    C = franks_constant(cert)
    sigma = perturbations.max_sup
    contraction = C * perturbations.max_lip
    if not contraction < 1.0:
        raise AdmissibilityError(
            f"admissibility: contraction factor {contraction:.6g} of the fixed-point map is not below 1"
        )

    base = dict(kind=kind, tau=tau, franks=C, t=cert.t, sigma=sigma, contraction=contraction)
    if sigma == 0.0:
        return ErrorBudget(K=1, m=0, certified_error=0.0, **base)

    half = tau / 2.0
    if kind == DefectMode.FORWARD:
        scale = C * sigma / (1.0 - contraction)
        m = 1 if contraction == 0.0 else _least_power(contraction, half / scale)
        K = _least_power(cert.t, half / scale)
    else:
        m = 1
        K = _least_power(cert.t, half / (C * sigma))

    if K > max_K or m > max_m:
        raise BudgetInfeasibleError(
            f"budget infeasible for tau={tau:g}: needs K={K}, m={m} (caps K<={max_K}, m<={max_m})"
        )
    check_orbit_reach(cert, perturbations, K, m, kind)

    budget = ErrorBudget(K=K, m=m, certified_error=0.0, **base)
    budget = budget.model_copy(update={"certified_error": budget.error_for(K, m)})
    logger.debug(f"Planned {kind.value} budget: K={K}, m={m}, certified error {budget.certified_error:.3g}")
    return budget


def orbit_tolerance(cert: HyperbolicityCertificate, perturbations: PerturbationTuple, K: int) -> float:
    """
    Per-step tolerance of backward S-orbits.

    An inversion error e at each step grows along the orbit with Lip(S_j^-1) <= rho, where
    rho = ||T^-1|| / (1 - ||T^-1|| lambda). The M-series then moves by at most
    Omega * e with Omega = sum_(k<K) a b t^k lambda sum_(r<=k) rho^r, and e is chosen so that
    this is ORBIT_TOLERANCE_SHARE of the series tail.
    """
    lam = perturbations.max_lip
    sigma = perturbations.max_sup
    series_tail = franks_constant(cert) * sigma * cert.t ** K
    if lam == 0.0 or series_tail == 0.0:
        return max(series_tail, settings.NUMERIC_SLACK)
    q = cert.inv_norm * lam
    if not q < 1.0:
        raise AdmissibilityError("perturbed map not certifiably invertible")
    rho = cert.inv_norm / (1.0 - q)
    omega = 0.0
    partial = 0.0
    for k in range(K):
        partial += rho ** k
        omega += cert.a * cert.b * cert.t ** k * lam * partial
    return max(ORBIT_TOLERANCE_SHARE * series_tail / omega, 1e-300)


class SeriesValue(NamedTuple):
    """Truncated Psi^-1(G)(x, j): value = m_part - n_part, with m_part in M and n_part in T^-1(N)."""
    value: Vector
    m_part: Vector
    n_part: Vector
    tail: float


class DefectValue(NamedTuple):
    value: Vector
    error: float


def psi_inverse_apply(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    atlas: OrbitAtlas,
    G: FunElem,
    pt: TorusPoint,
    K: int
) -> SeriesValue:
    """
    Psi^-1(G)(x, j) = sum_(k>=0) T^k P_M G(R^(-k-1) pt) - sum_(k>=1) T^-k P_N G(R^(k-1) pt),
    both series truncated after K terms and summed by Horner's scheme.

    The atlas fixes R (T~ or S). The tail is a b t^K (1 + t) / (1 - t) |G|_inf.
    """
    if K < 1:
        raise ConfigurationError(f"truncation depth must be positive, got {K}")
    orbit, n = atlas.locate(pt)

    m_acc = op.zero()
    for k in range(K - 1, -1, -1):
        m_acc = op.apply(m_acc) + op.proj_M(G.value(orbit.point(n - k - 1)))

    n_acc = op.zero()
    for k in range(K, 0, -1):
        n_acc = op.apply_inverse(n_acc + op.proj_N(G.value(orbit.point(n + k - 1))))

    tail = franks_constant(cert) * cert.t ** K * G.sup_bound
    return SeriesValue(m_acc - n_acc, m_acc, n_acc, tail)


def phi_apply(which: PhiKind, perturbations: PerturbationTuple, F: FunElem, pt: TorusPoint) -> TorusPoint:
    """Phi_1(F)(x, j) = L-bar((x, j) + F(x, j)); Phi_2 = Phi_1 - L-bar."""
    L = perturbations[pt.j]
    value = L(pt.x + F.value(pt))
    if which == PhiKind.PHI2:
        value = value - L(pt.x)
    return TorusPoint(value, pt.j + 1, pt.p)


def phi_element(which: PhiKind, perturbations: PerturbationTuple, F: FunElem) -> FunElem:
    """Phi(F) as an element of G; Lip(Phi) <= max_j Lip(L_j)."""
    sigma = perturbations.max_sup
    if which == PhiKind.PHI1:
        bound = sigma
    else:
        bound = min(2.0 * sigma, perturbations.max_lip * F.sup_bound)
    return FunElem(
        FunctionSpace.G,
        lambda pt: phi_apply(which, perturbations, F, pt).x,
        bound,
        tag=(which.value, F.tag),
    )


class ConjugacySolver:
    """
    Lazy pointwise solver for the conjugacy h = I + u_0 and its inverse h^-1 = I + v_0.

    Iterates U_d = Psi_1^-1(Phi_1(U_(d-1))) from U_0 = O_F are memoized per depth; evaluating
    U_d at a point evaluates U_(d-1) at 2K points of the same T~-orbit, which the orbit atlas
    keeps canonical so the cache is shared across the recursion.
    """

    def __init__(
        self,
        op: SplitOperator,
        cert: HyperbolicityCertificate,
        perturbations: PerturbationTuple,
        tau: float,
        *,
        delta: Optional[float] = None,
        mode: AdmissibilityMode = AdmissibilityMode.A,
        max_K: Optional[int] = None,
        max_m: Optional[int] = None,
        budget: Optional[ErrorBudget] = None,
        inverse_budget: Optional[ErrorBudget] = None
    ):
        if perturbations.family != op.family:
            raise IncompatibleVectorsError(
                f"{op.kind.value} operator acts on {op.family.value} vectors, "
                f"perturbations on {perturbations.family.value}"
            )
        self.op = op
        self.cert = cert
        self.perturbations = perturbations
        self.p = perturbations.p
        self.tau = tau
        self.max_K = max_K
        self.max_m = max_m

        self.admissibility: Optional[AdmissibilityMode] = None
        if delta is not None:
            self.eps = epsilon_threshold(cert, delta)
            self.admissibility = perturbations.check_admissible(self.eps, mode)

        for explicit in (budget, inverse_budget):
            if explicit is not None:
                check_orbit_reach(cert, perturbations, explicit.K, explicit.m, explicit.kind)
        self._budget = budget
        self._inverse_budget = inverse_budget

        self.cache = MemoCache()
        self.atlas_T = OrbitAtlas.for_T(op)
        self._atlas_S: Optional[OrbitAtlas] = None
        self._iterates: List[FunElem] = [zero_element(FunctionSpace.F, op)]
        self._lock = threading.Lock()
        self._lbar = lbar_element(perturbations)
        self._v_elem: Optional[FunElem] = None

        logger.debug(f"Solver ready: {op.kind.value} operator, p={self.p}, tau={tau:g}")

    @property
    def budget(self) -> ErrorBudget:
        if self._budget is None:
            self._budget = plan_budget(
                self.cert, self.perturbations, self.tau, DefectMode.FORWARD, self.max_K, self.max_m
            )
        return self._budget

    @property
    def franks(self) -> float:
        return franks_constant(self.cert)

    def point(self, x: Vector, j: int = 0) -> TorusPoint:
        return TorusPoint(x, j, self.p)

    # Forward defect

    def _iterate_element(self, depth: int) -> FunElem:
        if depth < len(self._iterates):
            return self._iterates[depth]
        with self._lock:
            while len(self._iterates) <= depth:
                d = len(self._iterates)
                previous = self._iterates[d - 1]
                G = phi_element(PhiKind.PHI1, self.perturbations, previous)
                K = self.budget.K

                def evaluator(pt: TorusPoint, G: FunElem = G) -> Vector:
                    return psi_inverse_apply(self.op, self.cert, self.atlas_T, G, pt, K).value

                self._iterates.append(FunElem(
                    FunctionSpace.F,
                    evaluator,
                    self.franks * self.perturbations.max_sup,
                    cache=self.cache,
                    tag=("U", d),
                ))
            return self._iterates[depth]

    def iterate(self, x: Vector, j: int, depth: int) -> Vector:
        """First coordinate of the fixed-point iterate U_depth at (x, j)."""
        if depth < 0:
            raise ConfigurationError("iterate depth must be non-negative")
        return self._iterate_element(depth).value(self.point(x, j))

    def forward_defect(self, x: Vector, j: int = 0) -> DefectValue:
        """u_j(x) from the m-th iterate, with the certified error of the budget."""
        return DefectValue(self.iterate(x, j, self.budget.m), self.budget.certified_error)

    def forward_series(self, x: Vector, j: int = 0) -> SeriesValue:
        """The top-level series of U_m at (x, j), split into its M and T^-1(N) parts."""
        m = self.budget.m
        if m == 0:
            zero = self.op.zero()
            return SeriesValue(zero, zero, zero, 0.0)
        G = phi_element(PhiKind.PHI1, self.perturbations, self._iterate_element(m - 1))
        return psi_inverse_apply(self.op, self.cert, self.atlas_T, G, self.point(x, j), self.budget.K)

    def h(self, x: Vector) -> Vector:
        """h(x) = x + u_0(x)."""
        return x + self.forward_defect(x, 0).value

    # Inverse defect

    @property
    def inverse_budget(self) -> ErrorBudget:
        if self._inverse_budget is None:
            self._inverse_budget = plan_budget(
                self.cert, self.perturbations, self.tau, DefectMode.INVERSE, self.max_K, self.max_m
            )
        return self._inverse_budget

    @property
    def atlas_S(self) -> OrbitAtlas:
        if self._atlas_S is None:
            tol = orbit_tolerance(self.cert, self.perturbations, self.inverse_budget.K)
            logger.debug(f"Backward S-orbits solved to tolerance {tol:.3g}")
            self._atlas_S = OrbitAtlas.for_S(self.op, self.perturbations, tol)
        return self._atlas_S

    def _inverse_element(self) -> FunElem:
        if self._v_elem is None:
            K = self.inverse_budget.K

            def evaluator(pt: TorusPoint) -> Vector:
                if self.perturbations.is_zero():
                    return self.op.zero()
                return -psi_inverse_apply(self.op, self.cert, self.atlas_S, self._lbar, pt, K).value

            self._v_elem = FunElem(
                FunctionSpace.F,
                evaluator,
                self.franks * self.perturbations.max_sup,
                cache=self.cache,
                tag=("V",),
            )
        return self._v_elem

    def inverse_defect(self, x: Vector, j: int = 0) -> DefectValue:
        """v_j(x) of V = -Psi_2^-1(L-bar)."""
        return DefectValue(self._inverse_element().value(self.point(x, j)), self.inverse_budget.certified_error)

    def h_inverse(self, x: Vector) -> Vector:
        """h^-1(x) = x + v_0(x)."""
        return x + self.inverse_defect(x, 0).value

    def phi2_zero_residual(self, x: Vector, j: int = 0) -> float:
        """|Psi_2^-1(Phi_2(O_F))(x, j)|, which vanishes since O_F is the fixed point of Psi_2^-1 o Phi_2."""
        G = phi_element(PhiKind.PHI2, self.perturbations, zero_element(FunctionSpace.F, self.op))
        K = self.inverse_budget.K
        return psi_inverse_apply(self.op, self.cert, self.atlas_S, G, self.point(x, j), K).value.sup_norm()

    def composed_map(self, x: Vector) -> Vector:
        """(S_(p-1) o ... o S_0)(x)."""
        for j in range(self.p):
            x = self.op.apply(x) + self.perturbations[j](x)
        return x

    def stats(self) -> dict:
        return {
            "cache_entries": len(self.cache),
            "cache_hits": self.cache.hits,
            "orbit_points": len(self.atlas_T),
        }


def solve_forward_defect(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    pt: TorusPoint,
    budget: ErrorBudget
) -> DefectValue:
    """u_j(x) at pt = (x, j) under an explicit budget."""
    solver = ConjugacySolver(op, cert, perturbations, budget.tau, budget=budget)
    return solver.forward_defect(pt.x, pt.j)


def conjugacy_h(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    x: Vector,
    tau: float
) -> Vector:
    return ConjugacySolver(op, cert, perturbations, tau).h(x)


def solve_inverse_defect(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    pt: TorusPoint,
    budget: ErrorBudget
) -> DefectValue:
    """v_j(x) at pt = (x, j) under an explicit inverse budget."""
    solver = ConjugacySolver(op, cert, perturbations, budget.tau, inverse_budget=budget)
    return solver.inverse_defect(pt.x, pt.j)


def conjugacy_h_inverse(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    x: Vector,
    tau: float
) -> Vector:
    return ConjugacySolver(op, cert, perturbations, tau).h_inverse(x)


__all__ = [
    'DefectMode',
    'PhiKind',
    'ErrorBudget',
    'plan_budget',
    'orbit_reach',
    'check_orbit_reach',
    'orbit_tolerance',
    'SeriesValue',
    'DefectValue',
    'psi_inverse_apply',
    'phi_apply',
    'phi_element',
    'ConjugacySolver',
    'solve_forward_defect',
    'conjugacy_h',
    'solve_inverse_defect',
    'conjugacy_h_inverse'
]
