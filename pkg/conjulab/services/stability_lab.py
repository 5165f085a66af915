"""
Verification suites: conjugacy residuals, the inverse pair, the Franks bound, Lipschitz
dependence on the perturbation, the series inverse, contraction and doubling behaviour,
Y-membership, and uniqueness / non-uniqueness of the conjugacy.

Sup-norm claims are checked as sampled lower bounds against certified upper bounds; every
report carries both numbers.
"""

import math
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel

from conjulab.core.config import settings
from conjulab.core.exceptions import ConfigurationError, NotHyperbolicError
from conjulab.model.mapping_torus import OrbitAtlas, TorusPoint, lbar_element
from conjulab.model.operators import (
    HyperbolicityCertificate, SplitOperator, correspondence_lip_constant, epsilon_threshold
)
from conjulab.model.perturbations import (
    AdmissibilityMode, ConstantMap, PerturbationTuple, SineMap, SumMap, tuple_distance
)
from conjulab.model.vectorspace import DenseVector, SpaceFamily, SparseVector, Vector
from conjulab.schemas.report import ResidualReport
from conjulab.services.conjugacy import ConjugacySolver, orbit_tolerance, psi_inverse_apply
from conjulab.utils.helpers import AsyncBatchProcessor, Stopwatch


class VerificationContext(BaseModel):
    """Bookkeeping shared by the verifiers of one scenario."""
    scenario_id: str = "adhoc"
    seed: int = settings.DEFAULT_SEED
    jobs: int = settings.DEFAULT_JOBS
    delta: Optional[float] = None
    mode: AdmissibilityMode = AdmissibilityMode.A
    max_K: Optional[int] = None
    max_m: Optional[int] = None


class FixedPointResult(NamedTuple):
    z: Vector
    residual: float
    residual_bound: float


async def _map_samples(func: Callable, items: Sequence, jobs: int) -> List:
    jobs = max(1, jobs)
    batch_size = max(1, math.ceil(len(items) / (4 * jobs)))
    processor = AsyncBatchProcessor(batch_size=batch_size, max_concurrent=jobs)
    return await processor.process(list(items), func)


def _make_solver(op, cert, perturbations, tau, context: VerificationContext) -> ConjugacySolver:
    return ConjugacySolver(
        op, cert, perturbations, tau,
        delta=context.delta, mode=context.mode, max_K=context.max_K, max_m=context.max_m,
    )


def _composition_lipschitz(op: SplitOperator, perturbations: PerturbationTuple) -> float:
    """Lip(S_(p-1) o ... o S_0) <= prod_j (||T|| + Lip(L_j))."""
    factor = 1.0
    for L in perturbations.maps:
        factor *= op.norm() + L.lip_bound
    return factor


def _conjugacy_lipschitz(
    cert: HyperbolicityCertificate, perturbations: PerturbationTuple, delta: Optional[float]
) -> float:
    """
    Lip(h) <= 1 + corr(delta) max_j Lip(L_j); h is a translation when every L_j is constant.

    Without a scenario delta, the least delta with max_j Lip(L_j) <= eps(delta) is used.
    """
    lam = perturbations.max_lip
    if lam == 0.0:
        return 1.0
    if delta is None:
        delta = 0.5 * lam / epsilon_threshold(cert, 0.5)
    return 1.0 + correspondence_lip_constant(cert, delta) * lam


def _report(
    verifier: str,
    context: VerificationContext,
    p: int,
    residuals: List[float],
    bound: float,
    stopwatch: Stopwatch,
    solver: Optional[ConjugacySolver] = None,
    flags: Optional[List[str]] = None,
    extra: Optional[dict] = None,
    passed: Optional[bool] = None
) -> ResidualReport:
    max_residual = max(residuals) if residuals else 0.0
    if passed is None:
        passed = max_residual <= bound
    mode = None
    budget = {}
    if solver is not None:
        mode = solver.admissibility.value if solver.admissibility else None
        budget = {"tau": solver.tau, "K": solver.budget.K, "m": solver.budget.m,
                  "certified_error": solver.budget.certified_error}
    report = ResidualReport(
        scenario=context.scenario_id,
        verifier=verifier,
        mode=mode,
        p=p,
        samples=len(residuals),
        residuals=residuals,
        max_residual=max_residual,
        bound=bound,
        passed=passed,
        seed=context.seed,
        budget=budget,
        wall_time=stopwatch.elapsed,
        flags=flags or [],
        extra=extra or {},
    )
    level = "INFO" if passed else "WARNING"
    logger.log(level, f"[{context.scenario_id}] {verifier}: max residual {max_residual:.3g} vs bound {bound:.3g}")
    return report


async def verify_conjugacy(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """
    Residuals ||(S_(p-1) o ... o S_0)(h(x)) - h(T^p x)||.

    With e the certified error of h, the residual is at most (Lip(S^p) + 1) e.
    """
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)
    p = perturbations.p

    def residual(x: Vector) -> float:
        lhs = solver.composed_map(solver.h(x))
        rhs = solver.h(op.power(x, p))
        return (lhs - rhs).sup_norm()

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, samples, context.jobs)
    bound = (_composition_lipschitz(op, perturbations) + 1.0) * solver.budget.certified_error + settings.NUMERIC_SLACK
    return _report("conjugacy", context, p, residuals, bound, sw, solver)


async def verify_inverse_pair(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """Residuals max(||h^-1(h(x)) - x||, ||h(h^-1(x)) - x||)."""
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)

    def residual(x: Vector) -> float:
        there = (solver.h_inverse(solver.h(x)) - x).sup_norm()
        back = (solver.h(solver.h_inverse(x)) - x).sup_norm()
        return max(there, back)

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, samples, context.jobs)
    errors = solver.budget.certified_error + solver.inverse_budget.certified_error
    bound = 2.0 * errors + settings.NUMERIC_SLACK
    return _report("inverse_pair", context, perturbations.p, residuals, bound, sw, solver,
                   extra={"inverse_K": solver.inverse_budget.K})


async def verify_franks_bound(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """
    Sampled ||h(x) - x|| against C max_j sup L_j + tau.

    For mode-B tuples the report also checks the closeness ||h - I|| < delta.
    """
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)

    def residual(x: Vector) -> float:
        return solver.forward_defect(x, 0).value.sup_norm()

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, samples, context.jobs)
    franks_bound = solver.franks * perturbations.max_sup
    bound = franks_bound + solver.budget.certified_error + settings.NUMERIC_SLACK

    flags = []
    extra = {"franks_constant": solver.franks, "franks_bound": franks_bound}
    passed = (max(residuals) if residuals else 0.0) <= bound
    if solver.admissibility == AdmissibilityMode.B and context.delta is not None:
        close = (max(residuals) if residuals else 0.0) < context.delta
        extra["closeness_delta"] = context.delta
        extra["closeness_holds"] = close
        if not close:
            flags.append("mode B closeness ||h - I|| < delta violated")
        passed = passed and close
    return _report("franks", context, perturbations.p, residuals, bound, sw, solver,
                   flags=flags, extra=extra, passed=passed)


async def verify_correspondence_lip(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    other: PerturbationTuple,
    delta: float,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None
) -> ResidualReport:
    """||h_L(x) - h_L'(x)|| against 2ab(1+t)/((1-delta)(1-t)) D(L, L') + both certified errors."""
    context = context or VerificationContext()
    context = context.model_copy(update={"delta": delta})
    first = _make_solver(op, cert, perturbations, tau, context)
    second = _make_solver(op, cert, other, tau, context)

    def residual(x: Vector) -> float:
        return (first.h(x) - second.h(x)).sup_norm()

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, samples, context.jobs)
        distance = tuple_distance(perturbations, other, samples)

    constant = correspondence_lip_constant(cert, delta)
    bound = (
        constant * distance.upper
        + first.budget.certified_error + second.budget.certified_error
        + settings.NUMERIC_SLACK
    )
    observed = max(residuals) if residuals else 0.0
    extra = {
        "lip_constant": constant,
        "distance_upper": distance.upper,
        "distance_lower": distance.lower,
        "ratio": observed / distance.upper if distance.upper > 0 else 0.0,
    }
    flags = ["sampled"] if distance.sampled else []
    return _report("correspondence", context, perturbations.p, residuals, bound, sw, first,
                   flags=flags, extra=extra)


async def verify_series_roundtrip(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    K: int,
    use_S: bool = False,
    context: Optional[VerificationContext] = None
) -> ResidualReport:
    """
    Psi(Psi^-1(G)) = G for G = L-bar: residuals ||F(R(x, j)) - T F(x, j) - G(x, j)||.

    Truncated sums telescope to the two boundary terms T^K P_M G(R^-K pt) and
    T^-K P_N G(R^K pt), so the residual is at most 2 a b t^K |G|_inf.
    """
    context = context or VerificationContext()
    p = perturbations.p
    if use_S:
        atlas = OrbitAtlas.for_S(op, perturbations, orbit_tolerance(cert, perturbations, K))
    else:
        atlas = OrbitAtlas.for_T(op)
    G = lbar_element(perturbations)
    points = [TorusPoint(x, i % p, p) for i, x in enumerate(samples)]

    def residual(pt: TorusPoint) -> float:
        here = psi_inverse_apply(op, cert, atlas, G, pt, K).value
        there = psi_inverse_apply(op, cert, atlas, G, atlas.shift(pt, 1), K).value
        return (there - op.apply(here) - G.value(pt)).sup_norm()

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, points, context.jobs)
    bound = 2.0 * cert.a * cert.b * cert.t ** K * G.sup_bound + settings.NUMERIC_SLACK
    verifier = "series_roundtrip_S" if use_S else "series_roundtrip_T"
    return _report(verifier, context, p, residuals, bound, sw, extra={"K": K})


async def verify_contraction_rate(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None,
    min_depth: int = 4
) -> ResidualReport:
    """
    Observed ratios sup|U_(d+1) - U_d| / sup|U_d - U_(d-1)| against delta + 0.05.

    Ratios whose denominator is below ten times the series truncation error are skipped.
    """
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)
    budget = solver.budget
    depth = max(budget.m, min_depth)

    def differences(x: Vector) -> List[float]:
        values = [solver.iterate(x, 0, d) for d in range(depth + 1)]
        return [(values[d] - values[d - 1]).sup_norm() for d in range(1, depth + 1)]

    with Stopwatch() as sw:
        per_sample = await _map_samples(differences, samples, context.jobs)
    sups = np.max(np.array(per_sample), axis=0) if per_sample else np.zeros(depth)

    contraction = budget.contraction
    series_error = budget.franks * budget.sigma * budget.t ** budget.K / (1.0 - contraction)
    floor = 10.0 * series_error + settings.NUMERIC_SLACK
    ratios = [float(sups[d + 1] / sups[d]) for d in range(len(sups) - 1) if sups[d] > floor]

    flags = [] if ratios else ["no measurable ratios"]
    extra = {"contraction": contraction, "step_sups": [float(s) for s in sups]}
    return _report("contraction", context, perturbations.p, ratios, contraction + 0.05, sw, solver,
                   flags=flags, extra=extra)


async def verify_doubling(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """h under (K, m) against h under (2K, 2m); the gap must stay below the smaller budget's error."""
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)
    finer = ConjugacySolver(op, cert, perturbations, tau, budget=solver.budget.doubled())

    def residual(x: Vector) -> float:
        return (solver.h(x) - finer.h(x)).sup_norm()

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, samples, context.jobs)
    bound = solver.budget.certified_error + settings.NUMERIC_SLACK
    extra = {"doubled_K": finer.budget.K, "doubled_m": finer.budget.m,
             "doubled_error": finer.budget.certified_error}
    return _report("doubling", context, perturbations.p, residuals, bound, sw, solver, extra=extra)


async def verify_membership_Y(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """
    The defect's M-series lies in M and its N-series in T^-1(N), so u_0(x) lies in
    Y = M + T^-1(N). Residual: max(||P_N m_part||, ||P_M T n_part||).
    """
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)

    def residual(x: Vector) -> float:
        series = solver.forward_series(x, 0)
        off_M = op.proj_N(series.m_part).sup_norm()
        off_TN = op.proj_M(op.apply(series.n_part)).sup_norm()
        return max(off_M, off_TN)

    with Stopwatch() as sw:
        residuals = await _map_samples(residual, samples, context.jobs)
    extra = {"hyperbolic": op.is_hyperbolic}
    return _report("membership_Y", context, perturbations.p, residuals, settings.NUMERIC_SLACK, sw, solver,
                   extra=extra)


def fixed_point_vector(op: SplitOperator, cert: HyperbolicityCertificate, y: Vector, K: int) -> FixedPointResult:
    """
    z = sum_(|n|<=K) T^n y for nonzero y in M and T(N): a fixed point of T up to the tails.

    Tz - z = T^(K+1) y - T^-K y with y in M and T^-1 y in N, so
    ||Tz - z|| <= a t^(K+1) ||y|| + a t^(K-1) ||T^-1 y||.
    """
    if op.is_hyperbolic:
        raise NotHyperbolicError("fixed-point vectors need a generalized hyperbolic operator that is not hyperbolic")
    if K < 1:
        raise ConfigurationError("fixed-point window K must be positive")
    if y.is_zero():
        raise ConfigurationError("y must be nonzero")
    back = op.apply_inverse(y)
    if not op.proj_N(y).is_zero() or not op.proj_M(back).is_zero():
        raise ConfigurationError("y must lie in M and in T(N)")

    z = y
    forward, backward = y, y
    for _ in range(K):
        forward = op.apply(forward)
        backward = op.apply_inverse(backward)
        z = z + forward + backward

    residual = (op.apply(z) - z).sup_norm()
    bound = cert.a * cert.t ** (K + 1) * y.sup_norm() + cert.a * cert.t ** (K - 1) * back.sup_norm()
    logger.info(f"Fixed-point vector on window K={K}: residual {residual:.3g}, bound {bound:.3g}")
    return FixedPointResult(z, residual, bound)


async def nonuniqueness_family(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    fixed_point: FixedPointResult,
    lam: float,
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """
    Conjugacy residuals of h_lambda(x) = h(x + lambda z), with h_lambda^-1(x) = h^-1(x) - lambda z.

    Also reports the distinctness sup ||h_lambda - h|| and the estimate
    ||h_lambda - I|| <= ||h - I|| + |lambda| ||z||.
    """
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)
    p = perturbations.p
    z = fixed_point.z
    shift = z * lam

    def h_lam(x: Vector) -> Vector:
        return solver.h(x + shift)

    def evaluate(x: Vector) -> tuple:
        conj = (solver.composed_map(h_lam(x)) - h_lam(op.power(x, p))).sup_norm()
        hx = solver.h(x)
        apart = (h_lam(x) - hx).sup_norm()
        drift = (h_lam(x) - x).sup_norm()
        base_drift = (hx - x).sup_norm()
        return conj, apart, drift, base_drift

    with Stopwatch() as sw:
        results = await _map_samples(evaluate, samples, context.jobs)

    residuals = [r[0] for r in results]
    distinctness = max(r[1] for r in results) if results else 0.0
    drift = max(r[2] for r in results) if results else 0.0
    base_drift = max(r[3] for r in results) if results else 0.0
    at_zero = (h_lam(op.zero()) - solver.h(op.zero())).sup_norm()

    # ||T^p z - z|| <= sum_(i<p) ||T||^i ||Tz - z||
    drift_bound = abs(lam) * sum(op.norm() ** i for i in range(p)) * fixed_point.residual_bound
    certified = solver.budget.certified_error
    # |h(a) - h(b)| <= min(Lip(h) |a - b|, |a - b| + 2 ||h - I||)
    lip_h = _conjugacy_lipschitz(cert, perturbations, context.delta)
    defect_sup = solver.franks * perturbations.max_sup + certified
    shift_term = min(lip_h * drift_bound, drift_bound + 2.0 * defect_sup)
    bound = (
        (_composition_lipschitz(op, perturbations) + 1.0) * certified
        + shift_term
        + settings.NUMERIC_SLACK
    )
    extra = {
        "lambda": lam,
        "z_norm": z.sup_norm(),
        "distinctness": distinctness,
        "distinctness_at_zero": at_zero,
        "h_lambda_minus_identity": drift,
        "closeness_estimate": base_drift + abs(lam) * z.sup_norm() + 2.0 * certified,
        "lip_h_estimate": lip_h,
        "shift_term": shift_term,
    }
    flags = []
    if drift > extra["closeness_estimate"] + settings.NUMERIC_SLACK:
        flags.append("closeness estimate violated")
    if lam != 0.0 and not distinctness > 0.0:
        flags.append("h_lambda coincides with h")
    if abs(at_zero - abs(lam) * z.sup_norm()) > 2.0 * certified + settings.NUMERIC_SLACK:
        flags.append("h_lambda(0) - h(0) differs from lambda z")
    return _report(f"nonuniqueness[{lam:g}]", context, p, residuals, bound, sw, solver, flags=flags, extra=extra,
                   passed=(max(residuals) if residuals else 0.0) <= bound and not flags)


async def uniqueness_witness_check(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    perturbations: PerturbationTuple,
    g: Callable[[Vector], Vector],
    samples: Sequence[Vector],
    tau: float,
    context: Optional[VerificationContext] = None,
    solver: Optional[ConjugacySolver] = None
) -> ResidualReport:
    """
    Witness check for a candidate conjugacy g with bounded g - I on a hyperbolic operator.

    Builds b_0 = g - I and b_j(x) = T b_(j-1)(T^-1 x) + L_(j-1)(T^-1 x + b_(j-1)(T^-1 x)),
    then evaluates the defect Psi_1(B) - Phi_1(B) at (x, j) for every fiber. A candidate that
    conjugates makes B a fixed point of Psi_1^-1 o Phi_1, hence equal to U; the sampled
    ||g - h|| is reported next to that consequence.
    """
    if not op.is_hyperbolic:
        raise NotHyperbolicError("uniqueness check refused: operator is not hyperbolic (uniqueness fails there)")
    context = context or VerificationContext()
    solver = solver or _make_solver(op, cert, perturbations, tau, context)
    p = perturbations.p

    def b(j: int, x: Vector) -> Vector:
        if j == 0:
            return g(x) - x
        y = op.apply_inverse(x)
        previous = b(j - 1, y)
        return op.apply(previous) + perturbations[j - 1](y + previous)

    def evaluate(x: Vector) -> tuple:
        worst = 0.0
        for j in range(p):
            bj = b(j, x)
            defect = b((j + 1) % p, op.apply(x)) - op.apply(bj) - perturbations[j](x + bj)
            worst = max(worst, defect.sup_norm())
        gap = (g(x) - solver.h(x)).sup_norm()
        return worst, gap

    with Stopwatch() as sw:
        results = await _map_samples(evaluate, samples, context.jobs)
    residuals = [r[0] for r in results]
    gap = max(r[1] for r in results) if results else 0.0

    certified = solver.budget.certified_error
    bound = (_composition_lipschitz(op, perturbations) + 1.0) * certified + settings.NUMERIC_SLACK
    max_defect = max(residuals) if residuals else 0.0
    witness = max_defect <= bound
    contraction = solver.budget.contraction
    extra = {
        "witness": witness,
        "gap_to_h": gap,
        "gap_bound": solver.franks * max_defect / (1.0 - contraction) + certified + settings.NUMERIC_SLACK,
    }
    flags = [] if witness else ["not a conjugacy witness"]
    if gap > extra["gap_bound"]:
        flags.append("gap to h exceeds its bound")
    return _report("uniqueness", context, p, residuals, bound, sw, solver, flags=flags, extra=extra,
                   passed=witness and gap <= extra["gap_bound"])


def random_admissible_tuple(
    op: SplitOperator,
    cert: HyperbolicityCertificate,
    delta: float,
    p: int,
    rng: np.random.Generator,
    fraction: float = 0.5
) -> PerturbationTuple:
    """
    Random sine-plus-constant tuple that is mode-B admissible for eps(delta).

    Each L_j has Lip and sup at most fraction * eps.
    """
    if not 0 < fraction < 1:
        raise ConfigurationError("fraction must lie in (0, 1)")
    eps = epsilon_threshold(cert, delta)
    scale = fraction * eps
    maps = []
    for _ in range(p):
        amplitude = 0.5 * scale * rng.uniform(0.2, 1.0)
        frequency = rng.uniform(0.5, 1.0)
        if op.family == SpaceFamily.DENSE:
            n = op.dimension
            i, target = int(rng.integers(n)), int(rng.integers(n))
            c = DenseVector(rng.uniform(-0.5 * scale, 0.5 * scale, size=n))
        else:
            center = getattr(op, "m0", 0)
            i, target = (int(v) for v in rng.integers(center - 2, center + 3, size=2))
            c = SparseVector({int(rng.integers(center - 2, center + 3)): rng.uniform(-0.5 * scale, 0.5 * scale)})
        sine = SineMap(op.family, i, amplitude, frequency, target, getattr(op, "dimension", None))
        maps.append(SumMap([sine, ConstantMap(c)]))
    tuple_ = PerturbationTuple(maps)
    tuple_.check_admissible(eps, AdmissibilityMode.B)
    return tuple_


__all__ = [
    'VerificationContext',
    'FixedPointResult',
    'verify_conjugacy',
    'verify_inverse_pair',
    'verify_franks_bound',
    'verify_correspondence_lip',
    'verify_series_roundtrip',
    'verify_contraction_rate',
    'verify_doubling',
    'verify_membership_Y',
    'fixed_point_vector',
    'nonuniqueness_family',
    'uniqueness_witness_check',
    'random_admissible_tuple'
]
