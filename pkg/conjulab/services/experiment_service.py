"""
Scenario-level orchestration behind the CLI commands: constants, solve, verify and sweep.
"""

import asyncio
from typing import List

from loguru import logger

from conjulab.model.operators import correspondence_lip_constant, epsilon_threshold, franks_constant
from conjulab.model.perturbations import AdmissibilityMode, PerturbationTuple
from conjulab.schemas.report import ConstantsReport, ResidualReport, SolveReport, SweepRow
from conjulab.schemas.scenario import SweepAxis, VerifierName
from conjulab.services.conjugacy import ConjugacySolver
from conjulab.services.scenario_service import ScenarioContext, build_tuple
from conjulab.services.stability_lab import (
    VerificationContext, fixed_point_vector, nonuniqueness_family, uniqueness_witness_check,
    verify_conjugacy, verify_contraction_rate, verify_correspondence_lip, verify_doubling,
    verify_franks_bound, verify_inverse_pair, verify_membership_Y, verify_series_roundtrip
)
from conjulab.utils.helpers import Stopwatch


def _verification_context(ctx: ScenarioContext, jobs: int) -> VerificationContext:
    scenario = ctx.scenario
    return VerificationContext(
        scenario_id=scenario.id,
        seed=ctx.seed,
        jobs=jobs,
        delta=scenario.delta,
        mode=AdmissibilityMode(scenario.mode),
        max_K=scenario.budget.max_K,
        max_m=scenario.budget.max_m,
    )


def _solver(ctx: ScenarioContext, perturbations: PerturbationTuple = None, **overrides) -> ConjugacySolver:
    scenario = ctx.scenario
    options = dict(
        delta=scenario.delta,
        mode=AdmissibilityMode(scenario.mode),
        max_K=scenario.budget.max_K,
        max_m=scenario.budget.max_m,
    )
    options.update(overrides)
    if perturbations is None:
        perturbations = ctx.perturbations
    return ConjugacySolver(ctx.op, ctx.cert, perturbations, scenario.budget.tau, **options)


def constants_report(ctx: ScenarioContext) -> ConstantsReport:
    cert = ctx.cert
    delta = ctx.scenario.delta
    return ConstantsReport(
        scenario=ctx.id,
        kind=ctx.op.kind.value,
        a=cert.a,
        t=cert.t,
        b=cert.b,
        inv=cert.inv_norm,
        n0=cert.n0,
        op_norm=cert.op_norm,
        hyperbolic=ctx.op.is_hyperbolic,
        delta=delta,
        eps=epsilon_threshold(cert, delta),
        C=franks_constant(cert),
        corr=correspondence_lip_constant(cert, delta),
    )


async def solve_scenario(ctx: ScenarioContext, jobs: int = 1) -> List[SolveReport]:
    """h(x) and h^-1(x) at the scenario's points (its samples when none are listed)."""
    solver = _solver(ctx)
    points = ctx.points() or ctx.samples()
    logger.info(f"[{ctx.id}] Solving at {len(points)} point(s) with K={solver.budget.K}, m={solver.budget.m}")

    def solve_one(x):
        with Stopwatch() as sw:
            hx = solver.h(x)
            hinv = solver.h_inverse(x)
        return SolveReport(
            scenario=ctx.id,
            point=x.to_json(),
            h=hx.to_json(),
            h_error=solver.budget.certified_error,
            h_inverse=hinv.to_json(),
            h_inverse_error=solver.inverse_budget.certified_error,
            K=solver.budget.K,
            m=solver.budget.m,
            mode=solver.admissibility.value if solver.admissibility else None,
            wall_time=sw.elapsed,
        )

    results = []
    for x in points:
        results.append(await asyncio.to_thread(solve_one, x))
    return results


async def verify_scenario(ctx: ScenarioContext, jobs: int = 1) -> List[ResidualReport]:
    """Run the scenario's verifier set."""
    scenario = ctx.scenario
    context = _verification_context(ctx, jobs)
    solver = _solver(ctx)
    samples = ctx.samples()
    op, cert, tau = ctx.op, ctx.cert, scenario.budget.tau
    reports: List[ResidualReport] = []

    logger.info(f"[{ctx.id}] Step 1: admissibility mode {solver.admissibility.value}, {len(samples)} samples")
    for step, name in enumerate(scenario.verifiers, start=2):
        logger.info(f"[{ctx.id}] Step {step}: {name.value}...")
        if name == VerifierName.CONJUGACY:
            reports.append(await verify_conjugacy(op, cert, ctx.perturbations, samples, tau, context, solver))
        elif name == VerifierName.INVERSE_PAIR:
            reports.append(await verify_inverse_pair(op, cert, ctx.perturbations, samples, tau, context, solver))
        elif name == VerifierName.FRANKS:
            reports.append(await verify_franks_bound(op, cert, ctx.perturbations, samples, tau, context, solver))
        elif name == VerifierName.CORRESPONDENCE:
            reports.append(await verify_correspondence_lip(
                op, cert, ctx.perturbations, ctx.alt_perturbations, scenario.delta, samples, tau, context
            ))
        elif name == VerifierName.SERIES_ROUNDTRIP:
            K = solver.budget.K
            reports.append(await verify_series_roundtrip(op, cert, ctx.perturbations, samples, K, False, context))
            reports.append(await verify_series_roundtrip(op, cert, ctx.perturbations, samples, K, True, context))
        elif name == VerifierName.CONTRACTION:
            reports.append(await verify_contraction_rate(op, cert, ctx.perturbations, samples, tau, context, solver))
        elif name == VerifierName.DOUBLING:
            reports.append(await verify_doubling(op, cert, ctx.perturbations, samples, tau, context, solver))
        elif name == VerifierName.MEMBERSHIP_Y:
            reports.append(await verify_membership_Y(op, cert, ctx.perturbations, samples, tau, context, solver))
        elif name == VerifierName.NONUNIQUENESS:
            spec = scenario.nonuniqueness
            fixed_point = fixed_point_vector(op, cert, ctx.nonuniqueness_seed(), spec.K if spec else 40)
            for lam in (spec.lambdas if spec else [0.1, 1.0]):
                reports.append(await nonuniqueness_family(
                    op, cert, ctx.perturbations, fixed_point, lam, samples, tau, context, solver
                ))
        elif name == VerifierName.UNIQUENESS:
            reports.append(await uniqueness_witness_check(
                op, cert, ctx.perturbations, solver.h, samples, tau, context, solver
            ))

    logger.info(f"[{ctx.id}] {sum(r.passed for r in reports)}/{len(reports)} verifier(s) passed; {solver.stats()}")
    return reports


def _sweep_tuple(ctx: ScenarioContext, fraction: float) -> PerturbationTuple:
    """Rescale the tuple so its largest Lipschitz bound (or sup bound) is fraction * eps."""
    eps = epsilon_threshold(ctx.cert, ctx.scenario.delta)
    tuple_ = ctx.perturbations
    reference = tuple_.max_lip or tuple_.max_sup
    if reference == 0.0:
        return tuple_
    return tuple_.scaled(fraction * eps / reference)


async def sweep_scenario(ctx: ScenarioContext, jobs: int = 1) -> List[SweepRow]:
    """One row per axis value: conjugacy residual, its bound, wall time and contraction ratio."""
    scenario = ctx.scenario
    sweep = scenario.sweep
    if sweep is None:
        logger.warning(f"[{ctx.id}] no sweep section; skipped")
        return []
    context = _verification_context(ctx, jobs)
    samples = ctx.samples()
    rows = []

    for value in sweep.values:
        perturbations = ctx.perturbations
        overrides = {}
        if sweep.axis == SweepAxis.EPS_FRACTION:
            perturbations = _sweep_tuple(ctx, value)
        elif sweep.axis == SweepAxis.P:
            perturbations = build_tuple(ctx.op, scenario.perturbations[:1], int(value))
        elif sweep.axis in (SweepAxis.K, SweepAxis.M):
            base = _solver(ctx).budget
            K = int(value) if sweep.axis == SweepAxis.K else base.K
            m = int(value) if sweep.axis == SweepAxis.M else base.m
            overrides["budget"] = base.model_copy(update={"K": K, "m": m, "certified_error": base.error_for(K, m)})

        solver = _solver(ctx, perturbations, **overrides)
        with Stopwatch() as sw:
            report = await verify_conjugacy(ctx.op, ctx.cert, perturbations, samples, scenario.budget.tau,
                                            context, solver)
            contraction = await verify_contraction_rate(ctx.op, ctx.cert, perturbations, samples,
                                                        scenario.budget.tau, context, solver)
        rows.append(SweepRow(
            scenario=ctx.id,
            axis=sweep.axis.value,
            value=value,
            max_residual=report.max_residual,
            bound=report.bound,
            wall_time=sw.elapsed,
            contraction_ratio=contraction.max_residual if contraction.residuals else None,
            passed=report.passed and contraction.passed,
        ))
        logger.info(f"[{ctx.id}] sweep {sweep.axis.value}={value:g}: residual {report.max_residual:.3g}")
    return rows


__all__ = [
    'constants_report',
    'solve_scenario',
    'verify_scenario',
    'sweep_scenario'
]
