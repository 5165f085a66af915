"""
conjulab - command-line entry point.
Certifies constants, evaluates conjugacies and runs the verification lab on scenario files.

    python -m conjulab.main verify --config scenarios/closed_form.json --out results
"""

import argparse
import asyncio
import csv
import sys
from pathlib import Path
from typing import Callable, List, Optional

from loguru import logger

from conjulab.core.config import settings, validate_settings
from conjulab.core.exceptions import BudgetInfeasibleError, ConjulabError
from conjulab.schemas.scenario import ScenarioFile
from conjulab.services.experiment_service import (
    constants_report, solve_scenario, sweep_scenario, verify_scenario
)
from conjulab.services.scenario_service import ScenarioContext, load_scenario_file

# Constants
APP_NAME = settings.APP_NAME
APP_VERSION = settings.APP_VERSION

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1

SWEEP_COLUMNS = ["scenario", "axis", "value", "max_residual", "bound", "wall_time", "contraction_ratio", "pass"]


def configure_logging(level: Optional[str] = None) -> None:
    """Console sink always; rotating file sinks when LOG_TO_FILE is set."""
    level = (level or settings.LOG_LEVEL).upper()
    logger.remove()

    # Console logging with colors
    logger.add(
        sys.stdout,
        level=level,
        format=settings.LOG_FORMAT,
        colorize=True
    )

    if not settings.LOG_TO_FILE:
        return

    # File logging
    logger.add(
        settings.LOG_FILE,
        level=level,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
        rotation=settings.LOG_ROTATION,
        retention=settings.LOG_RETENTION,
        enqueue=True  # Thread-safe logging
    )

    # Solver internals (budgets, cache statistics)
    logger.add(
        "logs/solver.log",
        level="DEBUG",
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | SOLVER | {message}",
        rotation="50 MB",
        retention="7 days",
        enqueue=True,
        filter=lambda record: record["name"].startswith("conjulab.services.conjugacy")
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description="Conjugacy laboratory for generalized hyperbolic operators")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "constants": "certify (a, t, b), eps(delta), C and the correspondence constant",
        "solve": "evaluate h and h^-1 at the scenario points",
        "verify": "run the scenario verifiers and append to report.jsonl",
        "sweep": "vary one parameter and write sweep.csv",
    }
    for name, text in helps.items():
        command = sub.add_parser(name, help=text)
        command.add_argument("--config", required=True, type=Path, help="scenario file (JSON)")
        command.add_argument("--out", type=Path, default=Path(settings.OUTPUT_DIR), help="output directory")
        command.add_argument("--seed", type=int, default=None, help="override every scenario's sample seed")
        command.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS, help="parallel workers")
        command.add_argument("--scenario", action="append", default=None, help="only run these scenario ids")
    return parser


def _contexts(scenario_file: ScenarioFile, seed: Optional[int], only: Optional[List[str]]) -> List[ScenarioContext]:
    scenarios = scenario_file.scenarios
    if only:
        scenarios = [s for s in scenarios if s.id in only]
        missing = sorted(set(only) - {s.id for s in scenarios})
        if missing:
            logger.warning(f"Unknown scenario id(s): {', '.join(missing)}")
    return [ScenarioContext(s, seed) for s in scenarios]


async def _gather_ordered(contexts: List[ScenarioContext], run: Callable, jobs: int) -> List:
    """Run scenarios concurrently; results come back in scenario-id order."""
    semaphore = asyncio.Semaphore(max(1, jobs))

    async def guarded(ctx: ScenarioContext):
        async with semaphore:
            return ctx.id, await run(ctx, jobs)

    results = await asyncio.gather(*(guarded(ctx) for ctx in contexts))
    ordered = []
    for _, rows in sorted(results, key=lambda item: item[0]):
        ordered.extend(rows)
    return ordered


def _write_jsonl(path: Path, models: list, append: bool = False) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a" if append else "w", encoding="utf-8", newline="\n") as handle:
        for model in models:
            # non-finite floats are written as null
            handle.write(model.model_dump_json(by_alias=True) + "\n")
    logger.info(f"Wrote {len(models)} record(s) to {path}")


def _write_sweep_csv(path: Path, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump(by_alias=True))
    logger.info(f"Wrote {len(rows)} sweep row(s) to {path}")


async def cmd_constants(args, scenario_file: ScenarioFile) -> int:
    contexts = _contexts(scenario_file, args.seed, args.scenario)
    reports = sorted((constants_report(ctx) for ctx in contexts), key=lambda r: r.scenario)
    for report in reports:
        logger.info(
            f"[{report.scenario}] a={report.a:g} t={report.t:g} b={report.b:g} inv={report.inv:g} "
            f"eps={report.eps:g} C={report.C:g} corr={report.corr:g}"
        )
    _write_jsonl(args.out / "constants.jsonl", reports)
    return EXIT_OK


async def cmd_solve(args, scenario_file: ScenarioFile) -> int:
    contexts = _contexts(scenario_file, args.seed, args.scenario)
    reports = await _gather_ordered(contexts, solve_scenario, args.jobs)
    _write_jsonl(args.out / "solve.jsonl", reports)
    return EXIT_OK


async def cmd_verify(args, scenario_file: ScenarioFile) -> int:
    contexts = _contexts(scenario_file, args.seed, args.scenario)
    reports = await _gather_ordered(contexts, verify_scenario, args.jobs)
    _write_jsonl(args.out / "report.jsonl", reports, append=True)

    failed = [f"{r.scenario}:{r.verifier}" for r in reports if not r.passed]
    if failed:
        logger.error(f"{len(failed)} verifier run(s) failed: {', '.join(failed)}")
        return EXIT_VERIFICATION_FAILED
    logger.info(f"All {len(reports)} verifier run(s) passed")
    return EXIT_OK


async def cmd_sweep(args, scenario_file: ScenarioFile) -> int:
    contexts = _contexts(scenario_file, args.seed, args.scenario)
    rows = await _gather_ordered(contexts, sweep_scenario, args.jobs)
    _write_sweep_csv(args.out / "sweep.csv", rows)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFICATION_FAILED


COMMANDS = {
    "constants": cmd_constants,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()

    try:
        validate_settings()
        logger.info(f"Starting {APP_NAME} {args.command}...")
        scenario_file = load_scenario_file(args.config)
        return asyncio.run(COMMANDS[args.command](args, scenario_file))
    except BudgetInfeasibleError as e:
        logger.error(f"Budget infeasible: {e}")
        return e.exit_code
    except ConjulabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
