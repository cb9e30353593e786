"""
Scenario engine: repeated cohort runs over the follow-up horizon.

Period 1 costs the baseline cohort at the start date; every later period runs
the four steps in order. Each run owns three random streams split from its run
seed (events, conversion, incidents), so runs with different scenario
parameters share their covariate, switch and incident draws and differ only in
generic conversion.
"""

import logging
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np

from config.settings import (
    DEFAULT_THREADS,
    PENETRATION_RATES,
    PERIODS_PER_YEAR,
)
from data.models.dataset import MixedDataset
from data.models.scenario import (
    RunResult,
    ScenarioConfig,
    TrajectoryStep,
    validate_scenario_config,
)
from execution.effects import ExecutionModels
from scenario.catalog import TreatmentCatalog
from scenario.steps import (
    DRAWN_VARIABLES,
    Cohort,
    add_incident_cases,
    advance_covariates,
    period_costs,
    update_treatments,
)
from utils.errors import DataError
from utils.seeding import split_seed, stream

logger = logging.getLogger(__name__)


def period_date(cfg: ScenarioConfig, period: int) -> float:
    """Decimal-year date of period ``period`` (1-based)."""
    return float(cfg["start_year"]) + (period - 1) / PERIODS_PER_YEAR


def check_engine_inputs(
    baseline: Cohort, catalog: TreatmentCatalog, models: ExecutionModels
) -> None:
    """Configuration and data checks done before any period runs."""
    models.require_complete()
    catalog.require(baseline.treatment)
    if baseline.size == 0:
        raise DataError("Baseline cohort is empty")
    if not baseline.alive.any():
        raise DataError("Baseline cohort has no alive patient")


def _record(trajectories: list[TrajectoryStep], cohort: Cohort, period: int) -> None:
    alive = cohort.alive
    trajectories.extend(
        TrajectoryStep(
            i, period, str(cohort.treatment[i]), bool(cohort.on_generic[i]), bool(alive[i])
        )
        for i in range(cohort.size)
    )


def simulate_run(
    baseline: Cohort,
    catalog: TreatmentCatalog,
    models: ExecutionModels,
    cfg: ScenarioConfig,
    run_seed: int,
) -> RunResult:
    """One run of the horizon; costs accumulate per patient."""
    events = stream(run_seed, "events")
    conversion = stream(run_seed, "conversion")
    incidents = stream(run_seed, "incidents")
    pool = baseline.take(np.flatnonzero(baseline.alive))

    horizon = int(cfg["horizon"])
    cohort = baseline.copy()
    cost_b_total = np.zeros(cohort.size)
    cost_g_total = np.zeros(cohort.size)
    fd = np.zeros(cohort.size, dtype=np.int64)
    uptake = np.zeros(horizon)
    trajectories: list[TrajectoryStep] = []

    for period in range(1, horizon + 1):
        t = period_date(cfg, period)
        if period > 1:
            uniforms = {name: events.random(cohort.size) for name in DRAWN_VARIABLES}
            switch_uniforms = events.random(cohort.size)
            cohort = advance_covariates(cohort, models, uniforms, cfg["invert_ir_rule"])
            cohort = update_treatments(
                cohort, catalog, cfg, t, switch_uniforms, conversion.random(cohort.size)
            )
            before = cohort.size
            count = int(cfg["incident_cases_per_step"])
            cohort = add_incident_cases(cohort, pool, count, incidents)
            added = cohort.size - before
            cost_b_total = np.concatenate([cost_b_total, np.zeros(added)])
            cost_g_total = np.concatenate([cost_g_total, np.zeros(added)])
            fd = np.concatenate([fd, np.zeros(added, dtype=np.int64)])

        cost_b, cost_g = period_costs(cohort, catalog, cfg, t)
        cost_b_total += cost_b
        cost_g_total += cost_g
        alive = cohort.alive
        fd += alive
        uptake[period - 1] = float(cohort.on_generic[alive].mean()) if alive.any() else 0.0
        if cfg["record_trajectories"]:
            _record(trajectories, cohort, period)

    dc = cost_b_total - cost_g_total
    return RunResult(
        dc=dc,
        fd=fd,
        cost_b=cost_b_total,
        cost_g=cost_g_total,
        total_dc_scaled=float(dc.sum()) / float(cfg["population_fraction"]),
        generic_uptake_by_period=uptake,
        ever_generic=cohort.ever_generic.copy(),
        trajectories=trajectories,
    )


def run_simulation(
    baseline: MixedDataset | Cohort,
    catalog: TreatmentCatalog,
    models: ExecutionModels,
    cfg: ScenarioConfig | dict[str, Any],
    master_seed: int,
    threads: int = DEFAULT_THREADS,
) -> list[RunResult]:
    """
    Run ``n_runs`` independent simulations of the scenario.

    Run k uses the seed split from ``master_seed`` under the name ``run-k``, so
    results do not depend on ``threads``.

    Raises:
        ConfigError: invalid scenario or missing execution model
        DataError: baseline treatment absent from the catalog
    """
    scenario = validate_scenario_config(dict(cfg))
    cohort = baseline if isinstance(baseline, Cohort) else Cohort.from_dataset(baseline)
    check_engine_inputs(cohort, catalog, models)

    n_runs = int(scenario["n_runs"])
    seeds = [split_seed(master_seed, f"run-{k}") for k in range(n_runs)]
    start = time.time()
    logger.info(f"🎲 {n_runs} runs, PENRATE={scenario['PENRATE']}, {cohort.size} patients")

    def one(seed: int) -> RunResult:
        return simulate_run(cohort, catalog, models, scenario, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(seed) for seed in seeds]

    logger.info(f"✅ {n_runs} runs completed in {time.time() - start:.2f}s")
    return results


def check_rule4(trajectories: Iterable[TrajectoryStep]) -> list[TrajectoryStep]:
    """Steps where a patient left the generic without changing treatment."""
    by_patient: dict[int, list[TrajectoryStep]] = {}
    for step in trajectories:
        by_patient.setdefault(step.patient, []).append(step)
    violations = []
    for steps in by_patient.values():
        steps.sort(key=lambda s: s.period)
        for previous, current in zip(steps, steps[1:], strict=False):
            if (
                previous.on_generic
                and not current.on_generic
                and previous.treatment_id == current.treatment_id
                and current.alive
            ):
                violations.append(current)
    return violations


# =============================================================================
# Sweeps
# =============================================================================


def sweep_points(
    base: ScenarioConfig | dict[str, Any],
    penrates: Sequence[float] | None = None,
    ammgm_offsets: Sequence[float] | None = None,
    tariff_decays: Sequence[float] | None = None,
) -> list[tuple[str, ScenarioConfig]]:
    """Scenario configurations of a sweep, each with a file-safe label."""
    points = []
    for penrate in penrates if penrates is not None else PENETRATION_RATES:
        for offset in ammgm_offsets if ammgm_offsets else [None]:
            for decay in tariff_decays if tariff_decays else [None]:
                cfg = dict(base)
                cfg["PENRATE"] = float(penrate)
                label = f"penrate_{penrate:.2f}"
                if offset is not None:
                    cfg["AMMGM_offset"] = float(offset)
                    label += f"_ammgm_{offset:g}"
                if decay is not None:
                    cfg["annual_tariff_decay"] = float(decay)
                    label += f"_decay_{decay:g}"
                points.append((label, validate_scenario_config(cfg)))
    return points


def run_sweep(
    baseline: MixedDataset | Cohort,
    catalog: TreatmentCatalog,
    models: ExecutionModels,
    points: Sequence[tuple[str, ScenarioConfig]],
    master_seed: int,
    threads: int = DEFAULT_THREADS,
) -> dict[str, list[RunResult]]:
    """Runs for every sweep point, all from the same master seed."""
    results = {}
    for label, cfg in points:
        results[label] = run_simulation(baseline, catalog, models, cfg, master_seed, threads)
    return results
