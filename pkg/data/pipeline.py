"""
Staged command pipeline behind the command line.

Every command runs the same way:

1. Validate the run config
2. Load the inputs (files or synthetic sources)
3. Do the command's work (fit, generate, simulate, analyze)
4. Write the outputs atomically into the output directory

Each stage is tracked with its start and end time. A failing stage turns into an
error result carrying the exit code of the exception instead of a traceback.
Data files carry the run metadata (command, seed, rng) and no timestamps.
"""

import logging
import os
from collections.abc import Callable
from datetime import datetime
from typing import Any

import numpy as np
import pandas as pd

from config.schema import DataSpec, RunConfig, validate_run_config
from config.settings import (
    DEFAULT_N_DATASETS,
    DEFAULT_N_ROWS,
    DEFAULT_RARE_TRANSITION_THRESHOLD,
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    EXIT_UNEXPECTED_ERROR,
    GENERATOR_KINDS,
    OUTPUT_FILES,
    RNG_NAME,
)
from data.analytics import fidelity, pvalue_summary, pvalues_frame, run_pvalue_study
from data.loaders import load_csv, load_histories, write_csv
from data.models.dataset import ColumnSchema, MixedDataset, schema_from_list
from data.models.scenario import RunResult, baseline_schema, validate_scenario_config
from data.models.unified import (
    CommandResult,
    PipelineStage,
    PipelineState,
    create_default_command_result,
)
from data.sources import (
    make_hiv_baseline,
    make_hiv_histories,
    make_pima_like,
    make_treatment_catalog,
)
from execution import (
    ExecutionModels,
    build_outcome_generator,
    calibrate_execution_models,
    load_execution_models,
)
from execution.serialization import execution_models_to_dict, outcome_to_dict
from generators import fit_generator, load_model, sample_generator
from generators.discrete import DiscreteVBGModel
from generators.serialization import model_to_dict
from generators.vine import VineCopulaModel, vine_summary
from scenario import (
    TreatmentCatalog,
    check_rule4,
    load_catalog,
    run_simulation,
    run_sweep,
    summarize_runs,
    sweep_points,
)
from utils.errors import (
    ConfigError,
    DataError,
    DomainError,
    IngestionError,
    NotPSDError,
    NumericalError,
    ShapeError,
    UndefinedCorrelationError,
)
from utils.file_store import save_csv, save_json
from utils.seeding import split_seed

logger = logging.getLogger(__name__)

Stage = Callable[["CommandPipeline"], int | None]

HISTORY_COLUMNS = ["PATIENT", "PERIOD", "TREAT"]
DEFAULT_PIMA_ROWS = 392
DEFAULT_HISTORY_PATIENTS = 2000
DEFAULT_HISTORY_PERIODS = 10
DEFAULT_SYNTHETIC_PATIENTS = 1000
DEFAULT_SYNTHETIC_TREATMENTS = 10


def exit_code_for(error: BaseException) -> int:
    """Stable exit code of an exception raised by a stage."""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    if isinstance(
        error,
        NumericalError | NotPSDError | UndefinedCorrelationError | np.linalg.LinAlgError,
    ):
        return EXIT_NUMERICAL_ERROR
    if isinstance(
        error, IngestionError | DataError | ShapeError | DomainError | FileNotFoundError
    ):
        return EXIT_DATA_ERROR
    return EXIT_UNEXPECTED_ERROR


# =============================================================================
# Main Pipeline Class
# =============================================================================


class CommandPipeline:
    """
    Runs one command as a sequence of tracked stages.
    """

    def __init__(self, command: str, document: dict[str, Any], verbose_logging: bool = True):
        """
        Initialize pipeline with an unvalidated run config.

        Args:
            command: One of fit, generate, simulate, analyze
            document: Run config with command-line overrides applied
            verbose_logging: Log stage transitions
        """
        if command not in COMMAND_STAGES:
            raise ConfigError(f"unknown command '{command}'", field="command")

        self.command = command
        self.document = document
        self.verbose_logging = verbose_logging
        self.config: RunConfig = RunConfig()
        self.summary: dict[str, Any] = {}
        self.state = PipelineState(
            command=command,
            pipeline_stages=[],
            current_stage=None,
            overall_success=False,
            artifacts={},
            outputs=[],
            diagnostics=[],
        )

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def artifacts(self) -> dict[str, Any]:
        return self.state["artifacts"]

    def run(self) -> CommandResult:
        """
        Run every stage of the command.

        Returns:
            Command result with the exit code, output paths and summary
        """
        for stage_name, stage in COMMAND_STAGES[self.command]:
            self._start_pipeline_stage(stage_name)
            try:
                items = stage(self)
                self._complete_pipeline_stage(stage_name, True, items=items)
            except Exception as e:
                self._complete_pipeline_stage(stage_name, False, str(e))
                return self._prepare_error_result(e)

        self.state["overall_success"] = True
        result = create_default_command_result(self.command)
        result.update(
            success=True,
            exit_code=EXIT_OK,
            seed=self.seed,
            rng=RNG_NAME,
            outputs=list(self.state["outputs"]),
            summary=self.summary,
            diagnostics=list(self.state["diagnostics"]),
            pipeline_state=self.state,
        )
        return result

    # =========================================================================
    # Helpers used by the stages
    # =========================================================================

    def metadata(self) -> dict[str, Any]:
        return {"command": self.command, "seed": self.seed, "rng": RNG_NAME}

    def add_diagnostics(self, diagnostics: list[str] | tuple[str, ...]) -> None:
        for message in diagnostics:
            if message not in self.state["diagnostics"]:
                self.state["diagnostics"].append(message)

    def output_path(self, name: str) -> str:
        return os.path.join(self.config["output"], name)

    def write_json(self, name: str, document: dict[str, Any]) -> str:
        path = self.output_path(name)
        save_json(path, document)
        self.state["outputs"].append(path)
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> str:
        path = self.output_path(name)
        save_csv(path, frame)
        self.state["outputs"].append(path)
        return path

    def load_dataset(
        self, spec: DataSpec, field: str, schema: list[ColumnSchema] | None = None
    ) -> MixedDataset:
        """A dataset from a CSV path with its declared schema, or from a named source."""
        if "path" in spec:
            if "schema" in spec:
                try:
                    schema = schema_from_list(spec["schema"])
                except (DomainError, KeyError) as e:
                    raise ConfigError(str(e), field=f"{field}.schema") from e
            if schema is None:
                raise ConfigError("a schema is required for a CSV path", field=f"{field}.schema")
            return load_csv(spec["path"], schema, bool(spec.get("drop_incomplete", False)))
        n = int(spec.get("n", DEFAULT_PIMA_ROWS))
        return make_pima_like(n, seed=split_seed(self.seed, field))

    # =========================================================================
    # Stage tracking
    # =========================================================================

    def _start_pipeline_stage(self, stage_name: str) -> None:
        """Start tracking a pipeline stage."""
        self.state["current_stage"] = stage_name

        stage = PipelineStage(
            stage_name=stage_name,
            start_time=datetime.now().isoformat(),
            success=False,
            items_processed=0,
            items_succeeded=0,
        )
        self.state["pipeline_stages"].append(stage)

        if self.verbose_logging:
            logger.info(f"🔄 Starting pipeline stage: {stage_name}")

    def _complete_pipeline_stage(
        self,
        search_stage_name: str,
        success: bool,
        error_message: str | None = None,
        items: int | None = None,
    ) -> None:
        """Complete tracking a pipeline stage."""
        self.state["current_stage"] = None

        for stage in reversed(self.state["pipeline_stages"]):
            if stage.get("stage_name", "") == search_stage_name:
                stage["end_time"] = datetime.now().isoformat()
                stage["success"] = success
                if items is not None:
                    stage["items_processed"] = items
                    stage["items_succeeded"] = items if success else 0
                if error_message:
                    stage["error_message"] = error_message
                break

        if self.verbose_logging:
            status = "✅" if success else "❌"
            logger.info(f"{status} Completed pipeline stage: {search_stage_name}")
        if error_message:
            logger.error(f"Error in {search_stage_name}: {error_message}")

    def _prepare_error_result(self, error: Exception) -> CommandResult:
        """Prepare an error result."""
        field = getattr(error, "field", None)
        message = f"{field}: {error}" if field and field not in str(error) else str(error)
        exit_code = exit_code_for(error)
        if exit_code == EXIT_UNEXPECTED_ERROR:
            logger.exception(f"❌ Unexpected error in '{self.command}'")

        result = create_default_command_result(self.command)
        result.update(
            success=False,
            exit_code=exit_code,
            seed=self.config.get("seed"),
            rng=RNG_NAME,
            outputs=list(self.state["outputs"]),
            diagnostics=list(self.state["diagnostics"]),
            errors=[f"{type(error).__name__}: {message}"],
            pipeline_state=self.state,
        )
        return result


# =============================================================================
# Shared stages
# =============================================================================


def _validate(pipeline: CommandPipeline) -> int:
    pipeline.config = validate_run_config(pipeline.command, pipeline.document)
    pipeline.state["seed"] = pipeline.seed
    return 1


# =============================================================================
# fit
# =============================================================================


def _load_histories(pipeline: CommandPipeline, section: dict[str, Any]) -> None:
    spec = section["histories"]
    if "path" in spec:
        histories = load_histories(spec["path"], HISTORY_COLUMNS)
        ids = sorted(set(histories["TREAT"].astype(str)))
    else:
        seed = pipeline.seed
        n_treatments = int(spec.get("n_treatments", DEFAULT_SYNTHETIC_TREATMENTS))
        ids = [
            e["treatment_id"]
            for e in make_treatment_catalog(n_treatments, seed=split_seed(seed, "catalog"))
        ]
        histories = make_hiv_histories(
            int(spec.get("n_patients", DEFAULT_HISTORY_PATIENTS)),
            int(spec.get("n_periods", DEFAULT_HISTORY_PERIODS)),
            ids,
            seed=split_seed(seed, "histories"),
        )
    pipeline.artifacts["histories"] = histories
    pipeline.artifacts["treatment_ids"] = ids


def _fit_load(pipeline: CommandPipeline) -> int:
    cfg = pipeline.config
    items = 0
    if "data" in cfg:
        data = pipeline.load_dataset(cfg["data"], "data")
        pipeline.artifacts["data"] = data
        items += data.n
    if "execution" in cfg:
        _load_histories(pipeline, cfg["execution"])
        items += len(pipeline.artifacts["histories"])
    return items


def _generator_report(model: Any) -> dict[str, Any]:
    report: dict[str, Any] = {"kind": type(model).__name__, "n_columns": len(model.schema)}
    if isinstance(model, DiscreteVBGModel):
        entries = list(model.config_table.values())
        report["n_configurations"] = len(entries)
        report["pooled_configurations"] = sum(1 for e in entries if e.pooled)
    if isinstance(model, VineCopulaModel):
        edges = vine_summary(model)
        report["n_pair_copulas"] = len(edges)
        report["families"] = sorted({e["family"] for e in edges})
        report["edges"] = edges
    return report


def _fit_models(pipeline: CommandPipeline) -> int:
    cfg = pipeline.config
    fitted = 0
    if "generator" in cfg:
        data = pipeline.artifacts["data"]
        model = fit_generator(cfg["generator"], data, seed=split_seed(pipeline.seed, "fit"))
        pipeline.artifacts["model"] = model
        pipeline.add_diagnostics(model.diagnostics)
        pipeline.summary["generator"] = _generator_report(model)
        fitted += 1
    if "execution" in cfg:
        section = cfg["execution"]
        models = calibrate_execution_models(
            pipeline.artifacts["histories"],
            pipeline.artifacts["treatment_ids"],
            int(section.get("rare_transition_threshold", DEFAULT_RARE_TRANSITION_THRESHOLD)),
            section.get("criterion", "aic"),
        )
        pipeline.artifacts["execution"] = models
        pipeline.add_diagnostics(models.diagnostics)
        pipeline.summary["execution"] = {
            name: {
                "covariate_sources": sorted(model.covariate_models),
                "constant_sources": sorted(model.constant_rows),
            }
            for name, model in (
                ("ARN", models.arn),
                ("CREA", models.crea),
                ("TREAT", models.switch),
            )
            if model is not None
        }
        fitted += 1
    if "outcome" in cfg:
        section = cfg["outcome"]
        generator = build_outcome_generator(
            pipeline.artifacts["data"],
            section["column"],
            section.get("covariates"),
            section.get("classifier", "logistic"),
            seed=split_seed(pipeline.seed, "fit-outcome"),
        )
        pipeline.artifacts["outcome"] = generator
        pipeline.summary["outcome_error_rate"] = generator.noise.error_rate
        fitted += 1
    return fitted


def _fit_write(pipeline: CommandPipeline) -> int:
    written = 0
    if "model" in pipeline.artifacts:
        document = model_to_dict(pipeline.artifacts["model"])
        document["run"] = pipeline.metadata()
        pipeline.write_json(OUTPUT_FILES["model"], document)
        written += 1
    if "execution" in pipeline.artifacts:
        document = execution_models_to_dict(pipeline.artifacts["execution"])
        document["run"] = pipeline.metadata()
        pipeline.write_json(OUTPUT_FILES["execution"], document)
        written += 1
    if "outcome" in pipeline.artifacts:
        document = outcome_to_dict(pipeline.artifacts["outcome"])
        document["run"] = pipeline.metadata()
        pipeline.write_json(OUTPUT_FILES["outcome"], document)
        written += 1
    return written


# =============================================================================
# generate
# =============================================================================


def _generate_load(pipeline: CommandPipeline) -> int:
    pipeline.artifacts["model"] = load_model(pipeline.config["model"])
    return 1


def _generate_cohort(pipeline: CommandPipeline) -> int:
    model = pipeline.artifacts["model"]
    n = int(pipeline.config["n"])
    if n == 0:
        names = [col.name for col in model.schema]
        pipeline.artifacts["cohort"] = pd.DataFrame(columns=names)
    else:
        cohort = sample_generator(model, n, split_seed(pipeline.seed, "generate"))
        pipeline.artifacts["cohort"] = cohort
    pipeline.summary["n_rows"] = n
    return n


def _generate_write(pipeline: CommandPipeline) -> int:
    cohort = pipeline.artifacts["cohort"]
    path = pipeline.output_path(OUTPUT_FILES["cohort"])
    if isinstance(cohort, MixedDataset):
        write_csv(cohort, path)
    else:
        save_csv(path, cohort)
    pipeline.state["outputs"].append(path)
    return 1


# =============================================================================
# simulate
# =============================================================================


def _simulate_load(pipeline: CommandPipeline) -> int:
    cfg = pipeline.config
    seed = pipeline.seed
    invert = bool(cfg.get("scenario", {}).get("invert_ir_rule", False))
    if "synthetic" in cfg:
        synthetic = cfg["synthetic"]
        n_treatments = int(synthetic.get("n_treatments", DEFAULT_SYNTHETIC_TREATMENTS))
        catalog = TreatmentCatalog(
            {
                e["treatment_id"]: e
                for e in make_treatment_catalog(n_treatments, seed=split_seed(seed, "catalog"))
            }
        )
        baseline = make_hiv_baseline(
            int(synthetic.get("n_patients", DEFAULT_SYNTHETIC_PATIENTS)),
            catalog.ids,
            seed=split_seed(seed, "baseline"),
            invert_ir_rule=invert,
        )
        histories = make_hiv_histories(
            int(synthetic.get("history_patients", DEFAULT_HISTORY_PATIENTS)),
            int(synthetic.get("history_periods", DEFAULT_HISTORY_PERIODS)),
            catalog.ids,
            seed=split_seed(seed, "histories"),
        )
        models = calibrate_execution_models(
            histories,
            catalog.ids,
            int(synthetic.get("rare_transition_threshold", DEFAULT_RARE_TRANSITION_THRESHOLD)),
        )
    else:
        catalog = load_catalog(cfg["catalog"])
        models = load_execution_models(cfg["models"])
        baseline = load_csv(
            cfg["baseline"]["path"],
            baseline_schema(catalog.ids),
            bool(cfg["baseline"].get("drop_incomplete", False)),
        )

    if catalog.switch_model is None and models.switch is not None:
        catalog = catalog.with_switch_model(models.switch)
    pipeline.artifacts.update(catalog=catalog, models=models, baseline=baseline)
    pipeline.add_diagnostics(models.diagnostics)
    return baseline.n


def _simulate_runs(pipeline: CommandPipeline) -> int:
    cfg = pipeline.config
    scenario = validate_scenario_config(dict(cfg.get("scenario", {})))
    baseline = pipeline.artifacts["baseline"]
    catalog: TreatmentCatalog = pipeline.artifacts["catalog"]
    models: ExecutionModels = pipeline.artifacts["models"]
    threads = int(cfg["threads"])

    if "sweep" in cfg:
        sweep = cfg["sweep"]
        points = sweep_points(
            scenario,
            penrates=sweep.get("PENRATE"),
            ammgm_offsets=sweep.get("AMMGM_offset"),
            tariff_decays=sweep.get("annual_tariff_decay"),
        )
        results = run_sweep(baseline, catalog, models, points, pipeline.seed, threads)
        scenarios = dict(points)
    else:
        results = {"": run_simulation(baseline, catalog, models, scenario, pipeline.seed, threads)}
        scenarios = {"": scenario}

    if scenario["record_trajectories"]:
        violations = sum(
            len(check_rule4(run.trajectories)) for runs in results.values() for run in runs
        )
        pipeline.summary["rule4_violations"] = violations
    pipeline.artifacts.update(results=results, scenarios=scenarios)
    return sum(len(runs) for runs in results.values())


def _patients_frame(runs: list[RunResult]) -> pd.DataFrame:
    """Per-patient indicators of every run, one row per (run, patient)."""
    frames = [
        pd.DataFrame(
            {
                "run": k,
                "patient": np.arange(run.n_patients),
                "dc": run.dc,
                "fd": run.fd,
                "ndc": run.ndc,
                "ever_generic": run.ever_generic.astype(int),
            }
        )
        for k, run in enumerate(runs)
    ]
    columns = ["run", "patient", "dc", "fd", "ndc", "ever_generic"]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)


def _suffixed(name: str, label: str) -> str:
    if not label:
        return name
    stem, extension = os.path.splitext(name)
    return f"{stem}_{label}{extension}"


def _simulate_write(pipeline: CommandPipeline) -> int:
    results: dict[str, list[RunResult]] = pipeline.artifacts["results"]
    scenarios = pipeline.artifacts["scenarios"]
    index = []
    for label, runs in results.items():
        summary = summarize_runs(runs)
        runs_file = _suffixed(OUTPUT_FILES["runs"], label)
        patients_file = _suffixed(OUTPUT_FILES["patients"], label)
        pipeline.write_json(
            runs_file,
            {
                "run": pipeline.metadata(),
                "scenario": dict(scenarios[label]),
                "runs": [run.summary() for run in runs],
                "summary": summary,
            },
        )
        pipeline.write_frame(patients_file, _patients_frame(runs))
        index.append(
            {
                "label": label,
                "scenario": dict(scenarios[label]),
                "runs_file": runs_file,
                "patients_file": patients_file,
                "total_dc_median": summary["total_dc"]["median"],
            }
        )

    if "sweep" in pipeline.config:
        pipeline.write_json(
            OUTPUT_FILES["sweep_index"], {"run": pipeline.metadata(), "points": index}
        )
        pipeline.summary["points"] = {p["label"]: p["total_dc_median"] for p in index}
    else:
        pipeline.summary["total_dc_median"] = index[0]["total_dc_median"]
    pipeline.summary["n_runs"] = len(next(iter(results.values())))
    return len(index)


# =============================================================================
# analyze
# =============================================================================


def _analyze_load(pipeline: CommandPipeline) -> int:
    cfg = pipeline.config
    original = pipeline.load_dataset(cfg["original"], "original")
    pipeline.artifacts["original"] = original
    items = original.n
    if "simulated" in cfg:
        simulated = pipeline.load_dataset(cfg["simulated"], "simulated", list(original.schema))
        pipeline.artifacts["simulated"] = simulated
        items += simulated.n
    return items


def _analyze(pipeline: CommandPipeline) -> int:
    cfg = pipeline.config
    original: MixedDataset = pipeline.artifacts["original"]
    done = 0
    if "simulated" in pipeline.artifacts:
        report = fidelity(
            original, pipeline.artifacts["simulated"], float(cfg.get("fidelity_threshold", 0.1))
        )
        pipeline.artifacts["fidelity"] = report
        pipeline.summary["fidelity"] = dict(report["summary"])
        done += 1
    if "experiment" in cfg:
        experiment = cfg["experiment"]
        outcome = experiment["outcome"]
        if outcome not in original.names:
            raise DataError(f"Outcome column '{outcome}' not in the original dataset")
        outcome_gen = build_outcome_generator(
            original,
            outcome,
            experiment.get("covariates"),
            experiment.get("classifier", "logistic"),
            seed=split_seed(pipeline.seed, "fit-outcome"),
        )
        study = run_pvalue_study(
            original,
            outcome_gen,
            experiment.get("generators", GENERATOR_KINDS),
            int(experiment.get("n_datasets", DEFAULT_N_DATASETS)),
            int(experiment.get("n_rows", DEFAULT_N_ROWS)),
            seed=pipeline.seed,
            noise_variants=tuple(experiment.get("noise", (True, False))),
            welch=bool(experiment.get("welch", False)),
            threads=int(cfg["threads"]),
        )
        for entry in study["experiments"]:
            pipeline.add_diagnostics(entry["diagnostics"])
        pipeline.artifacts["study"] = study
        pipeline.summary["experiments"] = len(study["experiments"])
        done += 1
    return done


def _analyze_write(pipeline: CommandPipeline) -> int:
    written = 0
    if "fidelity" in pipeline.artifacts:
        document = dict(pipeline.artifacts["fidelity"])
        document["run"] = pipeline.metadata()
        pipeline.write_json(OUTPUT_FILES["fidelity"], document)
        written += 1
    if "study" in pipeline.artifacts:
        study = pipeline.artifacts["study"]
        summaries = {
            f"{e['generator']}/noise_{'on' if e['noise_enabled'] else 'off'}": pvalue_summary(e)
            for e in study["experiments"]
        }
        pipeline.write_json(
            OUTPUT_FILES["pvalues_json"],
            {
                "run": pipeline.metadata(),
                "experiments": study["experiments"],
                "summary": summaries,
            },
        )
        pipeline.write_frame(OUTPUT_FILES["pvalues_csv"], pvalues_frame(study))
        written += 2
    return written


COMMAND_STAGES: dict[str, list[tuple[str, Stage]]] = {
    "fit": [
        ("validation", _validate),
        ("loading", _fit_load),
        ("fitting", _fit_models),
        ("writing", _fit_write),
    ],
    "generate": [
        ("validation", _validate),
        ("loading", _generate_load),
        ("generation", _generate_cohort),
        ("writing", _generate_write),
    ],
    "simulate": [
        ("validation", _validate),
        ("loading", _simulate_load),
        ("simulation", _simulate_runs),
        ("writing", _simulate_write),
    ],
    "analyze": [
        ("validation", _validate),
        ("loading", _analyze_load),
        ("analysis", _analyze),
        ("writing", _analyze_write),
    ],
}


# =============================================================================
# Convenience Functions
# =============================================================================


def run_command(
    command: str, document: dict[str, Any], verbose_logging: bool = True
) -> CommandResult:
    """Run one command on a run config (overrides already applied)."""
    return CommandPipeline(command, document, verbose_logging).run()


def cmd_fit(config: dict[str, Any]) -> CommandResult:
    """Fit a generator, execution models or an outcome classifier and write them."""
    return run_command("fit", config)


def cmd_generate(config: dict[str, Any]) -> CommandResult:
    """Sample a cohort CSV from a saved generator model."""
    return run_command("generate", config)


def cmd_simulate(config: dict[str, Any]) -> CommandResult:
    """Run the scenario (or a sweep) and write run results and per-patient indicators."""
    return run_command("simulate", config)


def cmd_analyze(config: dict[str, Any]) -> CommandResult:
    """Write the fidelity report and the replicated p-value experiment."""
    return run_command("analyze", config)
