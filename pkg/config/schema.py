"""
Run configuration: one JSON document drives one command.

Relative paths inside a run config are resolved against the directory of the
config file. ``--seed``, ``--out`` and ``--threads`` override the file values.
The master seed is mandatory.

Example (simulate)::

    {
      "command": "simulate",
      "seed": 7,
      "output": "out/simulate",
      "synthetic": {"n_patients": 1000, "n_treatments": 10},
      "scenario": {"n_runs": 30},
      "sweep": {"PENRATE": [0.1, 0.25, 0.4, 0.55, 0.7]}
    }
"""

import os
from typing import Any, TypedDict

from config.settings import (
    CLASSIFIER_KINDS,
    COMMAND_SECTIONS,
    COMMON_SECTIONS,
    DEFAULT_THREADS,
    GENERATOR_KINDS,
    RNG_NAME,
)
from utils.errors import ConfigError, DataError
from utils.file_store import load_json


class DataSpec(TypedDict, total=False):
    """A dataset read from ``path`` with a declared ``schema``, or a named ``source``."""

    path: str
    schema: list[dict[str, Any]]
    drop_incomplete: bool
    source: str
    n: int


class RunConfig(TypedDict, total=False):
    """Validated run configuration."""

    command: str
    seed: int
    threads: int
    output: str
    rng: str
    base_dir: str

    # fit
    data: DataSpec
    generator: str
    execution: dict[str, Any]
    outcome: dict[str, Any]

    # generate
    model: str
    n: int

    # simulate
    synthetic: dict[str, Any]
    baseline: DataSpec
    catalog: str
    models: str
    scenario: dict[str, Any]
    sweep: dict[str, list[float]]

    # analyze
    original: DataSpec
    simulated: DataSpec
    experiment: dict[str, Any]
    fidelity_threshold: float


def create_default_run_config(command: str) -> RunConfig:
    return RunConfig(command=command, threads=DEFAULT_THREADS, rng=RNG_NAME, base_dir=".")


# =============================================================================
# Loading
# =============================================================================


def load_run_config(path: str | os.PathLike[str]) -> dict[str, Any]:
    """Read a run config file; a missing or malformed file is a config error."""
    try:
        document = load_json(path)
    except FileNotFoundError as e:
        raise ConfigError(str(e), field="--config") from e
    except DataError as e:
        raise ConfigError(str(e), field="--config") from e
    document.setdefault("base_dir", os.path.dirname(os.path.abspath(path)))
    return document


def apply_overrides(
    document: dict[str, Any],
    seed: int | None = None,
    out_dir: str | None = None,
    threads: int | None = None,
) -> dict[str, Any]:
    """Command-line flags take precedence over the file values."""
    merged = dict(document)
    if seed is not None:
        merged["seed"] = seed
    if out_dir is not None:
        merged["output"] = os.path.abspath(out_dir)
    if threads is not None:
        merged["threads"] = threads
    return merged


# =============================================================================
# Validation
# =============================================================================


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _resolve(cfg: dict[str, Any], path: Any, field: str) -> str:
    if not isinstance(path, str) or not path:
        raise ConfigError("must be a file path", field=field)
    full = path if os.path.isabs(path) else os.path.join(cfg.get("base_dir", "."), path)
    if not os.path.exists(full):
        raise FileNotFoundError(f"{field}: no such file {full}")
    return full


def _require(cfg: dict[str, Any], field: str) -> Any:
    if field not in cfg or cfg[field] is None:
        raise ConfigError("is required", field=field)
    return cfg[field]


def _positive_int(section: dict[str, Any], key: str, field: str, minimum: int = 1) -> None:
    if key in section and (not _is_int(section[key]) or section[key] < minimum):
        raise ConfigError(f"must be an integer >= {minimum}", field=f"{field}.{key}")


def _validate_data_spec(cfg: dict[str, Any], field: str, sources: list[str]) -> DataSpec:
    spec = _require(cfg, field)
    if not isinstance(spec, dict):
        raise ConfigError("must be an object with 'path' or 'source'", field=field)
    spec = dict(spec)
    if "path" in spec:
        spec["path"] = _resolve(cfg, spec["path"], f"{field}.path")
        schema = spec.get("schema")
        if schema is not None and (
            not isinstance(schema, list)
            or not all(isinstance(c, dict) and "name" in c for c in schema)
        ):
            raise ConfigError("must be a list of column objects", field=f"{field}.schema")
    elif "source" in spec:
        if spec["source"] not in sources:
            raise ConfigError(f"must be one of {sources}", field=f"{field}.source")
        _positive_int(spec, "n", field, minimum=2)
    else:
        raise ConfigError("needs 'path' or 'source'", field=field)
    return DataSpec(**spec)  # type: ignore[typeddict-item]


def _validate_fit(cfg: dict[str, Any]) -> None:
    if "generator" not in cfg and "execution" not in cfg:
        raise ConfigError("fit needs a 'generator' or an 'execution' section", field="generator")
    if "generator" in cfg:
        if cfg["generator"] not in GENERATOR_KINDS:
            raise ConfigError(f"must be one of {GENERATOR_KINDS}", field="generator")
    if "generator" in cfg or "data" in cfg:
        cfg["data"] = _validate_data_spec(cfg, "data", ["pima"])
    if "execution" in cfg:
        execution = cfg["execution"]
        if not isinstance(execution, dict):
            raise ConfigError("must be an object", field="execution")
        execution = dict(execution)
        cfg["execution"] = execution
        if not isinstance(execution.get("histories"), dict):
            raise ConfigError("needs a 'histories' object", field="execution.histories")
        histories = dict(execution["histories"])
        execution["histories"] = histories
        if "path" in histories:
            histories["path"] = _resolve(cfg, histories["path"], "execution.histories.path")
        elif histories.get("source") != "hiv":
            raise ConfigError("needs 'path' or source 'hiv'", field="execution.histories")
        _positive_int(execution, "rare_transition_threshold", "execution")
        if execution.get("criterion", "aic") not in ("aic", "bic"):
            raise ConfigError("must be 'aic' or 'bic'", field="execution.criterion")
    if "outcome" in cfg:
        outcome = cfg["outcome"]
        if not isinstance(outcome, dict) or "column" not in outcome:
            raise ConfigError("needs a 'column'", field="outcome")
        if outcome.get("classifier", "logistic") not in CLASSIFIER_KINDS:
            raise ConfigError(f"must be one of {CLASSIFIER_KINDS}", field="outcome.classifier")
        if "data" not in cfg:
            raise ConfigError("an outcome model needs a 'data' section", field="data")


def _validate_generate(cfg: dict[str, Any]) -> None:
    cfg["model"] = _resolve(cfg, _require(cfg, "model"), "model")
    n = _require(cfg, "n")
    if not _is_int(n) or n < 0:
        raise ConfigError("must be an integer >= 0", field="n")


def _validate_simulate(cfg: dict[str, Any]) -> None:
    if not isinstance(cfg.get("scenario", {}), dict):
        raise ConfigError("must be an object", field="scenario")
    if "synthetic" in cfg:
        synthetic = cfg["synthetic"]
        if not isinstance(synthetic, dict):
            raise ConfigError("must be an object", field="synthetic")
        for key in ("n_patients", "n_treatments", "history_patients", "history_periods"):
            _positive_int(synthetic, key, "synthetic", minimum=2)
    else:
        cfg["baseline"] = _validate_data_spec(cfg, "baseline", [])
        cfg["catalog"] = _resolve(cfg, _require(cfg, "catalog"), "catalog")
        cfg["models"] = _resolve(cfg, _require(cfg, "models"), "models")
    sweep = cfg.get("sweep")
    if sweep is not None:
        allowed = {"PENRATE", "AMMGM_offset", "annual_tariff_decay"}
        if not isinstance(sweep, dict) or set(sweep) - allowed:
            raise ConfigError(f"keys must be among {sorted(allowed)}", field="sweep")
        for key, values in sweep.items():
            if not isinstance(values, list) or not all(
                isinstance(v, int | float) and not isinstance(v, bool) for v in values
            ):
                raise ConfigError("must be a list of numbers", field=f"sweep.{key}")


def _validate_analyze(cfg: dict[str, Any]) -> None:
    cfg["original"] = _validate_data_spec(cfg, "original", ["pima"])
    if "simulated" not in cfg and "experiment" not in cfg:
        raise ConfigError("analyze needs 'simulated' or 'experiment'", field="simulated")
    if "simulated" in cfg:
        cfg["simulated"] = _validate_data_spec(cfg, "simulated", ["pima"])
    threshold = cfg.get("fidelity_threshold", 0.1)
    if not isinstance(threshold, int | float) or isinstance(threshold, bool) or threshold <= 0:
        raise ConfigError("must be a positive number", field="fidelity_threshold")
    if "experiment" in cfg:
        experiment = cfg["experiment"]
        if not isinstance(experiment, dict) or "outcome" not in experiment:
            raise ConfigError("needs an 'outcome' column", field="experiment.outcome")
        generators = experiment.get("generators", GENERATOR_KINDS)
        if not isinstance(generators, list) or set(generators) - set(GENERATOR_KINDS):
            raise ConfigError(
                f"must be a list among {GENERATOR_KINDS}", field="experiment.generators"
            )
        if experiment.get("classifier", "logistic") not in CLASSIFIER_KINDS:
            raise ConfigError(f"must be one of {CLASSIFIER_KINDS}", field="experiment.classifier")
        _positive_int(experiment, "n_datasets", "experiment")
        _positive_int(experiment, "n_rows", "experiment", minimum=2)


VALIDATORS = {
    "fit": _validate_fit,
    "generate": _validate_generate,
    "simulate": _validate_simulate,
    "analyze": _validate_analyze,
}


def validate_run_config(command: str, document: dict[str, Any]) -> RunConfig:
    """
    Validate a run config for ``command``.

    Raises:
        ConfigError: unknown command or key, missing seed, invalid value; the
            message names the field
        FileNotFoundError: a referenced path does not exist
    """
    if command not in COMMAND_SECTIONS:
        raise ConfigError(f"unknown command '{command}'", field="command")
    declared = document.get("command", command)
    if declared != command:
        raise ConfigError(f"config is for '{declared}', not '{command}'", field="command")

    cfg: dict[str, Any] = dict(create_default_run_config(command))
    cfg.update(document)
    cfg["command"] = command
    allowed = set(COMMON_SECTIONS) | set(COMMAND_SECTIONS[command]) | {"base_dir"}
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys {unknown} for '{command}'", field=unknown[0])

    seed = cfg.get("seed")
    if seed is None:
        raise ConfigError("a master seed is required", field="seed")
    if not _is_int(seed) or seed < 0:
        raise ConfigError("must be a nonnegative integer", field="seed")
    if not _is_int(cfg["threads"]) or cfg["threads"] < 1:
        raise ConfigError("must be an integer >= 1", field="threads")
    if cfg["rng"] != RNG_NAME:
        raise ConfigError(f"only '{RNG_NAME}' is supported", field="rng")
    output = _require(cfg, "output")
    if not isinstance(output, str) or not output:
        raise ConfigError("must be a directory path", field="output")
    if not os.path.isabs(output):
        cfg["output"] = os.path.join(cfg["base_dir"], output)

    VALIDATORS[command](cfg)
    return RunConfig(**cfg)  # type: ignore[typeddict-item]


__all__ = [
    "DataSpec",
    "RunConfig",
    "apply_overrides",
    "create_default_run_config",
    "load_run_config",
    "validate_run_config",
]
