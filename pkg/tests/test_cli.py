"""End-to-end tests of the command line: one JSON line out, stable exit codes."""

import json
import logging
import os

import pandas as pd
import pytest

from data.loaders import write_csv
from data.models.dataset import schema_to_list
from data.sources import make_pima_like
from main import main


def _run(capsys, argv: list[str]) -> tuple[int, dict]:
    code = main(argv)
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    assert len(lines) == 1
    return code, json.loads(lines[0])


def _fit(capsys, write_config, tmp_path, generator: str = "discrete", name: str = "fit") -> str:
    config = write_config(
        {
            "command": "fit",
            "seed": 7,
            "output": name,
            "generator": generator,
            "data": {"source": "pima", "n": 200},
        },
        name=f"{name}.json",
    )
    code, summary = _run(capsys, ["fit", "--config", config])
    assert code == 0, summary["errors"]
    return str(tmp_path / name / "model.json")


# =============================================================================
# fit / generate
# =============================================================================


def test_fit_vine_writes_full_tree_set(capsys, write_config, tmp_path):
    model_path = _fit(capsys, write_config, tmp_path, generator="vine")
    with open(model_path, encoding="utf-8") as handle:
        document = json.load(handle)

    d = len(document["schema"])
    assert document["kind"] == "vine"
    assert sum(len(tree) for tree in document["trees"]) == d * (d - 1) // 2
    assert document["run"] == {"command": "fit", "seed": 7, "rng": "numpy.PCG64"}


def test_fit_summary_line(capsys, write_config, tmp_path):
    config = write_config(
        {
            "command": "fit",
            "seed": 3,
            "output": "out",
            "generator": "discrete",
            "data": {"source": "pima", "n": 150},
        }
    )
    code, summary = _run(capsys, ["fit", "--config", config])

    assert code == 0
    assert summary["command"] == "fit"
    assert summary["exit_code"] == 0
    assert summary["seed"] == 3
    assert summary["outputs"] == [str(tmp_path / "out" / "model.json")]
    assert summary["summary"]["generator"]["kind"] == "DiscreteVBGModel"
    assert "pipeline_state" not in summary


def test_generate_zero_rows_writes_header_only(capsys, write_config, tmp_path):
    model_path = _fit(capsys, write_config, tmp_path)
    config = write_config(
        {"command": "generate", "seed": 1, "output": "gen", "model": model_path, "n": 0},
        name="generate.json",
    )
    code, summary = _run(capsys, ["generate", "--config", config])

    assert code == 0
    with open(tmp_path / "gen" / "cohort.csv", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    assert len(lines) == 1
    assert lines[0].split(",")[0] == "Pregnant"
    assert summary["summary"]["n_rows"] == 0


def test_generate_is_reproducible(capsys, write_config, tmp_path):
    model_path = _fit(capsys, write_config, tmp_path)
    contents = []
    for out in ("first", "second"):
        config = write_config(
            {"command": "generate", "seed": 42, "output": out, "model": model_path, "n": 250},
            name=f"{out}.json",
        )
        code, _ = _run(capsys, ["generate", "--config", config])
        assert code == 0
        contents.append((tmp_path / out / "cohort.csv").read_bytes())

    assert contents[0] == contents[1]
    assert len(pd.read_csv(tmp_path / "first" / "cohort.csv")) == 250


def test_fit_is_reproducible_across_output_dirs(capsys, write_config, tmp_path):
    first = _fit(capsys, write_config, tmp_path, name="a")
    second = _fit(capsys, write_config, tmp_path, name="b")
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_seed_flag_overrides_config(capsys, write_config, tmp_path):
    model_path = _fit(capsys, write_config, tmp_path)
    config = write_config(
        {"command": "generate", "seed": 1, "output": "gen", "model": model_path, "n": 5},
        name="generate.json",
    )
    out_dir = tmp_path / "flagged"
    code, summary = _run(
        capsys, ["generate", "--config", config, "--seed", "99", "--out", str(out_dir)]
    )

    assert code == 0
    assert summary["seed"] == 99
    assert os.path.exists(out_dir / "cohort.csv")


# =============================================================================
# Exit codes
# =============================================================================


def test_missing_config_file_is_config_error(capsys, tmp_path):
    code, summary = _run(capsys, ["fit", "--config", str(tmp_path / "absent.json")])
    assert code == 2
    assert summary["exit_code"] == 2
    assert summary["errors"]


def test_missing_seed_is_config_error(capsys, write_config):
    config = write_config(
        {"command": "fit", "output": "out", "generator": "discrete", "data": {"source": "pima"}}
    )
    code, summary = _run(capsys, ["fit", "--config", config])
    assert code == 2
    assert "seed" in summary["errors"][0]


def test_unknown_key_is_config_error(capsys, write_config):
    config = write_config(
        {
            "command": "fit",
            "seed": 1,
            "output": "out",
            "generator": "discrete",
            "data": {"source": "pima"},
            "colour": "blue",
        }
    )
    code, summary = _run(capsys, ["fit", "--config", config])
    assert code == 2
    assert "colour" in summary["errors"][0]


def test_missing_data_file_is_data_error(capsys, write_config, tmp_path):
    config = write_config(
        {
            "command": "fit",
            "seed": 1,
            "output": "out",
            "generator": "discrete",
            "data": {"path": "nowhere.csv", "schema": [{"name": "x", "kind": "continuous"}]},
        }
    )
    code, summary = _run(capsys, ["fit", "--config", config])
    assert code == 3
    assert not os.path.exists(tmp_path / "out" / "model.json")


def test_unknown_category_is_data_error(capsys, write_config, tmp_path):
    (tmp_path / "cohort.csv").write_text(
        "Smoker,Weight\nNo,70.5\nMaybe,80.0\nYes,65.2\n", encoding="utf-8"
    )
    config = write_config(
        {
            "command": "fit",
            "seed": 1,
            "output": "out",
            "generator": "discrete",
            "data": {
                "path": "cohort.csv",
                "schema": [
                    {"name": "Smoker", "kind": "categorical", "categories": ["No", "Yes"]},
                    {"name": "Weight", "kind": "continuous"},
                ],
            },
        }
    )
    code, summary = _run(capsys, ["fit", "--config", config])
    assert code == 3
    assert "Maybe" in summary["errors"][0]


# =============================================================================
# simulate
# =============================================================================


def test_simulate_sweep_writes_one_file_per_rate(capsys, write_config, tmp_path):
    config = write_config(
        {
            "command": "simulate",
            "seed": 11,
            "output": "sim",
            "synthetic": {
                "n_patients": 50,
                "n_treatments": 6,
                "history_patients": 200,
                "history_periods": 6,
            },
            "scenario": {"n_runs": 1, "incident_cases_per_step": 5, "horizon": 4},
            "sweep": {"PENRATE": [0.10, 0.25, 0.40, 0.55, 0.70]},
        }
    )
    code, summary = _run(capsys, ["simulate", "--config", config, "--threads", "2"])

    assert code == 0, summary["errors"]
    out = tmp_path / "sim"
    labels = ["penrate_0.10", "penrate_0.25", "penrate_0.40", "penrate_0.55", "penrate_0.70"]
    for label in labels:
        assert (out / f"runs_{label}.json").exists()
        assert (out / f"patients_ndc_{label}.csv").exists()

    with open(out / "sweep.json", encoding="utf-8") as handle:
        index = json.load(handle)
    assert [p["label"] for p in index["points"]] == labels
    assert set(summary["summary"]["points"]) == set(labels)
    assert summary["summary"]["n_runs"] == 1

    with open(out / "runs_penrate_0.40.json", encoding="utf-8") as handle:
        runs = json.load(handle)
    assert runs["scenario"]["PENRATE"] == pytest.approx(0.40)
    assert len(runs["runs"]) == 1


# =============================================================================
# analyze
# =============================================================================


def _pima_csv(tmp_path, name: str = "pima.csv") -> tuple[str, list[dict]]:
    dataset = make_pima_like(n=200, seed=5)
    path = tmp_path / name
    write_csv(dataset, path)
    return str(path), schema_to_list(dataset.schema)


def test_analyze_self_comparison_has_zero_distances(capsys, write_config, tmp_path):
    path, schema = _pima_csv(tmp_path)
    config = write_config(
        {
            "command": "analyze",
            "seed": 2,
            "output": "analysis",
            "original": {"path": path, "schema": schema},
            "simulated": {"path": path},
        }
    )
    code, summary = _run(capsys, ["analyze", "--config", config])

    assert code == 0, summary["errors"]
    with open(tmp_path / "analysis" / "fidelity.json", encoding="utf-8") as handle:
        report = json.load(handle)
    assert all(c["value"] == 0.0 for c in report["columns"].values())
    assert all(p["delta"] == 0.0 for p in report["pairs"])
    assert summary["summary"]["fidelity"]["marginals_ok"]


@pytest.mark.slow
def test_analyze_experiment_writes_every_replicate(capsys, write_config, tmp_path):
    config = write_config(
        {
            "command": "analyze",
            "seed": 2,
            "output": "analysis",
            "original": {"source": "pima", "n": 200},
            "experiment": {
                "outcome": "Diabetes",
                "generators": ["discrete"],
                "noise": [True],
                "n_datasets": 100,
                "n_rows": 200,
            },
        }
    )
    code, summary = _run(capsys, ["analyze", "--config", config, "--threads", "4"])

    assert code == 0, summary["errors"]
    frame = pd.read_csv(tmp_path / "analysis" / "pvalues.csv")
    counts = frame.groupby("covariate").size()
    assert len(counts) == 8
    assert (counts == 100).all()
    assert frame["pvalue"].between(0.0, 1.0).all()
    assert (tmp_path / "analysis" / "pvalues.json").exists()


def test_analyze_outcome_not_in_data(capsys, write_config):
    config = write_config(
        {
            "command": "analyze",
            "seed": 2,
            "output": "analysis",
            "original": {"source": "pima", "n": 100},
            "experiment": {"outcome": "Cholesterol", "n_datasets": 2},
        }
    )
    code, _ = _run(capsys, ["analyze", "--config", config])
    assert code == 3


# =============================================================================
# Logging
# =============================================================================


def test_log_level_from_environment(capsys, monkeypatch, write_config, tmp_path):
    monkeypatch.setenv("COHORTSIM_LOG", "info")
    _fit(capsys, write_config, tmp_path)
    assert logging.getLogger().level == logging.INFO

    model_path = str(tmp_path / "fit" / "model.json")
    config = write_config(
        {"command": "generate", "seed": 1, "output": "gen", "model": model_path, "n": 3},
        name="generate.json",
    )
    main(["generate", "--config", config])
    captured = capsys.readouterr()
    assert "Starting pipeline stage" in captured.err
    assert "Starting pipeline stage" not in captured.out


def test_default_log_level_is_quiet(capsys, monkeypatch, write_config, tmp_path):
    monkeypatch.delenv("COHORTSIM_LOG", raising=False)
    model_path = _fit(capsys, write_config, tmp_path)
    config = write_config(
        {"command": "generate", "seed": 1, "output": "gen", "model": model_path, "n": 3},
        name="generate.json",
    )
    main(["generate", "--config", config])
    assert "Starting pipeline stage" not in capsys.readouterr().err
