"""
CSV ingestion and export for mixed datasets.

Files carry a header row, UTF-8 text and '.' as decimal separator. Every cell is
read as text first so that validation can name the offending row and column;
data rows are numbered from 1 (the header is line 0).
"""

import logging
import os

import numpy as np
import pandas as pd

from data.models.dataset import ColumnSchema, MixedDataset
from utils.errors import IngestionError
from utils.file_store import save_csv

logger = logging.getLogger(__name__)

NON_FINITE_SPELLINGS = ["nan", "inf", "infinity"]


def load_csv(
    path: str | os.PathLike[str],
    schema: list[ColumnSchema],
    drop_incomplete: bool = False,
) -> MixedDataset:
    """
    Load a CSV file and validate it against a schema.

    Args:
        path: CSV file path
        schema: Declared columns; the header must contain every schema name
        drop_incomplete: Drop rows with missing cells instead of failing

    Returns:
        Validated MixedDataset in schema column order

    Raises:
        FileNotFoundError: the file does not exist
        IngestionError: header mismatch, missing cell, unknown category or
            non-numeric continuous value
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")

    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise IngestionError(f"Empty file {path}") from e

    header = [str(c).strip() for c in raw.columns]
    raw.columns = header
    missing_columns = [col.name for col in schema if col.name not in header]
    if missing_columns:
        raise IngestionError(f"Header of {path} lacks columns {missing_columns}")

    raw = raw[[col.name for col in schema]].apply(lambda s: s.str.strip())

    incomplete = (raw == "").any(axis=1).to_numpy()
    if incomplete.any():
        if not drop_incomplete:
            row = int(incomplete.nonzero()[0][0])
            column = next(c for c in raw.columns if raw.iloc[row][c] == "")
            raise IngestionError("Missing value", row=row + 1, column=column)
        logger.warning(f"⚠️ Dropping {int(incomplete.sum())} incomplete rows from {path}")

    kept = raw.loc[~incomplete].reset_index(drop=True)
    row_numbers = np.flatnonzero(~incomplete) + 1
    values: dict[str, pd.Series] = {}
    problems = pd.DataFrame("", index=kept.index, columns=kept.columns)
    for col in schema:
        values[col.name], problems[col.name] = _check_column(col, kept[col.name])

    failed = (problems != "").to_numpy()
    if failed.any():
        i = int(failed.any(axis=1).nonzero()[0][0])
        j = int(failed[i].nonzero()[0][0])
        col = schema[j]
        cell = kept.iat[i, j]
        message = _problem_message(problems.iat[i, j], cell, col)
        raise IngestionError(message, row=int(row_numbers[i]), column=col.name)

    dataset = MixedDataset(schema, pd.DataFrame(values, columns=[c.name for c in schema]))
    logger.info(f"📋 Loaded {dataset.n} rows x {len(schema)} columns from {path}")
    return dataset


def _check_column(col: ColumnSchema, cells: pd.Series) -> tuple[pd.Series, pd.Series]:
    """Parsed values of one column and a per-cell problem code ('' when valid)."""
    problems = pd.Series("", index=cells.index, dtype=object)
    if col.is_categorical:
        problems[~cells.isin(col.categories)] = "category"
        return cells, problems
    numbers = pd.to_numeric(cells, errors="coerce").astype(float)
    spelled = cells.str.lower().str.lstrip("+-").isin(NON_FINITE_SPELLINGS)
    non_numeric = numbers.isna() & ~spelled
    problems[~np.isfinite(numbers.to_numpy())] = "non-finite"
    problems[non_numeric] = "non-numeric"
    return numbers, problems


def _problem_message(problem: str, cell: str, col: ColumnSchema) -> str:
    if problem == "category":
        return f"Unknown category '{cell}' (expected one of {list(col.categories)})"
    if problem == "non-numeric":
        return f"Non-numeric value '{cell}'"
    return f"Non-finite value '{cell}'"


def write_csv(dataset: MixedDataset, path: str | os.PathLike[str]) -> None:
    """Write a dataset with a header row; floats keep full round-trip precision."""
    frame = dataset.frame.copy()
    for col in dataset.categorical_columns:
        frame[col.name] = frame[col.name].astype(str)
    save_csv(path, frame)


def load_histories(path: str | os.PathLike[str], required: list[str]) -> pd.DataFrame:
    """
    Load per-patient period histories (one row per patient and period).

    Every column except TREAT must be numeric.

    Raises:
        FileNotFoundError: the file does not exist
        IngestionError: missing column or non-numeric cell, naming row and column
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")
    try:
        frame = pd.read_csv(path, dtype={"TREAT": str}, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise IngestionError(f"Empty file {path}") from e

    missing_columns = [name for name in required if name not in frame.columns]
    if missing_columns:
        raise IngestionError(f"Header of {path} lacks columns {missing_columns}")
    for name in frame.columns:
        if name == "TREAT":
            continue
        values = pd.to_numeric(frame[name], errors="coerce")
        bad = values.isna().to_numpy().nonzero()[0]
        if bad.size:
            raise IngestionError(
                f"Non-numeric value '{frame[name].iloc[bad[0]]}'",
                row=int(bad[0]) + 1,
                column=str(name),
            )
        frame[name] = values
    logger.info(f"📋 Loaded {len(frame)} history rows from {path}")
    return frame
