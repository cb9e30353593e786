"""
Mixed-type tabular data model.

A MixedDataset pairs a declared schema with a pandas DataFrame whose continuous
columns are floats and whose categorical columns are ordered pandas
Categoricals over string labels. Categorical codes 0..M-1 follow the declared
category order and are the numeric recoding used by every generator.
"""

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from utils.errors import DomainError, ShapeError

ColumnKind = Literal["continuous", "categorical"]
Closure = Literal["left", "right"]


@dataclass(frozen=True)
class ColumnSchema:
    """Declaration of one column: name, kind and (for categoricals) ordered labels."""

    name: str
    kind: ColumnKind
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "categorical"):
            raise DomainError(f"Column '{self.name}': unknown kind '{self.kind}'")
        labels = tuple(str(c) for c in self.categories)
        if self.kind == "categorical":
            if len(labels) < 2:
                raise DomainError(f"Column '{self.name}': categorical needs >= 2 categories")
            if len(set(labels)) != len(labels):
                raise DomainError(f"Column '{self.name}': duplicate category labels")
        elif labels:
            raise DomainError(f"Column '{self.name}': continuous columns take no categories")
        object.__setattr__(self, "categories", labels)

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def to_dict(self) -> dict[str, Any]:
        entry: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.is_categorical:
            entry["categories"] = list(self.categories)
        return entry

    @classmethod
    def from_dict(cls, entry: dict[str, Any]) -> "ColumnSchema":
        return cls(
            name=str(entry["name"]),
            kind=entry["kind"],
            categories=tuple(entry.get("categories", ())),
        )


def continuous(name: str) -> ColumnSchema:
    return ColumnSchema(name, "continuous")


def categorical(name: str, categories: list[Any] | tuple[Any, ...]) -> ColumnSchema:
    return ColumnSchema(name, "categorical", tuple(str(c) for c in categories))


def schema_to_list(schema: list[ColumnSchema]) -> list[dict[str, Any]]:
    return [col.to_dict() for col in schema]


def schema_from_list(entries: list[dict[str, Any]]) -> list[ColumnSchema]:
    schema = [ColumnSchema.from_dict(entry) for entry in entries]
    _check_unique_names(schema)
    return schema


def _check_unique_names(schema: list[ColumnSchema]) -> None:
    names = [col.name for col in schema]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise DomainError(f"Duplicate column names in schema: {duplicates}")


@dataclass(frozen=True)
class MixedDataset:
    """Column-typed table of continuous and categorical covariates."""

    schema: list[ColumnSchema]
    frame: pd.DataFrame = field(repr=False)

    def __post_init__(self) -> None:
        _check_unique_names(self.schema)
        names = [col.name for col in self.schema]
        missing = [n for n in names if n not in self.frame.columns]
        if missing:
            raise ShapeError(f"Frame lacks schema columns {missing}")

        frame = self.frame.loc[:, names].reset_index(drop=True).copy()
        for col in self.schema:
            if col.is_categorical:
                values = frame[col.name].astype(str)
                unknown = sorted(set(values) - set(col.categories))
                if unknown:
                    raise DomainError(f"Column '{col.name}': undeclared categories {unknown}")
                frame[col.name] = pd.Categorical(values, categories=col.categories, ordered=True)
            else:
                frame[col.name] = frame[col.name].astype(float)
        object.__setattr__(self, "schema", list(self.schema))
        object.__setattr__(self, "frame", frame)

    # -------------------------------------------------------------------------
    # Shape
    # -------------------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def names(self) -> list[str]:
        return [col.name for col in self.schema]

    @property
    def continuous_columns(self) -> list[ColumnSchema]:
        return [col for col in self.schema if not col.is_categorical]

    @property
    def categorical_columns(self) -> list[ColumnSchema]:
        return [col for col in self.schema if col.is_categorical]

    def column_schema(self, name: str) -> ColumnSchema:
        for col in self.schema:
            if col.name == name:
                return col
        raise DomainError(f"Unknown column '{name}'")

    # -------------------------------------------------------------------------
    # Access
    # -------------------------------------------------------------------------

    def values(self, name: str) -> NDArray[np.float64]:
        """Continuous values, or integer codes for a categorical column."""
        col = self.column_schema(name)
        if col.is_categorical:
            return self.frame[name].cat.codes.to_numpy(dtype=float)
        return self.frame[name].to_numpy(dtype=float)

    def labels(self, name: str) -> NDArray[np.str_]:
        col = self.column_schema(name)
        if not col.is_categorical:
            raise DomainError(f"Column '{name}' is not categorical")
        return self.frame[name].astype(str).to_numpy()

    def to_numeric(self, names: list[str] | None = None) -> NDArray[np.float64]:
        """n x K matrix with categoricals recoded to integer codes 0..M-1."""
        selected = names if names is not None else self.names
        if not selected:
            return np.zeros((self.n, 0))
        return np.column_stack([self.values(name) for name in selected])

    def rows(self) -> list[dict[str, Any]]:
        """Records as dictionaries (categorical values as labels)."""
        return self.frame.astype(object).to_dict(orient="records")

    def take(self, index: NDArray[np.int64] | list[int]) -> "MixedDataset":
        return MixedDataset(self.schema, self.frame.iloc[np.asarray(index, dtype=int)])

    def with_columns(self, extra: list[ColumnSchema], values: dict[str, Any]) -> "MixedDataset":
        frame = self.frame.copy()
        for col in extra:
            frame[col.name] = values[col.name]
        return MixedDataset(self.schema + list(extra), frame)

    def select(self, names: list[str]) -> "MixedDataset":
        return MixedDataset([self.column_schema(n) for n in names], self.frame[names])

    # -------------------------------------------------------------------------
    # Construction
    # -------------------------------------------------------------------------

    @classmethod
    def from_numeric(
        cls, schema: list[ColumnSchema], matrix: NDArray[np.float64]
    ) -> "MixedDataset":
        """Build from an n x K matrix holding continuous values and categorical codes."""
        matrix = np.asarray(matrix, dtype=float).reshape(-1, len(schema))
        data: dict[str, Any] = {}
        for j, col in enumerate(schema):
            if col.is_categorical:
                codes = matrix[:, j].astype(int)
                if codes.size and (codes.min() < 0 or codes.max() >= len(col.categories)):
                    top = len(col.categories) - 1
                    raise DomainError(f"Column '{col.name}': code outside 0..{top}")
                data[col.name] = np.asarray(col.categories, dtype=object)[codes]
            else:
                data[col.name] = matrix[:, j]
        return cls(schema, pd.DataFrame(data, columns=[c.name for c in schema]))

    def equals(self, other: "MixedDataset") -> bool:
        return self.schema == other.schema and self.frame.equals(other.frame)


@dataclass(frozen=True)
class ThresholdDiscretizer:
    """
    Maps a real value to an interval label.

    ``closure="left"`` builds intervals [c_{i-1}, c_i); ``closure="right"`` builds
    (c_{i-1}, c_i]. Labels follow the intervals in ascending order.
    """

    cut_points: tuple[float, ...]
    output_labels: tuple[str, ...]
    closure: Closure = "left"

    def __post_init__(self) -> None:
        cuts = tuple(float(c) for c in self.cut_points)
        labels = tuple(str(label) for label in self.output_labels)
        if any(b <= a for a, b in zip(cuts, cuts[1:], strict=False)):
            raise DomainError(f"Cut points must be strictly ascending: {cuts}")
        if len(labels) != len(cuts) + 1:
            raise DomainError(f"Need {len(cuts) + 1} labels for {len(cuts)} cut points")
        if len(set(labels)) != len(labels):
            raise DomainError(f"Labels must be unique: {labels}")
        if self.closure not in ("left", "right"):
            raise DomainError(f"Unknown closure '{self.closure}'")
        object.__setattr__(self, "cut_points", cuts)
        object.__setattr__(self, "output_labels", labels)
