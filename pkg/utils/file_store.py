"""
File utilities for model, result and report documents.

Every write goes through a temporary file in the destination directory followed
by ``os.replace`` so a reader never observes a half-written file.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

import pandas as pd

from utils.errors import DataError

logger = logging.getLogger(__name__)


def _atomic_write_text(path: str | os.PathLike[str], text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def save_json(path: str | os.PathLike[str], data: Any) -> None:
    """Write a JSON document atomically (sorted keys, stable float formatting)."""
    try:
        _atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
        logger.info(f"✅ Saved {path}")
    except OSError as e:
        logger.error(f"❌ Error saving {path}: {e}")
        raise


def load_json(path: str | os.PathLike[str]) -> dict[str, Any]:
    """Read a JSON document; malformed content raises DataError."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"No such file: {path}")

    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DataError(f"Malformed JSON in {path}: {e}") from e

    if not isinstance(document, dict):
        raise DataError(f"Expected a JSON object in {path}")
    logger.info(f"📋 Loaded {path}")
    return document


def save_csv(path: str | os.PathLike[str], frame: pd.DataFrame) -> None:
    """Write a DataFrame as CSV atomically ('.' decimal separator, no index)."""
    text = frame.to_csv(index=False, lineterminator="\n")
    _atomic_write_text(path, text)
    logger.info(f"✅ Saved {len(frame)} rows to {path}")
