"""File store with atomic JSON and CSV writes for run outputs."""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, Union

import numpy as np
import pandas as pd

PathLike = Union[str, Path]


def read_json(path: PathLike) -> Dict[str, Any]:
    """
    Read JSON data from a file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        json.JSONDecodeError: If the file contains invalid JSON
    """
    with open(Path(path), "r") as f:
        return json.load(f)


def _json_default(value: Any) -> Any:
    """Convert numpy values to JSON-native types."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _atomic_write(path: PathLike, writer: Callable[[Any], None]) -> None:
    """Write through a temp file in the target directory, then rename."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    fd, temp_path = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            writer(f)
        os.replace(temp_path, file_path)
    except Exception:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise


def write_json(path: PathLike, data: Dict[str, Any]) -> None:
    """
    Write JSON data to a file atomically.

    Keys are sorted so identical inputs produce byte-identical files.
    """

    def _dump(f) -> None:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")

    _atomic_write(path, _dump)


def write_csv(path: PathLike, frame: pd.DataFrame) -> None:
    """Write a DataFrame as CSV atomically, without the index."""
    _atomic_write(path, lambda f: frame.to_csv(f, index=False, float_format="%.12g", lineterminator="\n"))
