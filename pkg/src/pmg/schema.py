"""Validation helpers for the JSON documents this package reads and writes.

Every loader reports failures with the JSON field path of the offending
entry, e.g. ``chains.L[2].axis: expected a 3-vector``.
"""

from __future__ import annotations

import numpy as np


class SchemaError(ValueError):
    """A document failed validation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def require(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return doc[key]


def as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected an integer, got {type(value).__name__}")
    return value


def as_vector(value, length: int, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(path, "expected a numeric array") from None
    if arr.shape != (length,):
        raise SchemaError(path, f"expected a {length}-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(path, "entries must be finite")
    return arr


def as_matrix(value, cols: int, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(path, "expected a numeric matrix") from None
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise SchemaError(path, f"expected rows of length {cols}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(path, "entries must be finite")
    return arr


def check_schema_version(doc: dict, expected: int, path: str = "") -> None:
    version = require(doc, "schema_version", path)
    field = f"{path}.schema_version" if path else "schema_version"
    if as_int(version, field) != expected:
        raise SchemaError(field, f"unsupported version {version}, expected {expected}")
