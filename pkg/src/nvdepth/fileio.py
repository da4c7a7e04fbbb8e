"""Versioned CSV and JSON files with atomic writes.

CSV layout::

    # nvdepth-csv=1.0
    # kind=normalized
    # N=64
    tau_s,contrast,sigma
    5.9e-07,0.93,0.01

Metadata lines are ``# key=value``; the first one carries the schema
version. Readers reject an unknown major version. Floats are written with
17 significant digits so files round-trip exactly and identical inputs give
identical bytes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "CSV_VERSION",
    "ParseError",
    "CsvTable",
    "atomic_write_text",
    "format_float",
    "write_csv",
    "read_csv",
    "to_jsonable",
    "write_json",
    "read_json",
]

CSV_VERSION = "1.0"
_VERSION_KEY = "nvdepth-csv"

# expected columns per file kind
KIND_COLUMNS = {
    "raw": ("tau_s", "f0", "f1"),
    "signal": ("tau_s", "s", "sigma"),
    "normalized": ("tau_s", "contrast", "sigma"),
    "linewidth": ("depth_nm", "linewidth_khz"),
    "bath": ("x_m", "y_m", "z_m", "kappa_sq"),
    "depths": ("depth_nm",),
}


class ParseError(ValueError):
    """Malformed input file; the message starts with ``file:line``."""

    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _format_meta(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_format_meta(e) for e in v)
    s = str(v)
    if "\n" in s:
        raise ValueError("metadata values must be single-line")
    return s


class CsvTable:
    """Parsed CSV: metadata dict (strings), column names and a float array."""

    def __init__(self, meta: dict, columns: tuple[str, ...], data: np.ndarray, path=None):
        self.meta = meta
        self.columns = columns
        self.data = data
        self.path = path

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "")

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"{self.path}: no column {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self.columns


def write_csv(path, meta: Mapping, columns: Sequence[str], data) -> Path:
    """Write a versioned CSV; ``meta`` values are rendered as strings in insertion order."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError("data shape does not match the column list")
    lines = [f"# {_VERSION_KEY}={CSV_VERSION}"]
    for k, v in meta.items():
        if "=" in k or "\n" in k:
            raise ValueError(f"bad metadata key {k!r}")
        lines.append(f"# {k}={_format_meta(v)}")
    lines.append(",".join(columns))
    for row in data:
        lines.append(",".join(format_float(x) for x in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path) -> CsvTable:
    """Parse a versioned CSV, raising :class:`ParseError` with the offending line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(path, 0, f"cannot read file: {exc}") from exc
    meta: dict[str, str] = {}
    columns: tuple[str, ...] | None = None
    rows = []
    version_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                continue  # free comment
            k, v = (p.strip() for p in body.split("=", 1))
            if k == _VERSION_KEY:
                major = v.split(".", 1)[0]
                if major != CSV_VERSION.split(".", 1)[0]:
                    raise ParseError(path, lineno, f"unsupported {_VERSION_KEY} version {v!r}")
                version_seen = True
            else:
                meta[k] = v
            continue
        if not version_seen:
            raise ParseError(path, lineno, f"missing '# {_VERSION_KEY}=...' header")
        if columns is None:
            columns = tuple(c.strip() for c in line.split(","))
            if len(set(columns)) != len(columns) or any(not c for c in columns):
                raise ParseError(path, lineno, "bad column header")
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise ParseError(path, lineno, f"expected {len(columns)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(path, lineno, f"non-numeric field in {line!r}") from None
    if not version_seen:
        raise ParseError(path, 1, f"missing '# {_VERSION_KEY}=...' header")
    if columns is None:
        raise ParseError(path, 1, "no column header")
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    kind = meta.get("kind")
    if kind in KIND_COLUMNS:
        need = [c for c in KIND_COLUMNS[kind] if c not in columns]
        if need:
            raise ParseError(path, 1, f"{kind} file lacks columns {need}")
    return CsvTable(meta, columns, data, path)


def to_jsonable(obj):
    """Convert numpy values and non-finite floats into plain JSON types."""
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_float(x)
    return obj


def write_json(path, obj) -> Path:
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    return atomic_write_text(path, text + "\n")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from exc
    except OSError as exc:
        raise ParseError(path, 0, f"cannot read file: {exc}") from exc
