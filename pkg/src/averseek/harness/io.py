"""Atomic, byte-reproducible CSV and JSON writers."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: str | Path, columns: Sequence[str], rows: np.ndarray | Iterable[Sequence[Any]]) -> Path:
    """Numeric cells use 17 significant digits; NaN or Inf cells are refused."""
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, str):
                cells.append(v)
            elif v is None:
                cells.append("")
            else:
                if not math.isfinite(float(v)):
                    raise ValueError(f"refusing to write non-finite value to {path}")
                cells.append(fmt(v))
        if len(cells) != len(columns):
            raise ValueError("row length does not match header")
        lines.append(",".join(cells))
    return _atomic_write(Path(path), "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str | Path, data: dict[str, Any]) -> Path:
    return _atomic_write(Path(path), json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text()
    lines = text.strip("\n").split("\n")
    header = lines[0].split(",")
    data = np.array([[float(c) for c in line.split(",")] for line in lines[1:]])
    return header, data.reshape(len(lines) - 1, len(header))
