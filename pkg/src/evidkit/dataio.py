"""Reading observation CSVs and writing reproducible JSON/CSV outputs.

Numeric output is rendered with 17 significant digits, which round-trips
every finite double exactly.  Writes go to a temporary file in the target
directory followed by an atomic rename, so a crashed run never leaves a
partial output behind.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .exceptions import DataError
from .glm import ObservationSet

__all__ = ["read_observations", "format_number", "render_json", "write_json", "write_csv"]


def read_observations(path: str) -> ObservationSet:
    """Parse a UTF-8 CSV with header ``y`` or ``x,y`` into an ObservationSet.

    Decimal separator is ``.``; any row with a missing or non-numeric entry
    is rejected, naming the offending file line (the header is line 1).
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [cell.strip() for cell in rows[0]]
    if header == ["y"]:
        has_x = False
    elif header == ["x", "y"]:
        has_x = True
    else:
        raise DataError(f"{path}: header must be 'y' or 'x,y', got {','.join(header)!r}")
    if len(rows) == 1:
        raise DataError(f"{path}: no data rows")

    xs, ys = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        cells = [cell.strip() for cell in row]
        if len(cells) != len(header):
            raise DataError(f"{path}: row {line_no}: expected {len(header)} columns, "
                            f"got {len(cells)}")
        parsed = []
        for name, cell in zip(header, cells):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {line_no}: non-numeric value {cell!r} "
                                f"in column {name}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}: row {line_no}: non-finite value {cell!r} "
                                f"in column {name}")
            parsed.append(value)
        if has_x:
            xs.append(parsed[0])
            ys.append(parsed[1])
        else:
            ys.append(parsed[0])
    return ObservationSet(y=np.array(ys), x=np.array(xs) if has_x else None)


def format_number(value) -> str:
    """Render a number with 17 significant digits (exact double round-trip)."""
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not numeric output")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return format(value, ".17g")


def render_json(obj, indent: int | None = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats.

    The standard encoder offers no hook for float formatting, so this walks
    the structure itself.  Non-finite floats become ``NaN``/``Infinity``
    tokens, matching what ``json.loads`` accepts back.  ``indent=None``
    renders everything on one line.
    """
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer, float, np.floating)):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return render_json(obj.tolist(), indent)
    compact = indent is None
    child = None if compact else indent + 1
    if compact:
        before, between, after = "", ", ", ""
    else:
        inner = "  " * (indent + 1)
        before, between, after = "\n" + inner, ",\n" + inner, "\n" + "  " * indent
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = between.join(render_json(item, child) for item in obj)
        return "[" + before + items + after + "]"
    if isinstance(obj, dict):
        if len(obj) == 0:
            return "{}"
        items = between.join(
            f"{json.dumps(str(key), ensure_ascii=False)}: {render_json(value, child)}"
            for key, value in obj.items())
        return "{" + before + items + after + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    tmp_path = os.path.join(directory, f".{os.path.basename(path)}.tmp{os.getpid()}")
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except OSError:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_json(path: str, payload: dict):
    _atomic_write(path, render_json(payload) + "\n")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return format_number(value)


def write_csv(path: str, header: list[str], rows: list[list], comments: list[str] = ()):
    """Comment lines (prefixed ``# ``), then a header row, then data rows."""
    lines = [f"# {comment}" for comment in comments]
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for value in row:
            cell = _csv_cell(value)
            if "," in cell or '"' in cell or "\n" in cell:
                cell = '"' + cell.replace('"', '""') + '"'
            cells.append(cell)
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")
