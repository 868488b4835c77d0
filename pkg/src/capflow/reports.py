"""Serialization of traces and reports.

Floats are written with 17 significant digits so that re-parsing gives the
same binary value. JSON output uses sorted keys and a fixed layout, so
identical data always produces identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .errors import CapflowError, DomainError

MODULE = "cli_reports"


class OutputError(CapflowError):
    exit_code = 2


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = f"{x:.17g}"
    # keep a float marker so the value parses back as a float
    return text if any(c in text for c in ".e") else text + ".0"


def to_plain(value):
    """Convert numpy containers, dataclasses and tuples to JSON-ready Python objects."""
    if hasattr(value, "to_json") and callable(value.to_json):
        return to_plain(value.to_json())
    if is_dataclass(value) and not isinstance(value, type):
        return to_plain(asdict(value))
    if isinstance(value, tuple) and hasattr(value, "_asdict"):
        return to_plain(value._asdict())
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    raise DomainError(f"cannot serialize {type(value).__name__}", MODULE)


def _dump(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(value[k], indent, level + 1)}" for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in value) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent, level + 1) for v in value) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return json.dumps(value, ensure_ascii=False)


def dumps_report(data, indent: int = 2) -> str:
    """Deterministic JSON text; non-finite floats use the NaN/Infinity literals Python's json reads back."""
    return _dump(to_plain(data), indent, 0) + "\n"


def loads_report(text: str):
    return json.loads(text)


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}", MODULE) from exc


def emit_report(data, path) -> None:
    _write(path, dumps_report(data))


def parse_report(path):
    try:
        return loads_report(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}", MODULE) from exc


def trace_csv(trace) -> str:
    """CSV text of a monotonicity trace, or of any list of row dicts sharing keys."""
    if hasattr(trace, "to_csv"):
        return trace.to_csv()
    rows = list(trace)
    if not rows:
        raise DomainError("empty trace", MODULE)
    header = list(rows[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(row[k]) if isinstance(row[k], float) else row[k] for k in header])
    return buf.getvalue()


def emit_trace(trace, path) -> None:
    _write(path, trace_csv(trace))


def parse_trace(path) -> list:
    """Rows of a trace CSV with numeric fields converted back (ints stay ints)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}", MODULE) from exc
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = int(v)
            except ValueError:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
        out.append(parsed)
    return out
