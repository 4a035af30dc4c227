"""Deterministic CSV and JSON emission for command output.

Floats are serialized with 17 significant digits so every value round-trips
bit for bit; parsing recovers int, then float, then string, with empty cells
mapping to None.  No timestamps or other nondeterministic metadata belong in
these payloads.
"""

from __future__ import annotations

import csv
import io
import json
import math


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def parse_cell(text: str):
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def emit_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[dict]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [dict(zip(header, (parse_cell(cell) for cell in row))) for row in reader]
    return header, rows


def _json_ready(value):
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        try:
            return _json_ready(value.item())
        except (AttributeError, ValueError):
            pass
    if hasattr(value, "tolist"):
        return _json_ready(value.tolist())
    return value


def dump_json(document: dict) -> str:
    """JSON text with native float repr (shortest round-trip form)."""
    return json.dumps(_json_ready(document), indent=2) + "\n"
