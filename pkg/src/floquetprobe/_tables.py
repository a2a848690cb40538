"""Deterministic tabular output (CSV or JSON) shared by exports and the CLI.

Floats are rendered with 17 significant digits so repeated runs produce
byte-identical bodies.
"""

from __future__ import annotations

import json


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_table(path, columns: list[str], rows, fmt: str = "csv") -> None:
    """Write rows (iterable of tuples) under ``columns`` as CSV or JSON."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(format_value(v) for v in row) + "\n")
    elif fmt == "json":
        payload = [dict(zip(columns, row)) for row in rows]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown table format {fmt!r}")
