"""CSV helpers shared by the simulators, the harness and the CLI.

Every CSV written by this package starts with the same version comment
line so downstream tooling can detect format changes.  Floats are
written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import numpy as np

VERSION_LINE = "# robust-wdep-dnn v1"


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(VERSION_LINE + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV written by this package; comment lines are skipped."""
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path}: no header line found")
    return header, rows
