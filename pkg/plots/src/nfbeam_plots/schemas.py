"""Versioned CSV schema registry and validation.

Every simulator CSV starts with a `# schema=<name> v<version>` comment line
followed by a header row.  Validation is strict about the declared name and
the required columns; extra columns are tolerated (they ride along in the
parsed rows).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class SchemaError(ValueError):
    """Input file does not match the declared schema; names the offender."""


@dataclass(frozen=True)
class Schema:
    name: str
    version: int
    columns: tuple


SCHEMAS = {
    "rate_timeseries": Schema("rate_timeseries", 1,
                              ("t_s", "policy", "mean_rate_bps_hz", "ci95_bps_hz")),
    "beam_durations": Schema("beam_durations", 1,
                             ("category", "policy", "mean_duration_s", "ci95_s",
                              "mean_update_count")),
    "freq_sweep": Schema("freq_sweep", 1,
                         ("policy", "f_c_hz", "mean_rate_bps_hz", "ci95_bps_hz")),
}


def read_csv(path, expected: str) -> list[dict]:
    """Parse and validate one schema-tagged CSV; returns the rows as dicts."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file does not exist")
    schema = SCHEMAS[expected]
    with open(path, newline="") as f:
        tag_line = f.readline().strip()
        if not tag_line.startswith("# schema="):
            raise SchemaError(f"{path}: missing '# schema=' tag line")
        declared = tag_line[len("# schema="):]
        if declared != f"{schema.name} v{schema.version}":
            raise SchemaError(
                f"{path}: declared schema {declared!r}, expected "
                f"'{schema.name} v{schema.version}'")
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for column in schema.columns:
            if column not in header:
                raise SchemaError(f"{path}: missing required column {column!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def as_float(row: dict, column: str, path) -> float:
    try:
        return float(row[column])
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: column {column!r} holds a non-numeric value "
                          f"{row.get(column)!r}") from None
