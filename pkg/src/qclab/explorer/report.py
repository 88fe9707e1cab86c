"""Versioned CSV reports."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .. import __version__

SCHEMA_VERSION = 1


def format_value(v: Any) -> str:
    """Deterministic text form: ``repr`` for floats, lowercase booleans, blank for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(float(v))
    if hasattr(v, "dtype"):  # numpy scalar
        return format_value(v.item())
    return str(v)


@dataclass
class ExperimentReport:
    """Rows of one experiment, in a fixed column order.

    Parameters
    ----------
    experiment : str
        Experiment name, written to the second comment line.
    fields : sequence of str
        Column names; every row must have exactly these keys.
    rows : list of dict
    summary : str
        One-line human summary printed by the CLI.
    """

    experiment: str
    fields: Sequence[str]
    rows: list = field(default_factory=list)
    summary: str = ""

    def add(self, row: dict) -> None:
        if set(row) != set(self.fields):
            missing = set(self.fields) - set(row)
            extra = set(row) - set(self.fields)
            raise ValueError(f"row does not match the schema (missing {sorted(missing)}, extra {sorted(extra)})")
        self.rows.append(row)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# quasiconvex-lab v{__version__} schema={SCHEMA_VERSION}\n")
        buf.write(f"# experiment={self.experiment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.fields)
        for r in self.rows:
            w.writerow([format_value(r[f]) for f in self.fields])
        return buf.getvalue()

    def write(self, path: Optional[str]) -> None:
        text = self.to_csv()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_csv(path: str) -> tuple[dict, list]:
    """Parse a report file back into ``(header_info, rows)``; values stay strings."""
    info = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    info[k] = v
                elif tok.startswith("v"):
                    info["version"] = tok[1:]
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return info, rows
