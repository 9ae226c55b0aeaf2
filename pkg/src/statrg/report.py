"""Report containers and atomic CSV/JSON output.

Floats are written with 17 significant digits so that values round-trip.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, List, Optional, Sequence

from . import __version__

__all__ = [
    "CSV_COLUMNS",
    "DeltaRow",
    "MCReport",
    "format_value",
    "atomic_write_text",
    "table_to_csv",
    "write_table",
    "export_report",
    "load_report",
]

CSV_COLUMNS = (
    "delta", "rmse", "rmse_stderr", "oracle_inf", "ratio",
    "mean_steps", "emergency_fraction", "z_violations", "replicates", "seed",
)


def format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


@dataclass
class DeltaRow:
    delta: float
    rmse: float
    rmse_stderr: float
    oracle_inf: float
    ratio: float
    mean_steps: float
    emergency_fraction: float
    z_violations: int
    replicates: int
    seed: int
    exhausted: int = 0


@dataclass
class MCReport:
    rows: List[DeltaRow] = field(default_factory=list)
    rate_slope: Optional[float] = None
    rate_slope_theory: Optional[float] = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "rate_slope": self.rate_slope,
            "rate_slope_theory": self.rate_slope_theory,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MCReport":
        names = {f.name for f in fields(DeltaRow)}
        rows = [DeltaRow(**{k: v for k, v in r.items() if k in names}) for r in d.get("rows", [])]
        return cls(rows, d.get("rate_slope"), d.get("rate_slope_theory"), d.get("config", {}))

    def to_csv(self) -> str:
        return table_to_csv(CSV_COLUMNS, ([getattr(r, c) for c in CSV_COLUMNS] for r in self.rows))

    def to_json(self) -> str:
        d = self.to_dict()
        d["metadata"] = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__}
        return json.dumps(d, indent=2, sort_keys=True)


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, table_to_csv(header, rows))


def export_report(report: MCReport, path, format: str = "csv") -> None:
    if format == "csv":
        atomic_write_text(path, report.to_csv())
    elif format == "json":
        atomic_write_text(path, report.to_json() + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def load_report(path) -> MCReport:
    with open(path) as fh:
        return MCReport.from_dict(json.load(fh))
