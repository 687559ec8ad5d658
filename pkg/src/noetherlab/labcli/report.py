"""Machine-readable experiment reports: JSON and CSV emission.

Reports contain no timestamps; re-running the same configuration produces
byte-identical files. Complex numbers serialize as {"re": ..., "im": ...}.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Optional

import numpy as np

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"


@dataclass
class CheckRecord:
    name: str
    law: str  # which identity/property the check verifies
    metric: str
    value: Optional[float]
    threshold: Optional[float]
    status: str
    details: dict = dataclass_field(default_factory=dict)

    @classmethod
    def skipped(cls, name: str, law: str, reason: str) -> "CheckRecord":
        return cls(name=name, law=law, metric="", value=None, threshold=None, status=SKIPPED, details={"reason": reason})


@dataclass
class ConvergenceTable:
    name: str
    law: str
    grid_sizes: list[int]
    errors: list[float]
    pairwise_orders: list[Optional[float]]  # first entry None
    fitted_order: Optional[float]
    order_threshold: float
    floor: float
    status: str


@dataclass
class Report:
    provenance: dict
    config: dict
    derivation: dict = dataclass_field(default_factory=dict)
    checks: list[CheckRecord] = dataclass_field(default_factory=list)
    tables: list[ConvergenceTable] = dataclass_field(default_factory=list)
    field_dumps: dict[str, np.ndarray] = dataclass_field(default_factory=dict)

    def add(self, check: CheckRecord) -> CheckRecord:
        self.checks.append(check)
        return check

    @property
    def all_executed_pass(self) -> bool:
        statuses = [c.status for c in self.checks] + [t.status for t in self.tables]
        return all(s != FAIL for s in statuses)


def _jsonable(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.complexfloating, complex)):
        value = complex(value)
        return {"re": value.real, "im": value.imag}
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def report_to_dict(report: Report) -> dict:
    return _jsonable(
        {
            "provenance": report.provenance,
            "config": report.config,
            "derivation": report.derivation,
            "checks": [
                {
                    "name": c.name,
                    "law": c.law,
                    "metric": c.metric,
                    "value": c.value,
                    "threshold": c.threshold,
                    "status": c.status,
                    "details": c.details,
                }
                for c in report.checks
            ],
            "convergence": [
                {
                    "name": t.name,
                    "law": t.law,
                    "grid_sizes": t.grid_sizes,
                    "errors": t.errors,
                    "pairwise_orders": t.pairwise_orders,
                    "fitted_order": t.fitted_order,
                    "order_threshold": t.order_threshold,
                    "floor": t.floor,
                    "status": t.status,
                }
                for t in report.tables
            ],
        }
    )


def report_to_json(report: Report) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def checks_to_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "law", "metric", "value", "threshold", "status"])
    for c in report.checks:
        writer.writerow(
            [
                c.name,
                c.law,
                c.metric,
                "" if c.value is None else repr(float(c.value)),
                "" if c.threshold is None else repr(float(c.threshold)),
                c.status,
            ]
        )
    return buf.getvalue()


def table_to_csv(table: ConvergenceTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["grid_n", "error", "fitted_order"])
    for n, err, order in zip(table.grid_sizes, table.errors, table.pairwise_orders):
        writer.writerow([n, repr(float(err)), "" if order is None else repr(float(order))])
    return buf.getvalue()


def emit_report(report: Report, directory, formats: tuple[str, ...] = ("json", "csv")) -> list[Path]:
    """Write report files; returns the list of paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = directory / "report.json"
        path.write_text(report_to_json(report), encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        path = directory / "checks.csv"
        path.write_text(checks_to_csv(report), encoding="utf-8")
        written.append(path)
        for table in report.tables:
            path = directory / f"convergence_{table.name}.csv"
            path.write_text(table_to_csv(table), encoding="utf-8")
            written.append(path)
    for name, values in report.field_dumps.items():
        path = directory / f"field_{name}.csv"
        flat = values.reshape(values.shape[0], -1)
        np.savetxt(path, flat.real, delimiter=",", fmt="%.17g")
        written.append(path)
    return written
