"""Run reports: deterministic CSV/JSON emission."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import __version__


class IoError(OSError):
    """Report directory cannot be created or written."""


def fmt(value) -> str:
    """Round-trip rendering: 17 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if hasattr(value, "dtype"):
        return fmt(value.item())
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "dtype"):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class RunReport:
    command: str
    config: dict
    version: str = __version__
    tables: dict = field(default_factory=dict)  # filename -> (header, rows)
    documents: dict = field(default_factory=dict)  # filename -> JSON object
    texts: dict = field(default_factory=dict)  # filename -> raw text
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)  # name -> bool
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def add_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]):
        self.tables[name] = (list(header), [list(r) for r in rows])

    def check(self, name: str, ok) -> bool:
        self.checks[name] = bool(ok)
        return bool(ok)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def emit_report(report: RunReport, directory: str) -> list:
    """Write every table and document plus ``summary.json``; return the paths.

    ``summary.json`` is byte-stable for identical inputs; wall-clock timings go
    to ``timings.json`` so they do not break that.
    """
    try:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for name, (header, rows) in report.tables.items():
            path = os.path.join(directory, name)
            write_csv(path, header, rows)
            paths.append(path)
        for name, doc in report.documents.items():
            path = os.path.join(directory, name)
            write_json(path, doc)
            paths.append(path)
        for name, text in report.texts.items():
            path = os.path.join(directory, name)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            paths.append(path)
        outputs = sorted(os.path.basename(p) for p in paths) + ["summary.json", "timings.json"]
        summary = {
            "command": report.command,
            "version": report.version,
            "config": report.config,
            "outputs": sorted(outputs),
            "results": report.results,
            "checks": report.checks,
            "passed": report.passed,
        }
        path = os.path.join(directory, "summary.json")
        write_json(path, summary)
        paths.append(path)
        path = os.path.join(directory, "timings.json")
        write_json(path, {k: round(v, 6) for k, v in report.timings.items()})
        paths.append(path)
    except OSError as exc:
        raise IoError(f"cannot write reports to {directory!r}: {exc}") from exc
    return paths
