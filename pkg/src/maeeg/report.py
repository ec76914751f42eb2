"""RunReport: the tabular output of training and evaluation runs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from maeeg.errors import DataError


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_rows(path, rows: list, columns: list | None = None) -> Path:
    """Write dict rows to CSV with a stable column order."""
    path = Path(path)
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(row.get(k, "")) for k in columns})
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


def read_rows(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class RunReport:
    loss_rows: list = field(default_factory=list)
    metric_rows: list = field(default_factory=list)
    validation_rows: list = field(default_factory=list)
    confusion: list | None = None
    attention: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def write(self, out_dir, prefix: str = "") -> list:
        out_dir = Path(out_dir)
        written = []
        if self.loss_rows:
            written.append(write_rows(out_dir / f"{prefix}loss.csv", self.loss_rows))
        if self.validation_rows:
            written.append(write_rows(out_dir / f"{prefix}validation.csv", self.validation_rows))
        if self.metric_rows:
            written.append(write_rows(out_dir / f"{prefix}metrics.csv", self.metric_rows))
        if self.confusion is not None:
            rows = [{"true": i, **{f"pred_{j}": int(v) for j, v in enumerate(row)}}
                    for i, row in enumerate(self.confusion)]
            written.append(write_rows(out_dir / f"{prefix}confusion.csv", rows))
        return written
