"""
Aggregation of per-run evaluation records into mean/std rows, and the
MetricLog CSV format.
"""
import csv
import os
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from models import MetricLog, MetricRecord, MetricRow

CSV_COLUMNS = [
    "step",
    "objective_mean",
    "objective_std",
    "upper_bound_mean",
    "constraint_gap_mean",
    "train_acc_mean",
    "test_acc_mean",
]

# MetricRow field -> MetricRecord field averaged into it
_OPTIONAL_MEANS = {
    "upper_bound_mean": "upper_bound_objective",
    "constraint_gap_mean": "constraint_gap",
    "train_acc_mean": "train_accuracy",
    "test_acc_mean": "test_accuracy",
}


def _mean_of(records: Sequence[MetricRecord], field: str) -> Optional[float]:
    values = [getattr(r, field) for r in records]
    if any(v is None for v in values):
        return None
    return float(np.mean(values))


def aggregate(runs: List[List[MetricRecord]], label: str = "") -> MetricLog:
    """
    Combine repeats evaluated at the same steps. Runs are truncated to the
    shortest one; std is the population standard deviation across runs.
    """
    if not runs:
        return MetricLog(label=label)
    length = min(len(run) for run in runs)
    rows = []
    for i in range(length):
        records = [run[i] for run in runs]
        objectives = np.array([r.objective for r in records])
        row = MetricRow(
            step=records[0].step,
            objective_mean=float(objectives.mean()),
            objective_std=float(objectives.std()),
            **{column: _mean_of(records, field) for column, field in _OPTIONAL_MEANS.items()},
        )
        rows.append(row)
    return MetricLog(label=label, rows=rows, runs=runs)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(value: str, integer: bool = False):
    if value == "":
        return None
    return int(value) if integer else float(value)


def write_csv(log: MetricLog, path: Union[str, os.PathLike]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in log.rows:
            writer.writerow([_format(getattr(row, column)) for column in CSV_COLUMNS])


def write_combined_csv(logs: Dict[str, MetricLog], path: Union[str, os.PathLike]):
    """One file for several variants: a leading `variant` column, rows grouped by variant."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["variant"] + CSV_COLUMNS)
        for label, log in logs.items():
            for row in log.rows:
                writer.writerow([label] + [_format(getattr(row, column)) for column in CSV_COLUMNS])


def read_csv(path: Union[str, os.PathLike]) -> Dict[str, MetricLog]:
    """
    Read a MetricLog CSV (plain or combined).

    Returns:
        label -> MetricLog; a plain file yields a single entry keyed by the file stem
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [column for column in CSV_COLUMNS if column not in header]
        if missing:
            raise ValueError(f"{path}: missing CSV columns {missing}")
        default_label = os.path.splitext(os.path.basename(str(path)))[0]

        logs: Dict[str, MetricLog] = {}
        for record in reader:
            label = record.get("variant") or default_label
            row = MetricRow(**{
                column: _parse(record[column], integer=(column == "step")) for column in CSV_COLUMNS
            })
            logs.setdefault(label, MetricLog(label=label)).rows.append(row)
    return logs
