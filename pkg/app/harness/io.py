import csv
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from app.asymptotics.schema import ConvergenceReport
from app.exceptions import InvalidInputError
from app.harness.schema import SuiteResult

logger = logging.getLogger(__name__)


def parse_n_grid(text: str) -> list[int]:
    """'a:b:step' is additive, 'a:b:xk' multiplies by k; both include b when hit"""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInputError(f"n grid '{text}' must look like a:b:step or a:b:xk")
    try:
        start, stop = int(parts[0]), int(parts[1])
        geometric = parts[2].startswith("x")
        step = int(parts[2][1:] if geometric else parts[2])
    except ValueError as e:
        raise InvalidInputError(f"n grid '{text}' has a non-integer field") from e
    if start < 0 or stop < start:
        raise InvalidInputError(f"n grid '{text}' needs 0 <= a <= b")
    if geometric and (step < 2 or start == 0):
        raise InvalidInputError(f"geometric n grid '{text}' needs a >= 1 and a factor >= 2")
    if not geometric and step < 1:
        raise InvalidInputError(f"additive n grid '{text}' needs a step >= 1")

    grid, n = [], start
    while n <= stop:
        grid.append(n)
        n = n * step if geometric else n + step
    return grid


def load_document(text: str) -> Any:
    """inline JSON, or '@path' for a JSON file"""
    if text.startswith("@"):
        path = Path(text[1:])
        if not path.is_file():
            raise InvalidInputError(f"no such file: {path}")
        text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"invalid JSON: {e.msg} at position {e.pos}") from e


def dumps(model: BaseModel) -> str:
    """canonical report text: same model, same bytes"""
    data = model.model_dump(mode="json", by_alias=True)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(model: BaseModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(model))
    logger.info(f"wrote {type(model).__name__} to {path}")
    return path


def write_traces_csv(reports: list[ConvergenceReport], path: str | Path) -> Path:
    """one row per (report, topology, n): kind,topology,n,distance"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        (report.kind, trace.topology, n, distance)
        for report in reports
        for trace in report.traces
        for n, distance in zip(report.n_grid, trace.distances)
    ]
    np.savetxt(
        path,
        np.array(rows, dtype=object).reshape(len(rows), 4),
        fmt=["%s", "%s", "%d", "%.17g"],
        delimiter=",",
        header="kind,topology,n,distance",
        comments="",
    )
    logger.info(f"wrote {len(rows)} trace rows to {path}")
    return path


CASE_FIELDS = ["suite", "label", "window", "residual", "exact_window", "exact_residual_zero",
               "oracle_gap", "skipped", "passed"]


def write_cases_csv(results: list[SuiteResult], path: str | Path) -> Path:
    """one row per suite case; labels may contain commas, so fields are quoted as needed"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CASE_FIELDS)
        writer.writeheader()
        for result in results:
            for case in result.cases:
                row = case.model_dump(include=set(CASE_FIELDS))
                writer.writerow({**row, "suite": result.suite})
    logger.info(f"wrote {sum(len(r.cases) for r in results)} suite cases to {path}")
    return path
