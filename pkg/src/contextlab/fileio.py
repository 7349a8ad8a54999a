"""Click-stream CSV ingestion, deterministic JSON reports and CSV plot tables."""

from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .stats import OutcomeSeries

CLICK_HEADER = ("trial_id", "timestamp_ns", "side", "setting_label", "outcome")
OUTCOME_TOKENS = {"-1": -1, "0": 0, "1": 1}


class ClickStreamError(ValueError):
    pass


def parse_click_stream(path) -> tuple[OutcomeSeries, OutcomeSeries]:
    """Read a click-stream file into an A-side and a B-side series.

    Rows must be sorted by timestamp within each side.  Each side carries a
    single setting label; a file mixing labels on one side is rejected.
    """
    path = Path(path)
    sides = {"A": ([], [], set()), "B": ([], [], set())}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CLICK_HEADER:
            raise ClickStreamError(f"{path}:1: header must be {','.join(CLICK_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CLICK_HEADER):
                raise ClickStreamError(f"{path}:{lineno}: expected {len(CLICK_HEADER)} fields, got {len(row)}")
            _, ts, side, label, outcome = (c.strip() for c in row)
            if side not in sides:
                raise ClickStreamError(f"{path}:{lineno}: unknown side {side!r}")
            if outcome not in OUTCOME_TOKENS:
                raise ClickStreamError(f"{path}:{lineno}: unknown outcome token {outcome!r}")
            if not ts.isdigit():
                raise ClickStreamError(f"{path}:{lineno}: timestamp_ns must be an unsigned integer, got {ts!r}")
            outs, times, labels = sides[side]
            t = int(ts)
            if times and t < times[-1]:
                raise ClickStreamError(f"{path}:{lineno}: timestamps on side {side} are not sorted")
            outs.append(OUTCOME_TOKENS[outcome])
            times.append(t)
            labels.add(label)
    result = []
    for side in ("A", "B"):
        outs, times, labels = sides[side]
        if len(labels) > 1:
            raise ClickStreamError(f"{path}: side {side} mixes setting labels {sorted(labels)}")
        label = labels.pop() if labels else ""
        result.append(OutcomeSeries(np.array(outs, dtype=np.int8), np.array(times, dtype=np.int64), label))
    if not len(result[0]) and not len(result[1]):
        warnings.warn(f"{path}: click stream has no data rows", stacklevel=2)
    return result[0], result[1]


def write_click_stream(path, sa: OutcomeSeries, sb: OutcomeSeries) -> Path:
    """Write two timestamped series; trial ids are the per-side indices."""
    path = Path(path)
    for s in (sa, sb):
        if not s.has_timestamps:
            raise ValueError("click streams need timestamps")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLICK_HEADER)
        for side, s in (("A", sa), ("B", sb)):
            for i, (t, o) in enumerate(zip(s.timestamps.tolist(), s.outcomes.tolist())):
                w.writerow([i, t, side, s.setting_label, o])
    return path


# -- reports -----------------------------------------------------------------

def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats after a round trip
    return s if any(c in s for c in ".en") else s + ".0"


def to_jsonable(obj):
    """Plain data with numpy scalars, tuples and dataclass-like objects converted."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if obj is None or isinstance(obj, (int, float, str)):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if not obj:
        return "{}"
    items = (pad + json.dumps(k) + ": " + _encode(v, indent, level + 1) for k, v in obj.items())
    return "{\n" + ",\n".join(items) + "\n" + end + "}"


def dumps_report(results) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant digits, NaN as null."""
    return _encode(to_jsonable(results), 2, 0) + "\n"


def write_report(path, results: dict) -> Path:
    """Write a JSON report; the artifact version is embedded if absent."""
    results = dict(results)
    results.setdefault("artifact_version", __version__)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(results))
    return path


def write_csv_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError("row length differs from the header")
            w.writerow([_format_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


E_DELTA_COLUMNS = ("delta_rad", "E_analytic", "E_estimate", "stderr")
