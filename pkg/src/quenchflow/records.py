"""Reading and writing run records.

A record is a pair of files sharing a stem: ``<stem>.csv`` holds the time
series with header ``t,u_min,x_argmin,u_max,ux_max,eps_ut_max`` and
``<stem>.json`` holds the problem definition, outcome, final profile and snapshots.
Floats are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .model import ProblemSpec
from .solver import SERIES_COLUMNS, RunRecord

__all__ = ["CorruptRecord", "save_record", "load_record", "record_paths", "record_exists"]

FORMAT_VERSION = 1


class CorruptRecord(ValueError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)
        self.reason = reason


def record_paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    return stem.with_name(stem.name + ".csv"), stem.with_name(stem.name + ".json")


def _num(v):
    return None if v is None else float(v)


def save_record(record: RunRecord, stem) -> tuple[Path, Path]:
    csv_path, meta_path = record_paths(stem)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    cols = [record.series[c] for c in SERIES_COLUMNS]
    n_rows = len(cols[0])
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for i in range(n_rows):
            fh.write(",".join(repr(float(c[i])) for c in cols) + "\n")
    meta = {
        "format": FORMAT_VERSION,
        "spec": record.spec.to_dict(),
        "verdict": record.verdict,
        "t_stop": record.t_stop,
        "T_star_estimate": _num(record.T_star_estimate),
        "T_star_fit": _num(record.T_star_fit),
        "fit_residual": _num(record.fit_residual),
        "quench_locations": [float(x) for x in record.quench_locations],
        "step_count": record.step_count,
        "wall_time": record.wall_time,
        "max_asymmetry": record.max_asymmetry,
        "min_u_overall": record.min_u_overall,
        "abort_reason": record.abort_reason,
        "extra": record.extra,
        "n_rows": n_rows,
        "u_final": [float(v) for v in record.u_final],
        "snapshots": [[float(t), [float(v) for v in u]] for t, u in record.snapshots],
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return csv_path, meta_path


def record_exists(stem) -> bool:
    try:
        load_record(stem)
    except (CorruptRecord, FileNotFoundError):
        return False
    return True


def load_record(stem) -> RunRecord:
    """Load a record pair, raising :class:`CorruptRecord` on any inconsistency."""
    csv_path, meta_path = record_paths(stem)
    if not csv_path.exists() or not meta_path.exists():
        raise FileNotFoundError(f"missing record files for {stem}")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as err:
        raise CorruptRecord(meta_path, f"invalid metadata: {err}") from None
    required = ("format", "spec", "verdict", "t_stop", "n_rows", "u_final", "snapshots")
    missing = [k for k in required if k not in meta]
    if missing:
        raise CorruptRecord(meta_path, f"missing keys {missing}")

    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SERIES_COLUMNS:
        raise CorruptRecord(csv_path, "bad or missing header")
    body = rows[1:]
    if len(body) != meta["n_rows"]:
        raise CorruptRecord(csv_path, f"expected {meta['n_rows']} rows, found {len(body)}")
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(
            len(body), len(SERIES_COLUMNS))
    except ValueError as err:
        raise CorruptRecord(csv_path, f"unreadable row: {err}") from None
    series = {c: data[:, i].copy() for i, c in enumerate(SERIES_COLUMNS)}

    try:
        spec = ProblemSpec.from_dict(meta["spec"])
    except Exception as err:  # any spec error means the file cannot be trusted
        raise CorruptRecord(meta_path, f"invalid spec: {err}") from None
    u_final = np.array(meta["u_final"], dtype=float)
    if u_final.size != spec.J:
        raise CorruptRecord(meta_path, "final profile length does not match J")
    snaps = [(float(t), np.array(u, dtype=float)) for t, u in meta["snapshots"]]
    return RunRecord(
        spec=spec, series=series, verdict=meta["verdict"], t_stop=meta["t_stop"],
        u_final=u_final, T_star_estimate=meta.get("T_star_estimate"),
        T_star_fit=meta.get("T_star_fit"), fit_residual=meta.get("fit_residual"),
        quench_locations=list(meta.get("quench_locations", [])),
        step_count=meta.get("step_count", 0), wall_time=meta.get("wall_time", 0.0),
        max_asymmetry=meta.get("max_asymmetry", 0.0),
        min_u_overall=meta.get("min_u_overall", math.inf), snapshots=snaps,
        abort_reason=meta.get("abort_reason", ""), extra=meta.get("extra", {}))
