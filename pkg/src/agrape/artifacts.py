"""Reading and writing run artifacts: pulse JSON, CSV series, the run manifest.

Floats are written with ``repr`` (shortest string that round-trips), so a
pulse read back is bit-identical to the one written.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .model import ControlPulse

TRACE_FIELDS = ("round", "j_min", "l_max_estimate", "gap", "inner_iters", "elapsed_s")
CDF_FIELDS = ("infidelity", "cumulative_probability")
LANDSCAPE_FIELDS = ("eps_a", "eps_b", "infidelity")
SUMMARY_FIELDS = ("param", "l_max_final", "worst_case_final", "rounds")


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TraceWriter:
    """Appends trace rows as they arrive so an interrupted run leaves a valid partial file."""

    def __init__(self, path, record_timing=False):
        self.path = Path(path)
        self.record_timing = record_timing
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(TRACE_FIELDS)
        self._fh.flush()
        self.rows = 0

    def __call__(self, record):
        row = record.row()
        if not self.record_timing:
            # wall time would make the file differ between identical runs
            row["elapsed_s"] = None
        self._writer.writerow([_cell(row[f]) for f in TRACE_FIELDS])
        self._fh.flush()
        self.rows += 1

    def close(self):
        self._fh.close()


def pulse_to_dict(pulse, problem_name=None):
    return {
        "problem": problem_name,
        "slice_count": pulse.slice_count,
        "channels": pulse.channels,
        "total_time": pulse.total_time,
        "units": {"time": "us", "values": "rad/us"},
        "values": pulse.values.tolist(),
    }


def write_pulse(path, pulse, problem_name=None):
    # json emits floats via repr, which round-trips exactly
    Path(path).write_text(json.dumps(pulse_to_dict(pulse, problem_name), indent=1) + "\n")


def read_pulse(path):
    data = json.loads(Path(path).read_text())
    try:
        pulse = ControlPulse(np.array(data["values"], dtype=float), float(data["total_time"]))
    except KeyError as exc:
        raise ValueError(f"{path}: pulse file lacks field {exc}") from None
    if "slice_count" in data and pulse.slice_count != int(data["slice_count"]):
        raise ValueError(f"{path}: slice_count {data['slice_count']} does not match values ({pulse.slice_count})")
    return pulse, data.get("problem")


def write_json(path, data):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    os.replace(tmp, path)


def read_json(path):
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
