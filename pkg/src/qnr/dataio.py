"""CSV and JSON exchange for inputs, state matrices, profiles and metrics.

State CSVs are written with 17 significant digits so a write/read round
trip reproduces every float64 bit-exactly; ingestion therefore feeds the
analysis pipeline the same numbers an in-memory run would see.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .reservoir import StateMatrix
from .tipc import CapacityProfile

_FMT = "%.17g"


class IngestError(ValueError):
    """Malformed trace data; the message carries file and line context."""


def write_inputs_csv(path, values: Sequence[float]):
    values = np.asarray(values, dtype=float)
    with open(path, "w") as fh:
        fh.write("t,value\n")
        for t, v in enumerate(values):
            fh.write(f"{t},{_FMT % v}\n")


def read_inputs_csv(path) -> np.ndarray:
    rows = _read_numeric_csv(path, expected_first="t", min_cols=2, max_cols=2)
    return rows[:, 1]


def write_states_csv(path, states):
    data = states.data if isinstance(states, StateMatrix) else np.asarray(states, dtype=float)
    cols = ",".join(f"x{i + 1}" for i in range(data.shape[1]))
    with open(path, "w") as fh:
        fh.write(f"t,{cols}\n")
        for t in range(data.shape[0]):
            fh.write(str(t) + "," + ",".join(_FMT % v for v in data[t]) + "\n")


def read_states_csv(path) -> StateMatrix:
    rows = _read_numeric_csv(path, expected_first="t", min_cols=2)
    return StateMatrix(data=rows[:, 1:], provenance="ingested")


def _read_numeric_csv(path, expected_first: str, min_cols: int,
                      max_cols: Optional[int] = None) -> np.ndarray:
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != expected_first:
        raise IngestError(f"{path}:1: header must start with {expected_first!r}, "
                          f"got {lines[0]!r}")
    n_cols = len(header)
    if n_cols < min_cols or (max_cols is not None and n_cols > max_cols):
        raise IngestError(f"{path}:1: unexpected column count {n_cols}")
    if n_cols > 1 and header[1:] != [f"x{i + 1}" for i in range(n_cols - 1)] \
            and header[1:] != ["value"]:
        raise IngestError(f"{path}:1: columns must be named value or x1..xN")
    out = np.empty((len(lines) - 1, n_cols))
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n_cols:
            raise IngestError(f"{path}:{i}: expected {n_cols} fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise IngestError(f"{path}:{i}: non-numeric field") from None
        if any(math.isnan(v) or math.isinf(v) for v in vals[1:]):
            raise IngestError(f"{path}:{i}: NaN or Inf value")
        out[i - 2] = vals
    return out


@dataclass
class TraceBundle:
    """Paths of one recorded reservoir run plus free-form device metadata."""

    inputs_csv: str
    states_csvs: List[str]
    metadata: Dict = field(default_factory=dict)


@dataclass
class IngestedTrace:
    inputs: np.ndarray
    states: List[StateMatrix]
    metadata: Dict


def ingest_bundle(bundle: TraceBundle) -> IngestedTrace:
    """Read and validate a trace bundle; all files must agree on T."""
    inputs = read_inputs_csv(bundle.inputs_csv)
    states = [read_states_csv(p) for p in bundle.states_csvs]
    for path, sm in zip(bundle.states_csvs, states):
        if sm.n_steps != len(inputs):
            raise IngestError(
                f"{path}: {sm.n_steps} state rows but {len(inputs)} input rows")
    return IngestedTrace(inputs=inputs, states=states, metadata=dict(bundle.metadata))


# ---------------------------------------------------------------------------
# Profiles and metrics
# ---------------------------------------------------------------------------

def profile_to_dict(prof: CapacityProfile) -> dict:
    return {
        "rank": prof.rank,
        "threshold": prof.threshold,
        "threshold_params": prof.threshold_params,
        "c_tot": prof.c_tot,
        "c_tiv_tot": prof.c_tiv_tot,
        "c_tv_tot": prof.c_tv_tot,
        "by_degree": [
            {
                "degree": d,
                "tiv": prof.tiv_by_degree.get(d, 0.0),
                "tv": prof.tv_by_degree.get(d, 0.0),
            }
            for d in prof.degrees()
        ],
        "records": [
            {
                "label": rec.term.label(),
                "family": rec.term.family,
                "input_exponents": [list(x) for x in rec.term.input_exponents],
                "state_exponents": [list(x) for x in rec.term.state_exponents],
                "input_order": rec.term.input_order,
                "state_order": rec.term.state_order,
                "classification": rec.classification,
                "capacity": rec.capacity,
                "truncated": rec.truncated,
            }
            for rec in prof.records
        ],
    }


def write_profile_json(path, prof: CapacityProfile):
    with open(path, "w") as fh:
        json.dump(profile_to_dict(prof), fh, indent=2)
        fh.write("\n")


def write_profile_degrees_csv(path, prof: CapacityProfile):
    """Plot-ready per-degree aggregates: degree, TIV total, TV total."""
    with open(path, "w") as fh:
        fh.write("degree,tiv_total,tv_total\n")
        for d in prof.degrees():
            fh.write(f"{d},{_FMT % prof.tiv_by_degree.get(d, 0.0)},"
                     f"{_FMT % prof.tv_by_degree.get(d, 0.0)}\n")


def write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_esp_csv(path, deltas: np.ndarray):
    with open(path, "w") as fh:
        fh.write("t,delta\n")
        for t, v in enumerate(deltas):
            fh.write(f"{t},{_FMT % v}\n")
