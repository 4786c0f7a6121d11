"""Loaders for the armpc export formats.

Every loader validates the documented schema before returning anything,
so figure code never sees half-parsed files.  Trace CSV headers are
matched exactly against the column layout the simulator emits; any
drift raises SchemaError.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SchemaError",
    "Trace",
    "expected_trace_header",
    "load_trace",
    "load_sets",
    "load_envelope",
    "load_sweep",
    "load_wind",
]

SWEEP_HEADER = ["param", "n_seeds", "n_feasible", "cost_mean",
                "cost_2sigma"]


class SchemaError(Exception):
    """Input file does not match the documented armpc format."""


def expected_trace_header(n, m):
    """Exact trace CSV header for an n-state, m-input plant."""
    cols = ["t"]
    cols += [f"x_{i}" for i in range(n)]
    cols += [f"u_{i}" for i in range(m)]
    cols += [f"v_{i}" for i in range(n)]
    cols += ["cost_stage", "qp_status", "qp_cost"]
    cols += [f"radius_{i}" for i in range(n)]
    cols += [f"fhat_radius_{i}" for i in range(n)]
    cols += [f"dhat_radius_{i}" for i in range(n)]
    return cols


def _infer_dims(header):
    n = sum(1 for c in header if c.startswith("x_"))
    m = sum(1 for c in header if c.startswith("u_"))
    return n, m


@dataclass
class Trace:
    path: str
    n: int
    m: int
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost_stage: np.ndarray
    qp_status: list
    qp_cost: np.ndarray
    radius: np.ndarray
    fhat_radius: np.ndarray
    dhat_radius: np.ndarray

    @property
    def truncation_step(self):
        """Step at which the QP went infeasible, or None."""
        if self.qp_status and self.qp_status[-1] == "infeasible":
            return int(self.t[-1])
        return None


def load_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = rows[0]
    n, m = _infer_dims(header)
    expected = expected_trace_header(n, m)
    if header != expected:
        raise SchemaError(
            f"{path}: trace header mismatch\n  got      {header}\n"
            f"  expected {expected}")
    body = rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    width = len(expected)
    for k, row in enumerate(body):
        if len(row) != width:
            raise SchemaError(f"{path}: row {k + 1} has {len(row)} "
                              f"fields, expected {width}")
    status_col = 1 + n + m + n + 1
    try:
        t = np.array([int(r[0]) for r in body])
        x = np.array([[float(v) for v in r[1:1 + n]] for r in body])
        u = np.array([[float(v) for v in r[1 + n:1 + n + m]]
                      for r in body])
        v = np.array([[float(w) for w in r[1 + n + m:1 + n + m + n]]
                      for r in body])
        cost = np.array([float(r[status_col - 1]) for r in body])
        status = [r[status_col] for r in body]
        qp_cost = np.array([float(r[status_col + 1]) for r in body])
        tail = status_col + 2
        radius = np.array([[float(w) for w in r[tail:tail + n]]
                           for r in body])
        fhat = np.array([[float(w) for w in r[tail + n:tail + 2 * n]]
                         for r in body])
        dhat = np.array([[float(w) for w in r[tail + 2 * n:tail + 3 * n]]
                         for r in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: bad field: {exc}") from exc
    return Trace(path=str(path), n=n, m=m, t=t, x=x, u=u, v=v,
                 cost_stage=cost, qp_status=status, qp_cost=qp_cost,
                 radius=radius, fhat_radius=fhat, dhat_radius=dhat)


def _require(data, keys, path):
    for key in keys:
        if key not in data:
            raise SchemaError(f"{path}: missing key {key!r}")


def load_sets(path):
    """Tube boxes plus terminal and state polytopes from a sets JSON."""
    with open(path) as fh:
        data = json.load(fh)
    _require(data, ("tubes", "terminal_set", "state_set"), path)
    tubes = []
    for k, box in enumerate(data["tubes"]):
        _require(box, ("center", "radii"), f"{path}: tubes[{k}]")
        tubes.append({"center": np.asarray(box["center"], float),
                      "radii": np.asarray(box["radii"], float)})
    polys = {}
    for key in ("terminal_set", "state_set"):
        poly = data[key]
        _require(poly, ("A", "b"), f"{path}: {key}")
        polys[key] = (np.asarray(poly["A"], float),
                      np.asarray(poly["b"], float))
    return {"tubes": tubes, "terminal_set": polys["terminal_set"],
            "state_set": polys["state_set"]}


def load_envelope(path):
    """Feasible fractions per parameter value for ce and benchmark."""
    with open(path) as fh:
        data = json.load(fh)
    _require(data, ("param", "ce", "benchmark"), path)
    curves = {}
    for name in ("ce", "benchmark"):
        entries = data[name]
        if not entries:
            raise SchemaError(f"{path}: {name} has no values")
        try:
            points = sorted((float(k), float(v))
                            for k, v in entries.items())
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: {name}: {exc}") from exc
        curves[name] = points
    return {"param": data["param"], "ce": curves["ce"],
            "benchmark": curves["benchmark"]}


def load_sweep(path):
    """Cost statistics rows; cost fields are None where no seed was
    feasible."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SWEEP_HEADER:
        got = rows[0] if rows else []
        raise SchemaError(f"{path}: sweep header mismatch\n  got      "
                          f"{got}\n  expected {SWEEP_HEADER}")
    if not rows[1:]:
        raise SchemaError(f"{path}: no data rows")
    out = []
    for k, row in enumerate(rows[1:]):
        if len(row) != len(SWEEP_HEADER):
            raise SchemaError(f"{path}: row {k + 1} has {len(row)} "
                              f"fields, expected {len(SWEEP_HEADER)}")
        try:
            entry = {"param": float(row[0]), "n_seeds": int(row[1]),
                     "n_feasible": int(row[2]),
                     "cost_mean": float(row[3]) if row[3] else None,
                     "cost_2sigma": float(row[4]) if row[4] else None}
        except ValueError as exc:
            raise SchemaError(f"{path}: row {k + 1}: {exc}") from exc
        out.append(entry)
    return out


def load_wind(path):
    """Learned wind-speed grid: x/y axes plus speed[y][x] in m/s."""
    with open(path) as fh:
        data = json.load(fh)
    _require(data, ("x", "y", "speed"), path)
    x = np.asarray(data["x"], float)
    y = np.asarray(data["y"], float)
    speed = np.asarray(data["speed"], float)
    if speed.shape != (y.size, x.size):
        raise SchemaError(f"{path}: speed shape {speed.shape} does not "
                          f"match axes ({y.size}, {x.size})")
    return {"x": x, "y": y, "speed": speed}
