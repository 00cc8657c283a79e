"""CSV files for trajectories, controls, switching functions and experiment rows.

Numbers are written with ``repr`` so that reading a file back reproduces the
stored floats exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .control import PiecewiseConstantControl
from .dynamics import Trajectory
from .errors import ConfigError


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_records(path) -> tuple[list, list]:
    """Header and rows (as dicts of strings) of any CSV file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty file")
        return list(reader.fieldnames), list(reader)


def read_table(path) -> tuple[list, np.ndarray]:
    """Header and float matrix of a numeric CSV file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        data = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                data.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def write_trajectory(path, traj: Trajectory, name: str = "x") -> None:
    header = ["t"] + [f"{name}{i + 1}" for i in range(traj.n)]
    write_table(path, header, np.column_stack([traj.t, traj.values]))


def write_samples(path, t, values, name: str) -> None:
    values = np.asarray(values, dtype=float).reshape(len(t), -1)
    header = ["t"] + [f"{name}{i + 1}" for i in range(values.shape[1])]
    write_table(path, header, np.column_stack([t, values]))


def write_control(path, u: PiecewiseConstantControl) -> None:
    """One row per piece: its start time and value."""
    header = ["t"] + [f"u{i + 1}" for i in range(u.m)]
    write_table(path, header, np.column_stack([u.breakpoints[:-1], u.values]))


def read_control(path, T: float) -> PiecewiseConstantControl:
    header, data = read_table(path)
    if len(data) == 0 or header[0] != "t":
        raise ConfigError(f"{path}: expected a 't' column followed by control values and at least one row")
    if data[0, 0] != 0.0:
        raise ConfigError(f"{path}: first piece must start at t = 0")
    if np.any(data[:, 0] >= T):
        raise ConfigError(f"{path}: piece starts must lie below T = {T:g}")
    try:
        return PiecewiseConstantControl(np.append(data[:, 0], T), data[:, 1:])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    _, data = read_table(path)
    return data[:, 0], data[:, 1:]
