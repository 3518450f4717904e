"""Readers and writers for the CSV, JSON and binary artifacts.

Every CSV starts with ``# fracelastic <version> config=sha256:<hex>``, then a
column header line.  Floats are written with ``repr`` (shortest round-trip
form), so reading a file back reproduces the values bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .dispersion import DispersionLaw, LatticeKernel
from .errors import ValidationError
from .fraclap import GridField

TRAJECTORY_MAGIC = b"FLAT1"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def header_line(config: dict | None) -> str:
    return f"# fracelastic {__version__} config=sha256:{config_hash(config or {})}"


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config: dict | None = None) -> Path:
    path = Path(path)
    lines = [header_line(config), ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValidationError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_columns(path, columns: dict[str, np.ndarray], config: dict | None = None) -> Path:
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    return write_csv(path, names, zip(*arrays), config)


def read_csv(path) -> tuple[list[str], dict[str, np.ndarray], list[str]]:
    """Return ``(columns, data, comments)``; data columns are float arrays."""
    comments, body = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif line.strip():
            body.append(line)
    if not body:
        raise ValidationError(f"{path} has no header line")
    columns = body[0].split(",")
    values = np.array([[float(v) for v in line.split(",")] for line in body[1:]]).reshape(-1, len(columns))
    return columns, {name: values[:, i] for i, name in enumerate(columns)}, comments


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return data


# --- domain formats ----------------------------------------------------------


def write_law(path, law: DispersionLaw) -> Path:
    return write_json(path, law.to_dict())


def read_law(path) -> DispersionLaw:
    return DispersionLaw.from_dict(read_json(path))


def write_kernel(path, kernel: LatticeKernel, config: dict | None = None) -> Path:
    n = np.arange(1, kernel.n_max + 1)
    return write_columns(path, {"n": n, "K": kernel.coefficients}, config)


def read_kernel(path, spacing: float = 1.0) -> LatticeKernel:
    columns, data, _ = read_csv(path)
    if columns != ["n", "K"]:
        raise ValidationError(f"kernel file must have columns n,K, got {columns}")
    if not np.array_equal(data["n"], np.arange(1, data["n"].size + 1)):
        raise ValidationError("kernel rows must list n = 1, 2, ... in order")
    return LatticeKernel(data["K"], spacing)


def write_grid_field(path, field: GridField, config: dict | None = None) -> Path:
    return write_columns(path, {"x": field.x, "value": field.samples}, config)


def read_grid_field(path) -> GridField:
    columns, data, _ = read_csv(path)
    if columns != ["x", "value"]:
        raise ValidationError(f"grid file must have columns x,value, got {columns}")
    x = data["x"]
    if x.size < 2:
        raise ValidationError("grid needs at least two rows")
    h = (x[-1] - x[0]) / (x.size - 1)
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0.0):
        raise ValidationError("grid must be uniformly spaced")
    return GridField(data["value"], h, x[0])


def write_spectral_diagnostics(path, k: np.ndarray, multiplier: np.ndarray, config: dict | None = None) -> Path:
    return write_columns(path, {"k": k, "multiplier": multiplier}, config)


def write_static(path, u: np.ndarray, spacing: float, config: dict | None = None) -> Path:
    n = np.arange(u.size)
    return write_columns(path, {"n": n, "x": spacing * n, "u": u}, config)


class TrajectoryCsvWriter:
    """Long-format ``t,n,u,v`` trajectory, one row per particle per frame."""

    def __init__(self, path, config: dict | None = None):
        self.path = Path(path)
        self._fh = self.path.open("w", encoding="utf-8")
        self._fh.write(header_line(config) + "\nt,n,u,v\n")

    def write(self, t: float, u: np.ndarray, v: np.ndarray) -> None:
        tt = repr(float(t))
        self._fh.write("".join(f"{tt},{i},{ui!r},{vi!r}\n" for i, (ui, vi) in enumerate(zip(u.tolist(), v.tolist()))))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TrajectoryBinaryWriter:
    """``FLAT1`` magic followed by frames of ``N`` little-endian float64 displacements."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("wb")
        self._fh.write(TRAJECTORY_MAGIC)
        self.frames = 0

    def write(self, t: float, u: np.ndarray, v: np.ndarray | None = None) -> None:
        self._fh.write(np.asarray(u, dtype="<f8").tobytes())
        self.frames += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectory_binary(path, n: int) -> np.ndarray:
    """Frames of an ``FLAT1`` file as an array of shape ``(P, n)``."""
    raw = Path(path).read_bytes()
    if raw[: len(TRAJECTORY_MAGIC)] != TRAJECTORY_MAGIC:
        raise ValidationError(f"{path} is not a FLAT1 trajectory")
    body = raw[len(TRAJECTORY_MAGIC) :]
    frame = 8 * n
    if n < 1 or len(body) % frame:
        raise ValidationError(f"payload of {len(body)} bytes is not a whole number of {n}-site frames")
    return np.frombuffer(body, dtype="<f8").reshape(-1, n).copy()


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(t, u, v)`` with ``u`` and ``v`` shaped ``(frames, N)``."""
    columns, data, _ = read_csv(path)
    if columns != ["t", "n", "u", "v"]:
        raise ValidationError(f"trajectory file must have columns t,n,u,v, got {columns}")
    n = int(data["n"].max()) + 1 if data["n"].size else 0
    frames = data["t"].size // max(n, 1)
    t = data["t"].reshape(frames, n)[:, 0]
    return t, data["u"].reshape(frames, n), data["v"].reshape(frames, n)


__all__ = [
    "TRAJECTORY_MAGIC",
    "TrajectoryBinaryWriter",
    "TrajectoryCsvWriter",
    "canonical_json",
    "config_hash",
    "format_value",
    "header_line",
    "read_csv",
    "read_grid_field",
    "read_json",
    "read_kernel",
    "read_law",
    "read_trajectory_binary",
    "read_trajectory_csv",
    "write_columns",
    "write_csv",
    "write_grid_field",
    "write_json",
    "write_kernel",
    "write_law",
    "write_spectral_diagnostics",
    "write_static",
]
