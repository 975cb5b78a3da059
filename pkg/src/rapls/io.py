"""File formats for the CLI: curve matrices, outcome tables, simulation
configs, result tables, and run manifests.

Curve matrix: a header line "grid: lo hi G" followed by n whitespace-
delimited rows of G numbers. Outcome table: header "y z1 ... zq" followed by
n rows. Both are plain text and language neutral.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import yaml

from . import __version__
from .errors import InvalidArgumentError
from .grids import DiscretizedFunction, Grid, make_grid
from .simulate import SimConfig

__all__ = [
    "read_curves",
    "read_table",
    "write_function",
    "read_sim_config",
    "RunManifest",
    "sha256_file",
]


class FormatError(InvalidArgumentError):
    """Malformed input file; carries a line diagnostic."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def read_curves(path) -> Tuple[np.ndarray, Grid]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 4 or parts[0] != "grid:":
            raise FormatError(path, 1, 'expected header "grid: lo hi G"')
        try:
            lo, hi = float(parts[1]), float(parts[2])
            G = int(parts[3])
        except ValueError:
            raise FormatError(path, 1, "grid header fields must be numeric") from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != G:
                raise FormatError(path, lineno, f"expected {G} values, got {len(vals)}")
            try:
                rows.append([float(v) for v in vals])
            except ValueError:
                raise FormatError(path, lineno, "non-numeric curve value") from None
    if not rows:
        raise FormatError(path, 2, "no curve rows")
    return np.array(rows), make_grid(G, lo, hi)


def read_table(path) -> Tuple[np.ndarray, np.ndarray, list]:
    """Outcome/covariate table; returns (y, Z, covariate names)."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
        if not header or header[0] != "y":
            raise FormatError(path, 1, 'expected header starting with "y"')
        names = header[1:]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != len(header):
                raise FormatError(
                    path, lineno, f"expected {len(header)} values, got {len(vals)}"
                )
            try:
                rows.append([float(v) for v in vals])
            except ValueError:
                raise FormatError(path, lineno, "non-numeric table value") from None
    if not rows:
        raise FormatError(path, 2, "no data rows")
    data = np.array(rows)
    return data[:, 0], data[:, 1:], names


def write_function(path, f: DiscretizedFunction) -> None:
    """Two-column (s, value) table with 17-significant-digit formatting."""
    lines = ["s\tvalue"]
    for s, v in zip(f.grid.points, f.values):
        lines.append(f"{s:.17g}\t{v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_p_policy(text) -> Tuple[str, int]:
    text = str(text).strip()
    for kind in ("fixed", "aic"):
        if text.startswith(kind + "(") and text.endswith(")"):
            return kind, int(text[len(kind) + 1 : -1])
    raise InvalidArgumentError(
        f'p_policy must look like "fixed(5)" or "aic(30)", got {text!r}'
    )


def read_sim_config(path, seed_override: Optional[int] = None) -> SimConfig:
    """Parse a YAML mapping mirroring the SimConfig field names."""
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise InvalidArgumentError("simulation config must be a mapping")
    known = {
        "family",
        "scenario",
        "n",
        "reps",
        "p_policy",
        "init",
        "base_seed",
        "grid_points",
        "methods",
    }
    unknown = set(raw) - known
    if unknown:
        raise InvalidArgumentError(f"unknown config fields: {sorted(unknown)}")
    kwargs = {}
    for key in known & set(raw):
        value = raw[key]
        if key == "p_policy":
            value = _parse_p_policy(value)
        elif key == "methods":
            value = tuple(value) if isinstance(value, (list, tuple)) else (str(value),)
        elif key == "scenario":
            value = str(value)
        kwargs[key] = value
    if seed_override is not None:
        kwargs["base_seed"] = int(seed_override)
    if "base_seed" not in kwargs:
        raise InvalidArgumentError(
            "no seed: provide --seed or a base_seed config field"
        )
    return SimConfig(**kwargs)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


class RunManifest:
    """Record of one CLI run: command, resolved config, input checksums,
    version, duration, and output paths. Timestamps live in their own field
    so reruns produce byte-identical payload sections."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.inputs = {}
        self.outputs = []
        self._t0 = time.monotonic()
        self._wall_start = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    def write(self, path) -> None:
        payload = {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "tool_version": __version__,
            "outputs": self.outputs,
            "timing": {
                "started": self._wall_start,
                "duration_seconds": round(time.monotonic() - self._t0, 3),
            },
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
