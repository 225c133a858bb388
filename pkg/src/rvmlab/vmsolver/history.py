"""Append-only store of field snapshots with continuous space-time evaluation."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..fields import GriddedField, read_snapshot, write_snapshot
from ..interp import interpolate
from ..providers import OutOfDomainError
from .pic import FIELD_OFFSETS, GridSpec, PICState


class MissingSnapshots(FileNotFoundError):
    def __init__(self, missing: list):
        super().__init__(f"snapshot store has gaps; missing times: {missing}")
        self.missing = missing


@dataclass
class FieldHistory:
    """Yee fields at increasing times; linear in time, tricubic in space."""

    grid: GridSpec
    times: list = field(default_factory=list)
    frames: list = field(default_factory=list)  # each (6, n, n, n): E then B

    def append(self, t: float, E: np.ndarray, B: np.ndarray) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("snapshot times must increase")
        self.times.append(float(t))
        self.frames.append(np.concatenate([E, B]).astype(float, copy=True))

    def record(self, state: PICState) -> None:
        self.append(state.t, state.E, state.B)

    @property
    def t_range(self) -> tuple[float, float]:
        return (self.times[0], self.times[-1])

    def _frame_values(self, k: int, pts: np.ndarray) -> np.ndarray:
        out = np.empty((pts.shape[0], 6))
        sp = np.full(3, self.grid.dx)
        for c in range(6):
            org = np.asarray(self.grid.origin, float) + FIELD_OFFSETS[c] * self.grid.dx
            out[:, c], _ = interpolate(self.frames[k][c], org, sp, pts, True)
        return out

    def evaluate(self, t: float, x) -> tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(x, float))
        times = self.times
        tol = 1e-9 * max(1.0, abs(times[-1]))
        if t < times[0] - tol or t > times[-1] + tol:
            raise OutOfDomainError(t, pts[0], "time outside the snapshot store")
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)) if len(times) > 1 else 0
        if len(times) == 1:
            v = self._frame_values(0, pts)
        else:
            a = (t - times[k]) / (times[k + 1] - times[k])
            if abs(a) < 1e-12:
                v = self._frame_values(k, pts)
            elif abs(a - 1.0) < 1e-12:
                v = self._frame_values(k + 1, pts)
            else:
                v = (1.0 - a) * self._frame_values(k, pts) + a * self._frame_values(k + 1, pts)
        return v[:, :3], v[:, 3:]

    def initial_fields(self) -> tuple[GriddedField, GriddedField]:
        """E and B at the first snapshot as staggered gridded fields."""
        f = self.frames[0]
        org = tuple(float(o) for o in self.grid.origin)
        sp = (self.grid.dx,) * 3
        return (GriddedField(f[:3], org, sp, True, FIELD_OFFSETS[:3], self.times[0]),
                GriddedField(f[3:], org, sp, True, FIELD_OFFSETS[3:], self.times[0]))

    # -- persistence ---------------------------------------------------------

    def save(self, directory, scenario_hash: str = "") -> str:
        os.makedirs(directory, exist_ok=True)
        files = []
        for i, (t, fr) in enumerate(zip(self.times, self.frames)):
            name = f"snap_{i:05d}.bin"
            write_snapshot(os.path.join(directory, name),
                           GriddedField(fr, tuple(self.grid.origin), (self.grid.dx,) * 3, True, FIELD_OFFSETS, t))
            files.append(name)
        manifest = {"times": self.times, "files": files,
                    "grid": {"cells": self.grid.cells, "dx": self.grid.dx, "origin": list(self.grid.origin)},
                    "offsets": FIELD_OFFSETS.tolist(), "scenario_hash": scenario_hash}
        path = os.path.join(directory, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2)
        return path

    @classmethod
    def load(cls, manifest_path, required_times=None, tolerance: float = 1e-9) -> "FieldHistory":
        """Read a store; with ``required_times`` every listed time must be present."""
        with open(manifest_path) as fh:
            man = json.load(fh)
        base = os.path.dirname(os.path.abspath(manifest_path))
        g = man["grid"]
        hist = cls(GridSpec(int(g["cells"]), float(g["dx"]), tuple(g["origin"])))
        missing = [t for t, name in zip(man["times"], man["files"])
                   if not os.path.exists(os.path.join(base, name))]
        if required_times is not None:
            have = np.asarray(man["times"], float)
            missing += [float(t) for t in required_times
                        if have.size == 0 or np.min(np.abs(have - t)) > tolerance]
        if missing:
            raise MissingSnapshots(sorted(set(missing)))
        for t, name in zip(man["times"], man["files"]):
            snap = read_snapshot(os.path.join(base, name), True, FIELD_OFFSETS)
            hist.append(t, snap.data[:3], snap.data[3:])
        return hist


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]
