"""Trajectory ingestion, feature mapping, and dataset construction."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, ParseError, SchemaError


@dataclass(frozen=True)
class Trajectory:
    """An ordered sequence of (state, action) pairs."""

    states: np.ndarray  # (T, state_dim)
    actions: np.ndarray  # (T, action_dim); action_dim may be 0

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        if states.ndim != 2 or actions.ndim != 2:
            raise SchemaError("states and actions must be 2-D arrays")
        if len(states) != len(actions):
            raise SchemaError(
                f"states ({len(states)}) and actions ({len(actions)}) differ in length"
            )
        if len(states) < 1:
            raise SchemaError("a trajectory needs at least one step")
        if not np.all(np.isfinite(states)) or not np.all(np.isfinite(actions)):
            raise SchemaError("non-finite values in trajectory")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class Dataset:
    """Feature vectors collected from trajectories, in visit order."""

    points: np.ndarray  # (M, k)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise SchemaError("dataset points must form a 2-D array")
        if not np.all(np.isfinite(pts)):
            raise SchemaError("non-finite feature values")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class FeatureBounds:
    """Componentwise min/max over a dataset."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise SchemaError("bounds need matching 1-D lo/hi")
        if np.any(lo > hi):
            raise DomainError("bounds with lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))


def identity_xy(state, action) -> np.ndarray:
    """Feature map taking the first two state components (x, y)."""
    s = np.asarray(state, dtype=float)
    if s.shape[-1] < 2:
        raise SchemaError("identity_xy needs a state with at least 2 components")
    return s[:2]


FEATURE_MAPS = {
    "identity_xy": identity_xy,
}


def load_trajectories(path, fmt: str = "jsonl") -> list[Trajectory]:
    """Read trajectories from a JSONL file, or a feature CSV where each row
    becomes a single-step trajectory with an empty action."""
    path = Path(path)
    if fmt == "jsonl":
        return _load_jsonl(path)
    if fmt == "csv":
        ds = load_dataset_csv(path)
        return [
            Trajectory(states=row[None, :], actions=np.zeros((1, 0)))
            for row in ds.points
        ]
    raise ConfigError(f"unknown trajectory format {fmt!r}")


def _load_jsonl(path: Path) -> list[Trajectory]:
    trajectories = []
    state_dim = action_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "states" not in record or "actions" not in record:
                raise ParseError(f"line {lineno}: expected object with 'states' and 'actions'")
            try:
                traj = Trajectory(
                    states=np.asarray(record["states"], dtype=float),
                    actions=np.asarray(record["actions"], dtype=float),
                )
            except (ValueError, SchemaError) as exc:
                raise SchemaError(f"line {lineno}: {exc}") from exc
            if state_dim is None:
                state_dim = traj.states.shape[1]
                action_dim = traj.actions.shape[1]
            elif traj.states.shape[1] != state_dim or traj.actions.shape[1] != action_dim:
                raise SchemaError(f"line {lineno}: inconsistent state/action dimensions")
            trajectories.append(traj)
    return trajectories


def save_trajectories(trajectories, path) -> None:
    """Write trajectories as one JSON object per line (floats round-trip exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            record = {
                "states": traj.states.tolist(),
                "actions": traj.actions.tolist(),
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def build_dataset(trajectories, feature_map: str = "identity_xy") -> Dataset:
    """Apply a registered feature map to every step, in trajectory order."""
    try:
        fmap = FEATURE_MAPS[feature_map]
    except KeyError:
        raise ConfigError(
            f"unknown feature map {feature_map!r}; available: {sorted(FEATURE_MAPS)}"
        ) from None
    rows = []
    for traj in trajectories:
        for state, action in zip(traj.states, traj.actions):
            rows.append(np.asarray(fmap(state, action), dtype=float))
    if not rows:
        return Dataset(points=np.zeros((0, 2)))
    return Dataset(points=np.stack(rows))


def feature_bounds(dataset: Dataset) -> FeatureBounds:
    """Exact componentwise min and max of the dataset."""
    if dataset.size < 1:
        raise DomainError("cannot bound an empty dataset")
    return FeatureBounds(
        lo=dataset.points.min(axis=0), hi=dataset.points.max(axis=0)
    )


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Write one feature vector per row with a phi0..phi{k-1} header.

    Values use 17 significant digits so a round trip is exact.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"phi{j}" for j in range(dataset.dim)])
        for row in dataset.points:
            writer.writerow([f"{v:.17g}" for v in row])


def load_dataset_csv(path) -> Dataset:
    """Read a feature CSV written by save_dataset_csv."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("line 1: empty CSV, expected a phi0.. header") from None
        expected = [f"phi{j}" for j in range(len(header))]
        if header != expected:
            raise ParseError(f"line 1: bad header {header!r}, expected {expected!r}")
        k = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != k:
                raise ParseError(f"line {lineno}: expected {k} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
    pts = np.asarray(rows, dtype=float) if rows else np.zeros((0, k))
    return Dataset(points=pts)
