"""Drive cycle ingestion, resampling and reference trajectory construction.

Cycle files are two-column CSVs with the header ``t_s,v_mps``. Speeds are
always metres per second in this layer; unit conversion (e.g. from mph)
is the CLI's job.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ParseError, ValidationError

CYCLE_HEADER = "t_s,v_mps"


@dataclass(frozen=True)
class DriveCycle:
    """Timestamped speed profile, strictly increasing in time from t=0."""

    times: np.ndarray   # s
    speeds: np.ndarray  # m/s
    name: str = ""

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.speeds, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "speeds", v)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValidationError("times and speeds must be 1-D arrays of equal length")
        if len(t) < 2:
            raise ValidationError("a drive cycle needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValidationError("non-finite cycle samples")
        if t[0] != 0.0:
            raise ValidationError("cycle must start at t=0")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("cycle times must be strictly increasing")
        if np.any(v < 0):
            raise ValidationError("cycle speeds must be non-negative")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Reference speed and its trapezoid-integrated position on a dt grid."""

    dt: float
    v_ref: np.ndarray  # m/s
    s_ref: np.ndarray  # m

    def __len__(self) -> int:
        return len(self.v_ref)


@dataclass(frozen=True)
class ReferenceWindow:
    """Preview slice of a reference trajectory, length N+1."""

    s_ref: np.ndarray
    v_ref: np.ndarray


def parse_cycle(data: bytes | str, name: str = "") -> DriveCycle:
    """Parse and validate a ``t_s,v_mps`` CSV into a DriveCycle."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = [ln.strip() for ln in io.StringIO(text) if ln.strip()]
    if not lines:
        raise ParseError("empty cycle file")
    if lines[0].replace(" ", "") != CYCLE_HEADER:
        raise ParseError(f"expected header '{CYCLE_HEADER}', got '{lines[0]}'")
    times, speeds = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 2 columns, got {len(parts)}")
        try:
            times.append(float(parts[0]))
            speeds.append(float(parts[1]))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    return DriveCycle(times=np.array(times), speeds=np.array(speeds), name=name)


def load_cycle(path) -> DriveCycle:
    """Read a cycle CSV from disk."""
    with open(path, "rb") as fh:
        return parse_cycle(fh.read(), name=str(path))


def bundled_cycle(key: str) -> DriveCycle:
    """Load one of the cycles shipped with the package ('udds' or 'synthetic')."""
    filename = {"udds": "udds.csv", "synthetic": "synthetic_120s.csv"}[key]
    data = resources.files("shev_mompc").joinpath("data", filename).read_bytes()
    return parse_cycle(data, name=key)


def resample(cycle: DriveCycle, dt: float) -> DriveCycle:
    """Linearly interpolate the cycle onto the grid 0, dt, 2dt, ...

    The final grid point is the last multiple of dt that does not overshoot
    the cycle end (so on-grid cycles come back unchanged).
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    n_steps = int(np.floor(cycle.duration / dt + 1e-9))
    grid = np.arange(n_steps + 1) * dt
    speeds = np.interp(grid, cycle.times, cycle.speeds)
    return DriveCycle(times=grid, speeds=speeds, name=cycle.name)


def is_on_grid(cycle: DriveCycle, dt: float, tol: float = 1e-9) -> bool:
    grid = np.arange(len(cycle)) * dt
    return bool(np.all(np.abs(cycle.times - grid) <= tol))


def reference_trajectory(cycle: DriveCycle, dt: float) -> ReferenceTrajectory:
    """Build the (position, velocity) reference from an on-grid cycle.

    Position is the trapezoidal cumulative integral of speed from zero.
    """
    if not is_on_grid(cycle, dt):
        raise ValidationError("cycle must be resampled onto the dt grid first")
    v = cycle.speeds
    s = np.concatenate(([0.0], np.cumsum(dt * (v[:-1] + v[1:]) / 2.0)))
    return ReferenceTrajectory(dt=dt, v_ref=v, s_ref=s)


def preview(ref: ReferenceTrajectory, t_index: int, horizon: int) -> ReferenceWindow:
    """Return the N+1 reference pairs starting at t_index.

    Beyond the end of the trajectory the final speed is held constant and
    the position reference keeps advancing at that speed.
    """
    if t_index < 0:
        raise ValidationError("t_index must be non-negative")
    n = len(ref)
    idx = np.arange(t_index, t_index + horizon + 1)
    inside = np.minimum(idx, n - 1)
    v = ref.v_ref[inside]
    s = ref.s_ref[inside]
    overshoot = np.maximum(idx - (n - 1), 0)
    s = s + overshoot * ref.dt * ref.v_ref[-1]
    return ReferenceWindow(s_ref=s, v_ref=v)
