"""Scalar noise-pressure estimation from simulated joint-velocity logs.

The estimate is the Euclidean norm of the stacked actual and desired joint
velocities at each time step.  Scaling constants are deliberately ignored;
only the time-local structure of the signal matters downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Relative tolerance for the uniform-timestep check.  Simulation logs carry
# binary-float timestamps, so exact step equality is unrealistic.
TIMESTEP_RTOL = 1e-9


@dataclass(frozen=True)
class JointTrajectory:
    """Uniformly sampled actual (and optionally desired) joint velocities.

    ``qdot`` holds one column per actual generalized velocity, ``qdot_desired``
    one column per desired joint velocity (may have zero columns).  All share
    the timestamp axis.
    """

    timestamps: np.ndarray
    qdot: np.ndarray
    qdot_desired: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        qd = np.atleast_2d(np.asarray(self.qdot, dtype=float))
        qdd = np.asarray(self.qdot_desired, dtype=float)
        if qdd.size == 0:
            qdd = np.empty((len(ts), 0))
        qdd = np.atleast_2d(qdd)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "qdot", qd)
        object.__setattr__(self, "qdot_desired", qdd)
        if ts.ndim != 1 or len(ts) < 2:
            raise ValidationError(
                "trajectory must contain at least 2 samples to define a timestep"
            )
        if qd.shape[0] != len(ts) or qdd.shape[0] != len(ts):
            raise ValidationError(
                f"velocity row count ({qd.shape[0]}/{qdd.shape[0]}) does not match "
                f"timestamp count ({len(ts)})"
            )
        if qd.shape[1] < 1:
            raise ValidationError("qdot must have at least one column")
        steps = np.diff(ts)
        if np.any(steps <= 0):
            idx = int(np.argmax(steps <= 0))
            raise ValidationError(
                f"timestamps must be strictly increasing; violated at sample {idx + 1}"
            )
        _check_uniform_step(ts)

    @property
    def timestep(self) -> float:
        return (self.timestamps[-1] - self.timestamps[0]) / (len(self.timestamps) - 1)

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.timestep

    def __len__(self) -> int:
        return len(self.timestamps)


def _check_uniform_step(ts: np.ndarray) -> None:
    step = (ts[-1] - ts[0]) / (len(ts) - 1)
    deviation = np.abs(np.diff(ts) - step)
    bad = deviation > TIMESTEP_RTOL * abs(step)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValidationError(
            f"non-uniform timestep at sample {idx + 1}: "
            f"step {ts[idx + 1] - ts[idx]:.17g} vs expected {step:.17g}"
        )


@dataclass(frozen=True)
class NoiseTrace:
    """Uniformly sampled non-negative noise-pressure signal."""

    sample_rate: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not self.sample_rate > 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1 or len(self.samples) < 1:
            raise ValidationError("noise trace must contain at least one sample")
        if np.any(self.samples < 0):
            idx = int(np.argmax(self.samples < 0))
            raise ValidationError(f"noise sample {idx} is negative ({self.samples[idx]:g})")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


def _rowwise_sumsq(matrix: np.ndarray) -> np.ndarray:
    """Sum of squares along columns with Neumaier error compensation.

    Column-order accumulation with a carried correction term keeps the result
    permutation-invariant to ~1e-16 relative and leaves all-zero columns with
    no effect on the output bits.
    """
    total = np.zeros(matrix.shape[0])
    comp = np.zeros(matrix.shape[0])
    for col in matrix.T:
        term = col * col
        new_total = total + term
        lost = np.where(
            np.abs(total) >= np.abs(term),
            (total - new_total) + term,
            (term - new_total) + total,
        )
        comp += lost
        total = new_total
    return total + comp


def estimate_noise(traj: JointTrajectory) -> NoiseTrace:
    """Compute the noise-pressure estimate for every sample of a trajectory.

    Sample i is sqrt(sum_j qdot[i,j]^2 + sum_k qdot_desired[i,k]^2); the trace
    sample rate is the reciprocal of the trajectory timestep.
    """
    power = _rowwise_sumsq(traj.qdot)
    if traj.qdot_desired.shape[1] > 0:
        power = power + _rowwise_sumsq(traj.qdot_desired)
    return NoiseTrace(sample_rate=traj.sample_rate, samples=np.sqrt(power))


@dataclass(frozen=True)
class ColumnSpec:
    """Which trajectory-file columns hold actual vs desired velocities.

    Tokens are header names, 0-based file column indices, or inclusive index
    ranges ``a-b`` (column 0 is the timestamp).
    """

    actual: tuple[str, ...]
    desired: tuple[str, ...] = ()

    @staticmethod
    def parse(actual: str, desired: str = "") -> "ColumnSpec":
        split = lambda s: tuple(t.strip() for t in s.split(",") if t.strip())
        spec = ColumnSpec(actual=split(actual), desired=split(desired))
        if not spec.actual:
            raise ValidationError("column spec must select at least one actual-velocity column")
        return spec


def _resolve_columns(tokens, header) -> list[int]:
    indices: list[int] = []
    for token in tokens:
        if token in header:
            indices.append(header.index(token))
        elif token.isdigit():
            indices.append(int(token))
        elif token.count("-") == 1 and all(p.isdigit() for p in token.split("-")):
            lo, hi = (int(p) for p in token.split("-"))
            if lo > hi:
                raise ValidationError(f"empty column range {token!r}")
            indices.extend(range(lo, hi + 1))
        else:
            raise ValidationError(
                f"unknown column {token!r}; not a header name, index, or range a-b"
            )
    for idx in indices:
        if idx <= 0 or idx >= len(header):
            raise ValidationError(
                f"column index {idx} out of range (velocity columns are 1..{len(header) - 1})"
            )
    return indices


def read_trajectory(path, columns: ColumnSpec) -> JointTrajectory:
    """Read a TSV trajectory log (header row, timestamp first column).

    ``columns`` selects which velocity columns become ``qdot`` and
    ``qdot_desired``; subsetting supports reduced noise estimates computed
    from a handful of joints only.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    rows = [(i + 1, line.split()) for i, line in enumerate(lines) if line.strip()]
    if len(rows) < 2:
        raise ValidationError(f"{path}: trajectory file needs a header and data rows")
    header = rows[0][1]
    actual_idx = _resolve_columns(columns.actual, header)
    desired_idx = _resolve_columns(columns.desired, header)

    width = len(header)
    data = np.empty((len(rows) - 1, width))
    for r, (lineno, cells) in enumerate(rows[1:]):
        if len(cells) != width:
            raise ValidationError(
                f"{path}:{lineno}: expected {width} columns, found {len(cells)}"
            )
        try:
            data[r] = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise ValidationError(f"{path}:{lineno}: non-numeric cell {bad!r}") from None

    ts = data[:, 0]
    steps = np.diff(ts)
    if np.any(steps <= 0):
        lineno = rows[1 + int(np.argmax(steps <= 0)) + 1][0]
        raise ValidationError(f"{path}:{lineno}: timestamps must be strictly increasing")
    try:
        return JointTrajectory(
            timestamps=ts,
            qdot=data[:, actual_idx],
            qdot_desired=data[:, desired_idx] if desired_idx else np.empty((len(ts), 0)),
        )
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False
