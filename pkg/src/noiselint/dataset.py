"""Annotated noise-signal blocks and their on-disk formats.

Trace files are plain text: a ``rate=<Hz>`` header line followed by one
sample per line.  Annotation files hold one ``t_start t_end label`` row per
block; ``#`` starts a comment.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .noise import NoiseTrace


class FailureLabel(enum.IntEnum):
    """Closed set of per-block labels with stable integer codes."""

    OK = 0
    IMPACT = 1
    HIGH_ACC = 2
    OSCILLATIONS = 3

    @property
    def token(self) -> str:
        """Canonical lowercase string used in annotation and model files."""
        return _LABEL_TOKENS[self]

    @property
    def display(self) -> str:
        return _LABEL_DISPLAY[self]

    @staticmethod
    def parse(text: str) -> "FailureLabel":
        try:
            return _TOKEN_TO_LABEL[text.strip().lower()]
        except KeyError:
            known = ", ".join(_TOKEN_TO_LABEL)
            raise ValidationError(f"unknown label {text!r} (known: {known})") from None


_LABEL_TOKENS = {
    FailureLabel.OK: "ok",
    FailureLabel.IMPACT: "impact",
    FailureLabel.HIGH_ACC: "highacc",
    FailureLabel.OSCILLATIONS: "oscillations",
}
_LABEL_DISPLAY = {
    FailureLabel.OK: "OK",
    FailureLabel.IMPACT: "Impact",
    FailureLabel.HIGH_ACC: "HighAcc",
    FailureLabel.OSCILLATIONS: "Oscillations",
}
_TOKEN_TO_LABEL = {v: k for k, v in _LABEL_TOKENS.items()}


class DatasetRole(enum.Enum):
    TRAINING = "training"
    VALIDATION = "validation"


@dataclass(frozen=True)
class AnnotatedBlock:
    """A contiguous, labeled slice of a noise trace.

    The block keeps a reference to its source trace so downstream framing can
    extend past the annotated end when a block is shorter than one frame.
    """

    label: FailureLabel
    t_start: float
    t_end: float
    trace: NoiseTrace
    start_index: int
    length: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValidationError(
                f"block [{self.t_start}, {self.t_end}] must have t_end > t_start"
            )
        if self.length < 1:
            raise ValidationError(
                f"block [{self.t_start}, {self.t_end}] covers less than one sample"
            )
        if self.start_index < 0 or self.start_index + self.length > len(self.trace):
            raise ValidationError(
                f"block [{self.t_start}, {self.t_end}] exceeds the trace "
                f"({len(self.trace)} samples at {self.trace.sample_rate:g} Hz)"
            )

    @property
    def samples(self) -> np.ndarray:
        return self.trace.samples[self.start_index : self.start_index + self.length]

    @property
    def trailing_samples(self) -> np.ndarray:
        """Trace samples from the block start onward, past the annotated end."""
        return self.trace.samples[self.start_index :]


def block_from_interval(
    trace: NoiseTrace, t_start: float, t_end: float, label: FailureLabel
) -> AnnotatedBlock:
    """Cut a half-open [t_start, t_end) interval out of a trace.

    Sample indices come from rounding, matching hand-set annotation times.
    """
    start = round(t_start * trace.sample_rate)
    length = round((t_end - t_start) * trace.sample_rate)
    return AnnotatedBlock(
        label=label,
        t_start=t_start,
        t_end=t_end,
        trace=trace,
        start_index=start,
        length=length,
    )


@dataclass(frozen=True)
class Dataset:
    blocks: tuple[AnnotatedBlock, ...]
    role: DatasetRole
    sample_rate: float

    def __post_init__(self):
        if not self.blocks:
            raise ValidationError("dataset contains no blocks")
        for b in self.blocks:
            if b.trace.sample_rate != self.sample_rate:
                raise ValidationError("all blocks must share the dataset sample rate")

    @property
    def annotated_duration(self) -> float:
        return sum(b.t_end - b.t_start for b in self.blocks)


def write_noise_file(trace: NoiseTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"rate={trace.sample_rate:.17g}\n")
        fh.writelines(f"{s:.17g}\n" for s in trace.samples)


def read_noise_file(path) -> NoiseTrace:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("rate="):
            raise ValidationError(f"{path}:1: expected 'rate=<Hz>' header, got {header!r}")
        try:
            rate = float(header[len("rate=") :])
        except ValueError:
            raise ValidationError(f"{path}:1: bad sample rate in {header!r}") from None
        try:
            samples = np.loadtxt(fh, dtype=float, ndmin=1)
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    try:
        return NoiseTrace(sample_rate=rate, samples=samples)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def read_annotations(path) -> list[tuple[float, float, FailureLabel]]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ValidationError(
                    f"{path}:{lineno}: expected 't_start t_end label', got {line.strip()!r}"
                )
            try:
                t0, t1 = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric interval bound") from None
            try:
                label = FailureLabel.parse(parts[2])
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            entries.append((t0, t1, label))
    return entries


def write_annotations(entries, path) -> None:
    """Write (t_start, t_end, label) rows; accepts blocks or plain tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            if isinstance(entry, AnnotatedBlock):
                t0, t1, label = entry.t_start, entry.t_end, entry.label
            else:
                t0, t1, label = entry
            fh.write(f"{t0:.17g} {t1:.17g} {label.token}\n")


def load_dataset(noise_file, annotation_file, role: DatasetRole) -> Dataset:
    """Bind annotation intervals to trace slices.

    Overlapping annotations are accepted with a warning; intervals outside
    the trace or unknown labels are rejected.
    """
    trace = read_noise_file(noise_file)
    entries = read_annotations(annotation_file)
    if not entries:
        raise ValidationError(f"{annotation_file}: no annotation rows")
    blocks = []
    for t0, t1, label in entries:
        try:
            blocks.append(block_from_interval(trace, t0, t1, label))
        except ValidationError as exc:
            raise ValidationError(f"{annotation_file}: {exc}") from None
    ordered = sorted(blocks, key=lambda blk: blk.t_start)
    for a, b in zip(ordered, ordered[1:]):
        if b.t_start < a.t_end:
            warnings.warn(
                f"annotations [{a.t_start}, {a.t_end}] and [{b.t_start}, {b.t_end}] overlap",
                stacklevel=2,
            )
    return Dataset(blocks=tuple(blocks), role=role, sample_rate=trace.sample_rate)
