"""Noise-block feature extraction.

Pipeline: cut fixed-length frames from each labeled block, turn every frame
into a short-time magnitude spectrogram (Hann window), compress the frequency
axis by binning, log-scale, then decorrelate time with an orthogonal DCT-II
applied to each frequency bin's temporal sequence.  The flattened coefficients
are the classifier input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import AnnotatedBlock, Dataset, DatasetRole, FailureLabel
from .errors import ValidationError


@dataclass(frozen=True)
class PreprocessConfig:
    """Feature-extraction parameters.

    The defaults fix a 0.4 s frame at 10 kHz with 1 kHz hop; ``fft_stride``
    is the main tunable and controls how many transforms fit in one frame.
    """

    frame_size: int = 4000
    frame_stride: int = 1000
    fft_size: int = 1024
    fft_stride: int = 834
    compression_factor: int = 3
    log_epsilon: float = 1e-10
    allow_padding: bool = True

    def __post_init__(self):
        if self.frame_size < 1 or self.frame_stride < 1 or self.fft_stride < 1:
            raise ValidationError("frame_size, frame_stride and fft_stride must be >= 1")
        if self.fft_size < 2 or self.fft_size > self.frame_size:
            raise ValidationError(
                f"fft_size must be in [2, frame_size], got {self.fft_size} vs {self.frame_size}"
            )
        if self.compression_factor < 1:
            raise ValidationError("compression_factor must be >= 1")
        if not self.log_epsilon > 0:
            raise ValidationError("log_epsilon must be positive")

    @property
    def n_transforms(self) -> int:
        return (self.frame_size - self.fft_size) // self.fft_stride + 1

    @property
    def n_spectrum_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def n_compressed_bins(self) -> int:
        return math.ceil(self.n_spectrum_bins / self.compression_factor)

    @property
    def feature_length(self) -> int:
        return self.n_compressed_bins * self.n_transforms


@dataclass(frozen=True)
class Frame:
    """Fixed-length window of one block, inheriting the block's label."""

    samples: np.ndarray = field(repr=False)
    label: FailureLabel
    block_id: int
    offset: int


def pad_reflect(samples: np.ndarray, target: int) -> np.ndarray:
    """Extend a short signal by odd reflection about its final sample.

    padded[n-1+k] = 2*x[n-1] - x[n-1-k]; when more than n-1 samples are
    needed the reflection repeats about the new edge, so the extension stays
    continuous and re-traces the signal's shape.  A single-sample input can
    only extend as a constant.
    """
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n == 0:
        raise ValidationError("cannot pad an empty signal")
    if n >= target:
        return samples[:target].copy()
    out = np.empty(target)
    out[:n] = samples
    pos = n
    while pos < target:
        segment = min(pos - 1, target - pos)
        if segment == 0:
            out[pos:] = out[pos - 1]
            break
        edge = out[pos - 1]
        out[pos : pos + segment] = 2.0 * edge - out[pos - 1 - segment : pos - 1][::-1]
        pos += segment
    return out


def count_frames(n_samples: int, cfg: PreprocessConfig) -> int:
    """Frames produced for a block of n_samples (short blocks yield one)."""
    if n_samples >= cfg.frame_size:
        return (n_samples - cfg.frame_size) // cfg.frame_stride + 1
    return 1


def frame_block(block: AnnotatedBlock, cfg: PreprocessConfig, block_id: int = 0) -> list[Frame]:
    """Cut overlapping full frames from a block.

    Blocks shorter than one frame yield a single frame: padded by reflection
    when ``allow_padding`` is set (training), otherwise extended with trace
    samples past the block end (validation), falling back to padding if the
    trace ends first.
    """
    samples = block.samples
    n_c = len(samples)
    if n_c >= cfg.frame_size:
        return [
            Frame(
                samples=samples[off : off + cfg.frame_size],
                label=block.label,
                block_id=block_id,
                offset=off,
            )
            for off in range(0, n_c - cfg.frame_size + 1, cfg.frame_stride)
        ]
    if cfg.allow_padding:
        padded = pad_reflect(samples, cfg.frame_size)
    else:
        extended = block.trailing_samples[: cfg.frame_size]
        padded = pad_reflect(extended, cfg.frame_size)
    return [Frame(samples=padded, label=block.label, block_id=block_id, offset=0)]


def frame_trace(samples: np.ndarray, cfg: PreprocessConfig) -> list[tuple[int, np.ndarray]]:
    """Frame a raw unlabeled trace for prediction: (offset, samples) pairs.

    A trace shorter than one frame yields a single reflection-padded frame.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 1:
        raise ValidationError("cannot frame an empty trace")
    if len(samples) < cfg.frame_size:
        return [(0, pad_reflect(samples, cfg.frame_size))]
    return [
        (off, samples[off : off + cfg.frame_size])
        for off in range(0, len(samples) - cfg.frame_size + 1, cfg.frame_stride)
    ]


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window (denominator n), the standard STFT convention."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def spectrogram(samples: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Magnitude spectrogram, one row per transform offset.

    Row r holds |FFT(hann * samples[r*fft_stride : r*fft_stride+fft_size])|
    for the non-negative frequency bins; phase is discarded and the frame is
    never padded at its end (only fully contained windows are transformed).
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) < cfg.fft_size:
        raise ValidationError(
            f"frame of {len(samples)} samples is shorter than fft_size {cfg.fft_size}"
        )
    n_t = (len(samples) - cfg.fft_size) // cfg.fft_stride + 1
    windows = sliding_window_view(samples, cfg.fft_size)[:: cfg.fft_stride][:n_t]
    return np.abs(np.fft.rfft(windows * hann_window(cfg.fft_size), axis=1))


def compress_spectrum(spec: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Average groups of adjacent frequency bins, then log-scale.

    Output bin j is log(mean(columns j*f .. j*f+f-1) + eps); a non-divisible
    final group averages whatever columns remain.
    """
    spec = np.atleast_2d(np.asarray(spec, dtype=float))
    n_cols = spec.shape[1]
    factor = cfg.compression_factor
    starts = np.arange(0, n_cols, factor)
    sums = np.add.reduceat(spec, starts, axis=1)
    counts = np.minimum(starts + factor, n_cols) - starts
    return np.log(sums / counts + cfg.log_epsilon)


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis: T[k, m] = s_k * cos(pi*(m+1/2)*k/n)."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    basis = np.cos(np.pi * (m + 0.5) * k / n) * math.sqrt(2.0 / n)
    basis[0, :] = 1.0 / math.sqrt(n)
    return basis


def time_dct(spec: np.ndarray) -> np.ndarray:
    """Apply the orthogonal DCT-II along the time axis of each frequency bin.

    Column j of the input is one bin's temporal sequence; the output holds
    its DCT coefficients in the same column, so event timing within the
    frame no longer shifts the representation.
    """
    spec = np.atleast_2d(np.asarray(spec, dtype=float))
    return dct_matrix(spec.shape[0]) @ spec


def flatten_features(coeffs: np.ndarray) -> np.ndarray:
    """Flatten DCT coefficients frequency-major (all of bin 0 first)."""
    return np.asarray(coeffs).ravel(order="F")


def frame_features(samples: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Full per-frame pipeline: spectrogram -> compress -> DCT -> flatten."""
    return flatten_features(time_dct(compress_spectrum(spectrogram(samples, cfg), cfg)))


def dataset_frames(ds: Dataset, cfg: PreprocessConfig) -> list[Frame]:
    """Frame every block; padding policy follows the dataset role."""
    effective = replace(cfg, allow_padding=(ds.role == DatasetRole.TRAINING))
    frames: list[Frame] = []
    for block_id, block in enumerate(ds.blocks):
        frames.extend(frame_block(block, effective, block_id=block_id))
    return frames


def featurize_dataset(ds: Dataset, cfg: PreprocessConfig) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and integer label vector for a whole dataset."""
    frames = dataset_frames(ds, cfg)
    features = np.empty((len(frames), cfg.feature_length))
    labels = np.empty(len(frames), dtype=int)
    for i, frame in enumerate(frames):
        features[i] = frame_features(frame.samples, cfg)
        labels[i] = int(frame.label)
    return features, labels


def class_counts(ds: Dataset, cfg: PreprocessConfig) -> dict[FailureLabel, int]:
    """Per-label frame counts (every label present in the map, possibly 0)."""
    counts = {label: 0 for label in FailureLabel}
    for block in ds.blocks:
        counts[block.label] += count_frames(block.length, cfg)
    return counts
