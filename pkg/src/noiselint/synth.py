"""Synthetic labeled noise traces with injected defects.

The generator produces a gait-like background (rectified multi-harmonic
signal over a constant floor plus a small broadband component) and adds one
of three defect signatures per annotated interval:

* ``oscillation`` - a multi-sine with one component per integer Hz inside a
  frequency band, mimicking narrowband control-loop oscillations;
* ``impact`` - a fast-decaying, rectified high-frequency burst, mimicking a
  hard contact transient;
* ``high_acc`` - a slowly decaying positive step, mimicking the velocity jump
  of an actuation fault.

All randomness comes from a counter-based generator (SplitMix64) documented
below, so a given spec reproduces its trace bit for bit on any platform.
Every defect draws from a stream keyed by its own kind and start time, which
keeps the rest of the trace unchanged when a single defect is added or
removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import FailureLabel
from .errors import ValidationError
from .noise import NoiseTrace

# SplitMix64: output(i) = mix(seed + (i + 1) * GOLDEN), with the finalizer
#   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
#   z ^= z >> 27; z *= 0x94D049BB133111EB;
#   z ^= z >> 31.
# Uniform doubles take the top 53 bits: u = ((out >> 11) + 1) * 2**-53, which
# lies in (0, 1] so logarithms are always defined.  Normal deviates use the
# Box-Muller transform on counter pairs (2k, 2k+1).
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)

# Stream tags (documented constants; arbitrary but fixed).
_STREAM_BASE_NOISE = 1
_STREAM_BASE_PHASES = 2
_KIND_CODE = {"oscillation": 1, "impact": 2, "high_acc": 3}

# Fixed waveform constants.
IMPACT_BURST_HZ = 2000.0
HIGH_ACC_SETTLE_RATE = 8.0  # 1/s


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


def _stream_seed(seed: int, tag: int) -> np.ndarray:
    base = np.array([seed], dtype=np.uint64) + np.array([tag], dtype=np.uint64) * _GOLDEN
    return _mix64(base)


def stream_uniform(seed: int, tag: int, count: int, offset: int = 0) -> np.ndarray:
    """Deterministic uniforms in (0, 1] from the (seed, tag) stream."""
    counters = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    raw = _mix64(_stream_seed(seed, tag) + counters * _GOLDEN)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def stream_normal(seed: int, tag: int, count: int) -> np.ndarray:
    """Deterministic standard-normal deviates via Box-Muller."""
    pairs = (count + 1) // 2
    u = stream_uniform(seed, tag, 2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(2.0 * np.pi * u2)
    z[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return z[:count]


@dataclass(frozen=True)
class BaseNoise:
    """Background signal parameters: floor + |multi-harmonic| + broadband.

    The constant floor keeps the trace non-negative when signed defect
    waveforms are superimposed; it must exceed the largest oscillation
    amplitude in the scenario.
    """

    fundamental_hz: float = 1.2
    harmonics: int = 6
    amplitude: float = 0.5
    noise_level: float = 0.02
    floor: float = 1.0

    def __post_init__(self):
        if self.fundamental_hz <= 0 or self.harmonics < 1:
            raise ValidationError("base noise needs fundamental_hz > 0 and harmonics >= 1")
        if self.amplitude < 0 or self.noise_level < 0 or self.floor < 0:
            raise ValidationError("base noise amplitudes must be non-negative")


@dataclass(frozen=True)
class OscillationDefect:
    t_start: float
    t_end: float
    band_low: float
    band_high: float
    amplitude: float

    label = FailureLabel.OSCILLATIONS
    kind = "oscillation"

    def component_freqs(self) -> np.ndarray:
        """One component per integer Hz inside [band_low, band_high]."""
        freqs = np.arange(np.ceil(self.band_low), np.floor(self.band_high) + 1.0)
        if len(freqs) == 0:
            raise ValidationError(
                f"band [{self.band_low}, {self.band_high}] contains no integer frequency"
            )
        return freqs


@dataclass(frozen=True)
class ImpactDefect:
    t_start: float
    t_end: float
    time: float
    peak: float
    decay: float

    label = FailureLabel.IMPACT
    kind = "impact"


@dataclass(frozen=True)
class HighAccDefect:
    t_start: float
    t_end: float
    time: float
    velocity_step: float

    label = FailureLabel.HIGH_ACC
    kind = "high_acc"


Defect = OscillationDefect | ImpactDefect | HighAccDefect


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float
    sample_rate: float
    base: BaseNoise = field(default_factory=BaseNoise)
    defects: tuple[Defect, ...] = ()
    seed: int = 1

    def __post_init__(self):
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ValidationError("duration and sample_rate must be positive")
        for d in self.defects:
            if not (0.0 <= d.t_start < d.t_end <= self.duration):
                raise ValidationError(
                    f"defect interval [{d.t_start}, {d.t_end}] outside [0, {self.duration}]"
                )
            if isinstance(d, OscillationDefect):
                if not (0.0 < d.band_low <= d.band_high < self.sample_rate / 2.0):
                    raise ValidationError(
                        f"oscillation band [{d.band_low}, {d.band_high}] outside "
                        f"(0, {self.sample_rate / 2:g})"
                    )
                d.component_freqs()
            if isinstance(d, (ImpactDefect, HighAccDefect)):
                if not (d.t_start <= d.time < d.t_end):
                    raise ValidationError(
                        f"event time {d.time} outside its interval [{d.t_start}, {d.t_end}]"
                    )
        ordered = sorted(self.defects, key=lambda d: d.t_start)
        for a, b in zip(ordered, ordered[1:]):
            if b.t_start < a.t_end and a.kind != b.kind:
                raise ValidationError(
                    f"overlapping defect intervals of different kinds: "
                    f"{a.kind} [{a.t_start}, {a.t_end}] and {b.kind} [{b.t_start}, {b.t_end}]"
                )


def _defect_stream_tag(defect: Defect) -> int:
    # Keyed by kind and start time so the stream survives edits elsewhere.
    return _KIND_CODE[defect.kind] * 2**40 + round(defect.t_start * 1e6)


def _base_signal(spec: ScenarioSpec, t: np.ndarray) -> np.ndarray:
    base = spec.base
    phases = 2.0 * np.pi * stream_uniform(spec.seed, _STREAM_BASE_PHASES, base.harmonics)
    harmonic = np.zeros_like(t)
    for k in range(1, base.harmonics + 1):
        harmonic += (base.amplitude / k) * np.sin(
            2.0 * np.pi * k * base.fundamental_hz * t + phases[k - 1]
        )
    broadband = np.abs(stream_normal(spec.seed, _STREAM_BASE_NOISE, len(t)))
    return base.floor + np.abs(harmonic) + base.noise_level * broadband


def _defect_signal(spec: ScenarioSpec, defect: Defect, t: np.ndarray) -> np.ndarray:
    rate = spec.sample_rate
    i0 = round(defect.t_start * rate)
    i1 = min(round(defect.t_end * rate), len(t))
    out = np.zeros_like(t)
    window = t[i0:i1]
    if isinstance(defect, OscillationDefect):
        freqs = defect.component_freqs()
        tag = _defect_stream_tag(defect)
        phases = 2.0 * np.pi * stream_uniform(spec.seed, tag, len(freqs))
        wave = np.zeros_like(window)
        for f, phi in zip(freqs, phases):
            wave += np.sin(2.0 * np.pi * f * (window - defect.t_start) + phi)
        out[i0:i1] = (defect.amplitude / len(freqs)) * wave
    elif isinstance(defect, ImpactDefect):
        rel = window - defect.time
        active = rel >= 0
        burst = np.zeros_like(window)
        burst[active] = defect.peak * np.exp(-defect.decay * rel[active]) * np.abs(
            np.sin(2.0 * np.pi * IMPACT_BURST_HZ * rel[active])
        )
        out[i0:i1] = burst
    else:
        rel = window - defect.time
        active = rel >= 0
        step = np.zeros_like(window)
        step[active] = defect.velocity_step * np.exp(-HIGH_ACC_SETTLE_RATE * rel[active])
        out[i0:i1] = step
    return out


def generate(spec: ScenarioSpec) -> tuple[NoiseTrace, list[tuple[float, float, FailureLabel]]]:
    """Render a scenario to a noise trace plus its annotation list.

    Defect intervals carry their class label; every remaining gap of at least
    one sample becomes an OK block.  Identical specs produce bit-identical
    traces.
    """
    n = round(spec.duration * spec.sample_rate)
    if n < 1:
        raise ValidationError("scenario produces no samples")
    t = np.arange(n) / spec.sample_rate
    signal = _base_signal(spec, t)
    for defect in spec.defects:
        signal = signal + _defect_signal(spec, defect, t)
    if np.any(signal < 0):
        raise ValidationError(
            "generated signal is negative; raise base.floor above the total "
            "oscillation amplitude"
        )
    trace = NoiseTrace(sample_rate=spec.sample_rate, samples=signal)

    annotations: list[tuple[float, float, FailureLabel]] = []
    cursor = 0.0
    min_block = 1.0 / spec.sample_rate
    for defect in sorted(spec.defects, key=lambda d: d.t_start):
        if defect.t_start - cursor >= min_block:
            annotations.append((cursor, defect.t_start, FailureLabel.OK))
        annotations.append((defect.t_start, defect.t_end, defect.label))
        cursor = max(cursor, defect.t_end)
    if spec.duration - cursor >= min_block:
        annotations.append((cursor, spec.duration, FailureLabel.OK))
    return trace, annotations


# ---------------------------------------------------------------------------
# Scenario configuration files: one "key = value" pair per line for scalars,
# one "oscillation|impact|high_acc = <numbers>" line per defect.


def parse_scenario_config(path, seed_override: int | None = None) -> ScenarioSpec:
    scalars: dict[str, float] = {}
    defects: list[Defect] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = text.partition("=")
            key = key.strip()
            parts = value.split()
            try:
                if key == "oscillation":
                    defects.append(OscillationDefect(*map(float, parts)))
                elif key == "impact":
                    defects.append(ImpactDefect(*map(float, parts)))
                elif key == "high_acc":
                    defects.append(HighAccDefect(*map(float, parts)))
                elif key in _SCALAR_KEYS:
                    scalars[key] = float(parts[0])
                else:
                    raise ValidationError(f"unknown key {key!r}")
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            except (TypeError, ValueError):
                raise ValidationError(
                    f"{path}:{lineno}: bad value for {key!r}: {value.strip()!r}"
                ) from None
    for required in ("duration", "sample_rate"):
        if required not in scalars:
            raise ValidationError(f"{path}: missing required key {required!r}")
    base = BaseNoise(
        fundamental_hz=scalars.get("base_fundamental_hz", BaseNoise.fundamental_hz),
        harmonics=int(scalars.get("base_harmonics", BaseNoise.harmonics)),
        amplitude=scalars.get("base_amplitude", BaseNoise.amplitude),
        noise_level=scalars.get("base_noise_level", BaseNoise.noise_level),
        floor=scalars.get("base_floor", BaseNoise.floor),
    )
    seed = seed_override if seed_override is not None else int(scalars.get("seed", 1))
    return ScenarioSpec(
        duration=scalars["duration"],
        sample_rate=scalars["sample_rate"],
        base=base,
        defects=tuple(defects),
        seed=seed,
    )


_SCALAR_KEYS = {
    "duration",
    "sample_rate",
    "seed",
    "base_fundamental_hz",
    "base_harmonics",
    "base_amplitude",
    "base_noise_level",
    "base_floor",
}
