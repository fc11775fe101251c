"""Synthetic benchmark corpus shared by acceptance and integration tests.

Training and validation scenarios exercise all four classes: several
narrowband oscillation bands between 20 Hz and 1 kHz, short high-frequency
impact bursts, and slowly decaying acceleration steps, separated by plain
gait-noise stretches.
"""

from __future__ import annotations

from noiselint.dataset import Dataset, DatasetRole, block_from_interval
from noiselint.synth import (
    HighAccDefect,
    ImpactDefect,
    OscillationDefect,
    ScenarioSpec,
    generate,
)

TRAINING_SPEC = ScenarioSpec(
    duration=62.0,
    sample_rate=10000.0,
    seed=1001,
    defects=(
        OscillationDefect(2.0, 4.0, 20.0, 30.0, 0.6),
        OscillationDefect(8.0, 10.0, 40.0, 50.0, 0.55),
        OscillationDefect(14.0, 16.5, 60.0, 100.0, 0.6),
        OscillationDefect(20.0, 22.0, 150.0, 250.0, 0.5),
        OscillationDefect(26.0, 28.0, 250.0, 350.0, 0.55),
        OscillationDefect(32.0, 34.0, 900.0, 1000.0, 0.6),
        ImpactDefect(38.0, 38.4, 38.05, 10.0, 60.0),
        ImpactDefect(40.0, 40.4, 40.1, 12.0, 75.0),
        ImpactDefect(42.0, 42.4, 42.05, 9.0, 50.0),
        ImpactDefect(44.0, 44.4, 44.15, 11.0, 65.0),
        ImpactDefect(46.0, 46.5, 46.05, 14.0, 90.0),
        ImpactDefect(48.0, 48.5, 48.2, 8.0, 45.0),
        HighAccDefect(50.5, 51.05, 50.55, 9.0),
        HighAccDefect(52.0, 52.55, 52.05, 7.5),
        HighAccDefect(53.5, 54.05, 53.55, 11.0),
        HighAccDefect(55.0, 55.6, 55.05, 8.5),
        HighAccDefect(56.5, 57.05, 56.55, 10.0),
        HighAccDefect(58.0, 58.5, 58.05, 8.0),
        HighAccDefect(59.5, 60.1, 59.55, 12.0),
    ),
)

VALIDATION_SPEC = ScenarioSpec(
    duration=31.0,
    sample_rate=10000.0,
    seed=2002,
    defects=(
        OscillationDefect(1.5, 3.5, 22.0, 32.0, 0.6),
        OscillationDefect(6.0, 8.0, 65.0, 95.0, 0.55),
        OscillationDefect(10.5, 12.5, 160.0, 240.0, 0.5),
        OscillationDefect(15.0, 17.0, 910.0, 990.0, 0.6),
        ImpactDefect(19.0, 19.4, 19.05, 11.0, 70.0),
        ImpactDefect(21.0, 21.5, 21.1, 9.0, 55.0),
        ImpactDefect(23.0, 23.4, 23.05, 13.0, 85.0),
        HighAccDefect(25.0, 25.55, 25.05, 10.5),
        HighAccDefect(26.5, 27.1, 26.55, 8.0),
        HighAccDefect(28.0, 28.5, 28.05, 7.0),
        HighAccDefect(29.5, 30.05, 29.55, 11.5),
    ),
)


def build_dataset(spec: ScenarioSpec, role: DatasetRole) -> Dataset:
    trace, annotations = generate(spec)
    blocks = tuple(
        block_from_interval(trace, t0, t1, label) for t0, t1, label in annotations
    )
    return Dataset(blocks=blocks, role=role, sample_rate=spec.sample_rate)


def benchmark_datasets() -> tuple[Dataset, Dataset]:
    return (
        build_dataset(TRAINING_SPEC, DatasetRole.TRAINING),
        build_dataset(VALIDATION_SPEC, DatasetRole.VALIDATION),
    )
