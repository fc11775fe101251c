import numpy as np
import pytest

from noiselint import (
    DatasetRole,
    FailureLabel,
    HyperGrid,
    PreprocessConfig,
    ValidationError,
    default_grid,
    evaluate,
    grid_search,
    train_from_datasets,
)
from noiselint.dataset import Dataset, block_from_interval
from noiselint.evaluation import (
    LABELS,
    EvaluationReport,
    GridRow,
    report_from_predictions,
    select_best,
)
from noiselint.svm import Kernel


def random_confusion(rng):
    return rng.integers(0, 40, size=(4, 4))


class TestEvaluationReport:
    def test_perfect_predictions(self):
        labels = [0, 1, 2, 3, 0, 0, 3]
        report = report_from_predictions(labels, labels)
        assert report.subset_accuracy == 1.0
        assert report.failure_detection_rate == 1.0
        for lab in LABELS:
            assert report.per_class_fn(lab) == 0.0
            assert report.per_class_fp(lab) == 0.0

    def test_counting_example(self):
        # 10 frames, 4 true failures, one failure predicted OK, rest correct.
        true = [0] * 6 + [1, 1, 2, 3]
        pred = [0] * 6 + [1, 0, 2, 3]
        report = report_from_predictions(true, pred)
        assert report.subset_accuracy == pytest.approx(0.9)
        assert report.failure_detection_rate == pytest.approx(3 / 4)
        assert report.fn_count(FailureLabel.IMPACT) == 1
        assert report.fp_count(FailureLabel.OK) == 1

    def test_metric_algebra_integer_identity(self):
        rng = np.random.default_rng(60)
        for _ in range(200):
            confusion = random_confusion(rng)
            if confusion.sum() == 0:
                continue
            report = EvaluationReport(confusion=confusion)
            total_fn = sum(report.fn_count(lab) for lab in LABELS)
            assert int(np.trace(confusion)) == report.n_frames - total_fn
            # fn rates times the frame count recover exact integers
            for lab in LABELS:
                assert report.per_class_fn(lab) * report.n_frames == pytest.approx(
                    report.fn_count(lab), abs=1e-9
                )

    def test_row_and_column_sums(self):
        rng = np.random.default_rng(61)
        confusion = random_confusion(rng)
        report = EvaluationReport(confusion=confusion)
        np.testing.assert_array_equal(report.confusion.sum(axis=1), confusion.sum(axis=1))
        assert report.confusion.sum() == report.n_frames

    def test_detection_rate_without_failures(self):
        confusion = np.zeros((4, 4), dtype=int)
        confusion[0, 0] = 5
        assert EvaluationReport(confusion=confusion).failure_detection_rate == 1.0

    def test_fractions_within_unit_interval(self):
        rng = np.random.default_rng(62)
        for _ in range(50):
            confusion = random_confusion(rng)
            if confusion.sum() == 0:
                continue
            report = EvaluationReport(confusion=confusion)
            values = [report.subset_accuracy, report.failure_detection_rate]
            values += [report.per_class_fn(lab) for lab in LABELS]
            values += [report.per_class_fp(lab) for lab in LABELS]
            assert all(0.0 <= v <= 1.0 for v in values)

    def test_empty_report_rejected(self):
        with pytest.raises(ValidationError):
            EvaluationReport(confusion=np.zeros((4, 4), dtype=int))


def tiny_corpus(seed, duration=16.0):
    """Small synthetic four-class corpus for search tests."""
    from noiselint.synth import (
        HighAccDefect,
        ImpactDefect,
        OscillationDefect,
        ScenarioSpec,
        generate,
    )

    spec = ScenarioSpec(
        duration=duration,
        sample_rate=10000.0,
        defects=(
            OscillationDefect(2.0, 4.0, 60.0, 100.0, 0.6),
            ImpactDefect(6.0, 6.5, 6.1, 10.0, 60.0),
            HighAccDefect(9.0, 9.6, 9.05, 5.0),
            OscillationDefect(11.0, 12.5, 200.0, 250.0, 0.5),
        ),
        seed=seed,
    )
    trace, annotations = generate(spec)
    blocks = tuple(
        block_from_interval(trace, t0, t1, label) for t0, t1, label in annotations
    )
    return trace, blocks


def dataset_pair():
    _, train_blocks = tiny_corpus(seed=100)
    _, val_blocks = tiny_corpus(seed=200)
    train = Dataset(blocks=train_blocks, role=DatasetRole.TRAINING, sample_rate=10000.0)
    val = Dataset(blocks=val_blocks, role=DatasetRole.VALIDATION, sample_rate=10000.0)
    return train, val


class TestEvaluate:
    def test_end_to_end_reasonable(self):
        train, val = dataset_pair()
        cfg = PreprocessConfig(fft_stride=834)
        model = train_from_datasets(train, cfg, Kernel("rbf", gamma=5.7e-4), 1.1)
        report = evaluate(model, val)
        assert report.n_frames > 50
        assert report.subset_accuracy > 0.6


class TestGridSearch:
    def test_single_combination(self):
        train, val = dataset_pair()
        grid = HyperGrid(kernel_kind="rbf", fft_strides=(834,), c_hats=(1.1,),
                         gammas=(5.7e-4,))
        result = grid_search(train, val, grid)
        assert len(result.rows) == 1
        assert result.best is result.rows[0]
        assert result.best.fft_stride == 834

    def test_row_count_is_cartesian_product(self):
        train, val = dataset_pair()
        grid = HyperGrid(kernel_kind="rbf", fft_strides=(601, 834), c_hats=(0.5, 1.1),
                         gammas=(1e-4, 5.7e-4))
        result = grid_search(train, val, grid)
        assert len(result.rows) == 8

    def test_determinism(self):
        train, val = dataset_pair()
        grid = HyperGrid(kernel_kind="rbf", fft_strides=(834,), c_hats=(0.5, 1.1),
                         gammas=(5.7e-4,))
        first = grid_search(train, val, grid)
        second = grid_search(train, val, grid)
        assert first.to_tsv() == second.to_tsv()
        assert (first.best.fft_stride, first.best.c_hat, first.best.gamma) == (
            second.best.fft_stride,
            second.best.c_hat,
            second.best.gamma,
        )

    def test_default_grid_shapes(self):
        rbf = default_grid("rbf")
        assert len(rbf.combinations()) == 5 * 9 * 9
        linear = default_grid("linear")
        assert len(linear.combinations()) == 5 * 9
        assert all(g is None for _, _, g in linear.combinations())

    def test_journal_resume_skips_completed(self, tmp_path):
        train, val = dataset_pair()
        grid = HyperGrid(kernel_kind="rbf", fft_strides=(834,), c_hats=(0.5, 1.1),
                         gammas=(5.7e-4,))
        journal = tmp_path / "results.tsv"

        full = grid_search(train, val, grid, journal_path=journal)
        lines = journal.read_text().splitlines()
        assert len(lines) == 3  # header + 2 rows

        # Replace the first row's metrics with a sentinel confusion matrix and
        # rerun with resume: the sentinel must survive, proving the combo was
        # not retrained.
        sentinel = EvaluationReport(confusion=np.eye(4, dtype=int) * 9)
        doctored = GridRow(834, 0.5, 5.7e-4, sentinel)
        journal.write_text("\n".join([lines[0], doctored.to_tsv(), lines[2]]) + "\n")
        resumed = grid_search(train, val, grid, journal_path=journal, resume=True)
        row = next(r for r in resumed.rows if r.c_hat == 0.5)
        assert row.report.n_frames == 36
        np.testing.assert_array_equal(row.report.confusion, sentinel.confusion)
        other = next(r for r in resumed.rows if r.c_hat == 1.1)
        assert other.to_tsv() == full.rows[1].to_tsv()

    def test_job_count_does_not_change_output(self):
        train, val = dataset_pair()
        grid = HyperGrid(kernel_kind="rbf", fft_strides=(601, 834), c_hats=(0.5, 1.1),
                         gammas=(5.7e-4,))
        sequential = grid_search(train, val, grid, jobs=1)
        parallel = grid_search(train, val, grid, jobs=4)
        assert sequential.to_tsv() == parallel.to_tsv()

    def test_non_converged_rows_kept_and_flagged(self):
        train, val = dataset_pair()
        grid = HyperGrid(kernel_kind="rbf", fft_strides=(834,), c_hats=(1.1,),
                         gammas=(5.7e-4,))
        result = grid_search(train, val, grid, max_iter=3)
        assert len(result.rows) == 1
        assert not result.rows[0].report.converged
        assert "false" in result.rows[0].to_tsv()

    def test_tie_breaking(self):
        def row(stride, c_hat, subset_correct, detected):
            confusion = np.zeros((4, 4), dtype=int)
            confusion[0, 0] = subset_correct
            confusion[1, 1] = detected
            confusion[1, 0] = 10 - detected  # undetected failures
            return GridRow(stride, c_hat, None, EvaluationReport(confusion=confusion))

        # Same subset accuracy, higher detection wins.
        a = row(401, 1.0, 40, 8)
        b = row(401, 2.0, 44, 4)  # same accuracy: (40+8)/58 vs (44+4)/58
        assert select_best([a, b]) is a
        assert select_best([b, a]) is a
        # Equal metrics entirely: lower stride wins.
        c = row(201, 1.0, 40, 8)
        assert select_best([a, c]) is c
        # Still tied: first in enumeration order wins.
        d = row(201, 3.0, 40, 8)
        assert select_best([c, d]) is c
