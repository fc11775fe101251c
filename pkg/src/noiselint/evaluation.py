"""Accuracy metrics and hyperparameter grid search.

False-negative and false-positive rates use the total frame count as the
denominator; the failure detection rate uses the failure-frame count.  Raw
confusion counts are always carried along so any other convention can be
recomputed from a report.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, FailureLabel
from .errors import ValidationError
from .preprocess import PreprocessConfig, featurize_dataset
from .svm import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Kernel,
    MultiClassSvm,
    class_regularization,
    multiclass_decision_values,
    smo_solve,
    squared_distances,
    train_multiclass,
)

LABELS = list(FailureLabel)


@dataclass(frozen=True)
class EvaluationReport:
    """Confusion counts (rows = true label, columns = predicted) and metrics."""

    confusion: np.ndarray = field(repr=False)
    converged: bool = True

    def __post_init__(self):
        confusion = np.asarray(self.confusion, dtype=int)
        object.__setattr__(self, "confusion", confusion)
        if confusion.shape != (len(LABELS), len(LABELS)):
            raise ValidationError(f"confusion matrix must be {len(LABELS)}x{len(LABELS)}")
        if np.any(confusion < 0):
            raise ValidationError("confusion counts must be non-negative")
        if confusion.sum() < 1:
            raise ValidationError("report covers no frames")

    @property
    def n_frames(self) -> int:
        return int(self.confusion.sum())

    def fn_count(self, label: FailureLabel) -> int:
        """Frames of this true label predicted as something else."""
        row = self.confusion[int(label)]
        return int(row.sum() - row[int(label)])

    def fp_count(self, label: FailureLabel) -> int:
        """Frames of other true labels predicted as this label."""
        col = self.confusion[:, int(label)]
        return int(col.sum() - col[int(label)])

    def per_class_fn(self, label: FailureLabel) -> float:
        return self.fn_count(label) / self.n_frames

    def per_class_fp(self, label: FailureLabel) -> float:
        return self.fp_count(label) / self.n_frames

    @property
    def subset_accuracy(self) -> float:
        return int(np.trace(self.confusion)) / self.n_frames

    @property
    def failure_detection_rate(self) -> float:
        """Fraction of true-failure frames predicted as any non-OK class.

        Defined as 1.0 when the set contains no failure frames.
        """
        ok = int(FailureLabel.OK)
        failure_rows = np.delete(np.arange(len(LABELS)), ok)
        total = int(self.confusion[failure_rows].sum())
        if total == 0:
            return 1.0
        detected = total - int(self.confusion[failure_rows, ok].sum())
        return detected / total

    def render_table(self) -> str:
        width = max(len(lab.display) for lab in LABELS) + 2
        lines = ["confusion (rows = true, columns = predicted):"]
        header = " " * width + "".join(f"{lab.display:>{width}}" for lab in LABELS)
        lines.append(header)
        for lab in LABELS:
            row = self.confusion[int(lab)]
            lines.append(f"{lab.display:>{width}}" + "".join(f"{v:>{width}}" for v in row))
        lines.append("")
        lines.append(" " * 24 + "".join(f"{lab.display:>{width}}" for lab in LABELS))
        lines.append(
            f"{'false negative rate':>24}"
            + "".join(f"{self.per_class_fn(lab):>{width}.4f}" for lab in LABELS)
        )
        lines.append(
            f"{'false positive rate':>24}"
            + "".join(f"{self.per_class_fp(lab):>{width}.4f}" for lab in LABELS)
        )
        lines.append("")
        lines.append(f"failure detection rate  {self.failure_detection_rate:.4f}")
        lines.append(f"subset accuracy         {self.subset_accuracy:.4f}")
        lines.append(f"frames                  {self.n_frames}")
        if not self.converged:
            lines.append("warning: at least one machine did not converge")
        return "\n".join(lines)

    @staticmethod
    def tsv_header() -> str:
        cols = ["metric"] + [lab.token for lab in LABELS]
        return "\t".join(cols)

    def to_tsv(self) -> str:
        lines = [self.tsv_header()]
        for kind, fn in (("fn_count", self.fn_count), ("fp_count", self.fp_count)):
            lines.append("\t".join([kind] + [str(fn(lab)) for lab in LABELS]))
        for kind, fn in (("fn_rate", self.per_class_fn), ("fp_rate", self.per_class_fp)):
            lines.append("\t".join([kind] + [f"{fn(lab):.17g}" for lab in LABELS]))
        for lab in LABELS:
            lines.append(
                "\t".join(
                    [f"confusion_{lab.token}"]
                    + [str(v) for v in self.confusion[int(lab)]]
                )
            )
        lines.append(f"failure_detection_rate\t{self.failure_detection_rate:.17g}")
        lines.append(f"subset_accuracy\t{self.subset_accuracy:.17g}")
        lines.append(f"n_frames\t{self.n_frames}")
        lines.append(f"converged\t{'true' if self.converged else 'false'}")
        return "\n".join(lines) + "\n"


def report_from_predictions(true_labels, predicted_labels, converged: bool = True) -> EvaluationReport:
    confusion = np.zeros((len(LABELS), len(LABELS)), dtype=int)
    for t, p in zip(true_labels, predicted_labels):
        confusion[int(t), int(p)] += 1
    return EvaluationReport(confusion=confusion, converged=converged)


def evaluate(model: MultiClassSvm, validation: Dataset) -> EvaluationReport:
    """Featurize a validation set with the model's bound config and score it."""
    features, labels = featurize_dataset(validation, model.preprocess)
    if len(features) == 0:
        raise ValidationError("validation set produced no frames")
    values = multiclass_decision_values(model, features)
    order = model.labels
    predicted = [order[i] for i in np.argmax(values, axis=1)]
    return report_from_predictions(labels, predicted, converged=model.converged)


# ---------------------------------------------------------------------------
# Grid search


@dataclass(frozen=True)
class HyperGrid:
    """Cartesian parameter grid; gammas are ignored for the linear kernel."""

    kernel_kind: str
    fft_strides: tuple[int, ...]
    c_hats: tuple[float, ...]
    gammas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kernel_kind not in ("linear", "rbf"):
            raise ValidationError(f"unknown kernel {self.kernel_kind!r}")
        if not self.fft_strides or not self.c_hats:
            raise ValidationError("grid lists must be non-empty")
        if self.kernel_kind == "rbf" and not self.gammas:
            raise ValidationError("rbf grid needs at least one gamma")

    def combinations(self) -> list[tuple[int, float, float | None]]:
        gammas = self.gammas if self.kernel_kind == "rbf" else (None,)
        return list(itertools.product(self.fft_strides, self.c_hats, gammas))


def default_grid(kernel_kind: str) -> HyperGrid:
    return HyperGrid(
        kernel_kind=kernel_kind,
        fft_strides=(201, 401, 601, 834, 1200),
        c_hats=tuple(np.logspace(-2, 2, 9)),
        gammas=tuple(np.logspace(-5, -1, 9)) if kernel_kind == "rbf" else (),
    )


@dataclass(frozen=True)
class GridRow:
    fft_stride: int
    c_hat: float
    gamma: float | None
    report: EvaluationReport

    TSV_COLUMNS = (
        "fft_stride",
        "c_hat",
        "gamma",
        "subset_accuracy",
        "failure_detection_rate",
        *(f"fn_rate_{lab.token}" for lab in LABELS),
        *(f"fp_rate_{lab.token}" for lab in LABELS),
        "n_frames",
        "converged",
        # Raw confusion counts (true x predicted) make rows self-contained.
        *(
            f"confusion_{t.token}_{p.token}"
            for t in LABELS
            for p in LABELS
        ),
    )

    def to_tsv(self) -> str:
        cells = [
            str(self.fft_stride),
            f"{self.c_hat:.17g}",
            "-" if self.gamma is None else f"{self.gamma:.17g}",
            f"{self.report.subset_accuracy:.17g}",
            f"{self.report.failure_detection_rate:.17g}",
            *(f"{self.report.per_class_fn(lab):.17g}" for lab in LABELS),
            *(f"{self.report.per_class_fp(lab):.17g}" for lab in LABELS),
            str(self.report.n_frames),
            "true" if self.report.converged else "false",
            *(str(v) for v in self.report.confusion.ravel()),
        ]
        return "\t".join(cells)


@dataclass(frozen=True)
class GridSearchResult:
    best: GridRow
    rows: tuple[GridRow, ...]

    def to_tsv(self) -> str:
        lines = ["\t".join(GridRow.TSV_COLUMNS)]
        lines.extend(row.to_tsv() for row in self.rows)
        return "\n".join(lines) + "\n"


def select_best(rows) -> GridRow:
    """Maximal subset accuracy; ties broken by detection rate, then lower
    fft stride, then grid enumeration order."""
    best = None
    for row in rows:
        if best is None:
            best = row
            continue
        key = (row.report.subset_accuracy, row.report.failure_detection_rate, -row.fft_stride)
        best_key = (
            best.report.subset_accuracy,
            best.report.failure_detection_rate,
            -best.fft_stride,
        )
        if key > best_key:
            best = row
    if best is None:
        raise ValidationError("no grid rows to select from")
    return best


class _StrideFeatures:
    """Features and kernel precomputations for one fft stride."""

    def __init__(self, train: Dataset, val: Dataset, cfg: PreprocessConfig, kernel_kind: str):
        self.x_train, self.y_train = featurize_dataset(train, cfg)
        self.x_val, self.y_val = featurize_dataset(val, cfg)
        if kernel_kind == "rbf":
            self.train_sqdist = squared_distances(self.x_train, self.x_train)
            self.val_sqdist = squared_distances(self.x_val, self.x_train)
        else:
            self.train_gram = self.x_train @ self.x_train.T
            self.val_gram = self.x_val @ self.x_train.T

    def grams(self, kernel: Kernel) -> tuple[np.ndarray, np.ndarray]:
        if kernel.kind == "rbf":
            return (
                np.exp(-kernel.gamma * self.train_sqdist),
                np.exp(-kernel.gamma * self.val_sqdist),
            )
        return self.train_gram, self.val_gram


def _evaluate_combination(
    feats: _StrideFeatures,
    kernel: Kernel,
    c_hat: float,
    tol: float,
    max_iter: int,
) -> EvaluationReport:
    """Train one-vs-rest on precomputed kernel matrices and score validation."""
    k_train, k_val = feats.grams(kernel)
    labels = feats.y_train
    present = [lab for lab in FailureLabel if np.any(labels == lab)]
    if len(present) < 2:
        raise ValidationError("training data contains a single class")
    values = np.empty((len(feats.y_val), len(present)))
    converged = True
    for col, lab in enumerate(present):
        y = np.where(labels == lab, 1.0, -1.0)
        c_cls = class_regularization(len(labels), int((labels == lab).sum()), c_hat)
        result = smo_solve(lambda i: k_train[i], y, c_cls, tol, max_iter)
        converged = converged and result.converged
        dual = y * result.alpha
        values[:, col] = k_val @ dual + result.bias
    predicted = [present[i] for i in np.argmax(values, axis=1)]
    return report_from_predictions(feats.y_val, predicted, converged=converged)


def _read_journal(path) -> dict[tuple, GridRow]:
    """Parse previously completed grid rows keyed by their parameter triple."""
    done: dict[tuple, GridRow] = {}
    if not path or not os.path.exists(path):
        return done
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split("\t") != list(GridRow.TSV_COLUMNS):
        return done
    n = len(LABELS)
    for line in lines[1:]:
        cells = line.split("\t")
        if len(cells) != len(GridRow.TSV_COLUMNS):
            continue
        stride = int(cells[0])
        c_hat = float(cells[1])
        gamma = None if cells[2] == "-" else float(cells[2])
        converged = cells[6 + 2 * n] == "true"
        confusion = np.array([int(v) for v in cells[7 + 2 * n :]]).reshape(n, n)
        report = EvaluationReport(confusion=confusion, converged=converged)
        done[(stride, c_hat, gamma)] = GridRow(stride, c_hat, gamma, report)
    return done


def grid_search(
    train: Dataset,
    val: Dataset,
    grid: HyperGrid,
    base_cfg: PreprocessConfig | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    journal_path=None,
    resume: bool = False,
    progress=None,
    jobs: int = 1,
) -> GridSearchResult:
    """Train and evaluate every grid combination; return all rows + the best.

    With ``journal_path`` every finished row is appended immediately; with
    ``resume`` rows already present in the journal are reused instead of
    retrained.  Non-converged trainings are recorded and flagged, never
    dropped.  With ``jobs`` > 1 combinations run on a thread pool; results
    and journal rows keep grid-enumeration order regardless of job count.
    """
    base_cfg = base_cfg or PreprocessConfig()
    combos = grid.combinations()
    done = _read_journal(journal_path) if resume else {}

    feature_cache: dict[int, _StrideFeatures] = {}
    for stride, c_hat, gamma in combos:
        if (stride, c_hat, gamma) not in done and stride not in feature_cache:
            cfg = replace(base_cfg, fft_stride=stride)
            feature_cache[stride] = _StrideFeatures(train, val, cfg, grid.kernel_kind)

    def run_combo(combo):
        stride, c_hat, gamma = combo
        if combo in done:
            return done[combo], True
        kernel = Kernel(kind=grid.kernel_kind, gamma=gamma)
        report = _evaluate_combination(feature_cache[stride], kernel, c_hat, tol, max_iter)
        return GridRow(stride, c_hat, gamma, report), False

    journal = None
    if journal_path:
        mode = "a" if resume and os.path.exists(journal_path) else "w"
        journal = open(journal_path, mode, encoding="utf-8")
        if mode == "w":
            journal.write("\t".join(GridRow.TSV_COLUMNS) + "\n")
            journal.flush()

    rows: list[GridRow] = []
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        ordered = pool.map(run_combo, combos) if pool else map(run_combo, combos)
        for idx, (row, reused) in enumerate(ordered):
            rows.append(row)
            if journal and not reused:
                journal.write(row.to_tsv() + "\n")
                journal.flush()
            if progress:
                progress(idx + 1, len(combos), row, reused)
    finally:
        if pool:
            pool.shutdown()
        if journal:
            journal.close()

    return GridSearchResult(best=select_best(rows), rows=tuple(rows))


def train_from_datasets(
    train: Dataset,
    cfg: PreprocessConfig,
    kernel: Kernel,
    c_hat: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    jobs: int = 1,
) -> MultiClassSvm:
    """Featurize a training set and fit the one-vs-rest classifier."""
    features, labels = featurize_dataset(train, cfg)
    return train_multiclass(features, labels, kernel, c_hat, cfg, tol, max_iter,
                            jobs=jobs)
