"""Soft-margin kernel SVM trained from scratch.

The binary classifier solves the standard C-SVC dual

    min 0.5 * a'Qa - sum(a)   s.t.  y'a = 0,  0 <= a_i <= C,
    Q_ij = y_i y_j K(x_i, x_j)

with two-variable SMO steps on the maximal-KKT-violating pair.  Multi-class
classification is one-vs-rest with the per-class regularization scaled
inversely to class frequency; prediction takes the argmax of the raw
decision values.
"""

from __future__ import annotations

import threading
import warnings
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import FailureLabel
from .errors import ValidationError
from .preprocess import PreprocessConfig

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10_000_000
# Multipliers below this are numerical noise and their vectors are dropped.
ALPHA_PRUNE = 1e-12
# One-vs-rest regularization: C_cls = CLASS_WEIGHT_FACTOR * (N / N_cls) * c_hat.
CLASS_WEIGHT_FACTOR = 0.25
DEFAULT_CACHE_BYTES = 256 * 2**20


@dataclass(frozen=True)
class Kernel:
    """Linear or RBF kernel; gamma is required (and positive) for RBF."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValidationError(f"unknown kernel {self.kind!r} (use 'linear' or 'rbf')")
        if self.kind == "rbf":
            if self.gamma is None or not self.gamma > 0:
                raise ValidationError(f"rbf kernel needs gamma > 0, got {self.gamma}")
        elif self.gamma is not None:
            raise ValidationError("linear kernel takes no gamma")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pairwise kernel matrix K[i, j] = K(a_i, b_j)."""
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        if self.kind == "linear":
            return a @ b.T
        return np.exp(-self.gamma * squared_distances(a, b))


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


class KernelRowCache:
    """Lazily computed kernel rows with LRU eviction.

    Small training sets fit entirely; the byte cap keeps memory bounded for
    larger corpora.
    """

    def __init__(self, x: np.ndarray, kernel: Kernel, max_bytes: int = DEFAULT_CACHE_BYTES):
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.kernel = kernel
        row_bytes = self.x.shape[0] * 8
        self.capacity = max(1, max_bytes // row_bytes)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()

    def __call__(self, i: int) -> np.ndarray:
        with self._lock:
            row = self._rows.get(i)
            if row is not None:
                self._rows.move_to_end(i)
                return row
        row = self.kernel.gram(self.x[i : i + 1], self.x)[0]
        with self._lock:
            self._rows[i] = row
            if len(self._rows) > self.capacity:
                self._rows.popitem(last=False)
        return row


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    iterations: int
    converged: bool
    kkt_violation: float


def smo_solve(
    kernel_row,
    y: np.ndarray,
    c: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SmoResult:
    """Maximal-violating-pair SMO on the C-SVC dual.

    ``kernel_row(i)`` must return row i of the raw kernel matrix.  Stops when
    the KKT violation m - M drops to ``tol``; with a fixed input order the
    solve is fully deterministic.
    """
    y = np.asarray(y, dtype=float)
    m = len(y)
    alpha = np.zeros(m)
    grad = -np.ones(m)  # gradient of the dual objective at alpha = 0
    pos = y > 0

    iterations = 0
    violation = np.inf
    while iterations < max_iter:
        crit = -y * grad
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        if not up.any() or not low.any():
            violation = -np.inf
            break
        i = int(np.argmax(np.where(up, crit, -np.inf)))
        j = int(np.argmin(np.where(low, crit, np.inf)))
        violation = crit[i] - crit[j]
        if violation <= tol:
            break

        row_i = kernel_row(i)
        row_j = kernel_row(j)
        quad = row_i[i] + row_j[j] - 2.0 * row_i[j]
        if quad <= 0:
            quad = 1e-12
        step = violation / quad
        step = min(step, c - alpha[i] if pos[i] else alpha[i])
        step = min(step, alpha[j] if pos[j] else c - alpha[j])

        alpha[i] = min(max(alpha[i] + y[i] * step, 0.0), c)
        alpha[j] = min(max(alpha[j] - y[j] * step, 0.0), c)
        grad += step * y * (row_i - row_j)
        iterations += 1

    converged = violation <= tol
    crit = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        bias = float(np.mean(crit[free]))
    else:
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        hi = np.max(np.where(up, crit, -np.inf)) if up.any() else -np.inf
        lo = np.min(np.where(low, crit, np.inf)) if low.any() else np.inf
        if np.isfinite(hi) and np.isfinite(lo):
            bias = float((hi + lo) / 2.0)
        elif np.isfinite(hi):
            bias = float(hi)
        elif np.isfinite(lo):
            bias = float(lo)
        else:
            bias = 0.0
    return SmoResult(
        alpha=alpha,
        bias=bias,
        iterations=iterations,
        converged=converged,
        kkt_violation=float(max(violation, 0.0)) if np.isfinite(violation) else 0.0,
    )


@dataclass(frozen=True)
class BinarySvm:
    """Dual solution of one binary problem; only support vectors are kept."""

    support_vectors: np.ndarray = field(repr=False)
    dual_coefs: np.ndarray = field(repr=False)  # y_i * alpha_i
    bias: float
    kernel: Kernel
    c: float
    converged: bool = True
    kkt_violation: float = 0.0

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


def train_binary(
    x: np.ndarray,
    y: np.ndarray,
    kernel: Kernel,
    c: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> BinarySvm:
    """Train a binary C-SVC on labels in {+1, -1}."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValidationError(f"{len(x)} vectors but {len(y)} labels")
    if len(x) < 2:
        raise ValidationError("training needs at least 2 examples")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValidationError("training needs at least one example of each sign")
    if not c > 0:
        raise ValidationError(f"C must be positive, got {c}")

    result = smo_solve(KernelRowCache(x, kernel, cache_bytes), y, c, tol, max_iter)
    if not result.converged:
        warnings.warn(
            f"SMO stopped after {result.iterations} iterations with KKT violation "
            f"{result.kkt_violation:.3g} (> tol {tol:g})",
            stacklevel=2,
        )
    keep = result.alpha > ALPHA_PRUNE
    return BinarySvm(
        support_vectors=x[keep].copy(),
        dual_coefs=(y * result.alpha)[keep],
        bias=result.bias,
        kernel=kernel,
        c=c,
        converged=result.converged,
        kkt_violation=result.kkt_violation,
    )


def decision_values(model: BinarySvm, x: np.ndarray) -> np.ndarray:
    """Pre-sign decision values sum_i dual_i * K(sv_i, x) + b for rows of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if len(model.support_vectors) == 0:
        return np.full(len(x), model.bias)
    if x.shape[1] != model.n_features:
        raise ValidationError(
            f"input has {x.shape[1]} features but the model expects {model.n_features}"
        )
    return model.kernel.gram(x, model.support_vectors) @ model.dual_coefs + model.bias


def decision_value(model: BinarySvm, x: np.ndarray) -> float:
    return float(decision_values(model, np.atleast_2d(x))[0])


@dataclass(frozen=True)
class MultiClassSvm:
    """One binary machine per training label plus the bound feature config."""

    machines: dict[FailureLabel, BinarySvm]
    preprocess: PreprocessConfig

    @property
    def labels(self) -> list[FailureLabel]:
        return sorted(self.machines, key=int)

    @property
    def n_features(self) -> int:
        return next(iter(self.machines.values())).n_features

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines.values())


def class_regularization(n_total: int, n_class: int, c_hat: float,
                         factor: float = CLASS_WEIGHT_FACTOR) -> float:
    """Per-class C, scaled inversely to the class's share of the frames."""
    return factor * (n_total / n_class) * c_hat


def train_multiclass(
    x: np.ndarray,
    labels: np.ndarray,
    kernel: Kernel,
    c_hat: float,
    preprocess: PreprocessConfig,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    class_weight_factor: float = CLASS_WEIGHT_FACTOR,
    jobs: int = 1,
) -> MultiClassSvm:
    """Train one-vs-rest machines for every label present in the data.

    The per-class problems are independent; with ``jobs`` > 1 they run on a
    thread pool sharing one kernel-row cache, and the result is identical to
    a sequential run.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.asarray(labels, dtype=int)
    present = [lab for lab in FailureLabel if np.any(labels == lab)]
    if len(present) < 2:
        raise ValidationError(
            "training data contains a single class; one-vs-rest needs at least two"
        )
    for lab in FailureLabel:
        if lab not in present:
            warnings.warn(f"class {lab.display} absent from training data; no machine trained",
                          stacklevel=2)

    cache = KernelRowCache(x, kernel)

    def fit_one(lab: FailureLabel) -> BinarySvm:
        y = np.where(labels == lab, 1.0, -1.0)
        c_cls = class_regularization(len(labels), int((labels == lab).sum()), c_hat,
                                     class_weight_factor)
        result = smo_solve(cache, y, c_cls, tol, max_iter)
        if not result.converged:
            warnings.warn(
                f"{lab.display}: SMO stopped at KKT violation {result.kkt_violation:.3g}",
                stacklevel=2,
            )
        keep = result.alpha > ALPHA_PRUNE
        return BinarySvm(
            support_vectors=x[keep].copy(),
            dual_coefs=(y * result.alpha)[keep],
            bias=result.bias,
            kernel=kernel,
            c=c_cls,
            converged=result.converged,
            kkt_violation=result.kkt_violation,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fitted = list(pool.map(fit_one, present))
    else:
        fitted = [fit_one(lab) for lab in present]
    machines = dict(zip(present, fitted))
    return MultiClassSvm(machines=machines, preprocess=preprocess)


def multiclass_decision_values(model: MultiClassSvm, x: np.ndarray) -> np.ndarray:
    """Decision-value matrix, one column per machine in label order."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.column_stack([decision_values(model.machines[lab], x) for lab in model.labels])


def predict_many(model: MultiClassSvm, x: np.ndarray) -> list[FailureLabel]:
    """Argmax over per-class decision values; ties go to the lowest label code."""
    values = multiclass_decision_values(model, x)
    order = model.labels
    return [order[i] for i in np.argmax(values, axis=1)]


def predict(model: MultiClassSvm, x: np.ndarray) -> FailureLabel:
    return predict_many(model, np.atleast_2d(x))[0]


# ---------------------------------------------------------------------------
# Model persistence: a versioned, self-describing text format.  Floats are
# written with 17 significant digits so load/save round-trips are lossless.

_FORMAT_TAG = "noiselint-model"
_FORMAT_VERSION = 1


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def save_model(model: MultiClassSvm, path) -> None:
    cfg = model.preprocess
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_FORMAT_TAG} {_FORMAT_VERSION}\n")
        fh.write("[preprocess]\n")
        fh.write(f"frame_size = {cfg.frame_size}\n")
        fh.write(f"frame_stride = {cfg.frame_stride}\n")
        fh.write(f"fft_size = {cfg.fft_size}\n")
        fh.write(f"fft_stride = {cfg.fft_stride}\n")
        fh.write(f"compression_factor = {cfg.compression_factor}\n")
        fh.write(f"log_epsilon = {_fmt(cfg.log_epsilon)}\n")
        for lab in model.labels:
            machine = model.machines[lab]
            fh.write(f"[class {lab.token}]\n")
            fh.write(f"kernel = {machine.kernel.kind}\n")
            if machine.kernel.gamma is not None:
                fh.write(f"gamma = {_fmt(machine.kernel.gamma)}\n")
            fh.write(f"C = {_fmt(machine.c)}\n")
            fh.write(f"bias = {_fmt(machine.bias)}\n")
            fh.write(f"converged = {'true' if machine.converged else 'false'}\n")
            fh.write(f"kkt_violation = {_fmt(machine.kkt_violation)}\n")
            fh.write(f"n_features = {machine.n_features}\n")
            fh.write(f"n_support = {len(machine.dual_coefs)}\n")
            for coef, vec in zip(machine.dual_coefs, machine.support_vectors):
                fh.write("\t".join([_fmt(coef)] + [_fmt(v) for v in vec]) + "\n")


def load_model(path) -> MultiClassSvm:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split() != [_FORMAT_TAG, str(_FORMAT_VERSION)]:
        raise ValidationError(
            f"{path}: not a {_FORMAT_TAG} v{_FORMAT_VERSION} file"
        )

    sections: list[tuple[str, dict, list[str]]] = []
    for line in lines[1:]:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            sections.append((stripped[1:-1], {}, []))
        elif not sections:
            raise ValidationError(f"{path}: content before first section: {stripped!r}")
        elif "=" in line and not line.startswith("\t") and "\t" not in line:
            key, _, value = line.partition("=")
            sections[-1][1][key.strip()] = value.strip()
        else:
            sections[-1][2].append(line)

    def _require(kv: dict, name: str, key: str) -> str:
        if key not in kv:
            raise ValidationError(f"{path}: section [{name}] is missing '{key}'")
        return kv[key]

    cfg = None
    machines: dict[FailureLabel, BinarySvm] = {}
    for name, kv, rows in sections:
        if name == "preprocess":
            cfg = PreprocessConfig(
                frame_size=int(_require(kv, name, "frame_size")),
                frame_stride=int(_require(kv, name, "frame_stride")),
                fft_size=int(_require(kv, name, "fft_size")),
                fft_stride=int(_require(kv, name, "fft_stride")),
                compression_factor=int(_require(kv, name, "compression_factor")),
                log_epsilon=float(_require(kv, name, "log_epsilon")),
            )
        elif name.startswith("class "):
            label = FailureLabel.parse(name[len("class ") :])
            kernel = Kernel(
                kind=_require(kv, name, "kernel"),
                gamma=float(kv["gamma"]) if "gamma" in kv else None,
            )
            n_features = int(_require(kv, name, "n_features"))
            n_support = int(_require(kv, name, "n_support"))
            if len(rows) != n_support:
                raise ValidationError(
                    f"{path}: [class {label.token}] declares {n_support} support vectors "
                    f"but has {len(rows)} rows"
                )
            coefs = np.empty(n_support)
            vectors = np.empty((n_support, n_features))
            for r, row in enumerate(rows):
                cells = row.split("\t")
                if len(cells) != n_features + 1:
                    raise ValidationError(
                        f"{path}: [class {label.token}] row {r} has {len(cells) - 1} "
                        f"features, expected {n_features}"
                    )
                coefs[r] = float(cells[0])
                vectors[r] = [float(c) for c in cells[1:]]
            machines[label] = BinarySvm(
                support_vectors=vectors,
                dual_coefs=coefs,
                bias=float(_require(kv, name, "bias")),
                kernel=kernel,
                c=float(_require(kv, name, "C")),
                converged=_require(kv, name, "converged") == "true",
                kkt_violation=float(kv.get("kkt_violation", "0")),
            )
        else:
            raise ValidationError(f"{path}: unknown section [{name}]")
    if cfg is None:
        raise ValidationError(f"{path}: missing [preprocess] section")
    if not machines:
        raise ValidationError(f"{path}: no class sections")
    return MultiClassSvm(machines=machines, preprocess=cfg)
