"""Figure rendering for reports; files are written next to the TSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import LABELS, EvaluationReport, GridSearchResult
from .preprocess import PreprocessConfig


def pipeline_figure(
    frame: np.ndarray,
    spec: np.ndarray,
    compressed: np.ndarray,
    coeffs: np.ndarray,
    cfg: PreprocessConfig,
    sample_rate: float,
    path,
) -> None:
    """Four panels: framed time data, spectrogram, compressed bins, DCT."""
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    (ax_time, ax_spec), (ax_comp, ax_dct) = axes

    t = np.arange(len(frame)) / sample_rate
    ax_time.plot(t, frame, linewidth=0.6)
    ax_time.set_title("framed noise signal")
    ax_time.set_xlabel("time [s]")
    ax_time.set_ylabel("amplitude")

    extent = [0, spec.shape[0], 0, sample_rate / 2.0 / 1000.0]
    ax_spec.imshow(
        np.log(spec + cfg.log_epsilon).T,
        origin="lower",
        aspect="auto",
        extent=extent,
        cmap="viridis",
    )
    ax_spec.set_title("spectrogram (log-scaled for display)")
    ax_spec.set_xlabel("transform index")
    ax_spec.set_ylabel("frequency [kHz]")

    ax_comp.imshow(compressed.T, origin="lower", aspect="auto", cmap="viridis")
    ax_comp.set_title("compressed log spectrogram")
    ax_comp.set_xlabel("transform index")
    ax_comp.set_ylabel("frequency bin")

    ax_dct.imshow(coeffs.T, origin="lower", aspect="auto", cmap="viridis")
    ax_dct.set_title("temporal DCT coefficients")
    ax_dct.set_xlabel("coefficient index")
    ax_dct.set_ylabel("frequency bin")

    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def confusion_figure(report: EvaluationReport, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.8))
    ax.imshow(report.confusion, cmap="Blues")
    names = [lab.display for lab in LABELS]
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    peak = report.confusion.max() or 1
    for i in range(len(names)):
        for j in range(len(names)):
            v = report.confusion[i, j]
            ax.text(j, i, str(v), ha="center", va="center",
                    color="white" if v > peak / 2 else "black")
    ax.set_title(
        f"subset accuracy {report.subset_accuracy:.3f}, "
        f"detection {report.failure_detection_rate:.3f}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def sensitivity_figure(result: GridSearchResult, path) -> None:
    """Subset accuracy while varying one parameter, others held at the optimum."""
    best = result.best
    has_gamma = best.gamma is not None
    n_panels = 3 if has_gamma else 2
    fig, axes = plt.subplots(1, n_panels, figsize=(4 * n_panels, 3.4))
    axes = np.atleast_1d(axes)

    def curve(ax, xs, ys, xlabel, best_x, log=False):
        order = np.argsort(xs)
        ax.plot(np.asarray(xs)[order], np.asarray(ys)[order], "o-")
        ax.axvline(best_x, color="grey", linestyle=":", linewidth=1)
        if log:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("subset accuracy")
        ax.set_ylim(0.0, 1.05)

    rows = result.rows
    stride_rows = [r for r in rows if r.c_hat == best.c_hat and r.gamma == best.gamma]
    curve(
        axes[0],
        [r.fft_stride for r in stride_rows],
        [r.report.subset_accuracy for r in stride_rows],
        "fft stride [samples]",
        best.fft_stride,
    )
    c_rows = [r for r in rows if r.fft_stride == best.fft_stride and r.gamma == best.gamma]
    curve(
        axes[1],
        [r.c_hat for r in c_rows],
        [r.report.subset_accuracy for r in c_rows],
        "regularization",
        best.c_hat,
        log=True,
    )
    if has_gamma:
        g_rows = [
            r for r in rows if r.fft_stride == best.fft_stride and r.c_hat == best.c_hat
        ]
        curve(
            axes[2],
            [r.gamma for r in g_rows],
            [r.report.subset_accuracy for r in g_rows],
            "kernel gamma",
            best.gamma,
            log=True,
        )
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
