"""Command-line interface.

Subcommands: estimate, train, validate, tune, predict, synth, inspect.
Exit codes: 0 success, 1 internal failure, 2 input validation failure.
Options may come from a ``key = value`` config file via ``--config``;
explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import __version__
from .dataset import (
    DatasetRole,
    load_dataset,
    read_noise_file,
    write_annotations,
    write_noise_file,
)
from .errors import ValidationError
from .evaluation import HyperGrid, default_grid, evaluate, grid_search, train_from_datasets
from .noise import ColumnSpec, estimate_noise, read_trajectory
from .preprocess import (
    PreprocessConfig,
    compress_spectrum,
    frame_features,
    frame_trace,
    spectrogram,
    time_dct,
)
from .svm import Kernel, load_model, multiclass_decision_values, save_model
from .synth import generate, parse_scenario_config

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2


def _add_preprocess_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("preprocessing")
    defaults = PreprocessConfig()
    group.add_argument("--frame-size", type=int, default=defaults.frame_size,
                       help="frame length in samples (default %(default)s)")
    group.add_argument("--frame-stride", type=int, default=defaults.frame_stride,
                       help="frame hop in samples (default %(default)s)")
    group.add_argument("--fft-size", type=int, default=defaults.fft_size,
                       help="FFT length in samples (default %(default)s)")
    group.add_argument("--fft-stride", type=int, default=defaults.fft_stride,
                       help="FFT hop within a frame (default %(default)s)")
    group.add_argument("--compression-factor", type=int, default=defaults.compression_factor,
                       help="adjacent frequency bins averaged per output bin "
                            "(default %(default)s)")
    group.add_argument("--log-epsilon", type=float, default=defaults.log_epsilon,
                       help="offset added before the log (default %(default)s)")


def _preprocess_from_args(args) -> PreprocessConfig:
    return PreprocessConfig(
        frame_size=args.frame_size,
        frame_stride=args.frame_stride,
        fft_size=args.fft_size,
        fft_stride=args.fft_stride,
        compression_factor=args.compression_factor,
        log_epsilon=args.log_epsilon,
    )


def _add_kernel_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("classifier")
    group.add_argument("--kernel", choices=("linear", "rbf"), default="rbf")
    group.add_argument("--gamma", type=float, default=5.7e-4,
                       help="RBF kernel width (default %(default)s)")
    group.add_argument("--c-hat", type=float, default=1.1,
                       help="global regularization before class weighting "
                            "(default %(default)s)")
    group.add_argument("--tol", type=float, default=1e-3,
                       help="SMO stopping tolerance (default %(default)s)")
    group.add_argument("--jobs", type=int, default=1,
                       help="parallel workers (default %(default)s); results "
                            "are identical for any job count")


def _kernel_from_args(args) -> Kernel:
    if args.kernel == "rbf":
        return Kernel(kind="rbf", gamma=args.gamma)
    return Kernel(kind="linear")


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ValidationError(f"bad numeric list {text!r}") from None


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ValidationError(f"bad integer list {text!r}") from None


def cmd_estimate(args) -> int:
    columns = ColumnSpec.parse(args.actual, args.desired or "")
    traj = read_trajectory(args.input, columns)
    trace = estimate_noise(traj)
    write_noise_file(trace, args.out)
    print(
        f"wrote {len(trace)} samples at {trace.sample_rate:g} Hz "
        f"({traj.qdot.shape[1]} actual + {traj.qdot_desired.shape[1]} desired columns)"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _preprocess_from_args(args)
    kernel = _kernel_from_args(args)
    train_ds = load_dataset(args.noise, args.annotations, DatasetRole.TRAINING)
    model = train_from_datasets(train_ds, cfg, kernel, args.c_hat, tol=args.tol,
                                jobs=args.jobs)
    save_model(model, args.out)
    print(f"trained {len(model.machines)} one-vs-rest machines "
          f"({model.n_features}-dimensional input)")
    for lab in model.labels:
        machine = model.machines[lab]
        state = "converged" if machine.converged else (
            f"NOT converged (KKT violation {machine.kkt_violation:.3g})")
        print(f"  {lab.display:>13}: C={machine.c:.6g}, "
              f"{len(machine.dual_coefs)} support vectors, {state}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    model = load_model(args.model)
    val_ds = load_dataset(args.noise, args.annotations, DatasetRole.VALIDATION)
    report = evaluate(model, val_ds)
    if args.format == "tsv":
        print(report.to_tsv(), end="")
    else:
        print(report.render_table())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_tsv())
        if args.figures:
            from .plots import confusion_figure

            figure_path = _figure_path(args.report, "confusion")
            confusion_figure(report, figure_path)
            print(f"report written to {args.report}, figure to {figure_path}",
                  file=sys.stderr)
    return EXIT_OK


def cmd_tune(args) -> int:
    base_cfg = _preprocess_from_args(args)
    if args.kernel == "rbf":
        grid_defaults = default_grid("rbf")
        gammas = _parse_float_list(args.gammas) if args.gammas else grid_defaults.gammas
    else:
        gammas = ()
    strides = (
        _parse_int_list(args.fft_strides)
        if args.fft_strides
        else default_grid(args.kernel).fft_strides
    )
    c_hats = (
        _parse_float_list(args.c_hats) if args.c_hats else default_grid(args.kernel).c_hats
    )
    grid = HyperGrid(kernel_kind=args.kernel, fft_strides=strides, c_hats=c_hats,
                     gammas=gammas)

    train_ds = load_dataset(args.train_noise, args.train_annotations, DatasetRole.TRAINING)
    val_ds = load_dataset(args.val_noise, args.val_annotations, DatasetRole.VALIDATION)

    progress = None
    if args.verbose:
        def progress(done, total, row, reused):
            note = " (journal)" if reused else ""
            print(
                f"[{done}/{total}] stride={row.fft_stride} c={row.c_hat:.4g} "
                f"gamma={'-' if row.gamma is None else format(row.gamma, '.4g')} "
                f"subset={row.report.subset_accuracy:.4f}{note}",
                file=sys.stderr,
            )

    result = grid_search(
        train_ds,
        val_ds,
        grid,
        base_cfg=base_cfg,
        tol=args.tol,
        journal_path=args.results,
        resume=args.resume,
        progress=progress,
        jobs=args.jobs,
    )

    best = result.best
    if args.format == "tsv":
        print(result.to_tsv(), end="")
    else:
        gamma_txt = "-" if best.gamma is None else f"{best.gamma:.6g}"
        print(f"best combination of {len(result.rows)}:")
        print(f"  fft stride      {best.fft_stride}")
        print(f"  regularization  {best.c_hat:.6g}")
        print(f"  gamma           {gamma_txt}")
        print(f"  subset accuracy {best.report.subset_accuracy:.4f}")
        print(f"  detection rate  {best.report.failure_detection_rate:.4f}")
    if args.results and args.figures:
        from .plots import sensitivity_figure

        figure_path = _figure_path(args.results, "sensitivity")
        sensitivity_figure(result, figure_path)
        print(f"results written to {args.results}, figure to {figure_path}",
              file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    trace = read_noise_file(args.noise)
    cfg = model.preprocess
    frames = frame_trace(trace.samples, cfg)
    features = np.vstack([frame_features(samples, cfg) for _, samples in frames])
    values = multiclass_decision_values(model, features)
    order = model.labels
    lines = ["\t".join(
        ["t_start", "t_end", "label"] + [f"decision_{lab.token}" for lab in order]
    )]
    for (offset, _), row in zip(frames, values):
        label = order[int(np.argmax(row))]
        t0 = offset / trace.sample_rate
        t1 = (offset + cfg.frame_size) / trace.sample_rate
        lines.append(
            "\t".join([f"{t0:.6g}", f"{t1:.6g}", label.token]
                      + [f"{v:.17g}" for v in row])
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"{len(frames)} frames written to {args.out}", file=sys.stderr)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = parse_scenario_config(args.config, seed_override=args.seed)
    trace, annotations = generate(spec)
    write_noise_file(trace, args.out_noise)
    write_annotations(annotations, args.out_annotations)
    print(
        f"generated {trace.duration:g} s at {trace.sample_rate:g} Hz "
        f"({len(annotations)} blocks) with seed {spec.seed}"
    )
    return EXIT_OK


def cmd_inspect(args) -> int:
    trace = read_noise_file(args.noise)
    cfg = _preprocess_from_args(args)
    frames = frame_trace(trace.samples, cfg)
    if args.frame_index < 0 or args.frame_index >= len(frames):
        raise ValidationError(
            f"frame index {args.frame_index} out of range (trace has {len(frames)} frames)"
        )
    offset, samples = frames[args.frame_index]
    spec = spectrogram(samples, cfg)
    compressed = compress_spectrum(spec, cfg)
    coeffs = time_dct(compressed)

    os.makedirs(args.out_dir, exist_ok=True)
    out = lambda name: os.path.join(args.out_dir, name)
    np.savetxt(out("frame.tsv"), samples, fmt="%.17g", delimiter="\t")
    np.savetxt(out("spectrogram.tsv"), spec, fmt="%.17g", delimiter="\t")
    np.savetxt(out("compressed.tsv"), compressed, fmt="%.17g", delimiter="\t")
    np.savetxt(out("dct.tsv"), coeffs, fmt="%.17g", delimiter="\t")
    if args.figures:
        from .plots import pipeline_figure

        pipeline_figure(samples, spec, compressed, coeffs, cfg, trace.sample_rate,
                        out("pipeline.png"))
    print(f"frame {args.frame_index} (offset {offset}) dumped to {args.out_dir}")
    return EXIT_OK


def _figure_path(tsv_path: str, suffix: str) -> str:
    root = tsv_path[: -len(".tsv")] if tsv_path.endswith(".tsv") else tsv_path
    return f"{root}.{suffix}.png"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noiselint",
        description="Detect soft failures in robot simulation runs from an "
                    "estimated acoustic-noise signal.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file providing flag defaults")
        p.add_argument("--verbose", "-v", action="store_true")

    p = sub.add_parser("estimate", help="compute a noise trace from a trajectory log")
    common(p)
    p.add_argument("--input", required=True, help="TSV trajectory log")
    p.add_argument("--actual", required=True,
                   help="comma-separated actual-velocity columns (names, indices, a-b ranges)")
    p.add_argument("--desired", default="",
                   help="comma-separated desired-velocity columns (may be empty)")
    p.add_argument("--out", required=True, help="output noise trace file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="train a classifier on annotated noise")
    common(p)
    p.add_argument("--noise", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True, help="output model file")
    _add_preprocess_flags(p)
    _add_kernel_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("validate", help="score a model against annotated noise")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--report", help="write the report as TSV to this path")
    p.add_argument("--format", choices=("table", "tsv"), default="table")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip rendering figures next to --report")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tune", help="grid-search preprocessing and SVM hyperparameters")
    common(p)
    p.add_argument("--train-noise", required=True)
    p.add_argument("--train-annotations", required=True)
    p.add_argument("--val-noise", required=True)
    p.add_argument("--val-annotations", required=True)
    p.add_argument("--fft-strides", help="comma-separated list (default grid otherwise)")
    p.add_argument("--c-hats", help="comma-separated list (default grid otherwise)")
    p.add_argument("--gammas", help="comma-separated list, RBF only")
    p.add_argument("--results", help="TSV journal; finished rows are appended")
    p.add_argument("--resume", action="store_true",
                   help="reuse rows already present in --results")
    p.add_argument("--format", choices=("table", "tsv"), default="table")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    _add_preprocess_flags(p)
    _add_kernel_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("predict", help="label every frame of an unannotated trace")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--out", help="write per-frame labels to this TSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    common(p)
    p.add_argument("--scenario", dest="config", required=True,
                   help="scenario config file (key = value lines)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out-noise", required=True)
    p.add_argument("--out-annotations", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="dump intermediate tensors for one frame")
    common(p)
    p.add_argument("--noise", required=True)
    p.add_argument("--frame-index", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # Config files feed subparser defaults, so resolve the subcommand first.
        if "--config" in argv or any(a.startswith("--config=") for a in argv):
            probe = argparse.ArgumentParser(add_help=False)
            probe.add_argument("command", nargs="?")
            probe.add_argument("--config")
            known, _ = probe.parse_known_args(argv)
            if known.config and known.command:
                subparser = _find_subparser(parser, known.command)
                if subparser is not None:
                    _apply_config(known.config, subparser)
        args = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            if not args.verbose:
                warnings.showwarning = lambda msg, *a, **k: print(
                    f"warning: {msg}", file=sys.stderr
                )
            return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc.filename or exc}: file not found", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _find_subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(command)
    return None


def _apply_config(path, subparser) -> None:
    defaults = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = text.partition("=")
            defaults[key.strip().replace("-", "_")] = value.strip()
    known = {a.dest for a in subparser._actions}
    unknown = set(defaults) - known
    if unknown:
        raise ValidationError(f"{path}: unknown option(s): {', '.join(sorted(unknown))}")
    # Coerce values using each action's declared type.
    for action in subparser._actions:
        if action.dest in defaults and action.type is not None:
            defaults[action.dest] = action.type(defaults[action.dest])
        elif action.dest in defaults and isinstance(action.const, bool):
            defaults[action.dest] = defaults[action.dest].lower() in ("1", "true", "yes")
    subparser.set_defaults(**defaults)


if __name__ == "__main__":
    sys.exit(main())
