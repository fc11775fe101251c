import numpy as np
import pytest

from noiselint import read_noise_file
from noiselint.cli import main

SCENARIO = """\
duration = 14
sample_rate = 10000
seed = 31
oscillation = 2.0 4.0 60 100 0.6
impact = 6.0 6.5 6.05 10.0 60.0
high_acc = 9.0 9.6 9.05 5.0
"""

SCENARIO_VAL = """\
duration = 10
sample_rate = 10000
seed = 77
oscillation = 1.5 3.0 70 110 0.6
impact = 5.0 5.5 5.1 10.0 60.0
high_acc = 7.0 7.6 7.05 5.0
"""


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    (root / "train.cfg").write_text(SCENARIO, encoding="utf-8")
    (root / "val.cfg").write_text(SCENARIO_VAL, encoding="utf-8")
    assert main([
        "synth", "--scenario", str(root / "train.cfg"),
        "--out-noise", str(root / "train_noise.txt"),
        "--out-annotations", str(root / "train_ann.txt"),
    ]) == 0
    assert main([
        "synth", "--scenario", str(root / "val.cfg"),
        "--out-noise", str(root / "val_noise.txt"),
        "--out-annotations", str(root / "val_ann.txt"),
    ]) == 0
    return root


@pytest.fixture(scope="module")
def model_path(corpus):
    path = corpus / "model.txt"
    code = main([
        "train",
        "--noise", str(corpus / "train_noise.txt"),
        "--annotations", str(corpus / "train_ann.txt"),
        "--out", str(path),
    ])
    assert code == 0
    return path


class TestEstimate:
    def write_log(self, tmp_path, rows=40, cols=6):
        rng = np.random.default_rng(1)
        header = "t\t" + "\t".join(f"qd{i}" for i in range(cols))
        lines = [header]
        for r in range(rows):
            cells = [f"{r * 1e-4:.6f}"] + [f"{v:.6f}" for v in rng.normal(size=cols)]
            lines.append("\t".join(cells))
        path = tmp_path / "traj.tsv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_writes_trace(self, tmp_path, capsys):
        log = self.write_log(tmp_path)
        out = tmp_path / "trace.txt"
        code = main(["estimate", "--input", str(log),
                     "--actual", "qd0,qd1,qd2,qd3", "--desired", "qd4,qd5",
                     "--out", str(out)])
        assert code == 0
        trace = read_noise_file(out)
        assert trace.sample_rate == pytest.approx(10000.0)
        assert len(trace) == 40

    def test_missing_column_exit_2(self, tmp_path, capsys):
        log = self.write_log(tmp_path)
        code = main(["estimate", "--input", str(log), "--actual", "qd9",
                     "--out", str(tmp_path / "x.txt")])
        assert code == 2
        assert "qd9" in capsys.readouterr().err

    def test_reduced_column_subset(self, tmp_path):
        log = self.write_log(tmp_path, cols=8)
        out = tmp_path / "reduced.txt"
        code = main(["estimate", "--input", str(log), "--actual", "qd0,qd3",
                     "--out", str(out)])
        assert code == 0
        full_out = tmp_path / "full.txt"
        main(["estimate", "--input", str(log), "--actual", "1-8", "--out", str(full_out)])
        reduced = read_noise_file(out)
        full = read_noise_file(full_out)
        assert np.all(reduced.samples <= full.samples + 1e-12)

    def test_nonexistent_file_exit_2(self, tmp_path, capsys):
        code = main(["estimate", "--input", str(tmp_path / "nope.tsv"),
                     "--actual", "a", "--out", str(tmp_path / "x.txt")])
        assert code == 2


class TestTrain:
    def test_single_class_exit_2(self, corpus, tmp_path, capsys):
        ann = tmp_path / "only_ok.txt"
        ann.write_text("0.0 2.0 ok\n2.0 4.0 ok\n", encoding="utf-8")
        code = main(["train", "--noise", str(corpus / "train_noise.txt"),
                     "--annotations", str(ann), "--out", str(tmp_path / "m.txt")])
        assert code == 2
        assert "single class" in capsys.readouterr().err

    def test_model_reported(self, model_path, capsys):
        assert model_path.exists()
        text = model_path.read_text(encoding="utf-8")
        assert text.startswith("noiselint-model 1\n")

    def test_rerun_byte_identical(self, corpus, tmp_path):
        first = tmp_path / "a.txt"
        second = tmp_path / "b.txt"
        argv = ["train", "--noise", str(corpus / "train_noise.txt"),
                "--annotations", str(corpus / "train_ann.txt")]
        assert main(argv + ["--out", str(first)]) == 0
        assert main(argv + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_jobs_flag_gives_identical_model(self, corpus, tmp_path):
        argv = ["train", "--noise", str(corpus / "train_noise.txt"),
                "--annotations", str(corpus / "train_ann.txt")]
        one = tmp_path / "one.txt"
        four = tmp_path / "four.txt"
        assert main(argv + ["--jobs", "1", "--out", str(one)]) == 0
        assert main(argv + ["--jobs", "4", "--out", str(four)]) == 0
        assert one.read_bytes() == four.read_bytes()

    def test_config_file_with_flag_override(self, corpus, tmp_path):
        cfg = tmp_path / "train.conf"
        cfg.write_text("fft-stride = 401\ngamma = 1e-3\n", encoding="utf-8")
        out = tmp_path / "m.txt"
        code = main(["train", "--config", str(cfg),
                     "--noise", str(corpus / "train_noise.txt"),
                     "--annotations", str(corpus / "train_ann.txt"),
                     "--gamma", "5.7e-4",  # flag wins over config
                     "--out", str(out)])
        assert code == 0
        from noiselint import load_model

        model = load_model(out)
        assert model.preprocess.fft_stride == 401  # from config file
        gamma = model.machines[next(iter(model.labels))].kernel.gamma
        assert gamma == 5.7e-4  # explicit flag wins over config

    def test_unknown_config_key_exit_2(self, corpus, tmp_path, capsys):
        cfg = tmp_path / "bad.conf"
        cfg.write_text("wibble = 3\n", encoding="utf-8")
        code = main(["train", "--config", str(cfg),
                     "--noise", str(corpus / "train_noise.txt"),
                     "--annotations", str(corpus / "train_ann.txt"),
                     "--out", str(tmp_path / "m.txt")])
        assert code == 2
        assert "wibble" in capsys.readouterr().err


class TestValidate:
    def test_table_output(self, corpus, model_path, capsys):
        code = main(["validate", "--model", str(model_path),
                     "--noise", str(corpus / "val_noise.txt"),
                     "--annotations", str(corpus / "val_ann.txt")])
        assert code == 0
        out = capsys.readouterr().out
        assert "subset accuracy" in out
        assert "failure detection rate" in out

    def test_tsv_report_and_figure(self, corpus, model_path, tmp_path, capsys):
        report = tmp_path / "report.tsv"
        code = main(["validate", "--model", str(model_path),
                     "--noise", str(corpus / "val_noise.txt"),
                     "--annotations", str(corpus / "val_ann.txt"),
                     "--format", "tsv", "--report", str(report)])
        assert code == 0
        assert report.exists()
        assert (tmp_path / "report.confusion.png").exists()
        out = capsys.readouterr().out
        assert out.startswith("metric\tok\timpact\thighacc\toscillations")

    def test_no_figures_flag(self, corpus, model_path, tmp_path):
        report = tmp_path / "plain.tsv"
        code = main(["validate", "--model", str(model_path),
                     "--noise", str(corpus / "val_noise.txt"),
                     "--annotations", str(corpus / "val_ann.txt"),
                     "--report", str(report), "--no-figures"])
        assert code == 0
        assert report.exists()
        assert not (tmp_path / "plain.confusion.png").exists()

    def test_empty_annotations_exit_2(self, corpus, model_path, tmp_path):
        ann = tmp_path / "empty.txt"
        ann.write_text("# nothing here\n", encoding="utf-8")
        code = main(["validate", "--model", str(model_path),
                     "--noise", str(corpus / "val_noise.txt"),
                     "--annotations", str(ann)])
        assert code == 2

    def test_feature_size_mismatch_exit_2(self, corpus, tmp_path, capsys):
        # Train with one geometry, rewrite the stored config with another:
        # validation must reject the inconsistent vector sizes.
        model = tmp_path / "m.txt"
        assert main(["train", "--noise", str(corpus / "train_noise.txt"),
                     "--annotations", str(corpus / "train_ann.txt"),
                     "--fft-stride", "834", "--out", str(model)]) == 0
        doctored = model.read_text(encoding="utf-8").replace(
            "fft_stride = 834", "fft_stride = 401")
        model.write_text(doctored, encoding="utf-8")
        code = main(["validate", "--model", str(model),
                     "--noise", str(corpus / "val_noise.txt"),
                     "--annotations", str(corpus / "val_ann.txt")])
        assert code == 2
        err = capsys.readouterr().err
        assert "684" in err and "1368" in err


class TestTune:
    def test_one_point_grid(self, corpus, capsys):
        code = main(["tune",
                     "--train-noise", str(corpus / "train_noise.txt"),
                     "--train-annotations", str(corpus / "train_ann.txt"),
                     "--val-noise", str(corpus / "val_noise.txt"),
                     "--val-annotations", str(corpus / "val_ann.txt"),
                     "--fft-strides", "834", "--c-hats", "1.1", "--gammas", "5.7e-4"])
        assert code == 0
        out = capsys.readouterr().out
        assert "best combination of 1" in out
        assert "fft stride      834" in out

    def test_grid_tsv_row_count_and_figure(self, corpus, tmp_path, capsys):
        results = tmp_path / "grid.tsv"
        code = main(["tune",
                     "--train-noise", str(corpus / "train_noise.txt"),
                     "--train-annotations", str(corpus / "train_ann.txt"),
                     "--val-noise", str(corpus / "val_noise.txt"),
                     "--val-annotations", str(corpus / "val_ann.txt"),
                     "--fft-strides", "601,834", "--c-hats", "0.5,1.1",
                     "--gammas", "5.7e-4", "--results", str(results),
                     "--format", "tsv"])
        assert code == 0
        lines = results.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 + 2 * 2 * 1
        assert (tmp_path / "grid.sensitivity.png").exists()
        stdout_lines = capsys.readouterr().out.splitlines()
        assert stdout_lines[0].startswith("fft_stride\tc_hat\tgamma")

    def test_resume_reuses_journal(self, corpus, tmp_path):
        results = tmp_path / "grid.tsv"
        argv = ["tune",
                "--train-noise", str(corpus / "train_noise.txt"),
                "--train-annotations", str(corpus / "train_ann.txt"),
                "--val-noise", str(corpus / "val_noise.txt"),
                "--val-annotations", str(corpus / "val_ann.txt"),
                "--fft-strides", "834", "--c-hats", "0.5,1.1", "--gammas", "5.7e-4",
                "--results", str(results), "--no-figures"]
        assert main(argv) == 0
        first = results.read_text(encoding="utf-8")
        # Drop the second row to simulate an interrupted run.
        lines = first.splitlines()
        results.write_text("\n".join(lines[:2]) + "\n", encoding="utf-8")
        assert main(argv + ["--resume"]) == 0
        assert results.read_text(encoding="utf-8") == first


class TestPredict:
    def test_labels_with_timestamps(self, corpus, model_path, tmp_path):
        out = tmp_path / "labels.tsv"
        code = main(["predict", "--model", str(model_path),
                     "--noise", str(corpus / "val_noise.txt"), "--out", str(out)])
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].split("\t")[:3] == ["t_start", "t_end", "label"]
        first = lines[1].split("\t")
        assert float(first[0]) == 0.0
        assert float(first[1]) == pytest.approx(0.4)
        # 10 s trace, 0.4 s frames, 0.1 s stride
        assert len(lines) - 1 == (100000 - 4000) // 1000 + 1

    def test_short_trace_single_padded_frame(self, model_path, tmp_path, capsys):
        trace = tmp_path / "short.txt"
        trace.write_text("rate=10000\n" + "1.0\n" * 1500, encoding="utf-8")
        code = main(["predict", "--model", str(model_path), "--noise", str(trace)])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2  # header + one frame

    def test_nonexistent_file_exit_2(self, model_path, tmp_path):
        code = main(["predict", "--model", str(model_path),
                     "--noise", str(tmp_path / "missing.txt")])
        assert code == 2


class TestSynthCli:
    def test_outputs_loadable(self, corpus):
        from noiselint import DatasetRole, load_dataset

        ds = load_dataset(corpus / "train_noise.txt", corpus / "train_ann.txt",
                          DatasetRole.TRAINING)
        assert len(ds.blocks) == 7
        assert ds.sample_rate == 10000.0

    def test_seed_flag_changes_output(self, corpus, tmp_path):
        args = ["synth", "--scenario", str(corpus / "train.cfg"),
                "--out-noise", str(tmp_path / "n.txt"),
                "--out-annotations", str(tmp_path / "a.txt")]
        assert main(args + ["--seed", "99"]) == 0
        seeded = read_noise_file(tmp_path / "n.txt")
        original = read_noise_file(corpus / "train_noise.txt")
        assert not np.array_equal(seeded.samples, original.samples)


class TestInspect:
    def test_dumps_tensors_and_figure(self, corpus, tmp_path):
        out_dir = tmp_path / "inspect"
        code = main(["inspect", "--noise", str(corpus / "val_noise.txt"),
                     "--frame-index", "3", "--out-dir", str(out_dir)])
        assert code == 0
        for name in ("frame.tsv", "spectrogram.tsv", "compressed.tsv", "dct.tsv",
                     "pipeline.png"):
            assert (out_dir / name).exists()
        frame = np.loadtxt(out_dir / "frame.tsv")
        assert frame.shape == (4000,)
        spec = np.loadtxt(out_dir / "spectrogram.tsv")
        assert spec.shape == (4, 513)

    def test_frame_index_out_of_range_exit_2(self, corpus, tmp_path, capsys):
        code = main(["inspect", "--noise", str(corpus / "val_noise.txt"),
                     "--frame-index", "100000", "--out-dir", str(tmp_path / "x")])
        assert code == 2
