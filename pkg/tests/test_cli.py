"""CLI behaviour: determinism of artifacts, exit codes, file handling."""

import os

import numpy as np
import pytest

from fingermi.cli import main
from fingermi.dataio import read_eegf
from fingermi.reference import SUBJECT_ACCURACY
from fingermi.signal import DEFAULT_CHANNELS

FAST_CFG = """
# tiny geometry so CLI runs finish in seconds
model.f1 = 2
model.depth_multiplier = 2
model.f2 = 4
model.temporal_kernel = 9
model.separable_kernel = 5
model.pool1 = 2
model.pool2 = 2
model.deep_filters = 4,4,4
model.deep_kernel = 3
model.deep_pool = 2
model.n_channels = 24
model.n_samples = 1000
train.epochs = 2
train.batch_size = 32
train.lr = 0.001
"""


@pytest.fixture
def fast_cfg(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(FAST_CFG)
    return str(path)


@pytest.fixture
def small_data(tmp_path):
    out = str(tmp_path / "d.eegf")
    assert main(["synth", "--preset", "noise", "--out", out, "--seed", "3"]) == 0
    return out


class TestSynth:
    def test_separable_preset_writes_125_epochs(self, tmp_path):
        out = str(tmp_path / "sep.eegf")
        assert main(["synth", "--preset", "separable", "--out", out]) == 0
        ds = read_eegf(out)
        assert ds.n_trials == 125
        assert ds.epochs.shape == (125, 24, 1000)
        assert np.bincount(ds.labels).tolist() == [25] * 5

    def test_deterministic_bytes(self, tmp_path):
        a, b = str(tmp_path / "a.eegf"), str(tmp_path / "b.eegf")
        main(["synth", "--preset", "biased", "--out", a, "--seed", "5"])
        main(["synth", "--preset", "biased", "--out", b, "--seed", "5"])
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        a, b = str(tmp_path / "a.eegf"), str(tmp_path / "b.eegf")
        monkeypatch.setenv("FINGERMI_SEED", "11")
        main(["synth", "--preset", "noise", "--out", a])
        monkeypatch.delenv("FINGERMI_SEED")
        main(["synth", "--preset", "noise", "--out", b, "--seed", "11"])
        assert open(a, "rb").read() == open(b, "rb").read()


class TestPreprocess:
    def test_chain_produces_epochs(self, tmp_path):
        rng = np.random.default_rng(0)
        fs = 1000.0
        n = int(40 * fs)
        names = np.array(list(DEFAULT_CHANNELS) + ["EOG"])
        data = rng.normal(size=(25, n))
        events = np.array([[int((2 + 4.5 * i) * fs), i % 5] for i in range(8)])
        raw = tmp_path / "raw.npz"
        np.savez(raw, data=data, fs=fs, channel_names=names, events=events)
        out = str(tmp_path / "pre.eegf")
        assert main(["preprocess", "--in", str(raw), "--out", out]) == 0
        ds = read_eegf(out)
        assert ds.epochs.shape == (8, 24, 1000)
        assert ds.fs == 250.0


class TestCv:
    def test_byte_identical_reports(self, tmp_path, fast_cfg, small_data):
        outs = []
        for name in ("r1.json", "r2.json"):
            out = str(tmp_path / name)
            code = main(["cv", "--model", "fingernet", "--data", small_data,
                         "--config", fast_cfg, "--seed", "7", "--out", out])
            assert code == 0
            outs.append(open(out, "rb").read())
        assert outs[0] == outs[1]

    def test_csv_dir_artifacts(self, tmp_path, fast_cfg, small_data):
        out = str(tmp_path / "r.json")
        csvdir = str(tmp_path / "csv")
        assert main(["cv", "--model", "eegnet", "--data", small_data,
                     "--config", fast_cfg, "--seed", "1", "--out", out,
                     "--csv-dir", csvdir]) == 0
        assert os.path.exists(os.path.join(csvdir, "confusion.csv"))
        assert os.path.exists(os.path.join(csvdir, "folds.csv"))

    def test_input_file_not_mutated(self, tmp_path, fast_cfg, small_data):
        before = open(small_data, "rb").read()
        main(["cv", "--model", "fingernet", "--data", small_data,
              "--config", fast_cfg, "--seed", "0",
              "--out", str(tmp_path / "r.json")])
        assert open(small_data, "rb").read() == before


class TestTrain:
    def test_history_csv(self, tmp_path, fast_cfg, small_data):
        out = str(tmp_path / "h.csv")
        assert main(["train", "--model", "fingernet", "--data", small_data,
                     "--config", fast_cfg, "--seed", "0", "--out", out]) == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "epoch,loss"
        assert len(lines) == 3  # header + 2 epochs


class TestSweep:
    def test_sweep_csv_shape(self, tmp_path, fast_cfg, small_data):
        out = str(tmp_path / "s.csv")
        assert main(["sweep", "--model", "fingernet", "--data", small_data,
                     "--config", fast_cfg, "--seed", "0", "--rounds", "2",
                     "--out", out]) == 0
        lines = open(out).read().splitlines()
        assert lines[0].split(",")[:7] == ["round", "w1", "w2", "w3", "w4",
                                           "w5", "mean_accuracy"]
        assert len(lines) == 3


class TestStats:
    def test_reference_columns(self, tmp_path, capsys):
        a = tmp_path / "fingernet.csv"
        b = tmp_path / "eegnet.csv"
        a.write_text("accuracy\n" + "\n".join(str(v) for v in SUBJECT_ACCURACY["fingernet"]))
        b.write_text("accuracy\n" + "\n".join(str(v) for v in SUBJECT_ACCURACY["eegnet"]))
        assert main(["stats", "--a", str(a), "--b", str(b)]) == 0
        out = capsys.readouterr().out
        assert "0.00195" in out
        assert "1/512" in out

    def test_missing_file_exits_1(self, tmp_path, capsys):
        assert main(["stats", "--a", str(tmp_path / "no.csv"),
                     "--b", str(tmp_path / "no2.csv")]) == 1
        assert "error:" in capsys.readouterr().err


class TestReport:
    def test_reference_summary_flags_inconsistency(self, tmp_path, capsys):
        outdir = str(tmp_path / "ref")
        assert main(["report", "--reference", "--outdir", outdir]) == 0
        summary = open(os.path.join(outdir, "reference_summary.csv")).read()
        assert "eegnet,0.2462" in summary
        assert "0.2196" in summary
        assert "note" in summary
        assert os.path.exists(os.path.join(outdir, "fingernet.csv"))

    def test_render_cv_report(self, tmp_path, fast_cfg, small_data):
        rep = str(tmp_path / "r.json")
        main(["cv", "--model", "fingernet", "--data", small_data,
              "--config", fast_cfg, "--seed", "0", "--out", rep])
        outdir = str(tmp_path / "rendered")
        assert main(["report", "--cv", rep, "--outdir", outdir]) == 0
        assert os.path.exists(os.path.join(outdir, "confusion.csv"))


class TestExitCodes:
    def test_unknown_verb_is_2(self):
        assert main(["frobnicate"]) == 2

    def test_unknown_flag_is_2(self):
        assert main(["synth", "--nope"]) == 2

    def test_runtime_failure_is_1(self, tmp_path, capsys):
        assert main(["cv", "--model", "fingernet",
                     "--data", str(tmp_path / "missing.eegf"),
                     "--out", str(tmp_path / "r.json")]) == 1
        assert "error:" in capsys.readouterr().err
