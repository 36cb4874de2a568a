"""Training loop, evaluation accounting, CV laws, and exact statistics."""

from fractions import Fraction

import numpy as np
import pytest

from fingermi.dataio import SynthSpec, synth_dataset
from fingermi.harness import (CvReport, TrainConfig, check_reported_means,
                              evaluate, make_cv_trainer, run_cv,
                              summarize_table, train, wilcoxon_signed_rank,
                              write_confusion_csv, write_folds_csv,
                              write_report_json)
from fingermi.losses import LossSpec
from fingermi.models import (ModelConfig, apply_max_norm, fingernet_spec,
                             init_params)
from fingermi.reference import QUOTED_MEAN, SUBJECT_ACCURACY
from fingermi.signal import EpochedDataset, zscore_epochs

# miniature geometry so training-loop tests run in seconds; dropout off
# because 30 trials and 2 filters leave no redundancy to spare
SMALL_CFG = ModelConfig(f1=2, depth_multiplier=2, f2=4, temporal_kernel=9,
                        separable_kernel=5, pool1=2, pool2=2,
                        deep_filters=(4, 4, 4), deep_kernel=3, deep_pool=2,
                        dropout=0.0, n_channels=4, n_samples=64)
SMALL_SYNTH = SynthSpec(
    n_trials_per_class=6, n_channels=4, fs=16.0, duration=4.0, snr=6.0,
    class_channel_map=((0, 1), (1, 2), (2, 3), (0, 3), (1, 3)),
    class_latency=(0.0, 0.8, 1.6, 2.4, 3.0), burst_hz=4.0, seed=0)


def _small_dataset(seed=0, snr=3.0):
    spec = SynthSpec(**{**SMALL_SYNTH.__dict__, "seed": seed, "snr": snr})
    return zscore_epochs(synth_dataset(spec))


class TestTrain:
    def test_loss_decreases_on_learnable_fixture(self):
        ds = _small_dataset()
        net = init_params(fingernet_spec(SMALL_CFG), 0)
        cfg = TrainConfig(epochs=25, batch_size=8, lr=1e-2, seed=0)
        history = train(net, ds, cfg)
        assert history[-1] < history[0]
        assert min(history[10:]) < history[0] * 0.8

    def test_same_seed_identical_history(self):
        ds = _small_dataset()
        histories = []
        for _ in range(2):
            net = init_params(fingernet_spec(SMALL_CFG), 1)
            cfg = TrainConfig(epochs=3, batch_size=8, lr=1e-3, seed=7)
            histories.append(train(net, ds, cfg))
        assert histories[0] == histories[1]

    def test_tiny_lr_keeps_parameters(self):
        # with a vanishing lr the only movement allowed is the one-time
        # max-norm projection of out-of-cap init rows, so pre-project
        ds = _small_dataset()
        net = init_params(fingernet_spec(SMALL_CFG), 2)
        apply_max_norm(net)
        before = {n: p.data.copy() for n, p in net.params.items()}
        history = train(net, ds, TrainConfig(epochs=2, batch_size=10,
                                             lr=1e-300, seed=0,
                                             shuffle=False))
        for n, p in net.params.items():
            assert np.allclose(p.data, before[n], atol=1e-12)
        assert history[0] == pytest.approx(history[1], rel=1e-12)

    def test_empty_dataset_raises(self):
        ds = EpochedDataset(16.0, tuple("abcd"), np.zeros((0, 4, 64)),
                            np.zeros(0, dtype=int))
        net = init_params(fingernet_spec(SMALL_CFG), 0)
        with pytest.raises(ValueError, match="empty"):
            train(net, ds, TrainConfig(epochs=1))


class TestEvaluate:
    def test_perfect_predictor_diagonal(self):
        ds = _small_dataset()
        net = init_params(fingernet_spec(SMALL_CFG), 0)
        train(net, ds, TrainConfig(epochs=30, batch_size=8, lr=1e-2, seed=0))
        result = evaluate(net, ds)  # training set: should be memorized
        assert result.accuracy >= 0.9
        if result.accuracy == 1.0:
            assert np.array_equal(result.confusion,
                                  np.diag(np.bincount(ds.labels)))

    def test_confusion_row_sums_match_labels(self):
        ds = _small_dataset(seed=3, snr=0.0)
        net = init_params(fingernet_spec(SMALL_CFG), 1)
        result = evaluate(net, ds)
        assert np.array_equal(result.confusion.sum(axis=1),
                              np.bincount(ds.labels, minlength=5))
        assert result.histogram.total == ds.n_trials

    def test_accuracy_equals_trace_over_total(self):
        ds = _small_dataset(seed=4, snr=0.0)
        net = init_params(fingernet_spec(SMALL_CFG), 2)
        result = evaluate(net, ds)
        assert result.accuracy == np.trace(result.confusion) / ds.n_trials

    def test_empty_dataset_raises(self):
        ds = EpochedDataset(16.0, tuple("abcd"), np.zeros((0, 4, 64)),
                            np.zeros(0, dtype=int))
        net = init_params(fingernet_spec(SMALL_CFG), 0)
        with pytest.raises(ValueError, match="empty"):
            evaluate(net, ds)


class TestRunCv:
    def test_pooled_confusion_counts_every_trial_once(self):
        ds = _small_dataset(seed=5)
        cfg = TrainConfig(epochs=2, batch_size=8, lr=1e-3, seed=0)
        report = run_cv(ds, fingernet_spec(SMALL_CFG), cfg)
        assert report.confusion.sum() == ds.n_trials
        assert np.array_equal(report.confusion.sum(axis=1),
                              np.bincount(ds.labels, minlength=5))

    def test_mean_is_mean_of_folds(self):
        ds = _small_dataset(seed=6)
        cfg = TrainConfig(epochs=2, batch_size=8, lr=1e-3, seed=1)
        report = run_cv(ds, fingernet_spec(SMALL_CFG), cfg)
        assert report.mean_accuracy == pytest.approx(
            np.mean(report.fold_accuracies), abs=1e-15)

    def test_deterministic_reports(self):
        ds = _small_dataset(seed=7)
        cfg = TrainConfig(epochs=2, batch_size=8, lr=1e-3, seed=2)
        a = run_cv(ds, fingernet_spec(SMALL_CFG), cfg)
        b = run_cv(ds, fingernet_spec(SMALL_CFG), cfg)
        assert a.to_json() == b.to_json()

    def test_trainer_adapter_returns_triplet(self):
        ds = _small_dataset(seed=8)
        cfg = TrainConfig(epochs=1, batch_size=8, lr=1e-3, seed=0)
        trainer = make_cv_trainer(ds, fingernet_spec(SMALL_CFG), cfg)
        acc, confusion, hist = trainer(np.ones(5), 0)
        assert 0.0 <= acc <= 1.0
        assert confusion.shape == (5, 5)
        assert hist.total == ds.n_trials


class TestWilcoxon:
    def test_reference_columns_give_1_over_512(self):
        w, p = wilcoxon_signed_rank(SUBJECT_ACCURACY["fingernet"],
                                    SUBJECT_ACCURACY["eegnet"])
        assert w == 45.0
        assert p == Fraction(1, 512)
        assert float(p) <= 0.01

    def test_all_equal_raises(self):
        with pytest.raises(ValueError, match="zero"):
            wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0, 5.0],
                                 [1.0, 2.0, 3.0, 4.0, 5.0])

    def test_antisymmetry_with_point_mass(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a = rng.normal(size=5)
            b = rng.normal(size=5)
            if np.any(a == b):
                continue
            _, p_ab = wilcoxon_signed_rank(a, b)
            _, p_ba = wilcoxon_signed_rank(b, a)
            # brute-force point mass at the observed statistic
            diff = a - b
            ranks = np.argsort(np.argsort(np.abs(diff))) + 1.0
            w_obs = ranks[diff > 0].sum()
            mass = Fraction(
                sum(1 for m in range(1 << 5)
                    if sum(r for i, r in enumerate(ranks) if m >> i & 1) == w_obs),
                1 << 5)
            assert p_ab + p_ba == 1 + mass

    def test_p_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a, b = rng.normal(size=6), rng.normal(size=6)
            _, p = wilcoxon_signed_rank(a, b)
            assert 0 < p <= 1

    def test_ties_use_average_ranks(self):
        # |diffs| = [1, 1, 2]: ranks 1.5, 1.5, 3
        w, p = wilcoxon_signed_rank([2.0, 0.0, 5.0], [1.0, 1.0, 3.0])
        assert w == 1.5 + 3.0

    def test_matches_scipy_where_available(self):
        from scipy.stats import wilcoxon as scipy_wilcoxon
        rng = np.random.default_rng(2)
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        _, p = wilcoxon_signed_rank(a, b)
        ref = scipy_wilcoxon(a, b, alternative="greater",
                             method="exact").pvalue
        assert float(p) == pytest.approx(ref, abs=1e-12)

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1.0, 2.0], [1.0])


class TestSummaries:
    def test_reference_means(self):
        stats = summarize_table(SUBJECT_ACCURACY)
        assert stats["fingernet"][0] == pytest.approx(0.3049, abs=5e-4)
        assert stats["deepconvnet"][0] == pytest.approx(0.2533, abs=5e-4)
        assert stats["eegnet"][0] == pytest.approx(0.2462, abs=5e-4)

    def test_eegnet_quoted_mean_flagged(self):
        notes = check_reported_means(SUBJECT_ACCURACY, QUOTED_MEAN)
        assert len(notes) == 1
        assert "eegnet" in notes[0]
        assert "0.2462" in notes[0] and "0.2196" in notes[0]

    def test_population_std(self):
        stats = summarize_table({"x": [1.0, 2.0, 3.0]})
        assert stats["x"][1] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-12)


class TestReportSerialization:
    def _report(self):
        return CvReport("fingernet", [0.2, 0.4], 0.3, 0.1,
                        np.array([[1, 0], [1, 1]]), [1.0, 0.5], [2, 1],
                        {"seed": 0})

    def test_json_roundtrip(self):
        rep = self._report()
        back = CvReport.from_json(rep.to_json())
        assert back.to_json() == rep.to_json()
        assert np.array_equal(back.confusion, rep.confusion)

    def test_csv_writers(self, tmp_path):
        rep = self._report()
        write_report_json(rep, tmp_path / "r.json")
        write_confusion_csv(rep.confusion, tmp_path / "c.csv")
        write_folds_csv(rep, tmp_path / "f.csv")
        assert (tmp_path / "c.csv").read_text().splitlines()[1] == "0,1,0"
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "fold,accuracy"
        assert lines[-2].startswith("mean,")
