"""Command-line front door: synth, preprocess, train, cv, sweep, stats, report.

Every command is deterministic given identical inputs, config, and seed; no
command mutates its input files. Config files supply defaults and flags win.
Exit codes: 0 success, 1 runtime failure (one-line diagnostic on stderr),
2 usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfg_mod
from . import dataio, harness, losses, reference, signal as sig
from .losses import LossSpec
from .models import MODEL_BUILDERS, ModelConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fingermi",
        description="Five-class finger motor-imagery EEG decoding toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override (falls back to config, then "
                            f"${cfg_mod.ENV_SEED}, then 0)")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--preset", choices=("separable", "noise", "biased"),
                   default="separable")
    p.add_argument("--out", required=True)
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--trials-per-class", type=int, default=None)

    p = sub.add_parser("preprocess", help="notch, decimate, select, epoch a raw recording")
    common(p)
    p.add_argument("--in", dest="infile", required=True,
                   help=".npz with data [C,S], fs, channel_names, events [n,2]")
    p.add_argument("--out", required=True, help="output .eegf path")

    p = sub.add_parser("train", help="train one model on a dataset")
    common(p)
    p.add_argument("--model", choices=sorted(MODEL_BUILDERS), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="loss-history CSV path")

    p = sub.add_parser("cv", help="5-fold stratified cross-validation")
    common(p)
    p.add_argument("--model", choices=sorted(MODEL_BUILDERS), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv-dir", help="also write confusion/fold CSVs here")
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("sweep", help="bias-mitigation weight sweep")
    common(p)
    p.add_argument("--model", choices=sorted(MODEL_BUILDERS), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("stats", help="exact one-sided Wilcoxon signed-rank on two CSV columns")
    p.add_argument("--a", required=True, help="CSV of per-subject scores (tested greater)")
    p.add_argument("--b", required=True)

    p = sub.add_parser("report", help="render a CV report, or the reference table, to CSV")
    p.add_argument("--cv", help="CV report JSON to render")
    p.add_argument("--reference", action="store_true",
                   help="emit the bundled reference accuracy table and summary")
    p.add_argument("--outdir", required=True)
    return parser


def _load_cfg(args) -> dict[str, str]:
    return cfg_mod.load_config(args.config) if args.config else {}


def _train_config(cfg: dict[str, str], seed: int) -> harness.TrainConfig:
    kind = cfg.get("loss.kind", "ce")
    if kind == "ce":
        loss = LossSpec()
    else:
        weights = cfg_mod.get_floats(cfg, "loss.weights", (1.0,) * 5)
        loss = LossSpec(kind, weights)
    betas = cfg_mod.get_floats(cfg, "train.betas", (0.9, 0.999))
    return harness.TrainConfig(
        epochs=cfg_mod.get_int(cfg, "train.epochs", 100),
        batch_size=cfg_mod.get_int(cfg, "train.batch_size", 16),
        loss=loss,
        lr=cfg_mod.get_float(cfg, "train.lr", 1e-3),
        beta1=betas[0], beta2=betas[1],
        epsilon=cfg_mod.get_float(cfg, "train.epsilon", 1e-8),
        seed=seed,
        shuffle=cfg_mod.get_bool(cfg, "train.shuffle", True),
    )


def _load_dataset(path, cfg: dict[str, str]) -> sig.EpochedDataset:
    ds = dataio.read_eegf(path)
    if cfg_mod.get_bool(cfg, "preprocess.zscore", True):
        ds = sig.zscore_epochs(ds)
    return ds


def _cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg_mod.resolve_seed(args.seed, cfg)
    if args.preset == "biased":
        snr = args.snr if args.snr is not None else cfg_mod.get_float(cfg, "synth.snr", 1.5)
        ds = dataio.make_biased_fixture(seed, snr)
    else:
        base = dataio.SYNTH_PRESETS[args.preset]
        spec = dataio.SynthSpec(
            n_trials_per_class=(args.trials_per_class
                                if args.trials_per_class is not None
                                else cfg_mod.get_int(cfg, "synth.trials_per_class",
                                                     base.n_trials_per_class)),
            snr=(args.snr if args.snr is not None
                 else cfg_mod.get_float(cfg, "synth.snr", base.snr)),
            seed=seed,
        )
        ds = dataio.synth_dataset(spec)
    dataio.write_eegf(ds, args.out)
    print(f"wrote {args.out}: {ds.n_trials} epochs x {ds.epochs.shape[1]} channels "
          f"x {ds.epochs.shape[2]} samples at {ds.fs:g} Hz")
    return 0


def _cmd_preprocess(args) -> int:
    cfg = _load_cfg(args)
    raw = np.load(args.infile, allow_pickle=False)
    rec = sig.Recording(
        fs=float(raw["fs"]),
        channel_names=tuple(str(n) for n in raw["channel_names"]),
        data=raw["data"],
        events=tuple((int(s), int(l)) for s, l in raw["events"]),
    )
    rec = sig.notch_filter(rec,
                           cfg_mod.get_float(cfg, "preprocess.notch_hz", sig.NOTCH_HZ),
                           cfg_mod.get_float(cfg, "preprocess.notch_q", sig.NOTCH_Q))
    rec = sig.decimate(rec, cfg_mod.get_int(cfg, "preprocess.decimate",
                                            sig.DECIMATE_FACTOR))
    names = cfg.get("preprocess.channels")
    rec = sig.select_channels(
        rec, tuple(n.strip() for n in names.split(",")) if names else sig.DEFAULT_CHANNELS)
    window = cfg_mod.get_floats(cfg, "preprocess.window", sig.TASK_WINDOW)
    ds = sig.epoch(rec, (window[0], window[1]))
    if cfg_mod.get_bool(cfg, "preprocess.zscore", True):
        ds = sig.zscore_epochs(ds)
    dataio.write_eegf(ds, args.out)
    print(f"wrote {args.out}: {ds.n_trials} epochs x {ds.epochs.shape[1]} channels "
          f"x {ds.epochs.shape[2]} samples at {ds.fs:g} Hz")
    return 0


def _spec_from(args, cfg):
    return MODEL_BUILDERS[args.model](ModelConfig.from_mapping(cfg))


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg_mod.resolve_seed(args.seed, cfg)
    ds = _load_dataset(args.data, cfg)
    from .models import init_params
    net = init_params(_spec_from(args, cfg), seed)
    history = harness.train(net, ds, _train_config(cfg, seed))
    with open(args.out, "w") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v!r}\n")
    print(f"trained {args.model} for {len(history)} epochs; "
          f"final loss {history[-1]:.6f}; history -> {args.out}")
    return 0


def _cmd_cv(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg_mod.resolve_seed(args.seed, cfg)
    ds = _load_dataset(args.data, cfg)
    report = harness.run_cv(ds, _spec_from(args, cfg),
                            _train_config(cfg, seed), args.folds)
    harness.write_report_json(report, args.out)
    if args.csv_dir:
        os.makedirs(args.csv_dir, exist_ok=True)
        harness.write_confusion_csv(report.confusion,
                                    os.path.join(args.csv_dir, "confusion.csv"))
        harness.write_folds_csv(report, os.path.join(args.csv_dir, "folds.csv"))
    print(f"{args.model}: mean accuracy {report.mean_accuracy:.4f} "
          f"(folds {', '.join(f'{a:.4f}' for a in report.fold_accuracies)}) -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg_mod.resolve_seed(args.seed, cfg)
    ds = _load_dataset(args.data, cfg)
    trainer = harness.make_cv_trainer(ds, _spec_from(args, cfg),
                                      _train_config(cfg, seed), args.folds)
    rounds = losses.weight_sweep(trainer, args.rounds, seed)
    losses.write_sweep_csv(rounds, args.out)
    for r in rounds:
        print(f"round {r.round_index}: w={np.round(r.weights, 2).tolist()} "
              f"acc={r.mean_accuracy:.4f} hist={r.histogram.counts.tolist()}")
    print(f"sweep -> {args.out}")
    return 0


def _read_column(path) -> list[float]:
    vals = []
    with open(path) as fh:
        for line in fh:
            token = line.strip().split(",")[0]
            if not token:
                continue
            try:
                vals.append(float(token))
            except ValueError:
                continue  # header line
    if not vals:
        raise ValueError(f"{path}: no numeric values found")
    return vals


def _cmd_stats(args) -> int:
    a = _read_column(args.a)
    b = _read_column(args.b)
    w, p = harness.wilcoxon_signed_rank(a, b)
    print(f"W={w:g} one-sided exact p={float(p):.6g} ({p})")
    return 0


def _cmd_report(args) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    did = False
    if args.cv:
        with open(args.cv) as fh:
            report = harness.CvReport.from_json(fh.read())
        harness.write_confusion_csv(report.confusion,
                                    os.path.join(args.outdir, "confusion.csv"))
        harness.write_folds_csv(report, os.path.join(args.outdir, "folds.csv"))
        print(f"rendered {args.cv} -> {args.outdir}/confusion.csv, folds.csv")
        did = True
    if args.reference:
        stats = harness.summarize_table(reference.SUBJECT_ACCURACY)
        notes = harness.check_reported_means(reference.SUBJECT_ACCURACY,
                                             reference.QUOTED_MEAN)
        for name, vals in reference.SUBJECT_ACCURACY.items():
            with open(os.path.join(args.outdir, f"{name}.csv"), "w") as fh:
                fh.write("accuracy\n")
                for v in vals:
                    fh.write(f"{v}\n")
        with open(os.path.join(args.outdir, "reference_summary.csv"), "w") as fh:
            fh.write("model,computed_mean,computed_std,quoted_mean\n")
            for name, (mean, std) in stats.items():
                fh.write(f"{name},{mean:.4f},{std:.4f},"
                         f"{reference.QUOTED_MEAN[name]:.4f}\n")
            for note in notes:
                fh.write(f"# note: {note}\n")
        for note in notes:
            print(f"note: {note}")
        print(f"reference table -> {args.outdir}")
        did = True
    if not did:
        raise ValueError("report needs --cv and/or --reference")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "train": _cmd_train,
    "cv": _cmd_cv,
    "sweep": _cmd_sweep,
    "stats": _cmd_stats,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return _COMMANDS[args.verb](args)
    except Exception as e:  # one-line diagnostic, nonzero exit
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
