"""Command line interface.

Subcommands cover the full pipeline: generate a synthetic benchmark, train
each cascade stage, evaluate (fixed models or leave-one-test-out), run
inference on a single trial, and replay a trial through the rate-matching
logger. Exit codes: 0 ok, 2 config error, 3 I/O or format error,
4 training diverged.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import evaluation, forcenet, gbdt, trialio
from .config import RunConfig, apply_overrides, dump_config, load_config
from .core import ConfigError, TrainingDivergedError, TrialFormatError
from .features import build_detection_dataset, samples_to_arrays
from .forcenet import NetSpec
from .synth import make_benchmark_dataset


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="config file (section.key = value)")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    p.add_argument("--seed", type=int, help="override the config seed")


def _load_cfg(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        cfg = load_config(args.config, base=cfg)
    cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _net_spec(cfg: RunConfig) -> NetSpec:
    return NetSpec(
        n_nodes=cfg.grid.n_nodes,
        n_out=cfg.grid.n_segments,
        dropout=cfg.train.dropout,
    )


def _say(command: str, **kv) -> None:
    parts = " ".join(f"{k}={v}" for k, v in kv.items())
    print(f"{command}: {parts}")


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = cfg.synth.to_synth_config(cfg.grid)
    trials = make_benchmark_dataset(
        base,
        seed=cfg.seed,
        n_repeats=cfg.synth.n_repeats,
        n_no_contact=cfg.synth.n_no_contact,
        onset_jitter_s=cfg.synth.onset_jitter_s,
        gain_jitter=cfg.synth.gain_jitter,
    )
    counters: dict[str, int] = {}
    files = {}
    for trial in trials:
        rep = counters.get(trial.test_id, 0)
        counters[trial.test_id] = rep + 1
        name = f"{trial.test_id}_rep{rep}.csv"
        trialio.write_trial(trial, out / name)
        files[name] = trial.test_id
    (out / "manifest.json").write_text(
        json.dumps(
            {
                "format": "dataset-manifest-v1",
                "seed": cfg.seed,
                "n_trials": len(trials),
                "files": files,
            },
            indent=1,
            sort_keys=True,
        )
        + "\n"
    )
    (out / "config.txt").write_text(dump_config(cfg))
    _say("synth", n_trials=len(trials), out=out)
    return 0


def cmd_train_detect(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    trials = trialio.read_trial_dir(args.data)
    X, y, groups = samples_to_arrays(
        build_detection_dataset(trials, cfg.features.k_bins, cfg.features.f_thresh_N)
    )
    t0 = time.perf_counter()
    if not args.no_cv and len(set(groups)) >= 2:
        aucs = []
        for held_id, _ in evaluation.loto_split(list(groups)):
            test_mask = groups == held_id
            fold_model = gbdt.fit_gbdt_arrays(
                X[~test_mask], y[~test_mask], cfg.detector.to_params(), seed=cfg.seed
            )
            proba = gbdt.predict_proba(fold_model, X[test_mask])
            try:
                auc = evaluation.roc_auc(y[test_mask], proba)
            except evaluation.MetricUndefined:
                auc = None
            _say(
                "train-detect",
                fold=held_id,
                auc="n/a" if auc is None else f"{auc:.4f}",
            )
            if auc is not None:
                aucs.append(auc)
        if aucs:
            _say("train-detect", mean_auc=f"{sum(aucs) / len(aucs):.4f}")
    model = gbdt.fit_gbdt_arrays(X, y, cfg.detector.to_params(), seed=cfg.seed)
    gbdt.save_gbdt(model, args.out)
    _say(
        "train-detect",
        n_samples=len(y),
        n_trees=len(model.trees),
        final_loss=f"{model.loss_curve[-1]:.6f}" if model.loss_curve else "n/a",
        wall_s=f"{time.perf_counter() - t0:.1f}",
        out=args.out,
    )
    return 0


def cmd_train_locate(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    trials = trialio.read_trial_dir(args.data)
    strain, motor, targets, _ = forcenet.build_localization_dataset(
        trials,
        sigma_mm=cfg.train.sigma_mm,
        f_thresh=cfg.features.f_thresh_N,
        stride=cfg.train.stride,
    )
    model = forcenet.build_network(_net_spec(cfg), seed=cfg.seed)
    t0 = time.perf_counter()
    curve = forcenet.train(
        model, strain, motor, targets, cfg.train.to_options(), seed=cfg.seed
    )
    forcenet.save_checkpoint(model, args.out)
    curve_path = Path(str(args.out) + ".loss.csv")
    curve_path.write_text(
        "epoch,loss\n"
        + "".join(f"{i},{repr(v)}\n" for i, v in enumerate(curve))
    )
    _say(
        "train-locate",
        n_samples=len(strain),
        n_epochs=len(curve),
        final_loss=f"{curve[-1]:.6f}",
        wall_s=f"{time.perf_counter() - t0:.1f}",
        out=args.out,
        curve=curve_path,
    )
    return 0


def _write_eval_outputs(
    out_dir: Path | None,
    report: evaluation.EvalReport,
    results: list[evaluation.CascadeResult],
) -> None:
    print(evaluation.to_table(report))
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(evaluation.to_csv(report))
    (out_dir / "errors.csv").write_text(evaluation.frame_records_csv(results))


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    trials = trialio.read_trial_dir(args.data)
    t0 = time.perf_counter()
    if args.oracle:
        results = [
            evaluation.oracle_cascade(t, cfg.train.sigma_mm, cfg.features.f_thresh_N)
            for t in trials
        ]
        report = evaluation.summarize_results(results)
        mode = "oracle"
    elif args.detector is not None or args.localizer is not None:
        if args.detector is None or args.localizer is None:
            raise ConfigError("--detector and --localizer must be given together")
        detector = gbdt.load_gbdt(args.detector)
        localizer = forcenet.load_checkpoint(args.localizer)
        results = [
            evaluation.run_cascade(
                t,
                detector,
                localizer,
                cfg.features.k_bins,
                cfg.features.f_thresh_N,
                cfg.eval.proba_threshold,
            )
            for t in trials
        ]
        report = evaluation.summarize_results(results)
        mode = "fixed"
    else:
        report, results = evaluation.cross_validate(
            trials,
            gbdt_params=cfg.detector.to_params(),
            net_spec=_net_spec(cfg),
            train_opts=cfg.train.to_options(),
            k_bins=cfg.features.k_bins,
            f_thresh_N=cfg.features.f_thresh_N,
            proba_threshold=cfg.eval.proba_threshold,
            sigma_mm=cfg.train.sigma_mm,
            stride=cfg.train.stride,
            seed=cfg.seed,
            jobs=args.jobs,
        )
        mode = "cross-validate"
    _write_eval_outputs(args.out, report, results)
    m = report.mean_row

    def show(v, digits):
        return "n/a" if v is None else f"{v:.{digits}f}"

    _say(
        "eval",
        mode=mode,
        n_trials=len(trials),
        mean_roc_auc=show(m.roc_auc, 4),
        force_mae_N=show(m.force_mae_N, 4),
        loc_mae_mm=show(m.loc_mae_mm, 3),
        wall_s=f"{time.perf_counter() - t0:.1f}",
    )
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    trial = trialio.read_trial(args.trial)
    detector = gbdt.load_gbdt(args.detector)
    localizer = forcenet.load_checkpoint(args.localizer)
    result = evaluation.run_cascade(
        trial,
        detector,
        localizer,
        cfg.features.k_bins,
        cfg.features.f_thresh_N,
        cfg.eval.proba_threshold,
    )
    text = evaluation.frame_records_csv([result])
    if args.out is not None:
        Path(args.out).write_text(text)
        n_contact = int(result.y_pred.sum())
        _say("infer", n_frames=len(result.t_s), n_detected=n_contact, out=args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    trial = trialio.read_trial(args.trial)
    stop = None if args.stop_force < 0 else args.stop_force
    out_trial = trialio.replay_trial(trial, args.source_rate, args.log_rate, stop)
    trialio.write_trial(out_trial, args.out)
    _say(
        "replay",
        n_in=trial.n_frames,
        n_out=out_trial.n_frames,
        source_rate_hz=args.source_rate,
        log_rate_hz=args.log_rate,
        out=args.out,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibercontact",
        description="Contact detection, localization, and force estimation "
        "from distributed fiber strain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-detect", help="train the contact detector")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="trial directory")
    p.add_argument("--out", type=Path, required=True, help="model JSON path")
    p.add_argument(
        "--no-cv",
        action="store_true",
        help="skip the per-fold AUC report before the final fit",
    )
    p.set_defaults(func=cmd_train_detect)

    p = sub.add_parser("train-locate", help="train the localization network")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="trial directory")
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train_locate)

    p = sub.add_parser("eval", help="evaluate the cascade on a trial directory")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="trial directory")
    p.add_argument("--out", type=Path, help="directory for report.csv/errors.csv")
    p.add_argument("--detector", type=Path, help="fixed detector model JSON")
    p.add_argument("--localizer", type=Path, help="fixed localizer checkpoint")
    p.add_argument(
        "--oracle",
        action="store_true",
        help="score the ground-truth oracle instead of trained models",
    )
    p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="run the cascade on one trial file")
    _add_common(p)
    p.add_argument("--trial", type=Path, required=True)
    p.add_argument("--detector", type=Path, required=True)
    p.add_argument("--localizer", type=Path, required=True)
    p.add_argument("--out", type=Path, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("replay", help="re-log a trial at a lower rate")
    p.add_argument("--trial", type=Path, required=True)
    p.add_argument("--source-rate", type=float, required=True)
    p.add_argument("--log-rate", type=float, required=True)
    p.add_argument(
        "--stop-force",
        type=float,
        default=0.10,
        help="terminate at this force (negative disables)",
    )
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrialFormatError as exc:
        print(f"trial format error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
