"""Metrics, leave-one-test-out evaluation, and report generation.

The cascade is scored per test id: frame-level detection metrics over all
of the id's trials, and force/localization errors over the frames that are
both truly in contact and flagged by the detector (stage two never runs on
frames the detector rejects).
"""
from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import forcenet as fn
from . import gbdt
from .core import ArcGrid, Trial
from .features import build_detection_dataset, samples_to_arrays
from .forcenet import NetSpec, TrainOptions

REPORT_COLUMNS = (
    "Label",
    "ROC-AUC",
    "Recall",
    "Precision",
    "Force MAE (N)",
    "Localization MAE (mm)",
)


class MetricUndefined(Exception):
    """Raised when a metric has no value on the given data."""


def roc_auc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Area under the ROC curve via midranks; ties count one half.

    Equals the probability that a random positive outscores a random
    negative. Needs both classes present.
    """
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {s.shape}")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos + n_neg != len(y):
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefined("ROC-AUC needs both classes present")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    # midrank of each tie group, 1-based
    midranks = np.cumsum(counts) - (counts - 1) / 2.0
    ranks = midranks[inverse]
    u = np.sum(ranks[y == 1]) - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_recall(
    y_true: np.ndarray, y_pred: np.ndarray
) -> tuple[float | None, float | None]:
    """(precision, recall); None where the denominator is zero."""
    y = np.asarray(y_true)
    p = np.asarray(y_pred)
    if y.shape != p.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {p.shape}")
    tp = int(np.sum((y == 1) & (p == 1)))
    pred_pos = int(np.sum(p == 1))
    actual_pos = int(np.sum(y == 1))
    precision = tp / pred_pos if pred_pos else None
    recall = tp / actual_pos if actual_pos else None
    return precision, recall


def mae(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise MetricUndefined("MAE of an empty set")
    return float(np.mean(np.abs(a - b)))


def loto_split(test_ids: list[str]) -> list[tuple[str, list[str]]]:
    """Leave-one-test-out folds: (held_out_id, training_ids) per unique id."""
    unique = sorted(set(test_ids), key=_order_key)
    if len(unique) < 2:
        raise ValueError(f"need at least 2 test ids, got {unique}")
    return [(held, [t for t in unique if t != held]) for held in unique]


def _order_key(test_id: str):
    m = re.match(r"^(cv|cc)_(\d+)$", test_id)
    if m:
        return (0, 0 if m.group(1) == "cv" else 1, int(m.group(2)), test_id)
    return (1, 0, 0, test_id)


@dataclass
class CascadeResult:
    """Per-frame cascade outputs for one trial."""

    test_id: str
    t_s: np.ndarray
    y_true: np.ndarray
    proba: np.ndarray
    y_pred: np.ndarray
    force_true_N: np.ndarray
    force_pred_N: np.ndarray  # NaN where stage two did not run
    s_pred_mm: np.ndarray  # NaN where stage two did not run
    seg_pred: np.ndarray  # -1 where stage two did not run
    loc_mask: np.ndarray  # frames scored for force/localization
    s_true_mm: float | None


def run_cascade(
    trial: Trial,
    detector: gbdt.GbdtModel,
    localizer: fn.ForceDistributionNet,
    k_bins: int = 32,
    f_thresh_N: float = 0.01,
    proba_threshold: float = 0.5,
) -> CascadeResult:
    """Apply detector then gated localizer to every frame of one trial."""
    n = trial.n_frames
    if n == 0:
        empty = np.zeros(0)
        return CascadeResult(
            trial.test_id, empty, empty.astype(np.int64), empty,
            empty.astype(np.int64), empty, empty, empty,
            empty.astype(np.int64), empty.astype(bool), trial.gt_contact_s_mm,
        )
    X, y_true, _ = samples_to_arrays(
        build_detection_dataset([trial], k_bins, f_thresh_N)
    )
    proba = gbdt.predict_proba(detector, X)
    y_pred = (proba >= proba_threshold).astype(np.int64)

    loc_mask = (y_true == 1) & (y_pred == 1)
    force_pred = np.full(n, np.nan)
    s_pred = np.full(n, np.nan)
    seg_pred = np.full(n, -1, dtype=np.int64)
    if loc_mask.any():
        dists = fn.predict(
            localizer,
            trial.strain_matrix()[loc_mask],
            trial.motor_positions()[loc_mask],
        )
        f_hat, s_hat, seg = fn.decode_distribution(dists, trial.grid)
        force_pred[loc_mask] = f_hat
        s_pred[loc_mask] = s_hat
        seg_pred[loc_mask] = seg
    return CascadeResult(
        test_id=trial.test_id,
        t_s=trial.times(),
        y_true=y_true,
        proba=proba,
        y_pred=y_pred,
        force_true_N=trial.gt_force_N.copy(),
        force_pred_N=force_pred,
        s_pred_mm=s_pred,
        seg_pred=seg_pred,
        loc_mask=loc_mask,
        s_true_mm=trial.gt_contact_s_mm,
    )


def oracle_cascade(
    trial: Trial, sigma_mm: float | None = None, f_thresh_N: float = 0.01
) -> CascadeResult:
    """Cascade fed by ground truth; bounds what any model can score.

    Detection is the true label; localization re-encodes the true contact
    into the segment distribution and decodes it, so the only residual is
    the segment quantization.
    """
    y_true = trial.contact_labels(f_thresh_N)
    n = trial.n_frames
    force_pred = np.full(n, np.nan)
    s_pred = np.full(n, np.nan)
    seg_pred = np.full(n, -1, dtype=np.int64)
    loc_mask = (y_true == 1) & (trial.gt_contact_s_mm is not None)
    if loc_mask.any():
        dists = fn.encode_targets(
            trial.grid,
            np.full(int(loc_mask.sum()), trial.gt_contact_s_mm),
            trial.gt_force_N[loc_mask],
            sigma_mm,
        )
        f_hat, s_hat, seg = fn.decode_distribution(dists, trial.grid)
        force_pred[loc_mask] = f_hat
        s_pred[loc_mask] = s_hat
        seg_pred[loc_mask] = seg
    return CascadeResult(
        test_id=trial.test_id,
        t_s=trial.times(),
        y_true=y_true,
        proba=y_true.astype(float),
        y_pred=y_true.copy(),
        force_true_N=trial.gt_force_N.copy(),
        force_pred_N=force_pred,
        s_pred_mm=s_pred,
        seg_pred=seg_pred,
        loc_mask=loc_mask,
        s_true_mm=trial.gt_contact_s_mm,
    )


@dataclass
class ReportRow:
    label: str
    roc_auc: float | None
    recall: float | None
    precision: float | None
    force_mae_N: float | None
    loc_mae_mm: float | None


@dataclass
class EvalReport:
    rows: list[ReportRow]
    mean_row: ReportRow = field(init=False)

    def __post_init__(self) -> None:
        def col_mean(values: list[float | None]) -> float | None:
            present = [v for v in values if v is not None]
            return float(np.mean(present)) if present else None

        self.mean_row = ReportRow(
            label="mean",
            roc_auc=col_mean([r.roc_auc for r in self.rows]),
            recall=col_mean([r.recall for r in self.rows]),
            precision=col_mean([r.precision for r in self.rows]),
            force_mae_N=col_mean([r.force_mae_N for r in self.rows]),
            loc_mae_mm=col_mean([r.loc_mae_mm for r in self.rows]),
        )


def summarize_results(results: list[CascadeResult]) -> EvalReport:
    """Aggregate per-frame cascade outputs into one report row per id."""
    by_id: dict[str, list[CascadeResult]] = {}
    for r in results:
        by_id.setdefault(r.test_id, []).append(r)

    rows = []
    for test_id in sorted(by_id, key=_order_key):
        group = by_id[test_id]
        y = np.concatenate([r.y_true for r in group])
        proba = np.concatenate([r.proba for r in group])
        pred = np.concatenate([r.y_pred for r in group])
        try:
            auc = roc_auc(y, proba)
        except MetricUndefined:
            auc = None
        precision, recall = precision_recall(y, pred)

        force_err, loc_err = [], []
        for r in group:
            m = r.loc_mask
            if not m.any():
                continue
            force_err.append(np.abs(r.force_pred_N[m] - r.force_true_N[m]))
            if r.s_true_mm is not None:
                loc_err.append(np.abs(r.s_pred_mm[m] - r.s_true_mm))
        force_mae = (
            float(np.mean(np.concatenate(force_err))) if force_err else None
        )
        loc_mae = float(np.mean(np.concatenate(loc_err))) if loc_err else None
        rows.append(
            ReportRow(
                label=test_id,
                roc_auc=auc,
                recall=recall,
                precision=precision,
                force_mae_N=force_mae,
                loc_mae_mm=loc_mae,
            )
        )
    return EvalReport(rows=rows)


def _run_fold(payload: tuple) -> list[CascadeResult]:
    (
        held_id, trials, gbdt_params, net_spec, train_opts,
        k_bins, f_thresh, threshold, sigma_mm, stride, fold_seeds,
    ) = payload
    detect_seed, net_seed = fold_seeds
    train_trials = [t for t in trials if t.test_id != held_id]
    test_trials = [t for t in trials if t.test_id == held_id]

    X, y, _ = samples_to_arrays(
        build_detection_dataset(train_trials, k_bins, f_thresh)
    )
    detector = gbdt.fit_gbdt_arrays(X, y, gbdt_params, seed=detect_seed)

    strain, motor, targets, _ = fn.build_localization_dataset(
        train_trials, sigma_mm, f_thresh, stride
    )
    localizer = fn.build_network(net_spec, seed=net_seed)
    fn.train(localizer, strain, motor, targets, train_opts, seed=net_seed)

    return [
        run_cascade(t, detector, localizer, k_bins, f_thresh, threshold)
        for t in test_trials
    ]


def cross_validate(
    trials: list[Trial],
    gbdt_params: gbdt.GbdtParams | None = None,
    net_spec: NetSpec | None = None,
    train_opts: TrainOptions | None = None,
    k_bins: int = 32,
    f_thresh_N: float = 0.01,
    proba_threshold: float = 0.5,
    sigma_mm: float | None = None,
    stride: int = 1,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[EvalReport, list[CascadeResult]]:
    """Leave-one-test-out evaluation of the full cascade.

    Each fold trains both stages from scratch on the remaining ids. Fold
    seeds derive from (seed, fold index), so results do not depend on the
    worker count.
    """
    folds = loto_split([t.test_id for t in trials])
    payloads = []
    for fold_idx, (held_id, _) in enumerate(folds):
        ss = np.random.SeedSequence((seed, fold_idx))
        fold_seeds = tuple(int(v) for v in ss.generate_state(2))
        payloads.append(
            (
                held_id, trials, gbdt_params, net_spec, train_opts,
                k_bins, f_thresh_N, proba_threshold, sigma_mm, stride,
                fold_seeds,
            )
        )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_fold = list(pool.map(_run_fold, payloads))
    else:
        per_fold = [_run_fold(p) for p in payloads]
    results = [r for fold in per_fold for r in fold]
    return summarize_results(results), results


def _fmt_cell(value: float | None, digits: int) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def to_table(report: EvalReport) -> str:
    """Fixed-width text table, one row per id plus the unweighted mean."""
    rows = report.rows + [report.mean_row]
    cells = [list(REPORT_COLUMNS)]
    for r in rows:
        cells.append(
            [
                r.label,
                _fmt_cell(r.roc_auc, 3),
                _fmt_cell(r.recall, 3),
                _fmt_cell(r.precision, 3),
                _fmt_cell(r.force_mae_N, 4),
                _fmt_cell(r.loc_mae_mm, 3),
            ]
        )
    widths = [max(len(row[c]) for row in cells) for c in range(len(REPORT_COLUMNS))]
    lines = []
    for i, row in enumerate(cells):
        lines.append(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        )
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def to_csv(report: EvalReport) -> str:
    """CSV with repr floats; empty cell where a metric is undefined."""
    def cell(v: float | None) -> str:
        return "" if v is None else repr(float(v))

    lines = [",".join(REPORT_COLUMNS)]
    for r in report.rows + [report.mean_row]:
        lines.append(
            ",".join(
                [
                    r.label,
                    cell(r.roc_auc),
                    cell(r.recall),
                    cell(r.precision),
                    cell(r.force_mae_N),
                    cell(r.loc_mae_mm),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def frame_records_csv(results: list[CascadeResult]) -> str:
    """Per-frame cascade outputs as CSV, for error inspection."""
    header = (
        "test_id,t_s,y_true,proba,y_pred,force_true_N,"
        "force_pred_N,s_true_mm,s_pred_mm,seg_pred"
    )
    lines = [header]
    for r in results:
        s_true = "" if r.s_true_mm is None else repr(float(r.s_true_mm))
        for i in range(len(r.t_s)):
            force_pred = r.force_pred_N[i]
            s_pred = r.s_pred_mm[i]
            lines.append(
                ",".join(
                    [
                        r.test_id,
                        repr(float(r.t_s[i])),
                        str(int(r.y_true[i])),
                        repr(float(r.proba[i])),
                        str(int(r.y_pred[i])),
                        repr(float(r.force_true_N[i])),
                        "" if np.isnan(force_pred) else repr(float(force_pred)),
                        s_true,
                        "" if np.isnan(s_pred) else repr(float(s_pred)),
                        str(int(r.seg_pred[i])),
                    ]
                )
            )
    return "\n".join(lines) + "\n"
