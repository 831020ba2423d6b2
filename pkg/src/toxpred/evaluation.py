"""Imbalance-aware classification metrics and multi-run aggregation.

Plain accuracy is misleading at a ~10% positive rate, so the reported
metrics are the per-class recalls (sensitivity for toxic, specificity
for non-toxic) and their geometric mean, which collapses to zero as soon
as either class is entirely missed.  Accuracy and F1 stay available as
opt-in diagnostics only.
"""

import math
import statistics
import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_HISTOGRAM_BINS = 50


@dataclass
class ConfusionMatrix:
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def total(self):
        return self.tp + self.fn + self.tn + self.fp


@dataclass
class EvalReport:
    """Metrics of one run, or the mean +- sample std over several runs."""

    sensitivity: float
    specificity: float
    gmean: float
    sensitivity_std: float = 0.0
    specificity_std: float = 0.0
    gmean_std: float = 0.0
    n_runs: int = 1
    per_run: list | None = field(default=None, repr=False)


def confusion(y_true, y_pred):
    """Count the confusion matrix with toxic (1) as the positive class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(
            f"label arrays must be 1-d and equal length, got {y_true.shape} vs {y_pred.shape}"
        )
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} contains entries outside {{0, 1}}")
    y_true = y_true.astype(int)
    y_pred = y_pred.astype(int)
    return ConfusionMatrix(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
    )


def _rate(numerator, denominator, name):
    if denominator == 0:
        warnings.warn(f"{name} undefined (empty denominator); reporting 0", stacklevel=3)
        return 0.0
    return numerator / denominator


def metrics(cm):
    """Sensitivity, specificity and their geometric mean for one confusion matrix."""
    sensitivity = _rate(cm.tp, cm.tp + cm.fn, "sensitivity")
    specificity = _rate(cm.tn, cm.tn + cm.fp, "specificity")
    return EvalReport(
        sensitivity=sensitivity,
        specificity=specificity,
        gmean=math.sqrt(sensitivity * specificity),
    )


def gmean_score(y_true, y_pred):
    return metrics(confusion(y_true, y_pred)).gmean


def accuracy(cm):
    return _rate(cm.tp + cm.tn, cm.total, "accuracy")


def f1_score(cm):
    return _rate(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "f1")


def auc_from_scores(y_true, scores):
    """Rank-based AUC-ROC from continuous scores (ties get average rank)."""
    from scipy.stats import rankdata

    y_true = np.asarray(y_true, dtype=int)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(y_true == 1))
    n_neg = int(np.sum(y_true == 0))
    if n_pos == 0 or n_neg == 0:
        warnings.warn("auc undefined (one class absent); reporting 0", stacklevel=2)
        return 0.0
    ranks = rankdata(scores)
    pos_rank_sum = float(np.sum(ranks[y_true == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def multi_run(evaluate, n_runs, base_seed):
    """Aggregate EvalReports over seeds base_seed .. base_seed + n_runs - 1.

    ``evaluate`` maps a seed to a single-run EvalReport.  Reports the
    per-metric mean and sample standard deviation (n-1 denominator); a
    single run reports std 0 by convention.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    runs = [evaluate(base_seed + i) for i in range(n_runs)]

    def agg(values):
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        return mean, std

    sens, sens_std = agg([r.sensitivity for r in runs])
    spec, spec_std = agg([r.specificity for r in runs])
    gmean, gmean_std = agg([r.gmean for r in runs])
    return EvalReport(
        sensitivity=sens,
        specificity=spec,
        gmean=gmean,
        sensitivity_std=sens_std,
        specificity_std=spec_std,
        gmean_std=gmean_std,
        n_runs=n_runs,
        per_run=runs,
    )


def toxicity_histogram(mean_toxicities, n_bins=DEFAULT_HISTOGRAM_BINS):
    """Equal-width bin counts of interaction mean toxicities over [0, 1].

    The last bin is right-closed so a mean of exactly 1.0 is counted.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    values = np.asarray(list(mean_toxicities), dtype=float)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("mean toxicities must lie in [0, 1]")
    counts, _ = np.histogram(values, bins=n_bins, range=(0.0, 1.0))
    return counts


def render_histogram(counts, path, title="Mean toxicity per interaction"):
    """Write a log-y bar chart of histogram counts (format from file suffix)."""
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "toxpred"
    import matplotlib.pyplot as plt

    counts = np.asarray(counts)
    n_bins = len(counts)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    centers = (edges[:-1] + edges[1:]) / 2
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(centers, counts, width=1.0 / n_bins, edgecolor="black", linewidth=0.3)
    ax.set_yscale("log")
    ax.set_xlabel("mean toxicity of the interaction")
    ax.set_ylabel("interactions (log scale)")
    ax.set_title(title)
    fig.tight_layout()
    # Drop the embedded date so reruns produce identical bytes.
    metadata = {"Date": None} if str(path).endswith(".svg") else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
    return path


def report_to_dict(report):
    out = {
        "sensitivity": report.sensitivity,
        "sensitivity_std": report.sensitivity_std,
        "specificity": report.specificity,
        "specificity_std": report.specificity_std,
        "gmean": report.gmean,
        "gmean_std": report.gmean_std,
        "n_runs": report.n_runs,
    }
    if report.per_run is not None:
        out["per_run"] = [
            {"sensitivity": r.sensitivity, "specificity": r.specificity, "gmean": r.gmean}
            for r in report.per_run
        ]
    return out


def format_report_table(rows):
    """Aligned text table of (name, EvalReport) rows, one model per line."""
    header = f"{'':8s}{'Sensitivity':>16s}{'Specificity':>16s}{'G-Mean':>16s}"
    lines = [header]
    for name, report in rows:
        cells = [
            f"{report.sensitivity:.3f} ± {report.sensitivity_std:.3f}",
            f"{report.specificity:.3f} ± {report.specificity_std:.3f}",
            f"{report.gmean:.3f} ± {report.gmean_std:.3f}",
        ]
        lines.append(f"{name:8s}" + "".join(f"{c:>16s}" for c in cells))
    return "\n".join(lines)
