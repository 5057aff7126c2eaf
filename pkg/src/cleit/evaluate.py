"""Prediction-matrix evaluation: masked Pearson and RMSE aggregated
drug-wise (per column) and sample-wise (per row), plus top-k precision of
the most-sensitive drugs per sample.

Vectors that fail a metric's preconditions (fewer than two observed
entries, zero variance, fewer than k observed drugs) yield an undefined
marker (``None``), are excluded from the aggregated means, and the
exclusion counts are reported rather than silently zero-filled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

TOPK_DEFAULT = (1, 3, 5, 10)


def masked_pearson(a, b, mask) -> float | None:
    """Pearson correlation over unmasked positions; None when undefined."""
    a, b, mask = np.asarray(a, float), np.asarray(b, float), np.asarray(mask)
    obs = mask == 1
    if obs.sum() < 2:
        return None
    x, y = a[obs], b[obs]
    xc, yc = x - x.mean(), y - y.mean()
    vx, vy = (xc * xc).sum(), (yc * yc).sum()
    if vx <= 0 or vy <= 0:
        return None
    r = float((xc * yc).sum() / np.sqrt(vx * vy))
    return min(1.0, max(-1.0, r))


def masked_rmse(a, b, mask) -> float | None:
    """Root mean squared error over unmasked positions; None if none."""
    a, b, mask = np.asarray(a, float), np.asarray(b, float), np.asarray(mask)
    obs = mask == 1
    if obs.sum() < 1:
        return None
    d = a[obs] - b[obs]
    return float(np.sqrt((d * d).mean()))


def topk_precision(y_row, y_hat_row, mask_row, k: int) -> float | None:
    """Overlap between the k smallest observed scores by ground truth and
    by prediction, divided by k. Smaller score = more sensitive. Ties are
    broken by ascending drug index; rows with fewer than k observed drugs
    are undefined."""
    y_row, y_hat_row = np.asarray(y_row, float), np.asarray(y_hat_row, float)
    obs = np.flatnonzero(np.asarray(mask_row) == 1)
    if obs.size < k:
        return None
    true_top = obs[np.argsort(y_row[obs], kind="stable")[:k]]
    pred_top = obs[np.argsort(y_hat_row[obs], kind="stable")[:k]]
    return len(set(true_top) & set(pred_top)) / k


def _aggregate(values: list[float | None]) -> tuple[float | None, int]:
    valid = [v for v in values if v is not None]
    mean = float(np.mean(valid)) if valid else None
    return mean, len(values) - len(valid)


@dataclass
class EvalReport:
    """Metric surface over one prediction matrix."""

    drugwise_pearson_mean: float | None
    drugwise_rmse_mean: float | None
    samplewise_pearson_mean: float | None
    samplewise_rmse_mean: float | None
    drugwise_pearson: list = field(default_factory=list)
    drugwise_rmse: list = field(default_factory=list)
    samplewise_pearson: list = field(default_factory=list)
    samplewise_rmse: list = field(default_factory=list)
    topk_precision: dict = field(default_factory=dict)
    topk_excluded: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "drugwise_pearson_mean": self.drugwise_pearson_mean,
            "drugwise_rmse_mean": self.drugwise_rmse_mean,
            "samplewise_pearson_mean": self.samplewise_pearson_mean,
            "samplewise_rmse_mean": self.samplewise_rmse_mean,
            "drugwise_pearson": self.drugwise_pearson,
            "drugwise_rmse": self.drugwise_rmse,
            "samplewise_pearson": self.samplewise_pearson,
            "samplewise_rmse": self.samplewise_rmse,
            "topk_precision": {str(k): v for k, v in self.topk_precision.items()},
            "topk_excluded": {str(k): v for k, v in self.topk_excluded.items()},
            "excluded": self.excluded,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            drugwise_pearson_mean=d["drugwise_pearson_mean"],
            drugwise_rmse_mean=d["drugwise_rmse_mean"],
            samplewise_pearson_mean=d["samplewise_pearson_mean"],
            samplewise_rmse_mean=d["samplewise_rmse_mean"],
            drugwise_pearson=d.get("drugwise_pearson", []),
            drugwise_rmse=d.get("drugwise_rmse", []),
            samplewise_pearson=d.get("samplewise_pearson", []),
            samplewise_rmse=d.get("samplewise_rmse", []),
            topk_precision={int(k): v for k, v in d.get("topk_precision", {}).items()},
            topk_excluded={int(k): v for k, v in d.get("topk_excluded", {}).items()},
            excluded=d.get("excluded", {}),
        )


def matrix_report(y, y_hat, mask, topk=TOPK_DEFAULT) -> EvalReport:
    """Full drug-wise / sample-wise / top-k report for one matrix."""
    y, y_hat, mask = np.asarray(y, float), np.asarray(y_hat, float), np.asarray(mask)
    if y.shape != y_hat.shape or y.shape != mask.shape:
        raise DimensionError(
            f"matrix_report shapes {y.shape} / {y_hat.shape} / {mask.shape}"
        )
    n, k = y.shape
    col_pearson = [masked_pearson(y[:, j], y_hat[:, j], mask[:, j]) for j in range(k)]
    col_rmse = [masked_rmse(y[:, j], y_hat[:, j], mask[:, j]) for j in range(k)]
    row_pearson = [masked_pearson(y[i], y_hat[i], mask[i]) for i in range(n)]
    row_rmse = [masked_rmse(y[i], y_hat[i], mask[i]) for i in range(n)]

    dp_mean, dp_exc = _aggregate(col_pearson)
    dr_mean, dr_exc = _aggregate(col_rmse)
    sp_mean, sp_exc = _aggregate(row_pearson)
    sr_mean, sr_exc = _aggregate(row_rmse)

    topk_means, topk_exc = {}, {}
    for kk in topk:
        vals = [topk_precision(y[i], y_hat[i], mask[i], kk) for i in range(n)]
        topk_means[kk], topk_exc[kk] = _aggregate(vals)

    return EvalReport(
        drugwise_pearson_mean=dp_mean,
        drugwise_rmse_mean=dr_mean,
        samplewise_pearson_mean=sp_mean,
        samplewise_rmse_mean=sr_mean,
        drugwise_pearson=col_pearson,
        drugwise_rmse=col_rmse,
        samplewise_pearson=row_pearson,
        samplewise_rmse=row_rmse,
        topk_precision=topk_means,
        topk_excluded=topk_exc,
        excluded={
            "drugwise_pearson": dp_exc,
            "drugwise_rmse": dr_exc,
            "samplewise_pearson": sp_exc,
            "samplewise_rmse": sr_exc,
        },
    )


def report_to_tsv(report: EvalReport, kind: str) -> str:
    """Plot-ready TSV of the per-drug or per-sample metric vectors."""
    if kind == "drug":
        pearson, rmse, label = report.drugwise_pearson, report.drugwise_rmse, "drug"
    elif kind == "sample":
        pearson, rmse, label = report.samplewise_pearson, report.samplewise_rmse, "sample"
    else:
        raise ValueError(f"kind must be 'drug' or 'sample', got {kind!r}")
    lines = [f"{label}\tpearson\trmse"]
    for i, (p, r) in enumerate(zip(pearson, rmse)):
        lines.append(f"{i}\t{'' if p is None else repr(p)}\t{'' if r is None else repr(r)}")
    return "\n".join(lines) + "\n"
