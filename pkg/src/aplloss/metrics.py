"""Ranking and thresholded metrics for multi-label predictions.

``scores`` and ``truth`` are ``(n_samples, n_classes)`` arrays. Ties in a
ranking are always broken by ascending index (class index for per-sample
rankings, sample index for per-class rankings).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UndefinedMetricError(ValueError):
    """No sample or class carries the positives a metric needs."""


@dataclass
class MetricReport:
    values: dict[str, float] = field(default_factory=dict)
    n_samples: int = 0

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def to_json(self) -> str:
        """JSON object of metric values with 6 decimal places."""
        body = ", ".join(f'"{k}": {v:.6f}' for k, v in self.values.items())
        return "{" + body + "}"


def _check(scores, truth):
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth)
    if s.ndim == 1:
        s = s[None, :]
    if t.ndim == 1:
        t = t[None, :]
    if s.shape != t.shape or s.ndim != 2:
        raise ValueError(f"scores {s.shape} and truth {t.shape} must be matching 2-D arrays")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("truth must be binary")
    return s, t.astype(bool)


def _check_k(k: int, n_classes: int):
    if not 1 <= k <= n_classes:
        raise ValueError(f"k must lie in [1, {n_classes}], got {k}")


def _top_order(scores):
    # stable sort on -scores: equal scores keep ascending class order
    return np.argsort(-scores, axis=1, kind="stable")


def precision_at_k(scores, truth, k: int) -> float:
    s, t = _check(scores, truth)
    _check_k(k, s.shape[1])
    top = _top_order(s)[:, :k]
    hits = np.take_along_axis(t, top, axis=1)
    return float(hits.sum(axis=1).mean() / k)


def ndcg_at_k(scores, truth, k: int) -> float:
    """Binary-gain nDCG@k, averaged over samples with at least one relevant label."""
    s, t = _check(scores, truth)
    _check_k(k, s.shape[1])
    n_rel = t.sum(axis=1)
    keep = n_rel > 0
    if not keep.any():
        raise UndefinedMetricError("nDCG is undefined: no sample has a relevant label")
    discount = 1.0 / np.log2(np.arange(2, k + 2))
    top = _top_order(s[keep])[:, :k]
    gains = np.take_along_axis(t[keep], top, axis=1)
    dcg = (gains * discount).sum(axis=1)
    ideal_cut = np.minimum(n_rel[keep], k)
    idcg = np.cumsum(discount)[ideal_cut - 1]
    return float((dcg / idcg).mean())


def average_precision_per_class(scores, truth) -> np.ndarray:
    """AP of each class over the sample axis; NaN for classes without positives."""
    s, t = _check(scores, truth)
    order = np.argsort(-s, axis=0, kind="stable")
    ranked = np.take_along_axis(t, order, axis=0)
    hits = np.cumsum(ranked, axis=0)
    ranks = np.arange(1, s.shape[0] + 1)[:, None]
    precision = hits / ranks
    n_pos = t.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ap = (precision * ranked).sum(axis=0) / n_pos
    return np.where(n_pos > 0, ap, np.nan)


def mean_average_precision(scores, truth) -> float:
    ap = average_precision_per_class(scores, truth)
    if np.all(np.isnan(ap)):
        raise UndefinedMetricError("mAP is undefined: no class has a positive sample")
    return float(np.nanmean(ap))


def micro_f1(scores, truth, threshold: float = 0.5) -> float:
    """Pooled F1 with ``score >= threshold`` as a positive prediction.

    Returns 1.0 when there are no positives predicted and none in ``truth``.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    s, t = _check(scores, truth)
    pred = s >= threshold
    tp = int(np.sum(pred & t))
    fp = int(np.sum(pred & ~t))
    fn = int(np.sum(~pred & t))
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def report(scores, truth, ks=(1, 3, 5), threshold: float = 0.5) -> MetricReport:
    """P@k and nDCG@k for each ``k``, mAP and micro-F1 in a single report.

    Metrics that are undefined for these labels are left out.
    """
    s, t = _check(scores, truth)
    values = {}
    for k in ks:
        values[f"P@{k}"] = precision_at_k(s, t, k)
    for k in ks:
        try:
            values[f"nDCG@{k}"] = ndcg_at_k(s, t, k)
        except UndefinedMetricError:
            pass
    try:
        values["mAP"] = mean_average_precision(s, t)
    except UndefinedMetricError:
        pass
    values["micro_F1"] = micro_f1(s, t, threshold)
    return MetricReport(values, s.shape[0])
