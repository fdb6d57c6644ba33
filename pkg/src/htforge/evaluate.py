"""Scoring of external detector predictions against bundle labels.

Predictions arrive as a ``net,score`` CSV with scores in [0, 1]. Nets
labeled trigger or payload form the positive class. ROC-AUC uses the
average-rank statistic, which handles ties and makes score flips exactly
antisymmetric; the sweep walks every distinct score as a threshold.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .export import BenchmarkBundle

log = logging.getLogger(__name__)


class PredictionError(Exception):
    pass


@dataclass
class DetectorMetrics:
    roc_auc: float
    average_precision: float
    sweep: list[tuple[float, float, float, float]]  # threshold, P, R, F1
    cone_hit_rate: float
    top_k: int
    n_positive: int
    n_nets: int
    missing_nets: int

    def to_dict(self) -> dict:
        return {
            "roc_auc": self.roc_auc,
            "average_precision": self.average_precision,
            "sweep": [list(row) for row in self.sweep],
            "cone_hit_rate": self.cone_hit_rate,
            "top_k": self.top_k,
            "n_positive": self.n_positive,
            "n_nets": self.n_nets,
            "missing_nets": self.missing_nets,
        }


def load_predictions(path: str) -> dict[str, float]:
    scores: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise PredictionError(f"line {lineno}: expected net,score")
            net, score_txt = parts[0].strip(), parts[1].strip()
            if lineno == 1 and score_txt.lower() == "score":
                continue  # header
            try:
                score = float(score_txt)
            except ValueError as e:
                raise PredictionError(
                    f"line {lineno}: unparseable score {score_txt!r}"
                ) from e
            if not 0.0 <= score <= 1.0:
                raise PredictionError(f"line {lineno}: score {score} outside [0, 1]")
            scores[net] = score
    return scores


def rank_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney AUC with average-rank tie handling."""
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise PredictionError("need both positive and negative nets for AUC")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    r_pos = ranks[positives].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _sweep(scores: np.ndarray, positives: np.ndarray):
    n_pos = int(positives.sum())
    rows = []
    for t in sorted(set(scores.tolist()), reverse=True):
        pred = scores >= t
        tp = int((pred & positives).sum())
        fp = int((pred & ~positives).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / n_pos
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        rows.append((float(t), precision, recall, f1))
    return rows


def _average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    order = np.lexsort((np.arange(len(scores)), -scores))
    hits = positives[order]
    n_pos = int(positives.sum())
    tp = np.cumsum(hits)
    precision_at = tp / np.arange(1, len(scores) + 1)
    return float((precision_at[hits]).sum() / n_pos)


def score_predictions(
    bundle: BenchmarkBundle, predictions_path: str, top_k: int = 100
) -> DetectorMetrics:
    """Detector metrics over one bundle; {trigger, payload} is positive."""
    preds = load_predictions(predictions_path)
    labeled = sorted(bundle.labels)
    if not labeled:
        raise PredictionError("bundle has no labeled nets")
    covered = sum(1 for net in labeled if net in preds)
    if covered / len(labeled) < 0.99:
        raise PredictionError(
            f"predictions cover {covered}/{len(labeled)} labeled nets (<99%)"
        )
    missing = len(labeled) - covered
    if missing:
        log.warning("%d labeled nets missing from predictions; scored 0", missing)

    positives_set = bundle.positive_nets()
    if not positives_set:
        raise PredictionError("bundle has an empty positive class")
    scores = np.array([preds.get(net, 0.0) for net in labeled])
    positives = np.array([net in positives_set for net in labeled])

    auc = rank_auc(scores, positives)
    sweep = _sweep(scores, positives)
    ap = _average_precision(scores, positives)

    ranked = sorted(zip(labeled, scores), key=lambda kv: (-kv[1], kv[0]))
    top = {net for net, _ in ranked[:top_k]}
    hit = 0
    cones = bundle.cones
    for cone_id in cones:
        members = {
            net
            for net, (label, cid) in bundle.labels.items()
            if cid == cone_id and label in ("trigger", "payload")
        }
        if members & top:
            hit += 1
    hit_rate = hit / len(cones) if cones else 0.0

    return DetectorMetrics(
        roc_auc=auc,
        average_precision=ap,
        sweep=sweep,
        cone_hit_rate=hit_rate,
        top_k=top_k,
        n_positive=int(positives.sum()),
        n_nets=len(labeled),
        missing_nets=missing,
    )
