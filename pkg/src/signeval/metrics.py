"""Quantitative results: cue precision/recall, per-sign success rate,
COCO-style detection AP/AR, and end-to-end sign-level metrics.

Every metric is computed in exact rational form (`fractions.Fraction`)
and rendered to decimals only at report time. Undefined values (zero
denominators) are None and render as "n/a".
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from signeval import _kernels
from signeval.dataset import Dataset, PredictionSet
from signeval.errors import DuplicateId, SchemaError
from signeval.matching import (
    CueMatching,
    EmbeddingProvider,
    match_cue_sets,
    match_detections,
)
from signeval.model import BBox, EvalConfig, LabelKind, NavCue, SignPrediction

_REC_THRESHOLDS = tuple(Fraction(i, 100) for i in range(101))

SIZE_LABELS = ("S", "M", "L")


def _fraction_json(value: Fraction | None) -> dict | None:
    if value is None:
        return None
    return {
        "value": float(value),
        "exact": [value.numerator, value.denominator],
    }


# ---------------------------------------------------------------------------
# Recognition metrics (aggregated precision/recall and per-sign success)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KindStats:
    """Matched/predicted/ground-truth cue counts for one cue population."""

    matched: int
    predicted: int
    ground_truth: int

    @property
    def precision(self) -> Fraction | None:
        if self.predicted == 0:
            return None
        return Fraction(self.matched, self.predicted)

    @property
    def recall(self) -> Fraction | None:
        if self.ground_truth == 0:
            return None
        return Fraction(self.matched, self.ground_truth)

    def to_json_dict(self) -> dict:
        return {
            "matched": self.matched,
            "predicted": self.predicted,
            "ground_truth": self.ground_truth,
            "precision": _fraction_json(self.precision),
            "recall": _fraction_json(self.recall),
        }


@dataclass(frozen=True)
class SignOutcome:
    """Digest of one sign's cue matching, the unit of the pooled metrics."""

    image_id: str
    sign_id: str
    gt_total: int
    pred_total: int
    matched: int
    gt_by_kind: tuple[int, int]  # (text, symbol)
    pred_by_kind: tuple[int, int]
    matched_by_kind: tuple[int, int]

    @property
    def perfect(self) -> bool:
        return self.matched == self.gt_total == self.pred_total

    def perfect_for_kind(self, kind: LabelKind) -> bool | None:
        """Perfect restricted to one kind; None when vacuous on both sides."""
        i = 0 if kind is LabelKind.TEXT else 1
        if self.gt_by_kind[i] == 0 and self.pred_by_kind[i] == 0:
            return None
        return self.matched_by_kind[i] == self.gt_by_kind[i] == self.pred_by_kind[i]


def sign_outcome(
    image_id: str,
    sign_id: str,
    gt_cues: Sequence[NavCue],
    pred_cues: Sequence[NavCue],
    matching: CueMatching,
) -> SignOutcome:
    def kind_counts(cues: Sequence[NavCue]) -> tuple[int, int]:
        text = sum(1 for c in cues if c.kind is LabelKind.TEXT)
        return (text, len(cues) - text)

    matched_text = sum(1 for g, _ in matching.pairs if gt_cues[g].kind is LabelKind.TEXT)
    return SignOutcome(
        image_id=image_id,
        sign_id=sign_id,
        gt_total=len(gt_cues),
        pred_total=len(pred_cues),
        matched=matching.cardinality,
        gt_by_kind=kind_counts(gt_cues),
        pred_by_kind=kind_counts(pred_cues),
        matched_by_kind=(matched_text, matching.cardinality - matched_text),
    )


def aggregated_precision_recall(outcomes: Iterable[SignOutcome]) -> dict[str, KindStats]:
    """Dataset-pooled precision/recall: matched cues over predicted cues
    and over ground-truth cues, overall and per kind."""
    outcomes = list(outcomes)
    overall = KindStats(
        matched=sum(o.matched for o in outcomes),
        predicted=sum(o.pred_total for o in outcomes),
        ground_truth=sum(o.gt_total for o in outcomes),
    )
    per_kind = {}
    for key, i in (("text", 0), ("symbol", 1)):
        per_kind[key] = KindStats(
            matched=sum(o.matched_by_kind[i] for o in outcomes),
            predicted=sum(o.pred_by_kind[i] for o in outcomes),
            ground_truth=sum(o.gt_by_kind[i] for o in outcomes),
        )
    return {"overall": overall, "text": per_kind["text"], "symbol": per_kind["symbol"]}


def per_sign_success_rate(outcomes: Iterable[SignOutcome]) -> Fraction | None:
    """Fraction of signs whose matching is perfect on both sides."""
    outcomes = list(outcomes)
    if not outcomes:
        return None
    return Fraction(sum(1 for o in outcomes if o.perfect), len(outcomes))


def _kind_accuracy(outcomes: Sequence[SignOutcome], kind: LabelKind) -> Fraction | None:
    flags = [o.perfect_for_kind(kind) for o in outcomes]
    population = [f for f in flags if f is not None]
    if not population:
        return None
    return Fraction(sum(population), len(population))


@dataclass
class RecognitionReport:
    """Cue-level precision/recall plus sign-level success and accuracy."""

    mode: str
    symbol_threshold: float
    embedder: str
    overall: KindStats
    text: KindStats
    symbol: KindStats
    success_rate: Fraction | None
    accuracy_text: Fraction | None
    accuracy_symbol: Fraction | None
    signs_evaluated: int
    text_population: int
    symbol_population: int
    excluded_unreadable_predictions: int = 0
    excluded_unknown_predictions: int = 0

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "symbol_threshold": self.symbol_threshold,
            "embedder": self.embedder,
            "cues": {
                "overall": self.overall.to_json_dict(),
                "text": self.text.to_json_dict(),
                "symbol": self.symbol.to_json_dict(),
            },
            "success_rate": _fraction_json(self.success_rate),
            "accuracy": {
                "text": _fraction_json(self.accuracy_text),
                "symbol": _fraction_json(self.accuracy_symbol),
            },
            "signs": {
                "evaluated": self.signs_evaluated,
                "text_population": self.text_population,
                "symbol_population": self.symbol_population,
                "excluded_unreadable_predictions": self.excluded_unreadable_predictions,
                "excluded_unknown_predictions": self.excluded_unknown_predictions,
            },
        }


def evaluate_recognition(
    dataset: Dataset,
    predictions: PredictionSet,
    cfg: EvalConfig,
    provider: EmbeddingProvider,
) -> RecognitionReport:
    """Recognition metrics over the readable ground-truth signs.

    Predictions are keyed by (image_id, sign_id); readable signs without
    a prediction count as empty predictions. Predictions referencing
    unknown images/signs or unreadable signs are excluded with a warning
    count.
    """
    by_key: dict[tuple[str, str], SignPrediction] = {}
    known: dict[tuple[str, str], bool] = {}  # key -> readable
    for entry in dataset.entries:
        for sign in entry.signs:
            known[(entry.image_id, sign.sign_id)] = sign.readable

    excluded_unknown = 0
    excluded_unreadable = 0
    for pred_entry in predictions.entries:
        for i, pred in enumerate(pred_entry.signs):
            if pred.sign_id is None:
                raise SchemaError(
                    f"/images/{pred_entry.image_id}/signs/{i}",
                    "recognition evaluation requires sign_id on every prediction",
                )
            key = (pred_entry.image_id, pred.sign_id)
            if key not in known:
                excluded_unknown += 1
                continue
            if not known[key]:
                excluded_unreadable += 1
                continue
            if key in by_key:
                raise DuplicateId(
                    f"/images/{pred_entry.image_id}/signs/{i}",
                    f"multiple predictions for sign {pred.sign_id!r}",
                )
            by_key[key] = pred

    outcomes: list[SignOutcome] = []
    for entry in dataset.entries:
        for sign in entry.signs:
            if not sign.readable:
                continue
            pred = by_key.get((entry.image_id, sign.sign_id))
            pred_cues: tuple[NavCue, ...] = pred.cues if pred is not None else ()
            matching = match_cue_sets(sign.cues, pred_cues, cfg, provider)
            outcomes.append(
                sign_outcome(entry.image_id, sign.sign_id, sign.cues, pred_cues, matching)
            )

    stats = aggregated_precision_recall(outcomes)
    return RecognitionReport(
        mode=cfg.text_mode,
        symbol_threshold=cfg.symbol_threshold,
        embedder=getattr(provider, "model_id", "unknown"),
        overall=stats["overall"],
        text=stats["text"],
        symbol=stats["symbol"],
        success_rate=per_sign_success_rate(outcomes),
        accuracy_text=_kind_accuracy(outcomes, LabelKind.TEXT),
        accuracy_symbol=_kind_accuracy(outcomes, LabelKind.SYMBOL),
        signs_evaluated=len(outcomes),
        text_population=sum(
            1 for o in outcomes if o.perfect_for_kind(LabelKind.TEXT) is not None
        ),
        symbol_population=sum(
            1 for o in outcomes if o.perfect_for_kind(LabelKind.SYMBOL) is not None
        ),
        excluded_unreadable_predictions=excluded_unreadable,
        excluded_unknown_predictions=excluded_unknown,
    )


# ---------------------------------------------------------------------------
# Detection metrics (COCO AP/AR)
# ---------------------------------------------------------------------------

_ALL_BUCKET: tuple[float, float | None] = (0.0, None)


def _in_bucket(area: float, bucket: tuple[float, float | None]) -> bool:
    lo, hi = bucket
    return area >= lo and (hi is None or area < hi)


@dataclass(frozen=True)
class _EvalUnit:
    image_id: str
    gt_boxes: tuple[BBox, ...]
    preds: tuple[SignPrediction, ...]


def _eval_units(dataset: Dataset, predictions: PredictionSet) -> tuple[list[_EvalUnit], int]:
    """Pair ground truth and predictions per image, sorted by image id.

    Predictions on images absent from the ground truth stay in the pool
    (they score as false positives); the count of such predictions is
    returned for the warning summary.
    """
    pred_map = predictions.by_image()
    gt_ids = {entry.image_id for entry in dataset.entries}
    units = [
        _EvalUnit(
            image_id=entry.image_id,
            gt_boxes=tuple(sign.bbox for sign in entry.signs),
            preds=tuple(pred_map.get(entry.image_id, ())),
        )
        for entry in dataset.entries
    ]
    unknown = 0
    for image_id, preds in pred_map.items():
        if image_id not in gt_ids:
            unknown += len(preds)
            units.append(_EvalUnit(image_id=image_id, gt_boxes=(), preds=tuple(preds)))
    units.sort(key=lambda u: u.image_id)
    return units, unknown


@dataclass(frozen=True)
class _ImageDetResult:
    scores: tuple[float, ...]  # kept detections, confidence-descending
    matched: tuple[bool, ...]
    ignored: tuple[bool, ...]
    n_gt: int  # non-ignored ground truth
    n_matched_gt: int  # non-ignored ground truth that got matched


def _eval_image(
    unit: _EvalUnit,
    threshold: float,
    bucket: tuple[float, float | None],
    max_dets: int,
) -> _ImageDetResult:
    order = sorted(range(len(unit.preds)), key=lambda i: -unit.preds[i].confidence)[:max_dets]
    dets = [unit.preds[i] for i in order]
    gt_ignore = np.array(
        [0 if _in_bucket(b.area, bucket) else 1 for b in unit.gt_boxes], dtype=np.uint8
    )
    n_gt = int(len(gt_ignore) - gt_ignore.sum())
    if not dets:
        return _ImageDetResult((), (), (), n_gt, 0)
    det_arr = np.array([d.bbox.as_list() for d in dets], dtype=np.float64).reshape(-1, 4)
    gt_arr = np.array([b.as_list() for b in unit.gt_boxes], dtype=np.float64).reshape(-1, 4)
    ious = _kernels.iou_matrix(det_arr, gt_arr)
    # non-ignored ground truth is scanned first, per the COCO convention
    scan = sorted(range(len(unit.gt_boxes)), key=lambda g: (int(gt_ignore[g]), g))
    det_match, det_ignore = _kernels.greedy_assign(
        ious, np.asarray(scan, dtype=np.int64), gt_ignore, threshold
    )
    matched = []
    ignored = []
    n_matched_gt = 0
    for d, det in enumerate(dets):
        is_matched = int(det_match[d]) >= 0
        is_ignored = bool(det_ignore[d])
        if is_matched and not is_ignored:
            n_matched_gt += 1
        if not is_matched and not _in_bucket(det.bbox.area, bucket):
            is_ignored = True  # unmatched detection outside the size bucket
        matched.append(is_matched)
        ignored.append(is_ignored)
    return _ImageDetResult(
        scores=tuple(d.confidence for d in dets),
        matched=tuple(matched),
        ignored=tuple(ignored),
        n_gt=n_gt,
        n_matched_gt=n_matched_gt,
    )


def _ap_at_threshold(
    units: Sequence[_EvalUnit],
    threshold: float,
    bucket: tuple[float, float | None],
    max_dets: int,
) -> Fraction | None:
    results = [_eval_image(unit, threshold, bucket, max_dets) for unit in units]
    npig = sum(r.n_gt for r in results)
    if npig == 0:
        return None
    pooled: list[tuple[float, bool, bool]] = []
    for r in results:
        pooled.extend(zip(r.scores, r.matched, r.ignored))
    pooled.sort(key=lambda t: -t[0])  # stable: ties keep image-id order
    tp = 0
    fp = 0
    recall_curve: list[Fraction] = []
    precision_curve: list[Fraction] = []
    for _, is_matched, is_ignored in pooled:
        if is_ignored:
            continue
        if is_matched:
            tp += 1
        else:
            fp += 1
        recall_curve.append(Fraction(tp, npig))
        precision_curve.append(Fraction(tp, tp + fp))
    # monotone non-increasing precision envelope
    for i in range(len(precision_curve) - 2, -1, -1):
        if precision_curve[i] < precision_curve[i + 1]:
            precision_curve[i] = precision_curve[i + 1]
    total = Fraction(0)
    for r in _REC_THRESHOLDS:
        idx = bisect_left(recall_curve, r)
        if idx < len(precision_curve):
            total += precision_curve[idx]
    return total / len(_REC_THRESHOLDS)


def _recall_at_threshold(
    units: Sequence[_EvalUnit],
    threshold: float,
    bucket: tuple[float, float | None],
    max_dets: int,
) -> Fraction | None:
    results = [_eval_image(unit, threshold, bucket, max_dets) for unit in units]
    npig = sum(r.n_gt for r in results)
    if npig == 0:
        return None
    return Fraction(sum(r.n_matched_gt for r in results), npig)


def _as_thresholds(iou_setting: float | Sequence[float]) -> tuple[float, ...]:
    if isinstance(iou_setting, (int, float)):
        return (float(iou_setting),)
    return tuple(float(t) for t in iou_setting)


def detection_ap(
    dataset: Dataset,
    predictions: PredictionSet,
    iou_setting: float | Sequence[float],
    size_bucket: tuple[float, float | None] | None = None,
    max_dets: int = 100,
) -> Fraction | None:
    """COCO-style average precision, 101-point interpolated.

    `iou_setting` is a single threshold or a range of thresholds to
    average over. `size_bucket` filters ground truth by box area; None
    means all sizes.
    """
    units, _ = _eval_units(dataset, predictions)
    bucket = size_bucket if size_bucket is not None else _ALL_BUCKET
    values = [_ap_at_threshold(units, t, bucket, max_dets) for t in _as_thresholds(iou_setting)]
    if any(v is None for v in values):
        return None
    return sum(values, Fraction(0)) / len(values)


def detection_ar(
    dataset: Dataset,
    predictions: PredictionSet,
    iou_setting: float | Sequence[float],
    size_bucket: tuple[float, float | None] | None = None,
    max_dets: int = 100,
) -> Fraction | None:
    """COCO-style average recall over an IoU range at a detection cap."""
    units, _ = _eval_units(dataset, predictions)
    bucket = size_bucket if size_bucket is not None else _ALL_BUCKET
    values = [
        _recall_at_threshold(units, t, bucket, max_dets) for t in _as_thresholds(iou_setting)
    ]
    if any(v is None for v in values):
        return None
    return sum(values, Fraction(0)) / len(values)


@dataclass(frozen=True)
class DetectionCell:
    metric: str  # "AP" | "AR"
    label: str  # e.g. "AP@[IoU=0.50]"
    size: str  # "all" | "S" | "M" | "L"
    max_dets: int
    value: Fraction | None

    def to_json_dict(self) -> dict:
        return {
            "metric": self.metric,
            "label": self.label,
            "size": self.size,
            "max_dets": self.max_dets,
            "value": _fraction_json(self.value),
        }


@dataclass
class DetectionReport:
    cells: tuple[DetectionCell, ...]
    counts: dict
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "counts": self.counts,
            "cells": [cell.to_json_dict() for cell in self.cells],
        }


def _iou_label(metric: str, thresholds: tuple[float, ...]) -> str:
    if len(thresholds) == 1:
        return f"{metric}@[IoU={thresholds[0]:.2f}]"
    return f"{metric}@[IoU={thresholds[0]:.2f}:{thresholds[-1]:.2f}]"


def evaluate_detections(
    dataset: Dataset, predictions: PredictionSet, cfg: EvalConfig
) -> DetectionReport:
    """The full AP/AR grid: single-threshold and range AP, AR at each
    max-detections cap, and per-size-bucket AP/AR."""
    units, unknown = _eval_units(dataset, predictions)
    top_cap = max(cfg.max_dets)
    iou_range = cfg.iou_thresholds
    cells: list[DetectionCell] = []

    for t in cfg.single_iou_thresholds:
        cells.append(
            DetectionCell(
                "AP",
                _iou_label("AP", (t,)),
                "all",
                top_cap,
                detection_ap(dataset, predictions, t, None, top_cap),
            )
        )
    range_label_ap = _iou_label("AP", iou_range)
    cells.append(
        DetectionCell(
            "AP", range_label_ap, "all", top_cap,
            detection_ap(dataset, predictions, iou_range, None, top_cap),
        )
    )
    for label, bucket in zip(SIZE_LABELS, cfg.size_buckets):
        cells.append(
            DetectionCell(
                "AP", range_label_ap, label, top_cap,
                detection_ap(dataset, predictions, iou_range, bucket, top_cap),
            )
        )
    range_label_ar = _iou_label("AR", iou_range)
    for cap in cfg.max_dets:
        cells.append(
            DetectionCell(
                "AR", range_label_ar, "all", cap,
                detection_ar(dataset, predictions, iou_range, None, cap),
            )
        )
    for label, bucket in zip(SIZE_LABELS, cfg.size_buckets):
        cells.append(
            DetectionCell(
                "AR", range_label_ar, label, top_cap,
                detection_ar(dataset, predictions, iou_range, bucket, top_cap),
            )
        )
    return DetectionReport(
        cells=tuple(cells),
        counts={
            "images": len(dataset.entries),
            "ground_truth": dataset.sign_count,
            "predictions": sum(len(u.preds) for u in units),
            "unknown_image_predictions": unknown,
        },
        config=cfg.to_json_dict(),
    )


# ---------------------------------------------------------------------------
# End-to-end sign understanding
# ---------------------------------------------------------------------------


@dataclass
class E2EReport:
    """Precision_sign / Recall_sign over IoU-gated, perfectly parsed signs."""

    iou_threshold: float
    text_mode: str
    symbol_threshold: float
    perfect: int
    assigned_readable: int
    assigned_unreadable: int
    unassigned_predictions: int
    readable_gt: int
    unknown_image_predictions: int
    count_unmatched_predictions: bool

    @property
    def precision_sign(self) -> Fraction | None:
        denom = self.assigned_readable
        if self.count_unmatched_predictions:
            denom = self.assigned_readable + self.assigned_unreadable + self.unassigned_predictions
        if denom == 0:
            return None
        return Fraction(self.perfect, denom)

    @property
    def recall_sign(self) -> Fraction | None:
        if self.readable_gt == 0:
            return None
        return Fraction(self.perfect, self.readable_gt)

    def to_json_dict(self) -> dict:
        return {
            "iou_threshold": self.iou_threshold,
            "text_mode": self.text_mode,
            "symbol_threshold": self.symbol_threshold,
            "counts": {
                "perfect": self.perfect,
                "assigned_readable": self.assigned_readable,
                "assigned_unreadable": self.assigned_unreadable,
                "unassigned_predictions": self.unassigned_predictions,
                "readable_gt": self.readable_gt,
                "unknown_image_predictions": self.unknown_image_predictions,
            },
            "count_unmatched_predictions": self.count_unmatched_predictions,
            "precision_sign": _fraction_json(self.precision_sign),
            "recall_sign": _fraction_json(self.recall_sign),
        }


def e2e_sign_metrics(
    dataset: Dataset,
    predictions: PredictionSet,
    cfg: EvalConfig,
    provider: EmbeddingProvider,
    iou_threshold: float = 0.5,
    text_mode: str = "strict",
    count_unmatched: bool = False,
) -> E2EReport:
    """Match predicted boxes to ground truth at `iou_threshold`, then count
    assigned pairs whose cue matching is perfect on both sides.

    Unreadable ground-truth signs absorb predictions but are excluded
    from both numerator and denominators. By default unassigned
    predictions are excluded from the precision denominator
    (`count_unmatched` switches to counting every prediction on known
    images).
    """
    e2e_cfg = replace(cfg, text_mode=text_mode)
    pred_map = predictions.by_image()
    gt_ids = {entry.image_id for entry in dataset.entries}
    unknown = sum(len(p) for image_id, p in pred_map.items() if image_id not in gt_ids)

    perfect = 0
    assigned_readable = 0
    assigned_unreadable = 0
    unassigned = 0
    readable_gt = 0
    for entry in dataset.entries:
        readable_gt += sum(1 for sign in entry.signs if sign.readable)
        preds = list(pred_map.get(entry.image_id, ()))
        matching = match_detections([s.bbox for s in entry.signs], preds, iou_threshold)
        unassigned += len(matching.unmatched_pred)
        for pred_idx, gt_idx, _ in matching.assignments:
            sign = entry.signs[gt_idx]
            if not sign.readable:
                assigned_unreadable += 1
                continue
            assigned_readable += 1
            cue_matching = match_cue_sets(sign.cues, preds[pred_idx].cues, e2e_cfg, provider)
            if cue_matching.cardinality == len(sign.cues) == len(preds[pred_idx].cues):
                perfect += 1
    return E2EReport(
        iou_threshold=iou_threshold,
        text_mode=text_mode,
        symbol_threshold=cfg.symbol_threshold,
        perfect=perfect,
        assigned_readable=assigned_readable,
        assigned_unreadable=assigned_unreadable,
        unassigned_predictions=unassigned,
        readable_gt=readable_gt,
        unknown_image_predictions=unknown,
        count_unmatched_predictions=count_unmatched,
    )
