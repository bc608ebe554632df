"""Equivalence predicates and matching between ground truth and predictions.

Covers the cue-level match predicate (kind + direction + place
equivalence), maximum one-to-one matching of cue sets, IoU, and the
confidence-greedy assignment of predicted boxes to ground-truth boxes.
"""

from __future__ import annotations

import hashlib
import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from signeval import _kernels
from signeval.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyInput,
    ProviderUnavailable,
)
from signeval.model import BBox, EvalConfig, LabelKind, NavCue, SignPrediction

MOCK_PROVIDER_ID = "mock-bigram-1024"


class EmbeddingProvider(Protocol):
    """Deterministic text-embedding source for symbol-place equivalence."""

    model_id: str

    def embed(self, text: str) -> np.ndarray: ...


class MockBigramEmbedder:
    """Offline embedder: character-bigram counts, L2-normalized, dim 1024.

    Buckets are interned per provider instance in first-seen order, so
    distinct bigrams never collide until the 1024 slots are exhausted
    (stable-hash fallback past that). This keeps the test-facing
    guarantees exact: identical strings embed identically and strings
    sharing no bigram are exactly orthogonal. Single-character inputs
    fall back to the character itself as the sole token.
    """

    model_id = MOCK_PROVIDER_ID
    dimension = 1024

    def __init__(self):
        self._buckets: dict[str, int] = {}

    def _bucket(self, token: str) -> int:
        idx = self._buckets.get(token)
        if idx is None:
            if len(self._buckets) < self.dimension:
                idx = len(self._buckets)
            else:
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                idx = int.from_bytes(digest[:8], "big") % self.dimension
            self._buckets[token] = idx
        return idx

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyInput("cannot embed an empty string")
        lowered = text.lower()
        tokens = [lowered[i : i + 2] for i in range(len(lowered) - 1)] or [lowered]
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            vec[self._bucket(token)] += 1.0
        return vec / np.linalg.norm(vec)


class HttpEmbeddingProvider:
    """Remote embedder speaking POST {"model", "input": [...]} -> {"vectors": [...]}.

    Responses are cached per text for the lifetime of the provider, which
    enforces determinism within a run.
    """

    def __init__(self, endpoint: str, model_id: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model_id = model_id
        self.timeout = timeout
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyInput("cannot embed an empty string")
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        payload = json.dumps({"model": self.model_id, "input": [text]}).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = response.read()
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise ProviderUnavailable(f"embedding endpoint {self.endpoint}: {exc}") from exc
        try:
            vectors = json.loads(body)["vectors"]
            vec = np.asarray(vectors[0], dtype=np.float64)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embedding response: {exc}") from exc
        if vec.ndim != 1 or vec.size == 0 or not np.all(np.isfinite(vec)) or np.linalg.norm(vec) == 0.0:
            raise ProviderUnavailable("embedding endpoint returned an unusable vector")
        self._cache[text] = vec
        return vec


def make_embedding_provider(provider_id: str, endpoint: str | None = None) -> EmbeddingProvider:
    """Resolve a provider id: the mock id is built in, anything else is HTTP."""
    if provider_id == MOCK_PROVIDER_ID:
        return MockBigramEmbedder()
    if not endpoint:
        raise ConfigError(f"embedder {provider_id!r} requires an endpoint URL")
    return HttpEmbeddingProvider(endpoint, provider_id)


def embed(provider: EmbeddingProvider, text: str) -> np.ndarray:
    if not text:
        raise EmptyInput("cannot embed an empty string")
    return provider.embed(text)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (|u| |v|), clamped into [-1, 1].

    Identical vectors short-circuit to exactly 1.0 so that thresholds at
    the closed upper bound behave unambiguously.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"embedding dimensions differ: {u.shape} vs {v.shape}")
    if np.array_equal(u, v):
        return 1.0
    denom = float(np.linalg.norm(u)) * float(np.linalg.norm(v))
    if denom == 0.0:
        raise ProviderUnavailable("cosine similarity undefined for zero vectors")
    return float(min(1.0, max(-1.0, float(np.dot(u, v)) / denom)))


def text_equivalent(gt_place: str, pred_place: str, mode: str) -> bool:
    """Strict: exact string equality. Relaxed: prediction is a
    case-insensitive contiguous substring of the ground truth."""
    if mode == "strict":
        return gt_place == pred_place
    if mode == "relaxed":
        return pred_place.casefold() in gt_place.casefold()
    raise ConfigError(f"unknown text mode: {mode!r}")


def symbol_equivalent(
    gt_place: str, pred_place: str, provider: EmbeddingProvider, threshold: float
) -> bool:
    """Embedding cosine similarity at or above the configured threshold."""
    return cosine_similarity(embed(provider, gt_place), embed(provider, pred_place)) >= threshold


def cue_match_predicate(
    gt: NavCue, pred: NavCue, cfg: EvalConfig, provider: EmbeddingProvider
) -> bool:
    """Kinds equal, directions equal, and places equivalent for the kind."""
    if gt.kind != pred.kind or gt.direction != pred.direction:
        return False
    if gt.kind is LabelKind.TEXT:
        return text_equivalent(gt.place, pred.place, cfg.text_mode)
    return symbol_equivalent(gt.place, pred.place, provider, cfg.symbol_threshold)


@dataclass(frozen=True)
class CueMatching:
    """One-to-one matching between ground-truth and predicted cue lists."""

    pairs: tuple[tuple[int, int], ...]
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]

    @property
    def cardinality(self) -> int:
        return len(self.pairs)


def _matching_total(values: np.ndarray) -> tuple[int, int]:
    """(cardinality, total value) of the kernel's optimal matching."""
    match_g = _kernels.max_value_matching(values)
    card = int(np.count_nonzero(match_g >= 0))
    total = int(sum(values[g, p] for g, p in enumerate(match_g) if p >= 0))
    return card, total


def match_cue_sets(
    gt_cues: Sequence[NavCue],
    pred_cues: Sequence[NavCue],
    cfg: EvalConfig,
    provider: EmbeddingProvider,
) -> CueMatching:
    """Maximum one-to-one matching under the cue match predicate.

    In relaxed text mode, ties between maximum matchings are broken in
    favor of the largest total matched-substring length (sum of predicted
    place lengths over matched text pairs); any remaining ties resolve to
    the lexicographically smallest pair list by (gt_index, pred_index).
    """
    n_gt, n_pred = len(gt_cues), len(pred_cues)
    weights = np.zeros((n_gt, n_pred), dtype=np.int64)
    admissible = np.zeros((n_gt, n_pred), dtype=bool)
    for g, gt in enumerate(gt_cues):
        for p, pred in enumerate(pred_cues):
            if cue_match_predicate(gt, pred, cfg, provider):
                admissible[g, p] = True
                if cfg.text_mode == "relaxed" and gt.kind is LabelKind.TEXT:
                    weights[g, p] = len(pred.place)

    # Composite values make cardinality dominate the substring-length
    # objective: any matched pair is worth more than all weights combined.
    base = int(weights.sum()) + 1
    values = np.where(admissible, base + weights, -1).astype(np.int64)

    _, best_total = _matching_total(values)

    # Fix pairs greedily in ascending (gt, pred) order, keeping only
    # choices that still extend to an optimal matching.
    pairs: list[tuple[int, int]] = []
    free_gt = list(range(n_gt))
    free_pred = list(range(n_pred))
    fixed_total = 0
    for g in range(n_gt):
        chosen = -1
        for p in free_pred:
            if not admissible[g, p]:
                continue
            rest_g = [x for x in free_gt if x != g]
            rest_p = [x for x in free_pred if x != p]
            _, rest_total = _matching_total(values[np.ix_(rest_g, rest_p)])
            if fixed_total + int(values[g, p]) + rest_total == best_total:
                chosen = p
                break
        if chosen >= 0:
            pairs.append((g, chosen))
            fixed_total += int(values[g, chosen])
            free_pred.remove(chosen)
        free_gt.remove(g)

    matched_g = {g for g, _ in pairs}
    matched_p = {p for _, p in pairs}
    return CueMatching(
        pairs=tuple(pairs),
        unmatched_gt=tuple(g for g in range(n_gt) if g not in matched_g),
        unmatched_pred=tuple(p for p in range(n_pred) if p not in matched_p),
    )


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class DetectionMatching:
    """IoU-gated one-to-one assignment of predictions to ground truth."""

    assignments: tuple[tuple[int, int, float], ...]  # (pred_index, gt_index, iou)
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]


def match_detections(
    gt_boxes: Sequence[BBox],
    preds: Sequence[SignPrediction],
    iou_threshold: float,
) -> DetectionMatching:
    """Greedy COCO-style assignment: predictions in descending confidence
    (ties by input order) each take the free ground-truth box of highest
    IoU, provided IoU >= `iou_threshold`.

    Equal-IoU ties are broken by box content (coordinate order), so the
    result does not depend on how the ground truth list is permuted.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ConfigError(f"iou_threshold must be in (0, 1): {iou_threshold}")
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    gt_arr = np.array([b.as_list() for b in gt_boxes], dtype=np.float64).reshape(-1, 4)
    pred_arr = np.array([preds[i].bbox.as_list() for i in order], dtype=np.float64).reshape(-1, 4)
    ious = _kernels.iou_matrix(pred_arr, gt_arr)
    scan = sorted(range(len(gt_boxes)), key=lambda g: gt_boxes[g].as_list())
    det_match, _ = _kernels.greedy_assign(
        ious,
        np.asarray(scan, dtype=np.int64),
        np.zeros(len(gt_boxes), dtype=np.uint8),
        iou_threshold,
    )
    assignments = []
    for rank, pred_idx in enumerate(order):
        g = int(det_match[rank])
        if g >= 0:
            assignments.append((pred_idx, g, float(ious[rank, g])))
    matched_p = {p for p, _, _ in assignments}
    matched_g = {g for _, g, _ in assignments}
    return DetectionMatching(
        assignments=tuple(assignments),
        unmatched_gt=tuple(g for g in range(len(gt_boxes)) if g not in matched_g),
        unmatched_pred=tuple(p for p in range(len(preds)) if p not in matched_p),
    )
