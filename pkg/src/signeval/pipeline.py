"""Baseline inference pipeline: open-vocabulary detection plus VLM parsing.

Backends are generic HTTP endpoints honoring the documented wire
contracts, so the toolkit stays model-agnostic:

    detector:   POST {"model": str, "query": str, "image_b64": str}
                ->   {"boxes": [[x_min, y_min, x_max, y_max], ...], "scores": [num]?}
    recognizer: POST {"model": str, "prompt": str, "image_b64": str}
                ->   {"text": str}

Responses are cached content-addressed on (payload bytes, prompt, model),
which makes a warm-cache rerun a pure function of the dataset and config.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

from PIL import Image

from signeval import __version__
from signeval.dataset import (
    Dataset,
    PredictionEntry,
    PredictionSet,
    SignCrop,
    crop_sign,
)
from signeval.errors import (
    BackendUnavailable,
    EmptyCrop,
    EmptyPlace,
    InvariantError,
    MalformedBackendResponse,
    SchemaError,
    UnmappedDirection,
)
from signeval.model import (
    BBox,
    Direction,
    LabelKind,
    NavCue,
    SignPrediction,
    canonicalize_direction,
    normalize_direction_token,
    normalize_place,
)

PROMPT_VERSION = "1"

DETECTOR_KEY_ENV = "SIGNEVAL_DETECTOR_KEY"
RECOGNIZER_KEY_ENV = "SIGNEVAL_RECOGNIZER_KEY"

_DIRECTION_VOCAB = ", ".join(d.value for d in Direction)

_PROMPT_TEMPLATE = f"""You are shown a cropped image of a navigational sign.

Follow these steps:
1. Extract all location and place-related text from the image.
2. Extract all directional symbols (arrows) from the image.
3. Associate each location with its direction. A single arrow may apply to
   several locations; map each location to exactly one direction. Describe
   locations shown as pictograms with a short text label.
4. Output the associated directional cues as a list of tuples: a JSON array
   with one object per location.

Each object must have exactly these keys:
  "place": the location label as text
  "kind": "text" if the place appears as written text, "symbol" if it appears
          as a pictogram or icon
  "direction": one of: {_DIRECTION_VOCAB}

Use "no-direction" for purely locational cues without an arrow.
Respond with the JSON array and nothing else."""


def build_recognition_prompt() -> str:
    """The fixed, versioned recognition prompt (see PROMPT_VERSION)."""
    return _PROMPT_TEMPLATE


DROP_REASONS = ("UnmappedDirection", "EmptyPlace", "BadKind", "NotAnObject")


@dataclass(frozen=True)
class ParseDiagnostics:
    """What happened while turning a backend response into cues."""

    raw_response: str
    json_span: tuple[int, int] | None
    dropped_items: tuple[tuple[str, str], ...]  # (item rendering, reason)
    synonym_mapped: int


_FENCE_LINE = re.compile(r"^[ \t]*```[^\n]*$", re.MULTILINE)


def _first_json_array(text: str) -> tuple[list, tuple[int, int]] | None:
    decoder = json.JSONDecoder()
    start = text.find("[")
    while start != -1:
        try:
            value, end = decoder.raw_decode(text, start)
        except ValueError:
            value = None
            end = start
        if isinstance(value, list):
            return value, (start, end)
        start = text.find("[", start + 1)
    return None


def parse_recognition_response(raw: str) -> tuple[list[NavCue], ParseDiagnostics]:
    """Extract cues from a model response; never raises.

    Strips Markdown code fences, locates the first well-formed JSON array,
    and keeps every element that normalizes into a valid cue. Malformed
    elements are dropped with a reason from DROP_REASONS.
    """
    scan_text = _FENCE_LINE.sub("", raw)
    located = _first_json_array(scan_text)
    if located is None:
        return [], ParseDiagnostics(raw, None, (), 0)
    items, span = located
    cues: list[NavCue] = []
    dropped: list[tuple[str, str]] = []
    synonym_mapped = 0
    for item in items:
        rendering = json.dumps(item, ensure_ascii=False, sort_keys=True, default=str)
        if not isinstance(item, dict):
            dropped.append((rendering, "NotAnObject"))
            continue
        kind_raw = item.get("kind")
        kind_token = kind_raw.strip().lower() if isinstance(kind_raw, str) else None
        if kind_token not in ("text", "symbol"):
            dropped.append((rendering, "BadKind"))
            continue
        place_raw = item.get("place")
        try:
            place = normalize_place(place_raw if isinstance(place_raw, str) else "")
        except EmptyPlace:
            dropped.append((rendering, "EmptyPlace"))
            continue
        direction_raw = item.get("direction")
        try:
            direction = canonicalize_direction(
                direction_raw if isinstance(direction_raw, str) else ""
            )
        except UnmappedDirection:
            dropped.append((rendering, "UnmappedDirection"))
            continue
        if normalize_direction_token(direction_raw) != direction.value:
            synonym_mapped += 1
        cues.append(NavCue(place=place, kind=LabelKind(kind_token), direction=direction))
    return cues, ParseDiagnostics(raw, span, tuple(dropped), synonym_mapped)


def cache_key(image_bytes: bytes, prompt: str, model_id: str) -> str:
    """SHA-256 over the length-prefixed concatenation of the inputs."""
    hasher = hashlib.sha256()
    for part in (image_bytes, prompt.encode("utf-8"), model_id.encode("utf-8")):
        hasher.update(len(part).to_bytes(8, "big"))
        hasher.update(part)
    return hasher.hexdigest()


class ResponseCache:
    """Directory of verbatim backend responses, one file per cache key.

    Inserts are write-temp-then-rename, so concurrent readers never see
    partial content.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> str | None:
        path = self.directory / key
        try:
            text = path.read_text(encoding="utf-8")
        except OSError:
            self.misses += 1
            return None
        self.hits += 1
        return text

    def put(self, key: str, value: str) -> None:
        path = self.directory / key
        tmp = path.with_name(f".{key}.{os.getpid()}.tmp")
        tmp.write_text(value, encoding="utf-8")
        tmp.replace(path)


class DetectorBackend(Protocol):
    model_id: str
    query: str

    def detect_raw(self, image_b64: str) -> str:
        """Return the endpoint's verbatim JSON response body."""
        ...


class RecognizerBackend(Protocol):
    model_id: str

    def generate_raw(self, prompt: str, image_b64: str) -> str:
        """Return the endpoint's verbatim text response."""
        ...


def _post_json(url: str, payload: dict, timeout: float, api_key: str | None) -> str:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    request = urllib.request.Request(
        url, data=json.dumps(payload).encode("utf-8"), headers=headers
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.read().decode("utf-8")
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise BackendUnavailable(f"{url}: {exc}") from exc


def with_retries(
    call: Callable[[], str],
    attempts: int = 3,
    base_delay: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Run `call`, retrying transient failures with exponential backoff."""
    last: BackendUnavailable | None = None
    for attempt in range(attempts):
        try:
            return call()
        except BackendUnavailable as exc:
            last = exc
            if attempt + 1 < attempts and base_delay > 0:
                sleep(base_delay * (2**attempt))
    raise BackendUnavailable(f"gave up after {attempts} attempts: {last}")


@dataclass
class HttpDetectorBackend:
    endpoint: str
    model_id: str
    query: str = "navigational signs"
    timeout: float = 60.0

    def detect_raw(self, image_b64: str) -> str:
        return _post_json(
            self.endpoint,
            {"model": self.model_id, "query": self.query, "image_b64": image_b64},
            self.timeout,
            os.environ.get(DETECTOR_KEY_ENV),
        )


@dataclass
class HttpRecognizerBackend:
    endpoint: str
    model_id: str
    # deterministic decoding by default, for endpoints that honor it
    temperature: float | None = 0.0
    timeout: float = 120.0

    def generate_raw(self, prompt: str, image_b64: str) -> str:
        payload = {"model": self.model_id, "prompt": prompt, "image_b64": image_b64}
        if self.temperature is not None:
            payload["temperature"] = self.temperature
        return _post_json(
            self.endpoint,
            payload,
            self.timeout,
            os.environ.get(RECOGNIZER_KEY_ENV),
        )


def _parse_detector_response(raw: str, image_width: int, image_height: int):
    """Boxes + confidences from a detector response, clamped to the image.

    Returns (predictions sorted confidence-descending, clamp warnings).
    """
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise MalformedBackendResponse(f"detector returned non-JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("boxes"), list):
        raise MalformedBackendResponse("detector response must contain a 'boxes' list")
    boxes = doc["boxes"]
    scores = doc.get("scores")
    if scores is None:
        scores = [1.0] * len(boxes)
    if not isinstance(scores, list) or len(scores) != len(boxes):
        raise MalformedBackendResponse("'scores' must parallel 'boxes'")
    preds: list[SignPrediction] = []
    warnings: list[str] = []
    for i, (raw_box, score) in enumerate(zip(boxes, scores)):
        if not (isinstance(raw_box, list) and len(raw_box) == 4):
            raise MalformedBackendResponse(f"box {i} must be a list of four numbers")
        try:
            score = float(score)
        except (TypeError, ValueError) as exc:
            raise MalformedBackendResponse(f"score {i} is not a number") from exc
        if not (0.0 <= score <= 1.0):
            raise MalformedBackendResponse(f"score {i} outside [0, 1]: {score}")
        try:
            x1, y1, x2, y2 = (float(c) for c in raw_box)
        except (TypeError, ValueError) as exc:
            raise MalformedBackendResponse(f"box {i} has non-numeric coordinates") from exc
        cx1 = min(max(x1, 0.0), float(image_width))
        cy1 = min(max(y1, 0.0), float(image_height))
        cx2 = min(max(x2, 0.0), float(image_width))
        cy2 = min(max(y2, 0.0), float(image_height))
        if (cx1, cy1, cx2, cy2) != (x1, y1, x2, y2):
            warnings.append(f"box {i} clamped to image bounds")
        if cx2 <= cx1 or cy2 <= cy1:
            warnings.append(f"box {i} dropped: empty after clamping")
            continue
        try:
            preds.append(SignPrediction(bbox=BBox(cx1, cy1, cx2, cy2), confidence=score))
        except InvariantError as exc:
            raise MalformedBackendResponse(f"box {i}: {exc}") from exc
    preds.sort(key=lambda p: -p.confidence)  # stable: input order on ties
    return preds, warnings


def detect(backend: DetectorBackend, image: Image.Image):
    """Query a detector for one image; returns clamped, ranked predictions."""
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    b64 = base64.b64encode(buffer.getvalue()).decode("ascii")
    raw = backend.detect_raw(b64)
    preds, _ = _parse_detector_response(raw, image.width, image.height)
    return preds


def recognize(
    backend: RecognizerBackend,
    crop_png: bytes,
    prompt: str,
    attempts: int = 3,
    base_delay: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Query the recognizer for one crop; returns the verbatim text response."""
    if not crop_png:
        raise EmptyCrop("cannot recognize an empty crop")
    b64 = base64.b64encode(crop_png).decode("ascii")
    raw = with_retries(
        lambda: backend.generate_raw(prompt, b64),
        attempts=attempts,
        base_delay=base_delay,
        sleep=sleep,
    )
    try:
        doc = json.loads(raw)
        text = doc["text"]
    except (ValueError, TypeError, KeyError) as exc:
        raise MalformedBackendResponse(f"recognizer response must be JSON with 'text': {exc}") from exc
    if not isinstance(text, str):
        raise MalformedBackendResponse("recognizer 'text' must be a string")
    return text


@dataclass
class RunOutput:
    predictions: PredictionSet
    manifest: dict
    cache_hits: int
    cache_misses: int


def _png_bytes(image: Image.Image) -> bytes:
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


@dataclass
class _SignTask:
    rank: int
    bbox: BBox
    confidence: float
    sign_id: str | None
    crop: SignCrop | None
    error: str | None = None


def run_end_to_end(
    dataset: Dataset,
    detector: DetectorBackend | None,
    recognizer: RecognizerBackend,
    cache_dir: str | Path | None = None,
    parallelism: int = 4,
    confidence_threshold: float | None = None,
    from_gt_boxes: bool = False,
    retry_base_delay: float = 0.5,
) -> RunOutput:
    """Detect, crop and recognize every sign in the dataset.

    With `from_gt_boxes` the detector is skipped and the readable
    ground-truth boxes are recognized directly (the recognition-protocol
    run); predictions then carry sign ids.

    Backend failures degrade: the affected image or sign is kept with
    empty cues plus a diagnostic record. Only dataset I/O aborts the run.
    """
    if dataset.source_dir is None:
        raise SchemaError("", "dataset has no source directory for image files")
    if detector is None and not from_gt_boxes:
        raise SchemaError("", "a detector backend is required unless from_gt_boxes is set")
    cache = ResponseCache(cache_dir) if cache_dir is not None else None
    prompt = build_recognition_prompt()
    diagnostics: list[dict] = []
    calls: list[dict] = []
    entries: list[PredictionEntry] = []
    dropped_items = 0
    synonym_mapped = 0

    def cached_call(key: str, image_id: str, kind: str, invoke: Callable[[], str]) -> str:
        calls.append({"image_id": image_id, "kind": kind, "cache_key": key})
        if cache is not None:
            hit = cache.get(key)
            if hit is not None:
                return hit
        raw = invoke()
        if cache is not None:
            cache.put(key, raw)
        return raw

    for entry in sorted(dataset.entries, key=lambda e: e.image_id):
        image_path = dataset.source_dir / entry.file
        try:
            with Image.open(image_path) as handle:
                image = handle.convert("RGB")
        except OSError as exc:
            raise SchemaError(f"/images/{entry.image_id}/file", f"cannot read image: {exc}")
        image_bytes = image_path.read_bytes()

        tasks: list[_SignTask] = []
        if from_gt_boxes:
            for sign in entry.signs:
                if not sign.readable:
                    continue
                tasks.append(
                    _SignTask(
                        rank=len(tasks),
                        bbox=sign.bbox,
                        confidence=1.0,
                        sign_id=sign.sign_id,
                        crop=crop_sign(image, sign.bbox),
                    )
                )
        else:
            key = cache_key(image_bytes, detector.query, detector.model_id)
            try:
                raw = cached_call(
                    key,
                    entry.image_id,
                    "detect",
                    lambda: with_retries(
                        lambda: detector.detect_raw(
                            base64.b64encode(image_bytes).decode("ascii")
                        ),
                        base_delay=retry_base_delay,
                    ),
                )
                boxes, warnings = _parse_detector_response(raw, entry.width, entry.height)
                for message in warnings:
                    diagnostics.append(
                        {"image_id": entry.image_id, "stage": "detect", "warning": message}
                    )
            except (BackendUnavailable, MalformedBackendResponse) as exc:
                diagnostics.append(
                    {
                        "image_id": entry.image_id,
                        "stage": "detect",
                        "error": type(exc).__name__,
                        "message": str(exc),
                    }
                )
                entries.append(PredictionEntry(image_id=entry.image_id, signs=()))
                continue
            if confidence_threshold is not None:
                boxes = [p for p in boxes if p.confidence >= confidence_threshold]
            for rank, pred in enumerate(boxes):
                try:
                    crop = crop_sign(image, pred.bbox)
                except EmptyCrop:
                    crop = None
                tasks.append(
                    _SignTask(
                        rank=rank,
                        bbox=pred.bbox,
                        confidence=pred.confidence,
                        sign_id=None,
                        crop=crop,
                    )
                )

        def recognize_task(task: _SignTask) -> tuple[_SignTask, str | None]:
            if task.crop is None:
                return task, None
            png = _png_bytes(task.crop.image)
            key = cache_key(png, prompt, recognizer.model_id)
            try:
                raw = cached_call(
                    key,
                    entry.image_id,
                    "recognize",
                    lambda: recognize(
                        recognizer, png, prompt, base_delay=retry_base_delay
                    ),
                )
                return task, raw
            except (BackendUnavailable, MalformedBackendResponse) as exc:
                task.error = f"{type(exc).__name__}: {exc}"
                return task, None

        if parallelism > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                responses = list(pool.map(recognize_task, tasks))
        else:
            responses = [recognize_task(task) for task in tasks]
        responses.sort(key=lambda pair: pair[0].rank)

        signs: list[SignPrediction] = []
        for task, raw in responses:
            cues: tuple[NavCue, ...] = ()
            if raw is not None:
                parsed, diag = parse_recognition_response(raw)
                cues = tuple(parsed)
                dropped_items += len(diag.dropped_items)
                synonym_mapped += diag.synonym_mapped
                for item, reason in diag.dropped_items:
                    diagnostics.append(
                        {
                            "image_id": entry.image_id,
                            "stage": "parse",
                            "dropped": item,
                            "reason": reason,
                        }
                    )
            elif task.error is not None:
                diagnostics.append(
                    {
                        "image_id": entry.image_id,
                        "stage": "recognize",
                        "sign_rank": task.rank,
                        "error": task.error,
                    }
                )
            signs.append(
                SignPrediction(
                    bbox=task.bbox,
                    confidence=task.confidence,
                    cues=cues,
                    sign_id=task.sign_id,
                )
            )
        entries.append(PredictionEntry(image_id=entry.image_id, signs=tuple(signs)))

    # calls were appended per image in rank order inside threads; re-sort
    # deterministically for the manifest
    calls.sort(key=lambda c: (c["image_id"], c["kind"], c["cache_key"]))
    manifest = {
        "tool": "signeval",
        "tool_version": __version__,
        "prompt_version": PROMPT_VERSION,
        "mode": "gt-boxes" if from_gt_boxes else "detect",
        "detector": (
            None
            if detector is None or from_gt_boxes
            else {"model": detector.model_id, "query": detector.query}
        ),
        "recognizer": {
            "model": recognizer.model_id,
            "temperature": getattr(recognizer, "temperature", None),
        },
        "config": {
            "parallelism": parallelism,
            "confidence_threshold": confidence_threshold,
        },
        "dataset": {
            "images": len(dataset.entries),
            "image_ids": sorted(entry.image_id for entry in dataset.entries),
        },
        "calls": calls,
        "diagnostics": {
            "records": sorted(
                diagnostics, key=lambda d: json.dumps(d, sort_keys=True)
            ),
            "dropped_cue_items": dropped_items,
            "synonym_mapped": synonym_mapped,
        },
    }
    cache_hits = cache.hits if cache is not None else 0
    cache_misses = cache.misses if cache is not None else 0
    return RunOutput(
        predictions=PredictionSet(entries=tuple(entries)),
        manifest=manifest,
        cache_hits=cache_hits,
        cache_misses=cache_misses,
    )
