"""Reading, validating and writing datasets and prediction files.

Ground-truth JSON schema (field names are bit-exact):

    { "images": [ { "image_id": str, "file": str, "width": int, "height": int,
        "signs": [ { "sign_id": str, "bbox": [x_min, y_min, x_max, y_max],
            "readable": bool,
            "cues": [ { "place": str, "kind": "text"|"symbol", "direction": str } ] } ] } ] }

Prediction files share the shape, carry "confidence" on each sign
(default 1.0) and no "readable" flag; "file"/"width"/"height" and
"sign_id" are optional there. Cue places are normalized and directions
canonicalized on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from signeval.errors import (
    DuplicateId,
    EmptyCrop,
    EmptyPlace,
    InvariantError,
    SchemaError,
    UnmappedDirection,
)
from signeval.model import (
    BBox,
    Direction,
    LabelKind,
    NavCue,
    SignAnnotation,
    SignPrediction,
    canonicalize_direction,
    normalize_place,
)


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    file: str
    width: int
    height: int
    signs: tuple[SignAnnotation, ...]


@dataclass(frozen=True)
class Dataset:
    """Validated ground truth; immutable and shareable across threads."""

    entries: tuple[ImageEntry, ...]
    source_dir: Path | None = None

    def by_image(self) -> dict[str, ImageEntry]:
        return {entry.image_id: entry for entry in self.entries}

    @property
    def sign_count(self) -> int:
        return sum(len(entry.signs) for entry in self.entries)


@dataclass(frozen=True)
class PredictionEntry:
    image_id: str
    signs: tuple[SignPrediction, ...]


@dataclass(frozen=True)
class PredictionSet:
    entries: tuple[PredictionEntry, ...]

    def by_image(self) -> dict[str, tuple[SignPrediction, ...]]:
        return {entry.image_id: entry.signs for entry in self.entries}


@dataclass(frozen=True)
class ValidationIssue:
    pointer: str
    code: str  # "schema" | "invariant" | "duplicate-id"
    message: str


@dataclass
class ValidationReport:
    violations: tuple[ValidationIssue, ...]
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "violations": [
                {"pointer": v.pointer, "code": v.code, "message": v.message}
                for v in self.violations
            ],
            "summary": self.summary,
        }


class _Collector:
    def __init__(self):
        self.issues: list[ValidationIssue] = []

    def schema(self, pointer: str, message: str):
        self.issues.append(ValidationIssue(pointer, "schema", message))

    def invariant(self, pointer: str, message: str):
        self.issues.append(ValidationIssue(pointer, "invariant", message))

    def duplicate(self, pointer: str, message: str):
        self.issues.append(ValidationIssue(pointer, "duplicate-id", message))


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _parse_cue(raw, pointer: str, collector: _Collector) -> NavCue | None:
    if not isinstance(raw, dict):
        collector.schema(pointer, "cue must be an object")
        return None
    place = raw.get("place")
    kind = raw.get("kind")
    direction = raw.get("direction")
    ok = True
    if not isinstance(place, str):
        collector.schema(f"{pointer}/place", "place must be a string")
        ok = False
    if kind not in ("text", "symbol"):
        collector.schema(f"{pointer}/kind", f"kind must be 'text' or 'symbol', got {kind!r}")
        ok = False
    if not isinstance(direction, str):
        collector.schema(f"{pointer}/direction", "direction must be a string")
        ok = False
    if not ok:
        return None
    try:
        normalized_place = normalize_place(place)
    except EmptyPlace:
        collector.invariant(f"{pointer}/place", f"place is empty after normalization: {place!r}")
        return None
    try:
        canonical = canonicalize_direction(direction)
    except UnmappedDirection:
        collector.schema(f"{pointer}/direction", f"unmapped direction token: {direction!r}")
        return None
    return NavCue(place=normalized_place, kind=LabelKind(kind), direction=canonical)


def _parse_bbox(raw, pointer: str, collector: _Collector) -> BBox | None:
    if not (isinstance(raw, list) and len(raw) == 4 and all(_is_number(c) for c in raw)):
        collector.schema(pointer, f"bbox must be a list of four finite numbers, got {raw!r}")
        return None
    try:
        return BBox(float(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]))
    except InvariantError as exc:
        collector.invariant(pointer, exc.message)
        return None


def _parse_gt_sign(raw, pointer: str, collector: _Collector) -> SignAnnotation | None:
    if not isinstance(raw, dict):
        collector.schema(pointer, "sign must be an object")
        return None
    ok = True
    sign_id = raw.get("sign_id")
    if not isinstance(sign_id, str) or not sign_id:
        collector.schema(f"{pointer}/sign_id", "sign_id must be a nonempty string")
        ok = False
    readable = raw.get("readable")
    if not isinstance(readable, bool):
        collector.schema(f"{pointer}/readable", "readable must be a boolean")
        ok = False
    bbox = _parse_bbox(raw.get("bbox"), f"{pointer}/bbox", collector)
    raw_cues = raw.get("cues")
    if not isinstance(raw_cues, list):
        collector.schema(f"{pointer}/cues", "cues must be a list")
        ok = False
        raw_cues = []
    cues = []
    for i, raw_cue in enumerate(raw_cues):
        cue = _parse_cue(raw_cue, f"{pointer}/cues/{i}", collector)
        if cue is None:
            ok = False
        else:
            cues.append(cue)
    if not ok or bbox is None:
        return None
    return SignAnnotation(sign_id=sign_id, bbox=bbox, readable=readable, cues=tuple(cues))


def _parse_pred_sign(raw, pointer: str, collector: _Collector) -> SignPrediction | None:
    if not isinstance(raw, dict):
        collector.schema(pointer, "sign must be an object")
        return None
    ok = True
    bbox = _parse_bbox(raw.get("bbox"), f"{pointer}/bbox", collector)
    confidence = raw.get("confidence", 1.0)
    if not _is_number(confidence):
        collector.schema(f"{pointer}/confidence", f"confidence must be a number, got {confidence!r}")
        ok = False
    elif not (0.0 <= confidence <= 1.0):
        collector.invariant(f"{pointer}/confidence", f"confidence must be in [0, 1]: {confidence!r}")
        ok = False
    sign_id = raw.get("sign_id")
    if sign_id is not None and not isinstance(sign_id, str):
        collector.schema(f"{pointer}/sign_id", "sign_id must be a string when present")
        ok = False
    raw_cues = raw.get("cues", [])
    if not isinstance(raw_cues, list):
        collector.schema(f"{pointer}/cues", "cues must be a list")
        ok = False
        raw_cues = []
    cues = []
    for i, raw_cue in enumerate(raw_cues):
        cue = _parse_cue(raw_cue, f"{pointer}/cues/{i}", collector)
        if cue is None:
            ok = False
        else:
            cues.append(cue)
    if not ok or bbox is None:
        return None
    return SignPrediction(
        bbox=bbox, confidence=float(confidence), cues=tuple(cues), sign_id=sign_id
    )


def _parse_ground_truth(doc, collector: _Collector, source_dir: Path | None) -> Dataset:
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        collector.schema("/images", "document must be an object with an 'images' list")
        return Dataset(entries=(), source_dir=source_dir)
    entries: list[ImageEntry] = []
    seen_image_ids: set[str] = set()
    for i, raw_image in enumerate(doc["images"]):
        pointer = f"/images/{i}"
        if not isinstance(raw_image, dict):
            collector.schema(pointer, "image entry must be an object")
            continue
        ok = True
        image_id = raw_image.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            collector.schema(f"{pointer}/image_id", "image_id must be a nonempty string")
            ok = False
        elif image_id in seen_image_ids:
            collector.duplicate(f"{pointer}/image_id", f"duplicate image_id {image_id!r}")
            ok = False
        else:
            seen_image_ids.add(image_id)
        file = raw_image.get("file")
        if not isinstance(file, str) or not file:
            collector.schema(f"{pointer}/file", "file must be a nonempty relative path")
            ok = False
        width = raw_image.get("width")
        height = raw_image.get("height")
        dims_ok = True
        for name, value in (("width", width), ("height", height)):
            if not (isinstance(value, int) and not isinstance(value, bool) and value > 0):
                collector.schema(f"{pointer}/{name}", f"{name} must be a positive integer")
                ok = False
                dims_ok = False
        raw_signs = raw_image.get("signs")
        if not isinstance(raw_signs, list):
            collector.schema(f"{pointer}/signs", "signs must be a list")
            continue
        signs: list[SignAnnotation] = []
        seen_sign_ids: set[str] = set()
        for j, raw_sign in enumerate(raw_signs):
            sign = _parse_gt_sign(raw_sign, f"{pointer}/signs/{j}", collector)
            if sign is None:
                ok = False
                continue
            if sign.sign_id in seen_sign_ids:
                collector.duplicate(
                    f"{pointer}/signs/{j}/sign_id",
                    f"duplicate sign_id {sign.sign_id!r} within image {image_id!r}",
                )
                ok = False
                continue
            seen_sign_ids.add(sign.sign_id)
            if dims_ok:
                box = sign.bbox
                if box.x_max > width or box.y_max > height:
                    collector.invariant(
                        f"{pointer}/signs/{j}/bbox",
                        f"bbox {box.as_list()} exceeds image bounds {width}x{height}",
                    )
                    ok = False
                    continue
            signs.append(sign)
        if ok:
            entries.append(
                ImageEntry(
                    image_id=image_id,
                    file=file,
                    width=width,
                    height=height,
                    signs=tuple(signs),
                )
            )
    return Dataset(entries=tuple(entries), source_dir=source_dir)


def _parse_predictions(doc, collector: _Collector) -> PredictionSet:
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        collector.schema("/images", "document must be an object with an 'images' list")
        return PredictionSet(entries=())
    entries: list[PredictionEntry] = []
    seen_image_ids: set[str] = set()
    for i, raw_image in enumerate(doc["images"]):
        pointer = f"/images/{i}"
        if not isinstance(raw_image, dict):
            collector.schema(pointer, "image entry must be an object")
            continue
        ok = True
        image_id = raw_image.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            collector.schema(f"{pointer}/image_id", "image_id must be a nonempty string")
            ok = False
        elif image_id in seen_image_ids:
            collector.duplicate(f"{pointer}/image_id", f"duplicate image_id {image_id!r}")
            ok = False
        else:
            seen_image_ids.add(image_id)
        raw_signs = raw_image.get("signs")
        if not isinstance(raw_signs, list):
            collector.schema(f"{pointer}/signs", "signs must be a list")
            continue
        signs: list[SignPrediction] = []
        for j, raw_sign in enumerate(raw_signs):
            sign = _parse_pred_sign(raw_sign, f"{pointer}/signs/{j}", collector)
            if sign is None:
                ok = False
            else:
                signs.append(sign)
        if ok:
            entries.append(PredictionEntry(image_id=image_id, signs=tuple(signs)))
    return PredictionSet(entries=tuple(entries))


def _summarize(dataset: Dataset) -> dict:
    by_kind = {kind.value: 0 for kind in LabelKind}
    by_direction = {direction.value: 0 for direction in Direction}
    signs = 0
    readable = 0
    for entry in dataset.entries:
        for sign in entry.signs:
            signs += 1
            readable += int(sign.readable)
            for cue in sign.cues:
                by_kind[cue.kind.value] += 1
                by_direction[cue.direction.value] += 1
    return {
        "images": len(dataset.entries),
        "signs": signs,
        "readable_signs": readable,
        "cues": {
            "total": sum(by_kind.values()),
            "by_kind": by_kind,
            "by_direction": by_direction,
        },
    }


def validate_document(doc, source_dir: Path | None = None) -> ValidationReport:
    """Exhaustively validate a parsed ground-truth document.

    Collects every violation instead of stopping at the first; the
    summary covers the entries that passed.
    """
    collector = _Collector()
    dataset = _parse_ground_truth(doc, collector, source_dir)
    return ValidationReport(violations=tuple(collector.issues), summary=_summarize(dataset))


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Report for an already-loaded dataset: summary counts, no violations."""
    return ValidationReport(violations=(), summary=_summarize(dataset))


def _raise_first(issues: list[ValidationIssue]):
    issue = issues[0]
    if issue.code == "duplicate-id":
        raise DuplicateId(issue.pointer, issue.message)
    if issue.code == "invariant":
        raise InvariantError(issue.message, issue.pointer)
    raise SchemaError(issue.pointer, issue.message)


def _read_json(path: str | Path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError("", f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except ValueError as exc:
        raise SchemaError("", f"{path} is not valid JSON: {exc}") from exc


def load_ground_truth(path: str | Path) -> Dataset:
    """Load and validate a ground-truth file; raises on the first issue."""
    path = Path(path)
    doc = _read_json(path)
    collector = _Collector()
    dataset = _parse_ground_truth(doc, collector, path.parent)
    if collector.issues:
        _raise_first(collector.issues)
    return dataset


def load_predictions(path: str | Path) -> PredictionSet:
    """Load and validate a prediction file; raises on the first issue."""
    doc = _read_json(path)
    collector = _Collector()
    predictions = _parse_predictions(doc, collector)
    if collector.issues:
        _raise_first(collector.issues)
    return predictions


def _num(value: float):
    # keep integral coordinates as ints so serialization stays tidy
    return int(value) if float(value).is_integer() else float(value)


def _cue_dict(cue: NavCue) -> dict:
    return {"place": cue.place, "kind": cue.kind.value, "direction": cue.direction.value}


def serialize_dataset(dataset: Dataset) -> str:
    """Canonical UTF-8 JSON form; load(serialize(d)) == d, byte-stable."""
    doc = {
        "images": [
            {
                "image_id": entry.image_id,
                "file": entry.file,
                "width": entry.width,
                "height": entry.height,
                "signs": [
                    {
                        "sign_id": sign.sign_id,
                        "bbox": [_num(c) for c in sign.bbox.as_list()],
                        "readable": sign.readable,
                        "cues": [_cue_dict(cue) for cue in sign.cues],
                    }
                    for sign in entry.signs
                ],
            }
            for entry in dataset.entries
        ]
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def serialize_predictions(predictions: PredictionSet) -> str:
    """Canonical UTF-8 JSON form of a prediction set."""
    images = []
    for entry in predictions.entries:
        signs = []
        for sign in entry.signs:
            record: dict = {"bbox": [_num(c) for c in sign.bbox.as_list()]}
            if sign.sign_id is not None:
                record["sign_id"] = sign.sign_id
            record["confidence"] = _num(sign.confidence)
            record["cues"] = [_cue_dict(cue) for cue in sign.cues]
            signs.append(record)
        images.append({"image_id": entry.image_id, "signs": signs})
    return json.dumps({"images": images}, ensure_ascii=False, indent=2) + "\n"


@dataclass(frozen=True)
class SignCrop:
    """Result of cropping a sign from its image."""

    image: Image.Image
    region: tuple[int, int, int, int]  # integer (left, top, right, bottom)
    clamped: bool


def crop_sign(image: Image.Image, bbox: BBox) -> SignCrop:
    """Extract the axis-aligned sub-image under `bbox`.

    Coordinates floor (mins) / ceil (maxes) onto the pixel grid and clamp
    to the image; `clamped` records whether clamping changed anything.
    Raises EmptyCrop when nothing remains.
    """
    left = math.floor(bbox.x_min)
    top = math.floor(bbox.y_min)
    right = math.ceil(bbox.x_max)
    bottom = math.ceil(bbox.y_max)
    clamped_region = (
        max(0, left),
        max(0, top),
        min(image.width, right),
        min(image.height, bottom),
    )
    if clamped_region[2] <= clamped_region[0] or clamped_region[3] <= clamped_region[1]:
        raise EmptyCrop(f"bbox {bbox.as_list()} leaves no area inside {image.width}x{image.height}")
    return SignCrop(
        image=image.crop(clamped_region),
        region=clamped_region,
        clamped=clamped_region != (left, top, right, bottom),
    )
