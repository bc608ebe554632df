"""Domain vocabulary: cues, directions, boxes, annotations and eval config.

All types are immutable after construction and safe to share across
threads. The free functions are pure.
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum

from signeval.errors import EmptyPlace, InvariantError, UnmappedDirection

DIRECTION_TABLE_VERSION = "1"


class Direction(str, Enum):
    """The eight cardinal arrow categories plus the no-direction marker."""

    STRAIGHT = "straight"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"
    STRAIGHT_LEFT = "straight-left"
    STRAIGHT_RIGHT = "straight-right"
    BACK_LEFT = "back-left"
    BACK_RIGHT = "back-right"
    NO_DIRECTION = "no-direction"


class LabelKind(str, Enum):
    """How a place appears on the sign: written text or a pictogram."""

    TEXT = "text"
    SYMBOL = "symbol"


# Fixed, versioned synonym table for backend output; canonical tokens map to
# themselves via the enum and are not repeated here.
_DIRECTION_SYNONYMS: dict[str, Direction] = {
    "forward": Direction.STRAIGHT,
    "up": Direction.STRAIGHT,
    "ahead": Direction.STRAIGHT,
    "down": Direction.BACK,
    "behind": Direction.BACK,
    "backward": Direction.BACK,
    "none": Direction.NO_DIRECTION,
    "here": Direction.NO_DIRECTION,
    "location": Direction.NO_DIRECTION,
    "upper-right": Direction.STRAIGHT_RIGHT,
    "front-right": Direction.STRAIGHT_RIGHT,
    "forward-right": Direction.STRAIGHT_RIGHT,
    "up-right": Direction.STRAIGHT_RIGHT,
    "ahead-right": Direction.STRAIGHT_RIGHT,
    "upper-left": Direction.STRAIGHT_LEFT,
    "front-left": Direction.STRAIGHT_LEFT,
    "forward-left": Direction.STRAIGHT_LEFT,
    "up-left": Direction.STRAIGHT_LEFT,
    "ahead-left": Direction.STRAIGHT_LEFT,
    "lower-right": Direction.BACK_RIGHT,
    "down-right": Direction.BACK_RIGHT,
    "behind-right": Direction.BACK_RIGHT,
    "backward-right": Direction.BACK_RIGHT,
    "lower-left": Direction.BACK_LEFT,
    "down-left": Direction.BACK_LEFT,
    "behind-left": Direction.BACK_LEFT,
    "backward-left": Direction.BACK_LEFT,
}

_CANONICAL_DIRECTIONS = {d.value: d for d in Direction}


def normalize_direction_token(raw: str) -> str:
    """Lowercase; runs of whitespace/underscores become a single hyphen."""
    token = re.sub(r"[\s_]+", "-", raw.strip().lower())
    return re.sub(r"-{2,}", "-", token).strip("-")


def canonicalize_direction(raw: str) -> Direction:
    """Map a free-text direction token onto the canonical vocabulary.

    Raises UnmappedDirection when the token, after lowercasing and
    hyphen/space normalization, is neither canonical nor in the synonym
    table.
    """
    token = normalize_direction_token(raw)
    if token in _CANONICAL_DIRECTIONS:
        return _CANONICAL_DIRECTIONS[token]
    if token in _DIRECTION_SYNONYMS:
        return _DIRECTION_SYNONYMS[token]
    raise UnmappedDirection(raw)


def normalize_place(raw: str) -> str:
    """NFC-normalize, trim, and collapse internal whitespace runs.

    Raises EmptyPlace when nothing remains.
    """
    text = " ".join(unicodedata.normalize("NFC", raw).split())
    if not text:
        raise EmptyPlace(f"place label is empty after normalization: {raw!r}")
    return text


@dataclass(frozen=True)
class NavCue:
    """One navigational cue: a place, how it is shown, and its direction.

    Construction does not validate so that malformed cues can be
    represented and reported; use `NavCue.build` for the normalizing
    constructor and `validate_cue` to check invariants.
    """

    place: str
    kind: LabelKind
    direction: Direction

    @classmethod
    def build(cls, place: str, kind: LabelKind | str, direction: Direction | str) -> "NavCue":
        """Normalizing constructor; raises on empty places and bad tokens."""
        return cls(
            place=normalize_place(place),
            kind=LabelKind(kind),
            direction=direction if isinstance(direction, Direction) else canonicalize_direction(direction),
        )


def validate_cue(cue: NavCue) -> list[str]:
    """Return every violated NavCue invariant; empty list means ok."""
    violations = []
    if not isinstance(cue.place, str) or not cue.place.strip():
        violations.append("EmptyPlace")
    else:
        normalized = " ".join(unicodedata.normalize("NFC", cue.place).split())
        if normalized != cue.place:
            violations.append("PlaceNotNormalized")
    if not isinstance(cue.kind, LabelKind):
        violations.append("BadKind")
    if not isinstance(cue.direction, Direction):
        violations.append("BadDirection")
    return violations


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in image pixel coordinates, origin top-left.

    Strictly positive area; all coordinates finite and non-negative.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
            raise InvariantError(f"bbox coordinates must be finite numbers: {coords}")
        if min(coords) < 0:
            raise InvariantError(f"bbox coordinates must be >= 0: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvariantError(f"bbox must have positive area: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class SignAnnotation:
    """Ground-truth sign: box, human-readability flag, annotated cues."""

    sign_id: str
    bbox: BBox
    readable: bool
    cues: tuple[NavCue, ...] = ()


@dataclass(frozen=True)
class SignPrediction:
    """Predicted sign: box, confidence, and (after recognition) cues.

    `sign_id` is optional and only used when predictions reference
    annotated signs directly (recognition-protocol files).
    """

    bbox: BBox
    confidence: float = 1.0
    cues: tuple[NavCue, ...] = ()
    sign_id: str | None = None

    def __post_init__(self):
        if not (isinstance(self.confidence, (int, float)) and 0.0 <= self.confidence <= 1.0):
            raise InvariantError(f"confidence must be in [0, 1]: {self.confidence!r}")


# COCO-convention size buckets in pixels^2: [0, 32^2), [32^2, 96^2), [96^2, inf)
DEFAULT_SIZE_BUCKETS: tuple[tuple[float, float | None], ...] = (
    (0.0, 1024.0),
    (1024.0, 9216.0),
    (9216.0, None),
)

SIZE_BUCKET_LABELS = ("S", "M", "L")


def _default_iou_range() -> tuple[float, ...]:
    return tuple(round(0.25 + 0.05 * i, 2) for i in range(11))


@dataclass(frozen=True)
class EvalConfig:
    """Everything the equivalence predicates and metric grids depend on."""

    text_mode: str = "strict"
    symbol_threshold: float = 0.8
    iou_thresholds: tuple[float, ...] = field(default_factory=_default_iou_range)
    single_iou_thresholds: tuple[float, ...] = (0.5, 0.75)
    max_dets: tuple[int, ...] = (1, 10, 100)
    size_buckets: tuple[tuple[float, float | None], ...] = DEFAULT_SIZE_BUCKETS

    def __post_init__(self):
        if self.text_mode not in ("strict", "relaxed"):
            raise InvariantError(f"text_mode must be 'strict' or 'relaxed': {self.text_mode!r}")
        if not (0.0 < self.symbol_threshold <= 1.0):
            raise InvariantError(f"symbol_threshold must be in (0, 1]: {self.symbol_threshold!r}")
        for seq, name in ((self.iou_thresholds, "iou_thresholds"), (self.single_iou_thresholds, "single_iou_thresholds")):
            if any(not (0.0 < t < 1.0) for t in seq):
                raise InvariantError(f"{name} must lie in (0, 1): {seq}")
            if any(a >= b for a, b in zip(seq, seq[1:])):
                raise InvariantError(f"{name} must be strictly increasing: {seq}")
        if not self.max_dets or any(not (isinstance(m, int) and m > 0) for m in self.max_dets):
            raise InvariantError(f"max_dets must be positive integers: {self.max_dets}")
        if len(self.size_buckets) != 3:
            raise InvariantError("size_buckets must be three half-open intervals")
        (lo0, hi0), (lo1, hi1), (lo2, hi2) = self.size_buckets
        if lo0 != 0.0 or hi0 != lo1 or hi1 != lo2 or hi2 is not None or not (lo0 < lo1 < lo2):
            raise InvariantError(f"size_buckets must partition [0, inf): {self.size_buckets}")

    def to_json_dict(self) -> dict:
        return {
            "text_mode": self.text_mode,
            "symbol_threshold": self.symbol_threshold,
            "iou_thresholds": list(self.iou_thresholds),
            "single_iou_thresholds": list(self.single_iou_thresholds),
            "max_dets": list(self.max_dets),
            "size_buckets": [[lo, hi] for lo, hi in self.size_buckets],
        }
