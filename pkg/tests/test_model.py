from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from signeval.errors import EmptyPlace, InvariantError, UnmappedDirection
from signeval.model import (
    BBox,
    Direction,
    EvalConfig,
    LabelKind,
    NavCue,
    canonicalize_direction,
    normalize_place,
    validate_cue,
)


class TestDirection:
    def test_exactly_nine_values(self):
        assert len(Direction) == 9
        assert Direction.NO_DIRECTION.value == "no-direction"
        cardinal = [d for d in Direction if d is not Direction.NO_DIRECTION]
        assert len(cardinal) == 8

    def test_canonical_identity(self):
        assert canonicalize_direction("straight-right") is Direction.STRAIGHT_RIGHT

    def test_synonyms(self):
        assert canonicalize_direction("forward") is Direction.STRAIGHT
        assert canonicalize_direction("down") is Direction.BACK
        assert canonicalize_direction("none") is Direction.NO_DIRECTION
        assert canonicalize_direction("here") is Direction.NO_DIRECTION
        assert canonicalize_direction("upper-right") is Direction.STRAIGHT_RIGHT
        assert canonicalize_direction("front-left") is Direction.STRAIGHT_LEFT
        assert canonicalize_direction("lower-left") is Direction.BACK_LEFT

    def test_whitespace_and_case_normalization(self):
        assert canonicalize_direction("  Straight  Right ") is Direction.STRAIGHT_RIGHT
        assert canonicalize_direction("NO_DIRECTION") is Direction.NO_DIRECTION

    def test_unmapped_token(self):
        with pytest.raises(UnmappedDirection) as excinfo:
            canonicalize_direction("northwest")
        assert "northwest" in str(excinfo.value)

    def test_idempotent_on_all_nine(self):
        for direction in Direction:
            assert canonicalize_direction(direction.value) is direction

    def test_synonym_table_closure(self):
        from signeval.model import _DIRECTION_SYNONYMS, normalize_direction_token

        for token, target in _DIRECTION_SYNONYMS.items():
            assert isinstance(target, Direction)
            assert normalize_direction_token(token) == token  # keys pre-normalized
            assert canonicalize_direction(token) is target
            # synonyms never shadow canonical spellings
            assert token not in {d.value for d in Direction}

    @given(st.text(max_size=20))
    def test_total_on_arbitrary_strings(self, raw):
        try:
            direction = canonicalize_direction(raw)
        except UnmappedDirection:
            return
        assert canonicalize_direction(direction.value) is direction


class TestNormalizePlace:
    def test_whitespace_rule(self):
        assert normalize_place("  Ward  63 ") == "Ward 63"

    def test_identity_on_normal_input(self):
        assert normalize_place("Tower B") == "Tower B"

    def test_empty_after_trim(self):
        with pytest.raises(EmptyPlace):
            normalize_place("   ")

    def test_nfc(self):
        # decomposed e + combining acute composes to a single code point
        assert normalize_place("Café") == "Café"

    @given(st.text(min_size=1, max_size=30))
    def test_idempotent_on_own_outputs(self, raw):
        try:
            once = normalize_place(raw)
        except EmptyPlace:
            return
        assert normalize_place(once) == once


class TestValidateCue:
    def test_valid_cue(self):
        assert validate_cue(NavCue("Lobby", LabelKind.TEXT, Direction.LEFT)) == []

    def test_empty_place(self):
        assert validate_cue(NavCue("", LabelKind.TEXT, Direction.LEFT)) == ["EmptyPlace"]

    def test_locational_symbol_cue_is_legal(self):
        assert validate_cue(NavCue("Lift", LabelKind.SYMBOL, Direction.NO_DIRECTION)) == []

    def test_unnormalized_place(self):
        assert validate_cue(NavCue("A  B", LabelKind.TEXT, Direction.LEFT)) == [
            "PlaceNotNormalized"
        ]

    def test_build_normalizes(self):
        built = NavCue.build(" Taxi  Stand ", "symbol", "Forward")
        assert built == NavCue("Taxi Stand", LabelKind.SYMBOL, Direction.STRAIGHT)


class TestBBox:
    def test_valid(self):
        box = BBox(0, 0, 10, 5)
        assert box.width == 10 and box.height == 5 and box.area == 50

    @pytest.mark.parametrize(
        "coords",
        [
            (10, 10, 5, 20),  # x_min >= x_max
            (0, 10, 10, 10),  # zero height
            (-1, 0, 10, 10),  # negative
            (0, 0, float("inf"), 10),
            (0, 0, float("nan"), 10),
        ],
    )
    def test_invalid(self, coords):
        with pytest.raises(InvariantError):
            BBox(*coords)


class TestEvalConfig:
    def test_defaults(self):
        cfg = EvalConfig()
        assert cfg.text_mode == "strict"
        assert cfg.symbol_threshold == 0.8
        assert len(cfg.iou_thresholds) == 11
        assert cfg.iou_thresholds[0] == 0.25 and cfg.iou_thresholds[-1] == 0.75
        assert cfg.max_dets == (1, 10, 100)
        assert cfg.size_buckets[0] == (0.0, 1024.0)
        assert cfg.size_buckets[2] == (9216.0, None)

    def test_rejects_bad_mode(self):
        with pytest.raises(InvariantError):
            EvalConfig(text_mode="fuzzy")

    def test_rejects_unsorted_thresholds(self):
        with pytest.raises(InvariantError):
            EvalConfig(iou_thresholds=(0.5, 0.25))

    def test_rejects_non_partition_buckets(self):
        with pytest.raises(InvariantError):
            EvalConfig(size_buckets=((0.0, 100.0), (200.0, 300.0), (300.0, None)))

    def test_rejects_out_of_range_threshold(self):
        with pytest.raises(InvariantError):
            EvalConfig(symbol_threshold=0.0)
        with pytest.raises(InvariantError):
            EvalConfig(symbol_threshold=1.5)
