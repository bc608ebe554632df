from __future__ import annotations

import numpy as np
import pytest

from signeval._kernels import available_backends

from oracles import brute_force_best_matching, brute_force_max_matching

BACKENDS = available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def kernels(request):
    return BACKENDS[request.param]


def random_boxes(rng, n: int) -> np.ndarray:
    mins = rng.uniform(0, 100, (n, 2))
    sizes = rng.uniform(1, 60, (n, 2))
    return np.hstack([mins, mins + sizes])


class TestIouMatrix:
    def test_identity_diagonal(self, kernels):
        rng = np.random.default_rng(1)
        boxes = random_boxes(rng, 8)
        matrix = kernels.iou_matrix(boxes, boxes)
        assert np.allclose(np.diag(matrix), 1.0)

    def test_symmetry(self, kernels):
        rng = np.random.default_rng(2)
        a, b = random_boxes(rng, 6), random_boxes(rng, 5)
        assert np.array_equal(kernels.iou_matrix(a, b), kernels.iou_matrix(b, a).T)

    def test_disjoint(self, kernels):
        a = np.array([[0.0, 0.0, 10.0, 10.0]])
        b = np.array([[20.0, 20.0, 30.0, 30.0]])
        assert kernels.iou_matrix(a, b)[0, 0] == 0.0

    def test_known_value(self, kernels):
        a = np.array([[0.0, 0.0, 10.0, 10.0]])
        b = np.array([[5.0, 0.0, 15.0, 10.0]])
        assert kernels.iou_matrix(a, b)[0, 0] == pytest.approx(1 / 3, abs=1e-12)

    def test_empty(self, kernels):
        empty = np.zeros((0, 4))
        boxes = np.array([[0.0, 0.0, 1.0, 1.0]])
        assert kernels.iou_matrix(empty, boxes).shape == (0, 1)
        assert kernels.iou_matrix(boxes, empty).shape == (1, 0)

    def test_range(self, kernels):
        rng = np.random.default_rng(3)
        matrix = kernels.iou_matrix(random_boxes(rng, 20), random_boxes(rng, 20))
        assert np.all(matrix >= 0.0) and np.all(matrix <= 1.0)


class TestGreedyAssign:
    def test_simple_match(self, kernels):
        ious = np.array([[0.9]])
        det_match, det_ignore = kernels.greedy_assign(
            ious, np.array([0], dtype=np.int64), np.zeros(1, dtype=np.uint8), 0.5
        )
        assert det_match.tolist() == [0] and det_ignore.tolist() == [0]

    def test_below_threshold(self, kernels):
        ious = np.array([[0.4]])
        det_match, _ = kernels.greedy_assign(
            ious, np.array([0], dtype=np.int64), np.zeros(1, dtype=np.uint8), 0.5
        )
        assert det_match.tolist() == [-1]

    def test_exactly_at_threshold_matches(self, kernels):
        ious = np.array([[0.5]])
        det_match, _ = kernels.greedy_assign(
            ious, np.array([0], dtype=np.int64), np.zeros(1, dtype=np.uint8), 0.5
        )
        assert det_match.tolist() == [0]

    def test_first_detection_takes_best_box(self, kernels):
        # detection 0 (higher confidence) takes the box, starving detection 1
        ious = np.array([[0.6], [0.9]])
        det_match, _ = kernels.greedy_assign(
            ious, np.array([0], dtype=np.int64), np.zeros(1, dtype=np.uint8), 0.5
        )
        assert det_match.tolist() == [0, -1]

    def test_prefers_regular_over_ignored(self, kernels):
        # gt0 regular (iou .6), gt1 ignored (iou .9): scan order regular-first
        ious = np.array([[0.6, 0.9]])
        det_match, det_ignore = kernels.greedy_assign(
            ious,
            np.array([0, 1], dtype=np.int64),
            np.array([0, 1], dtype=np.uint8),
            0.5,
        )
        assert det_match.tolist() == [0] and det_ignore.tolist() == [0]

    def test_falls_back_to_ignored(self, kernels):
        ious = np.array([[0.2, 0.9]])
        det_match, det_ignore = kernels.greedy_assign(
            ious,
            np.array([0, 1], dtype=np.int64),
            np.array([0, 1], dtype=np.uint8),
            0.5,
        )
        assert det_match.tolist() == [1] and det_ignore.tolist() == [1]

    def test_threshold_one_with_perfect_iou(self, kernels):
        # the 1 - 1e-10 cap lets IoU == 1.0 match a threshold of 1.0
        ious = np.array([[1.0]])
        det_match, _ = kernels.greedy_assign(
            ious, np.array([0], dtype=np.int64), np.zeros(1, dtype=np.uint8), 1.0
        )
        assert det_match.tolist() == [0]


class TestMaxValueMatching:
    def test_empty(self, kernels):
        assert kernels.max_value_matching(np.zeros((0, 3), dtype=np.int64)).shape == (0,)
        assert kernels.max_value_matching(np.zeros((2, 0), dtype=np.int64)).tolist() == [-1, -1]

    def test_single_edge(self, kernels):
        values = np.array([[5]], dtype=np.int64)
        assert kernels.max_value_matching(values).tolist() == [0]

    def test_inadmissible(self, kernels):
        values = np.array([[-1]], dtype=np.int64)
        assert kernels.max_value_matching(values).tolist() == [-1]

    def test_prefers_higher_weight_at_equal_cardinality(self, kernels):
        # gt0 admissible to both preds; composite values 10+0 vs 10+7
        values = np.array([[10, 17]], dtype=np.int64)
        assert kernels.max_value_matching(values).tolist() == [1]

    def test_cardinality_dominates(self, kernels):
        # taking the heavy edge alone (17) loses to two light edges (10+10)
        values = np.array([[17, 10], [-1, 10]], dtype=np.int64)
        match = kernels.max_value_matching(values)
        assert sorted(match.tolist()) == [0, 1]

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_force(self, kernels, seed):
        rng = np.random.default_rng(seed)
        n_gt = int(rng.integers(0, 7))
        n_pred = int(rng.integers(0, 7))
        admissible = rng.random((n_gt, n_pred)) < 0.45
        weights = rng.integers(0, 9, (n_gt, n_pred))
        base = int(weights.sum()) + 1
        values = np.where(admissible, base + weights, -1).astype(np.int64)
        match = kernels.max_value_matching(values)
        card = int(np.count_nonzero(match >= 0))
        total_weight = sum(
            int(weights[g, p]) for g, p in enumerate(match) if p >= 0
        )
        expect_card, expect_weight = brute_force_best_matching(
            admissible.tolist(), weights.tolist()
        )
        assert card == expect_card
        assert total_weight == expect_weight
        assert card == brute_force_max_matching(admissible.tolist())
        # one-to-one: no pred repeated
        used = [p for p in match.tolist() if p >= 0]
        assert len(used) == len(set(used))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
class TestBackendParity:
    @pytest.mark.parametrize("seed", range(20))
    def test_iou_matrix_identical(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_boxes(rng, 12), random_boxes(rng, 9)
        assert np.array_equal(
            BACKENDS["pure"].iou_matrix(a, b), BACKENDS["compiled"].iou_matrix(a, b)
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_greedy_assign_identical(self, seed):
        rng = np.random.default_rng(seed)
        n_det, n_gt = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        ious = rng.random((n_det, n_gt))
        gt_ignore = (rng.random(n_gt) < 0.3).astype(np.uint8)
        scan = np.array(
            sorted(range(n_gt), key=lambda g: (int(gt_ignore[g]), g)), dtype=np.int64
        )
        for threshold in (0.3, 0.5, 0.9):
            pure = BACKENDS["pure"].greedy_assign(ious, scan, gt_ignore, threshold)
            fast = BACKENDS["compiled"].greedy_assign(ious, scan, gt_ignore, threshold)
            assert np.array_equal(pure[0], fast[0])
            assert np.array_equal(pure[1], fast[1])

    @pytest.mark.parametrize("seed", range(20))
    def test_matching_identical(self, seed):
        rng = np.random.default_rng(seed + 100)
        n_gt, n_pred = int(rng.integers(0, 8)), int(rng.integers(0, 8))
        admissible = rng.random((n_gt, n_pred)) < 0.4
        weights = rng.integers(0, 9, (n_gt, n_pred))
        values = np.where(admissible, int(weights.sum()) + 1 + weights, -1).astype(np.int64)
        assert np.array_equal(
            BACKENDS["pure"].max_value_matching(values),
            BACKENDS["compiled"].max_value_matching(values),
        )
