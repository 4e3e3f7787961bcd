"""LCS ratio, classification metrics and shape metric tests."""

import itertools
import math
import random
from functools import lru_cache

import numpy as np
import pytest

from ccstools.errors import (
    AlignmentError,
    EmptyCloud,
    EmptyGroundTruth,
    EmptyInput,
    EmptySet,
)
from ccstools.mesh import PointCloud
from ccstools.metrics import (
    ConfidenceTrack,
    PredictionRecord,
    chamfer_distance,
    command_metrics,
    jsd,
    lcs_length,
    lcs_ratio,
    mmd,
)
from ccstools.model import (
    Arc,
    CadSequence,
    Circle,
    EOS,
    Extrude,
    Line,
    SOL,
    parse_ccs,
    token_stream,
)

from conftest import fixture_text


def subsequences_oracle(g, r):
    """Longest common subsequence by exhaustive enumeration (tiny inputs)."""
    best = 0
    for k in range(len(g), 0, -1):
        for combo in itertools.combinations(range(len(g)), k):
            candidate = [g[i] for i in combo]
            it = iter(r)
            if all(tok in it for tok in candidate):
                return k
    return best


def recursive_lcs_oracle(a, b):
    """Memoized-recursion LCS, independent of the iterative table."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == 0 or j == 0:
            return 0
        if a[i - 1] == b[j - 1]:
            return go(i - 1, j - 1) + 1
        return max(go(i - 1, j), go(i, j - 1))

    return go(len(a), len(b))


class TestLcsRatio:
    def test_identity(self):
        g = ["A", "B", "C", "D"]
        report = lcs_ratio(g, list(g))
        assert report.ratio == 1.0
        assert report.lcs_length == report.ground_truth_length == 4

    def test_hand_dp_table(self):
        report = lcs_ratio(["A", "B", "C"], ["A", "C"])
        assert report.lcs_length == 2
        assert report.ratio == pytest.approx(2 / 3)
        assert subsequences_oracle(["A", "B", "C"], ["A", "C"]) == 2

    def test_empty_ground_truth(self):
        with pytest.raises(EmptyGroundTruth):
            lcs_ratio([], ["A"])

    def test_empty_reply(self):
        assert lcs_ratio(["A", "B"], []).ratio == 0.0

    def test_exhaustive_oracle_tiny(self):
        rng = random.Random(5)
        for _ in range(60):
            g = [rng.choice("abc") for _ in range(rng.randint(1, 8))]
            r = [rng.choice("abc") for _ in range(rng.randint(0, 8))]
            assert lcs_length(g, r) == subsequences_oracle(g, r)

    def test_recursive_oracle_random(self):
        rng = random.Random(17)
        for _ in range(300):
            g = [rng.randrange(6) for _ in range(rng.randint(1, 40))]
            r = [rng.randrange(6) for _ in range(rng.randint(0, 40))]
            assert lcs_length(g, r) == recursive_lcs_oracle(g, r)

    def test_monotone_under_deletion(self):
        rng = random.Random(23)
        for _ in range(50):
            g = [rng.randrange(4) for _ in range(12)]
            r = [rng.randrange(4) for _ in range(12)]
            full = lcs_length(g, r)
            for k in range(len(r)):
                shorter = r[:k] + r[k + 1:]
                assert lcs_length(g, shorter) <= full

    def test_subsequence_iff_ratio_one(self):
        g = ["x", "y"]
        r = ["a", "x", "b", "y"]
        assert lcs_ratio(g, r).ratio == 1.0
        assert lcs_ratio(r, g).ratio < 1.0

    def test_plate_fixture_ratio(self, plate_gt):
        reply = parse_ccs(fixture_text("rounded_plate_round0.ccs"))
        report = lcs_ratio(token_stream(plate_gt), token_stream(reply))
        assert report.ground_truth_length == 80
        assert report.lcs_length == 54
        assert abs(report.ratio - 0.675) < 1e-12

    def test_plate_retry_fixture_ratio(self, plate_gt):
        reply = parse_ccs(fixture_text("rounded_plate_round1.ccs"))
        report = lcs_ratio(token_stream(plate_gt), token_stream(reply))
        assert report.lcs_length == 59
        assert report.ratio == pytest.approx(0.737, abs=1e-3)


def _conf(n, s_cmd=1.0, s_args=1.0):
    return ConfidenceTrack([(s_cmd, s_args)] * n)


def record(gt_cmds, pred_cmds, conf=None):
    gt = CadSequence(gt_cmds)
    pred = CadSequence(pred_cmds)
    return PredictionRecord(gt, pred, conf or _conf(len(pred)))


EXT = Extrude(0, 128, 128, 128, 128, 128, 128, 192, 128, 7, 1)


class TestCommandMetrics:
    def test_perfect_predictions(self):
        cmds = [SOL, Line(1, 2), Arc(3, 4, 5, 1), Circle(6, 7, 8), EXT, EOS]
        report = command_metrics([record(cmds, cmds)])
        assert report.overall_accuracy == 1.0
        assert report.param_accuracy == 1.0
        for scores in report.per_type.values():
            assert scores.accuracy == 1.0
            assert scores.f1 == 1.0
            assert scores.auc == 1.0
        assert report.macro_f1 == 1.0
        assert report.macro_auc == 1.0

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            command_metrics([])

    def test_hand_confusion_micro_example(self):
        # 4 records; one Arc predicted as Line, everything else exact.
        base = [SOL, Line(1, 1), Arc(2, 2, 64, 1), EXT, EOS]
        wrong = [SOL, Line(1, 1), Line(2, 2), EXT, EOS]
        records = [record(base, base), record(base, wrong),
                   record(base, base), record(base, base)]
        report = command_metrics(records)
        # positions: 20 total, 1 mismatch
        assert report.overall_accuracy == pytest.approx(19 / 20)
        # Line: TP=8 (4 correct records x1 + wrong record x1... per record 1
        # Line in gt, predicted Line at that position in all 4) -> TP=4,
        # FP=1 (the Arc position predicted Line), FN=0.
        line = report.per_type["Line"]
        assert line.f1 == pytest.approx(2 * 4 / (2 * 4 + 1 + 0))
        # Arc: TP=3, FP=0, FN=1
        arc = report.per_type["Arc"]
        assert arc.f1 == pytest.approx(2 * 3 / (2 * 3 + 0 + 1))
        # parameter accuracy: type-matched commands all match exactly
        assert report.param_accuracy == 1.0

    def test_param_accuracy_counts_mismatches(self):
        gt = [SOL, Line(10, 20), EOS]
        pred = [SOL, Line(10, 21), EOS]
        report = command_metrics([record(gt, pred)])
        assert report.param_accuracy == pytest.approx(0.5)

    def test_truncated_prediction_padded(self):
        gt = [SOL, Line(1, 2), Line(3, 4), EXT, EOS]
        pred = [SOL, Line(1, 2)]
        report = command_metrics([record(gt, pred)])
        assert report.overall_accuracy == pytest.approx(2 / 5)

    def test_shuffled_null_auc(self):
        # every position's type shuffled uniformly, confidence uninformative
        rng = random.Random(99)
        types = [Line(1, 1), Arc(2, 2, 3, 0), Circle(4, 5, 6), EXT]
        records = []
        for _ in range(10_000):
            gt = [rng.choice(types) for _ in range(5)]
            pred = [rng.choice(types) for _ in range(5)]
            conf = ConfidenceTrack([(rng.random(), rng.random())
                                    for _ in range(len(pred))])
            records.append(record(gt, pred, conf))
        report = command_metrics(records)
        for name, scores in report.per_type.items():
            assert abs(scores.auc - 0.5) < 0.02, name

    def test_auc_invariant_under_monotone_transform(self):
        rng = random.Random(7)
        types = [Line(1, 1), Arc(2, 2, 3, 0)]
        base, squashed = [], []
        for _ in range(200):
            gt = [rng.choice(types) for _ in range(3)]
            pred = [rng.choice(types) for _ in range(3)]
            scores = [rng.random() for _ in range(3)]
            base.append(record(gt, pred, ConfidenceTrack([(s, s) for s in scores])))
            squashed.append(record(gt, pred, ConfidenceTrack(
                [(0.5 + s / 2, s) for s in scores])))
        a = command_metrics(base)
        b = command_metrics(squashed)
        for name in a.per_type:
            assert a.per_type[name].auc == pytest.approx(b.per_type[name].auc)

    def test_alignment_enforced(self):
        with pytest.raises(AlignmentError):
            PredictionRecord(CadSequence([SOL, EOS]), CadSequence([SOL, EOS]),
                             ConfidenceTrack([(1.0, 1.0)]))


def cloud(points, seed=0):
    return PointCloud(np.asarray(points, dtype=float), seed)


def brute_force_chamfer(a, b):
    pa, pb = np.asarray(a.points), np.asarray(b.points)
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1)
    return (d2.min(1).mean() + d2.min(0).mean()) * 1000.0


class TestChamfer:
    def test_identical_zero(self):
        pts = np.random.default_rng(0).random((100, 3))
        assert chamfer_distance(cloud(pts), cloud(pts.copy())) == 0.0

    def test_two_points_closed_form(self):
        a = cloud([[0.0, 0.0, 0.0]])
        b = cloud([[0.3, 0.0, 0.4]])
        d = 0.5
        assert chamfer_distance(a, b) == pytest.approx(2 * d * d * 1000.0)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = cloud(rng.random((50, 3))), cloud(rng.random((70, 3)))
        assert chamfer_distance(a, b) == chamfer_distance(b, a)

    def test_accelerated_equals_brute_force_exactly(self):
        rng = np.random.default_rng(42)
        a = cloud(rng.uniform(-1, 1, (512, 3)))
        b = cloud(rng.uniform(-1, 1, (512, 3)))
        assert chamfer_distance(a, b) == brute_force_chamfer(a, b)

    def test_empty_rejected(self):
        with pytest.raises(EmptyCloud):
            chamfer_distance(cloud(np.zeros((0, 3))), cloud([[0, 0, 0]]))


class TestMmd:
    def test_identical_sets_zero(self):
        rng = np.random.default_rng(2)
        clouds = [cloud(rng.random((20, 3))) for _ in range(3)]
        assert mmd(clouds, [cloud(c.points.copy()) for c in clouds]) == 0.0

    def test_min_semantics(self):
        ref = cloud([[0.0, 0.0, 0.0]])
        near = cloud([[0.03872983, 0.0, 0.0]])    # CD ~ 3.0
        far = cloud([[0.05, 0.0, 0.0]])           # CD = 5.0
        assert mmd([ref], [near, far]) == pytest.approx(
            chamfer_distance(ref, near))

    def test_exhaustive_oracle_8x8(self):
        rng = np.random.default_rng(3)
        refs = [cloud(rng.uniform(-1, 1, (16, 3))) for _ in range(8)]
        gens = [cloud(rng.uniform(-1, 1, (16, 3))) for _ in range(8)]
        expected = np.mean([min(brute_force_chamfer(r, g) for g in gens)
                            for r in refs])
        assert mmd(refs, gens) == pytest.approx(expected, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptySet):
            mmd([], [cloud([[0, 0, 0]])])


class TestJsd:
    def test_identical_zero(self):
        rng = np.random.default_rng(4)
        a = [cloud(rng.uniform(-1, 1, (200, 3)))]
        b = [cloud(a[0].points.copy())]
        assert jsd(a, b) == 0.0

    def test_disjoint_maximal(self):
        a = [cloud([[-0.9, -0.9, -0.9]] * 10)]
        b = [cloud([[0.9, 0.9, 0.9]] * 10)]
        assert jsd(a, b) == pytest.approx(math.log(2) * 100.0)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a = [cloud(rng.uniform(-1, 1, (100, 3))) for _ in range(2)]
        b = [cloud(rng.uniform(-1, 1, (100, 3))) for _ in range(3)]
        assert jsd(a, b) == pytest.approx(jsd(b, a), rel=1e-12)

    def test_bounded_by_ln2(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            a = [cloud(rng.uniform(-1, 1, (50, 3)))]
            b = [cloud(rng.uniform(-1, 1, (50, 3)))]
            value = jsd(a, b)
            assert 0.0 <= value <= math.log(2) * 100.0 + 1e-9

    def test_grid_res_validated(self):
        with pytest.raises(ValueError):
            jsd([cloud([[0, 0, 0]])], [cloud([[0, 0, 0]])], grid_res=1)

    def test_empty_rejected(self):
        with pytest.raises(EmptySet):
            jsd([], [cloud([[0, 0, 0]])])
