import numpy as np
import pytest

from crnn.metrics import per_class_recall, ua_recall
from crnn.numerics import Rng


class TestPerClassRecall:
    def test_hand_fixture(self):
        # class 0: 1 of 2 right; class 1: 2 of 2 right
        preds = [0, 1, 1, 1]
        labels = [0, 0, 1, 1]
        np.testing.assert_array_equal(per_class_recall(preds, labels, 2), [0.5, 1.0])

    def test_perfect(self):
        labels = [0, 1, 2, 0, 1, 2]
        np.testing.assert_array_equal(per_class_recall(labels, labels, 3),
                                      [1.0, 1.0, 1.0])

    def test_absent_class_rejected(self):
        with pytest.raises(ValueError, match="class 2"):
            per_class_recall([0, 1], [0, 1], 3)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            per_class_recall([0, 1, 0], [0, 1], 2)


class TestUaRecall:
    def test_hand_fixture(self):
        assert ua_recall([0, 1, 1, 1], [0, 0, 1, 1], 2) == pytest.approx((0.5 + 1.0) / 2)

    def test_two_of_four_and_three_of_three(self):
        labels = [0, 0, 0, 0, 1, 1, 1]
        preds = [0, 0, 1, 1, 1, 1, 1]
        assert ua_recall(preds, labels, 2) == pytest.approx(0.75)

    def test_perfect_is_one(self):
        assert ua_recall([0, 1, 0, 1], [0, 1, 0, 1], 2) == 1.0

    def test_permutation_invariance(self):
        rng = Rng(0)
        labels = [int(v) for v in rng.integers(0, 3, 60)]
        preds = [int(v) for v in rng.integers(0, 3, 60)]
        base = ua_recall(preds, labels, 3)
        perm = rng.permutation(60)
        assert ua_recall([preds[i] for i in perm], [labels[i] for i in perm], 3) == base

    def test_equal_support_equals_accuracy(self):
        # when every class has the same number of examples, UA recall is
        # plain accuracy
        labels = [0] * 10 + [1] * 10
        preds = [0] * 7 + [1] * 3 + [1] * 8 + [0] * 2
        accuracy = sum(p == t for p, t in zip(preds, labels)) / len(labels)
        assert ua_recall(preds, labels, 2) == pytest.approx(accuracy)

    def test_imbalance_weights_classes_equally(self):
        # 99 right in the big class cannot mask a missed small class
        labels = [0] * 99 + [1]
        preds = [0] * 100
        with pytest.raises(ValueError):
            # trivial: both classes must appear in labels for recall
            ua_recall(preds, [0] * 100, 2)
        assert ua_recall(preds, labels, 2) == pytest.approx(0.5)
