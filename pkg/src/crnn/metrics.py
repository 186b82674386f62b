"""Classification metrics.

The headline measure is unweighted average recall: the plain mean of the
per-class recalls, so every class counts equally no matter how many
examples it has.
"""

from __future__ import annotations

import numpy as np


def per_class_recall(predictions, labels, num_classes: int) -> np.ndarray:
    """Recall of each class: correct predictions / examples of that class.

    Raises ValueError if a class has no examples (its recall would be
    0/0) or if the two argument lengths differ.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise ValueError(
            f"predictions and labels must be equal-length vectors, "
            f"got shapes {preds.shape} and {labs.shape}")
    recalls = np.empty(num_classes)
    for c in range(num_classes):
        mask = labs == c
        total = int(mask.sum())
        if total == 0:
            raise ValueError(f"class {c} absent from labels; recall undefined")
        recalls[c] = np.count_nonzero(preds[mask] == c) / total
    return recalls


def ua_recall(predictions, labels, num_classes: int) -> float:
    """Unweighted average recall: mean of the per-class recalls."""
    return float(per_class_recall(predictions, labels, num_classes).mean())
