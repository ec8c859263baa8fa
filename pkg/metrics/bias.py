"""Signed area difference between predictions and style-0 ground truth."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from metrics.overlap import MaskSet, _stack


@dataclass(frozen=True, eq=False)
class AreaBias:
    """Pixel-count differences area(prediction) - area(gt), one per pair."""

    differences: np.ndarray

    @property
    def n(self) -> int:
        return int(self.differences.size)

    @property
    def mean(self) -> float:
        return float(self.differences.mean()) if self.n else float("nan")

    @property
    def std(self) -> float:
        # population deviation over all pairs
        return float(self.differences.std()) if self.n else float("nan")

    @classmethod
    def concat(cls, parts: Sequence["AreaBias"]) -> "AreaBias":
        if not parts:
            return cls(np.array([], dtype=np.int64))
        return cls(np.concatenate([p.differences for p in parts]))


def area_bias(predictions: MaskSet, gt0: MaskSet) -> AreaBias:
    """Differences for every (prediction, style-0 annotation) pair of one image."""
    pred = _stack(predictions, "prediction")
    gt = _stack(gt0, "ground-truth")
    if pred.shape[1] != gt.shape[1]:
        raise ValueError("predictions and ground truth differ in shape")
    pred_area = pred.sum(1).astype(np.int64)
    gt_area = gt.sum(1).astype(np.int64)
    return AreaBias((pred_area[:, None] - gt_area[None, :]).ravel())
