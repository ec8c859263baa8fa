"""Overlap metrics: IoU and the generalized energy distance built on 1 - IoU."""

from typing import Sequence, Tuple, Union

import numpy as np

from core.types import SegmentationMask
from metrics.sample_sets import PredictiveSampleSet

MaskLike = Union[SegmentationMask, np.ndarray]
MaskSet = Union[PredictiveSampleSet, Sequence[MaskLike], np.ndarray]


def _grid(mask: MaskLike) -> np.ndarray:
    grid = mask.grid if isinstance(mask, SegmentationMask) else np.asarray(mask)
    return grid.astype(bool)


def iou(a: MaskLike, b: MaskLike) -> float:
    """|a & b| / |a | b|; two empty masks score 1."""
    a, b = _grid(a), _grid(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _stack(masks: MaskSet, name: str) -> np.ndarray:
    if isinstance(masks, PredictiveSampleSet):
        stack = masks.masks
    elif isinstance(masks, np.ndarray):
        stack = masks
    else:
        grids = [_grid(m) for m in masks]
        if not grids:
            raise ValueError(f"{name} set is empty")
        if len({g.shape for g in grids}) > 1:
            raise ValueError(f"{name} masks do not share one shape")
        stack = np.stack(grids)
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise ValueError(f"{name} set is empty")
    return stack.reshape(stack.shape[0], -1).astype(bool)


def jaccard_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(n, m) matrix of 1 - IoU between flattened boolean masks."""
    xi, yi = x.astype(np.int64), y.astype(np.int64)
    inter = xi @ yi.T
    union = xi.sum(1)[:, None] + yi.sum(1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        d = 1.0 - inter / union
    d[union == 0] = 0.0
    return d


def ged_terms(samples: MaskSet, annotations: MaskSet) -> Tuple[float, float, float]:
    """(E[d(y, a)], E[d(y, y')], E[d(a, a')]) over all ordered pairs, self-pairs included."""
    p = _stack(samples, "sample")
    a = _stack(annotations, "annotation")
    if p.shape[1] != a.shape[1]:
        raise ValueError("sample and annotation masks differ in shape")
    return (float(jaccard_distances(p, a).mean()),
            float(jaccard_distances(p, p).mean()),
            float(jaccard_distances(a, a).mean()))


def ged(samples: MaskSet, annotations: MaskSet) -> float:
    """Squared generalized energy distance 2E[d(y,a)] - E[d(y,y')] - E[d(a,a')]."""
    cross, within_samples, within_annotations = ged_terms(samples, annotations)
    return 2.0 * cross - within_samples - within_annotations
