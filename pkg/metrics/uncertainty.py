"""Pixel-wise uncertainty: binary entropy, pooled AUROC and error-entropy strata."""

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
import pandas as pd
from scipy.special import entr
from scipy.stats import rankdata

from config import settings

STRATA = ("TP", "FP", "TN", "FN")


def pixel_entropy(p) -> np.ndarray:
    """-p ln p - (1 - p) ln(1 - p) in nats, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    if p.size and (np.nanmin(p) < 0.0 or np.nanmax(p) > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return entr(p) + entr(1.0 - p)


def _pool(p_fields, gt_masks):
    if len(p_fields) != len(gt_masks):
        raise ValueError(f"{len(p_fields)} probability fields for {len(gt_masks)} masks")
    scores, labels = [], []
    for p, g in zip(p_fields, gt_masks):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(getattr(g, "grid", g))
        if p.shape != g.shape:
            raise ValueError(f"probability field {p.shape} and mask {g.shape} differ in shape")
        scores.append(p.ravel())
        labels.append(g.ravel().astype(bool))
    return np.concatenate(scores), np.concatenate(labels)


def auroc_pixelwise(p_fields: Sequence, gt_masks: Sequence) -> float:
    """Rank-based AUROC over all pixels pooled across images, ties at midrank."""
    scores, labels = _pool(p_fields, gt_masks)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC is undefined when the ground truth holds a single class")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True, eq=False)
class ErrorStrata:
    """Per-pixel TP/FP/TN/FN class and predictive entropy, flattened."""

    strata: np.ndarray
    entropy: np.ndarray

    def values(self, stratum: str) -> np.ndarray:
        if stratum not in STRATA:
            raise ValueError(f"unknown stratum {stratum!r}")
        return self.entropy[self.strata == stratum]

    def sizes(self) -> Dict[str, int]:
        return {s: int((self.strata == s).sum()) for s in STRATA}

    def medians(self) -> Dict[str, float]:
        """Median entropy per stratum; NaN for an empty stratum."""
        return {s: float(np.median(v)) if v.size else float("nan")
                for s, v in ((s, self.values(s)) for s in STRATA)}

    def error_median(self) -> float:
        v = self.entropy[np.isin(self.strata, ("FP", "FN"))]
        return float(np.median(v)) if v.size else float("nan")

    def correct_median(self) -> float:
        v = self.entropy[np.isin(self.strata, ("TP", "TN"))]
        return float(np.median(v)) if v.size else float("nan")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"stratum": self.strata, "entropy": self.entropy})

    @classmethod
    def concat(cls, parts: Sequence["ErrorStrata"]) -> "ErrorStrata":
        if not parts:
            return cls(np.array([], dtype="<U2"), np.array([], dtype=np.float64))
        return cls(np.concatenate([p.strata for p in parts]),
                   np.concatenate([p.entropy for p in parts]))


def error_entropy_strata(p_field, gt) -> ErrorStrata:
    """Classify pixels at threshold 0.5 (p == 0.5 is background) against gt."""
    p = np.asarray(p_field, dtype=np.float64)
    g = np.asarray(getattr(gt, "grid", gt)).astype(bool)
    if p.shape != g.shape:
        raise ValueError(f"probability field {p.shape} and mask {g.shape} differ in shape")
    pred = p > settings.TIE_THRESHOLD
    strata = np.select([pred & g, pred & ~g, ~pred & ~g], ["TP", "FP", "TN"], "FN")
    return ErrorStrata(strata.ravel(), pixel_entropy(p).ravel())
