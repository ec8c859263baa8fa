"""Evaluation mathematics over masks, sample sets and probability fields."""

from metrics.bias import AreaBias, area_bias
from metrics.overlap import ged, ged_terms, iou
from metrics.sample_sets import PredictiveSampleSet, sample_full_distribution
from metrics.uncertainty import ErrorStrata, auroc_pixelwise, error_entropy_strata, pixel_entropy

__all__ = [
    "AreaBias", "area_bias", "ged", "ged_terms", "iou", "PredictiveSampleSet",
    "sample_full_distribution", "ErrorStrata", "auroc_pixelwise",
    "error_entropy_strata", "pixel_entropy",
]
