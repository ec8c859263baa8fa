"""Metric tables for a trained run.

Conditioned models are conditioned on the style they are scored against;
every metric cell sees one style only. Rows follow the long layout
run_id, model, tag, style, metric, value, std, n.
"""

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import settings
from core.types import AnnotatedSample, DatasetSplit, split_digest, styles_present
from harness.experiment import RunRecord
from harness.training import prepare_data
from metrics.bias import AreaBias, area_bias
from metrics.overlap import ged, iou
from metrics.sample_sets import resolve_style_probs, sample_full_distribution
from metrics.uncertainty import STRATA, ErrorStrata, auroc_pixelwise, error_entropy_strata
from models.base_model import SegmentationModel

logger = logging.getLogger(__name__)

METRICS_CSV = "metrics.csv"
METRICS_JSON = "metrics.json"
AREA_BIAS_VALUES = "values/area_bias.parquet"
STRATA_VALUES = "values/entropy_strata.parquet"
EXAMPLES_VALUES = "values/examples.npz"
AUROC_POOLING = "micro: all test pixels pooled"


@dataclass
class EvaluationResult:
    rows: List[Dict] = field(default_factory=list)
    area_bias: AreaBias = field(default_factory=lambda: AreaBias.concat([]))
    area_bias_images: List[str] = field(default_factory=list)
    strata: ErrorStrata = field(default_factory=lambda: ErrorStrata.concat([]))
    strata_images: List[str] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["style", "metric", "value", "std", "n"])

    def value(self, metric: str, style) -> float:
        for row in self.rows:
            if row["metric"] == metric and str(row["style"]) == str(style):
                return row["value"]
        raise KeyError(f"no {metric} row for style {style}")


def _row(style, metric: str, values: Sequence[float], std: Optional[float] = None) -> Dict:
    values = np.asarray(values, dtype=np.float64)
    return {"style": str(style), "metric": metric,
            "value": float(values.mean()) if values.size else float("nan"),
            "std": (float(values.std()) if values.size else float("nan")) if std is None else std,
            "n": int(values.size)}


def _image_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate_model(model, test_samples: Sequence[AnnotatedSample], num_styles: int,
                   n_samples: int = settings.EVAL_SAMPLES,
                   style_probs: Union[str, Sequence[float]] = "uniform",
                   seed: int = 0,
                   styles: Optional[Sequence[int]] = None,
                   train_samples: Optional[Sequence[AnnotatedSample]] = None) -> EvaluationResult:
    """Every metric of the evaluation suite for one model on one test set.

    `model` needs conditioned, num_styles, mean_prediction,
    sample_with_probabilities and sample_predictions. Area bias and error
    strata are always measured against style-0 annotations.

    Args:
        model: Trained model, or any object with the methods above
        test_samples: Samples to evaluate on
        num_styles: Number of annotation styles the model knows
        n_samples: Predictive samples drawn per image and style
        style_probs: "uniform", "train" or explicit style weights for the mixture GED
        seed: Seed of every sampling stream
        styles: Styles to report; all of 0..num_styles-1 by default
        train_samples: Training samples, needed for style_probs="train"

    Returns:
        EvaluationResult with the metric rows, area-bias values and error strata

    Raises:
        ValueError: If a requested style has no annotation in the test samples
    """
    present = styles_present(test_samples)
    styles = list(range(num_styles)) if styles is None else list(styles)
    absent = [s for s in styles if s not in present]
    if absent:
        raise ValueError(f"style(s) {absent} absent from the test split (present: {present})")
    result = EvaluationResult()
    show = sys.stderr.isatty()

    for style in styles:
        cond = style if model.conditioned else None
        ious, geds, fields_, gts = [], [], [], []
        biases, strata = [], []
        images = [(i, s) for i, s in enumerate(test_samples) if s.masks_of_style(style)]
        for i, sample in tqdm(images, desc=f"style {style}", disable=not show):
            targets = sample.masks_of_style(style)
            mean = model.mean_prediction(sample.image, cond)
            ious.extend(iou(mean, t) for t in targets)
            drawn, prob = model.sample_with_probabilities(
                sample.image, cond, n_samples, seed=_image_seed(seed, i))
            geds.append(ged(drawn, targets))
            for t in targets:
                fields_.append(prob)
                gts.append(t.grid)
            if style == 0:
                biases.append(area_bias(drawn, targets))
                result.area_bias_images.extend([sample.sample_id] * (drawn.n * len(targets)))
                for t in targets:
                    part = error_entropy_strata(prob, t)
                    strata.append(part)
                    result.strata_images.extend([sample.sample_id] * part.strata.size)

        result.rows.append(_row(style, "iou", ious))
        result.rows.append(_row(style, "ged", geds))
        gt_all = np.concatenate([g.ravel() for g in gts])
        if gt_all.min() == gt_all.max():
            logger.warning("style %d: single-class ground truth, AUROC undefined", style)
            auroc = float("nan")
        else:
            auroc = auroc_pixelwise(fields_, gts)
        result.rows.append({"style": str(style), "metric": "auroc", "value": auroc,
                            "std": float("nan"), "n": int(gt_all.size)})
        if style == 0:
            result.area_bias = AreaBias.concat(biases)
            result.rows.append({"style": "0", "metric": "area_bias", "value": result.area_bias.mean,
                                "std": result.area_bias.std, "n": result.area_bias.n})
            result.strata = ErrorStrata.concat(strata)
            medians = result.strata.medians()
            sizes = result.strata.sizes()
            for name in STRATA:
                result.rows.append({"style": "0", "metric": f"entropy_median_{name}",
                                    "value": medians[name], "std": float("nan"),
                                    "n": sizes[name]})
            result.rows.append({"style": "0", "metric": "entropy_median_error",
                                "value": result.strata.error_median(), "std": float("nan"),
                                "n": sizes["FP"] + sizes["FN"]})
            result.rows.append({"style": "0", "metric": "entropy_median_correct",
                                "value": result.strata.correct_median(), "std": float("nan"),
                                "n": sizes["TP"] + sizes["TN"]})

    # GED against every annotation of an image, styles drawn from style_probs
    probs = None
    if model.conditioned:
        probs = resolve_style_probs(style_probs, model.num_styles, train_samples)
    pooled = []
    for i, sample in enumerate(tqdm(test_samples, desc="pooled", disable=not show)):
        drawn = sample_full_distribution(model, sample.image, n_samples, probs,
                                         seed=_image_seed(seed, i))
        pooled.append(ged(drawn, [m for m, _ in sample.annotations]))
    result.rows.append(_row("pooled", "ged", pooled))
    return result


def write_results(result: EvaluationResult, out_dir: Union[str, Path], run_id: str,
                  model_id: str, tag: str) -> Dict[str, str]:
    """metrics.csv, metrics.json and the per-value parquet files."""
    out_dir = Path(out_dir)
    (out_dir / "values").mkdir(parents=True, exist_ok=True)
    frame = result.frame()
    frame.insert(0, "tag", tag)
    frame.insert(0, "model", model_id)
    frame.insert(0, "run_id", run_id)
    frame.to_csv(out_dir / METRICS_CSV, index=False)

    summary: Dict = {"run_id": run_id, "model": model_id, "tag": tag,
                     "auroc_pooling": AUROC_POOLING, "entropy_unit": "nats", "metrics": {}}
    for row in result.rows:
        cell = {k: (None if isinstance(v, float) and np.isnan(v) else v)
                for k, v in row.items() if k in ("value", "std", "n")}
        summary["metrics"].setdefault(row["metric"], {})[row["style"]] = cell
    (out_dir / METRICS_JSON).write_text(json.dumps(summary, indent=2))

    pd.DataFrame({"run_id": run_id, "tag": tag, "image": result.area_bias_images,
                  "difference": result.area_bias.differences}).to_parquet(
        out_dir / AREA_BIAS_VALUES, index=False)
    strata = result.strata.to_frame()
    strata.insert(0, "image", result.strata_images)
    strata.insert(0, "tag", tag)
    strata.insert(0, "run_id", run_id)
    strata.to_parquet(out_dir / STRATA_VALUES, index=False)
    return {"csv": METRICS_CSV, "json": METRICS_JSON,
            "area_bias": AREA_BIAS_VALUES, "entropy_strata": STRATA_VALUES}


def prediction_styles(model) -> List[Optional[int]]:
    return list(range(model.num_styles)) if model.conditioned else [None]


def write_examples(model, test_samples: Sequence[AnnotatedSample], out_dir: Union[str, Path],
                   n_images: int = settings.EXAMPLE_IMAGES) -> str:
    """Images, annotations and per-style mean predictions of the first test images.

    Annotation stacks are padded to the largest count; padding has style -1.
    """
    picked = list(test_samples)[:n_images]
    if not picked:
        raise ValueError("no test samples to draw examples from")
    styles = prediction_styles(model)
    width = max(len(s.annotations) for s in picked)
    annotations = np.zeros((len(picked), width, *picked[0].shape), dtype=np.uint8)
    annotation_styles = np.full((len(picked), width), -1, dtype=np.int64)
    for i, sample in enumerate(picked):
        for j, (mask, style) in enumerate(sample.annotations):
            annotations[i, j] = mask.grid
            annotation_styles[i, j] = style.id
    predictions = np.stack([np.stack([model.mean_prediction(s.image, style) for style in styles])
                            for s in picked]).astype(np.uint8)
    path = Path(out_dir) / EXAMPLES_VALUES
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        path, images=np.stack([s.image for s in picked]), annotations=annotations,
        annotation_styles=annotation_styles, predictions=predictions,
        prediction_labels=np.array(["unconditioned" if s is None else f"style {s}"
                                    for s in styles]),
        sample_ids=np.array([s.sample_id for s in picked]))
    return EXAMPLES_VALUES


def read_examples(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"examples file not found: {path}")
    with np.load(path) as blob:
        return {k: blob[k] for k in blob.files}


def evaluate(run_dir: Union[str, Path], test_split: Optional[DatasetSplit] = None,
             n_samples: Optional[int] = None,
             map_location: str = "cpu") -> EvaluationResult:
    """Load the best checkpoint of a run and write its metric tables into the run dir."""
    run_dir = Path(run_dir)
    record = RunRecord.load(run_dir)
    config = record.experiment()
    if test_split is None:
        _, _, test_split = prepare_data(config)
    if split_digest(test_split.test) != record.split_digests.get("test"):
        raise ValueError(f"{run_dir}: test split differs from the one recorded at training time")

    expected = config.model_settings(record.num_styles, test_split.test[0].channels)
    model = SegmentationModel.load_checkpoint(run_dir / record.checkpoints["best"],
                                              expected=expected, map_location=map_location)
    model.eval()
    ev = config.evaluation
    logger.info("evaluating %s on %d test images", record.tag, len(test_split.test))
    result = evaluate_model(model, test_split.test, record.num_styles,
                            n_samples=n_samples or ev.samples, style_probs=ev.style_probs,
                            seed=ev.seed,
                            train_samples=test_split.train)
    record.metric_files = write_results(result, run_dir, record.run_id,
                                        model.registry_id, record.tag)
    record.metric_files["examples"] = write_examples(model, test_split.test, run_dir)
    record.save(run_dir)
    return result
